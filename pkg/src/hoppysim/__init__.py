"""Hybrid flight/stance simulator and hopping controller for a gantry-mounted leg."""

from hoppysim.actuation import MotorCommand, OperatingPolygon, operating_polygon
from hoppysim.config import load_config, parse_config, save_config, serialize_config
from hoppysim.control import Controller, ControllerConfig, SensorReading
from hoppysim.errors import (
    ConstraintDrift,
    NumericalFailure,
    ParseError,
    SimulationError,
    ValidationError,
)
from hoppysim.model import (
    ContactFrame,
    LinkInertia,
    Phase,
    RobotModel,
    SystemState,
    default_model,
    spring_torque,
)
from hoppysim.sim import SimConfig, Simulator, SimTrace, simulate, steady_state_speed

__all__ = [
    "ConstraintDrift",
    "ContactFrame",
    "Controller",
    "ControllerConfig",
    "LinkInertia",
    "MotorCommand",
    "NumericalFailure",
    "OperatingPolygon",
    "ParseError",
    "Phase",
    "RobotModel",
    "SensorReading",
    "SimConfig",
    "SimTrace",
    "SimulationError",
    "Simulator",
    "SystemState",
    "ValidationError",
    "default_model",
    "load_config",
    "operating_polygon",
    "parse_config",
    "save_config",
    "serialize_config",
    "simulate",
    "spring_torque",
    "steady_state_speed",
]

__version__ = "0.1.0"
