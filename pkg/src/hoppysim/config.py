"""INI configuration: load, validate, serialize.

Layout::

    [model]        scalar RobotModel fields (lengths, motor, spring, limits)
    [base] [post] [boom] [thigh] [shank]
                   mass, com (3 values), inertia (9 values, row-major)
    [controller]   ControllerConfig fields; vectors are comma separated
    [sim]          SimConfig fields

Every key is optional; anything left out keeps the built-in default.  Errors
name the offending key as ``section.key``.
"""

from __future__ import annotations

import configparser
import dataclasses
from importlib import resources

import numpy as np

from hoppysim.control import ControllerConfig
from hoppysim.errors import ParseError, ValidationError
from hoppysim.model import LINK_NAMES, LinkInertia, RobotModel
from hoppysim.sim import SimConfig

SECTIONS = ("model",) + LINK_NAMES + ("controller", "sim")
_SCALAR_MODEL = tuple(f.name for f in dataclasses.fields(RobotModel) if f.name not in LINK_NAMES)


def default_config_path():
    return resources.files("hoppysim") / "data" / "default.ini"


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return value
    flat = np.asarray(value, dtype=float).ravel()
    return ", ".join(repr(float(v)) for v in flat)


def _line_of(text, section, key):
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return n
    return None


def _convert(text, section, key, raw, kind):
    where = f"{section}.{key}"
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is str:
            return raw.strip()
        if kind is float:
            return float(raw)
        return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ParseError(str(exc), line=_line_of(text, section, key), key=where) from None


def _kind(default):
    if isinstance(default, bool):
        return bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if isinstance(default, str):
        return str
    if isinstance(default, tuple):
        return tuple
    raise TypeError(type(default))


def _section_values(parser, text, section, defaults):
    out = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser.items(section):
        if key not in defaults:
            raise ParseError(f"unknown key in [{section}]", line=_line_of(text, section, key),
                             key=f"{section}.{key}")
        out[key] = _convert(text, section, key, raw, _kind(defaults[key]))
    return out


def _wrap(section, build):
    try:
        return build()
    except ValidationError as exc:
        key = exc.key if exc.key.split(".")[0] in LINK_NAMES else f"{section}.{exc.key}"
        raise ValidationError(key, str(exc).split(": ", 1)[-1]) from None


def parse_config(text, origin="<string>"):
    """Parse INI text into (RobotModel, ControllerConfig, SimConfig)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(origin))
    except configparser.Error as exc:
        raise ParseError(getattr(exc, "message", str(exc)).splitlines()[0],
                         line=getattr(exc, "lineno", None)) from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ParseError(f"unknown section [{section}]", line=_line_of_section(text, section))

    base_model = RobotModel()
    model_defaults = {name: getattr(base_model, name) for name in _SCALAR_MODEL}
    changes = _section_values(parser, text, "model", model_defaults)
    for name in LINK_NAMES:
        link = getattr(base_model, name)
        link_defaults = {"mass": link.mass, "com": link.com, "inertia": sum(link.inertia, ())}
        vals = _section_values(parser, text, name, link_defaults)
        if vals:
            inertia = vals.get("inertia", link_defaults["inertia"])
            com = vals.get("com", link.com)
            if len(com) != 3:
                raise ParseError("com needs 3 values", line=_line_of(text, name, "com"),
                                 key=f"{name}.com")
            if len(inertia) != 9:
                raise ParseError("inertia needs 9 values", line=_line_of(text, name, "inertia"),
                                 key=f"{name}.inertia")
            changes[name] = LinkInertia(vals.get("mass", link.mass), com,
                                        np.reshape(inertia, (3, 3)).tolist())
    model = _wrap("model", lambda: RobotModel(**changes))

    cc_defaults = {f.name: getattr(ControllerConfig(), f.name) for f in dataclasses.fields(ControllerConfig)}
    controller = _wrap("controller", lambda: ControllerConfig(
        **_section_values(parser, text, "controller", cc_defaults)))

    sc_defaults = {f.name: getattr(SimConfig(), f.name) for f in dataclasses.fields(SimConfig)}
    sim = _wrap("sim", lambda: SimConfig(**_section_values(parser, text, "sim", sc_defaults)))
    return model, controller, sim


def _line_of_section(text, section):
    for n, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{section}]":
            return n
    return None


def load_config(path=None):
    """Read a config file; ``None`` loads the shipped defaults."""
    if path is None:
        text = default_config_path().read_text()
        path = "default.ini"
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, origin=path)


def serialize_config(model, controller, sim):
    """INI text that :func:`parse_config` turns back into equal objects."""
    lines = ["[model]"]
    lines += [f"{name} = {_fmt(getattr(model, name))}" for name in _SCALAR_MODEL]
    for name in LINK_NAMES:
        link = getattr(model, name)
        lines += ["", f"[{name}]", f"mass = {_fmt(link.mass)}", f"com = {_fmt(link.com)}",
                  f"inertia = {_fmt(link.inertia)}"]
    lines += ["", "[controller]"]
    lines += [f"{f.name} = {_fmt(getattr(controller, f.name))}" for f in dataclasses.fields(controller)]
    lines += ["", "[sim]"]
    lines += [f"{f.name} = {_fmt(getattr(sim, f.name))}" for f in dataclasses.fields(sim)]
    return "\n".join(lines) + "\n"


def save_config(path, model, controller, sim):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(model, controller, sim))


def override(configs, dotted, value):
    """Return new configs with one ``section.key`` (or ``section.key[i]``) replaced."""
    model, controller, sim = configs
    section, _, key = dotted.partition(".")
    index = None
    if key.endswith("]") and "[" in key:
        key, idx = key[:-1].split("[")
        index = int(idx)

    def patch(obj):
        current = getattr(obj, key)
        if index is None:
            new = type(current)(value) if not isinstance(current, tuple) else tuple(value)
        else:
            new = list(current)
            new[index] = float(value)
            new = tuple(new)
        return obj.replace(**{key: new})

    if section == "model" and key in _SCALAR_MODEL:
        return patch(model), controller, sim
    if section in LINK_NAMES:
        link = getattr(model, section)
        if key == "mass":
            return model.replace(**{section: dataclasses.replace(link, mass=float(value))}), controller, sim
        if key == "com" and index is not None:
            com = list(link.com)
            com[index] = float(value)
            return model.replace(**{section: dataclasses.replace(link, com=tuple(com))}), controller, sim
    if section == "controller" and hasattr(controller, key):
        return model, patch(controller), sim
    if section == "sim" and hasattr(sim, key):
        return model, controller, patch(sim)
    raise ValidationError(dotted, "not a sweepable parameter")
