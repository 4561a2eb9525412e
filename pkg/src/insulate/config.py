"""Run configuration: flat ``key = value`` text with ``[section]`` headers.

Every key, its type and its default live in :data:`SCHEMA`; the shipped
``configs/defaults.ini`` is generated from it (``insulate defaults``).
Values may be written bare or double-quoted, and lists as ``1, 2, 3`` or
``[1, 2, 3]``.
"""
from __future__ import annotations

import configparser
import warnings
from pathlib import Path

from .errors import PreconditionError


class ConfigError(PreconditionError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip().strip("[]")
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    parse.options = options
    return parse


PARSERS = {"float": float, "int": int, "bool": _bool, "str": str, "floats": _floats}

# section -> key -> (parser name or choice parser, default, one-line description)
SCHEMA = {
    "problem": {
        "dim": ("int", 2, "space dimension (the radial oracle accepts 2 or 3)"),
        "robin_h": ("float", 1.0, "Robin coefficient h"),
        "volume_cost": ("float", 1.0, "insulator cost per unit area C0"),
        "allow_degenerate": ("bool", False, "permit h = 0"),
        "sweep_h": ("floats", (), "radial subcommand: list of h values (empty: robin_h)"),
        "sweep_volume_cost": ("floats", (), "radial subcommand: list of C0 values (empty: volume_cost)"),
    },
    "omega": {
        "kind": (_choice("disk", "star", "two_disks"), "disk", "shape of the heated body"),
        "center": ("floats", (0.0, 0.0), "centre x, y"),
        "radius": ("float", 1.0, "disk radius (disk, two_disks)"),
        "a0": ("float", 1.0, "star: mean radius"),
        "a": ("floats", (), "star: cosine coefficients"),
        "b": ("floats", (), "star: sine coefficients"),
        "second_center": ("floats", (1.459, 0.0), "two_disks: centre of the small disk"),
        "second_radius": ("float", 0.05, "two_disks: radius of the small disk"),
    },
    "solver": {
        "n_s": ("int", 32, "boundary-fitted mesh: radial nodes"),
        "n_theta": ("int", 64, "boundary-fitted mesh: angular nodes"),
        "gap_min": ("float", 0.0, "minimum insulator thickness (0: 2% of the body scale)"),
    },
    "shape": {
        "modes": ("int", 8, "Fourier modes of the insulator boundary"),
        "init_radius": ("float", 1.8, "initial circle radius"),
        "init_mode": ("int", 0, "wavenumber of the initial perturbation (0: none)"),
        "init_amplitude": ("float", 0.1, "amplitude of the initial perturbation"),
        "max_iter": ("int", 200, "descent iterations"),
        "tol": ("float", 1e-6, "relative projected-gradient tolerance"),
        "gradient": (_choice("analytic", "fd"), "analytic", "shape gradient"),
        "fd_fallback": ("bool", True, "switch to the discrete gradient when the line search stalls"),
        "boundary_samples": ("int", 256, "points in the emitted boundary table"),
    },
    "phase_field": {
        "n": ("int", 128, "cells per side of the square grid"),
        "half_width": ("float", 2.2, "half side length of the grid"),
        "n_stages": ("int", 4, "eps continuation stages from 8dx to 2dx"),
        "k_eps": ("float", 1e-6, "elliptic floor"),
        "delta_cut": ("float", 0.05, "positivity threshold"),
        "z_cut": ("float", 0.5, "ridge threshold on z"),
        "jump_threshold": ("float", 0.1, "jump detection threshold for the sharp energy"),
        "max_alternations": ("int", 40, "alternations per eps stage"),
        "tol": ("float", 1e-7, "relative energy change ending a stage"),
        "relaxation": ("float", 1.0, "initial u-step relaxation"),
        "init_noise": ("float", 0.0, "standard deviation of seeded noise on the initial u"),
    },
    "analysis": {
        "op": (_choice("lower-bound", "density", "blowup", "holes"), "lower-bound", "report"),
        "field": ("str", "", "path of a .grid field"),
        "delta_cut": ("float", 0.05, "positivity threshold"),
        "tau": ("float", 0.1, "jump detection threshold"),
        "points": ("floats", (), "sample points x1, y1, x2, y2, ... (empty: automatic)"),
        "radii": ("floats", (), "radii (empty: automatic)"),
        "eps_flat": ("float", 0.1, "flatness tolerance of the blow-up classifier"),
    },
    "output": {
        "dir": ("str", "", "output directory (empty: --out, then $INSULATE_OUT, then ./out)"),
    },
}


def _parser(kind):
    return PARSERS[kind] if isinstance(kind, str) else kind


def _strip(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    return text


def defaults() -> dict:
    return {sec: {k: v[1] for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _set(cfg: dict, section: str, key: str, raw: str, where: str, strict: bool):
    if section not in SCHEMA:
        msg = f"{where}: unknown section [{section}]"
        if strict:
            raise ConfigError(msg)
        warnings.warn(msg, stacklevel=3)
        return
    if key not in SCHEMA[section]:
        msg = f"{where}: unknown key {section}.{key}"
        if strict:
            raise ConfigError(msg)
        warnings.warn(msg, stacklevel=3)
        return
    kind = SCHEMA[section][key][0]
    try:
        cfg[section][key] = _parser(kind)(_strip(raw))
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {section}.{key}: {exc}") from None


def load(path=None, overrides=(), strict: bool = False) -> dict:
    """Defaults, then the file at ``path``, then ``section.key=value`` overrides."""
    cfg = defaults()
    if path is not None:
        path = Path(path)
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        lines = text.splitlines()
        for sec in cp.sections():
            for key, raw in cp.items(sec):
                lineno = next((i + 1 for i, ln in enumerate(lines)
                               if ln.split("=", 1)[0].strip() == key), "?")
                _set(cfg, sec, key, raw, f"{path}:{lineno}", strict)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, raw = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        _set(cfg, sec, key, raw, f"--set {item}", strict=True)
    return cfg


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump(cfg: dict, with_comments: bool = False) -> str:
    out = []
    for sec, keys in SCHEMA.items():
        out.append(f"[{sec}]")
        for key, (kind, _, doc) in keys.items():
            if with_comments:
                opts = getattr(kind, "options", None)
                out.append(f"# {doc}" + (f" ({' | '.join(opts)})" if opts else ""))
            out.append(f"{key} = {format_value(cfg[sec][key])}")
        out.append("")
    return "\n".join(out)
