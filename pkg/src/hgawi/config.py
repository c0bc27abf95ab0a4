"""Plain-text configuration files (INI syntax).

Sections: ``scheme``, ``lasers.probe``, ``lasers.strong``, ``lasers.weak``,
``lasers.repump``, ``cell``, ``geometry``, ``pump``, ``numerics`` and an
optional ``run`` section holding command-line defaults. Any section or key
may be omitted; missing values come from the base configuration (the
five-level mercury preset unless another is given).

Scaled quantities are spelled with their unit, e.g. ``rabi_mhz`` (Omega/2pi)
or ``wavelength_nm``; each also accepts its SI spelling (``rabi_rad_s``,
``wavelength_m``). The writer uses the readable unit whenever the value
survives the round trip bit for bit and the SI unit otherwise, so a written
file always reloads to an identical configuration.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .atom import (
    GAMMA_TRAP_LITERATURE, CellModel, LaserField, Numerics, SystemConfig,
    doppler_free_unit_vectors, five_level_scheme, four_level_scheme,
    mercury_five_level_preset, unit,
)
from .constants import ATOMIC_MASS_UNIT, TWO_PI, invert_scale
from .errors import ConfigError
from .pump import LINESHAPES, PumpModel

SCHEMA_VERSION = 1

_MHZ = TWO_PI * 1e6
LASERS = ("probe", "strong", "weak", "repump")
GEOMETRY_MODES = ("vectors", "doppler-free", "angles")


@dataclass(frozen=True)
class _Scaled:
    """A float field with a display unit (``unit``, factor ``scale`` to SI)
    and an SI spelling (``si``)."""

    attr: str
    base: str
    unit: str
    scale: float
    si: str
    optional: bool = False


_LASER_FIELDS = (
    _Scaled("rabi", "rabi", "mhz", _MHZ, "rad_s"),
    _Scaled("detuning", "detuning", "mhz", _MHZ, "rad_s"),
    _Scaled("wavelength", "wavelength", "nm", 1e-9, "m"),
    _Scaled("linewidth_fwhm", "linewidth", "khz", 1e3, "hz"),
    _Scaled("power", "power", "mw", 1e-3, "w", optional=True),
    _Scaled("beam_diameter", "beam_diameter", "mm", 1e-3, "m", optional=True),
)
_CELL_FIELDS = (
    _Scaled("atom_temperature", "atom_temperature", "k", 1.0, "k"),
    _Scaled("path_length", "path_length", "mm", 1e-3, "m"),
    _Scaled("atomic_mass", "atomic_mass", "u", ATOMIC_MASS_UNIT, "kg"),
    _Scaled("kappa", "kappa", "per_s", 1.0, "per_s"),
    _Scaled("transit_rate", "transit_rate", "per_s", 1.0, "per_s"),
)
_PUMP_FIELDS = (
    _Scaled("power", "power", "mw", 1e-3, "w"),
    _Scaled("spectral_fwhm", "spectral_fwhm", "mhz", 1e6, "hz"),
    _Scaled("detuning", "detuning", "mhz", _MHZ, "rad_s"),
    _Scaled("wavelength", "wavelength", "nm", 1e-9, "m"),
    _Scaled("natural_width", "natural_width", "mhz", _MHZ, "rad_s"),
    _Scaled("peak_rate", "peak_rate", "mhz", _MHZ, "rad_s", optional=True),
)
_NUMERIC_FIELDS = (
    _Scaled("axial_step", "axial_step", "m_s", 1.0, "m_s"),
    _Scaled("axial_core", "axial_core", "m_s", 1.0, "m_s"),
    _Scaled("transverse_step", "transverse_step", "m_s", 1.0, "m_s", optional=True),
)
_SCHEME_RATES = (("gamma12", 0), ("gamma23", 1), ("gamma34", 2))

RUN_KEYS = {
    "command": str, "preset": str, "span_hz": float, "points": int,
    "dense_span_hz": float, "dense_points": int, "center_hz": float,
    "calibrate": bool,
}


# --- reading -----------------------------------------------------------------

def _line_index(text):
    """(section, key) -> 1-based line number; sections map to their header."""
    index, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), no)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), no)
    return index


class _Reader:
    def __init__(self, text, source):
        self.source = source
        self.lines = _line_index(text)
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from exc
        self.used = set()

    def where(self, section, key=None):
        no = self.lines.get((section, key)) or self.lines.get((section, None))
        loc = f"{self.source}:{no}" if no else self.source
        return f"{loc}: [{section}]" + (f" {key}" if key else "")

    def error(self, section, key, msg):
        return ConfigError(f"{self.where(section, key)}: {msg}")

    def has(self, section):
        return self.cp.has_section(section)

    def raw(self, section, key):
        if self.cp.has_option(section, key):
            self.used.add((section, key))
            return self.cp.get(section, key).strip()
        return None

    def get(self, section, key, conv, default):
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            raise self.error(section, key, f"cannot parse {text!r}: {exc}") from None

    def scaled(self, section, f: _Scaled, default):
        k_unit = f"{f.base}_{f.unit}"
        k_si = f"{f.base}_{f.si}"
        a, b = self.raw(section, k_unit), self.raw(section, k_si)
        if a is not None and b is not None and k_unit != k_si:
            raise self.error(section, k_si, f"give either {k_unit} or {k_si}, not both")
        if a is None and b is None:
            return default
        key, text, scale = (k_unit, a, f.scale) if a is not None else (k_si, b, 1.0)
        if f.optional and text.lower() in ("", "none"):
            return None
        try:
            return float(text) * scale
        except ValueError:
            raise self.error(section, key, f"cannot parse {text!r} as a number") from None

    def check_unknown(self):
        known_sections = {"meta", "scheme", "cell", "geometry", "pump", "numerics", "run"}
        known_sections.update(f"lasers.{n}" for n in LASERS)
        for section in self.cp.sections():
            if section not in known_sections:
                raise self.error(section, None, "unknown section")
            for key in self.cp.options(section):
                if (section, key) not in self.used:
                    raise self.error(section, key, "unknown key")


def _floats(text):
    return tuple(float(x) for x in text.split(","))


def _bool(text):
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _unit_vector(text):
    v = _floats(text)
    if len(v) != 3:
        raise ValueError("expected three components")
    return v


def _read_scheme(r, base):
    sec = "scheme"
    core = {(u, l): rate for u, l, rate in base.scheme.decays}
    keys = [(1, 0), (2, 1), (2, 3)]
    rates = []
    for (name, i), pair in zip(_SCHEME_RATES, keys):
        f = _Scaled("", name, "mhz", _MHZ, "rad_s")
        rates.append(r.scaled(sec, f, core[pair]))
    trap = base.scheme.trap_extension
    levels = r.get(sec, "levels", int, 5 if trap is not None else 4)
    trap_decay = r.scaled(sec, _Scaled("", "trap_decay", "per_s", 1.0, "per_s"),
                          trap.decay_rate if trap is not None else GAMMA_TRAP_LITERATURE)
    try:
        if levels == 4:
            return four_level_scheme(*rates)
        if levels == 5:
            return five_level_scheme(trap_decay, gamma_12=rates[0], gamma_23=rates[1],
                                     gamma_34=rates[2])
    except ConfigError as exc:
        raise r.error(sec, None, str(exc)) from None
    raise r.error(sec, "levels", f"must be 4 or 5, got {levels}")


def _read_laser(r, name, base: LaserField):
    sec = f"lasers.{name}"
    kw = {f.attr: r.scaled(sec, f, getattr(base, f.attr)) for f in _LASER_FIELDS}
    kw["enabled"] = r.get(sec, "enabled", _bool, base.enabled)
    kw["unit_k"] = r.get(sec, "unit_k", _unit_vector, base.unit_k)
    try:
        return LaserField(**kw)
    except ConfigError as exc:
        raise r.error(sec, None, str(exc)) from None


def _read_cell(r, base: CellModel):
    sec = "cell"
    kw = {f.attr: r.scaled(sec, f, getattr(base, f.attr)) for f in _CELL_FIELDS}
    kw["reference_transmission_target"] = r.get(
        sec, "reference_transmission", float, base.reference_transmission_target)
    try:
        return CellModel(**kw)
    except ConfigError as exc:
        raise r.error(sec, None, str(exc)) from None


def _read_pump(r, base: PumpModel):
    sec = "pump"
    kw = {f.attr: r.scaled(sec, f, getattr(base, f.attr)) for f in _PUMP_FIELDS}
    kw["enabled"] = r.get(sec, "enabled", _bool, base.enabled)
    kw["unit_k"] = r.get(sec, "unit_k", _unit_vector, base.unit_k)
    kw["rate_scale"] = r.get(sec, "rate_scale", float, base.rate_scale)
    kw["lineshape"] = r.get(sec, "lineshape", str, base.lineshape)
    if kw["lineshape"] not in LINESHAPES:
        raise r.error(sec, "lineshape", f"must be one of {', '.join(LINESHAPES)}")
    axes = r.get(sec, "axes_mm", _floats, None)
    if axes is not None:
        if len(axes) != 2:
            raise r.error(sec, "axes_mm", "expected two values")
        axes = tuple(a * 1e-3 for a in axes)
    axes_si = r.get(sec, "axes_m", _floats, None)
    if axes is not None and axes_si is not None:
        raise r.error(sec, "axes_m", "give either axes_mm or axes_m, not both")
    if axes_si is not None and len(axes_si) != 2:
        raise r.error(sec, "axes_m", "expected two values")
    kw["axes"] = axes or axes_si or base.axes
    try:
        return PumpModel(**kw)
    except ConfigError as exc:
        raise r.error(sec, None, str(exc)) from None


def _read_numerics(r, base: Numerics):
    sec = "numerics"
    kw = {f.attr: r.scaled(sec, f, getattr(base, f.attr)) for f in _NUMERIC_FIELDS}
    kw["order"] = r.get(sec, "order", int, base.order)
    kw["axial_growth"] = r.get(sec, "axial_growth", float, base.axial_growth)
    kw["axial_extent"] = r.get(sec, "axial_extent", float, base.axial_extent)
    kw["solver_tol"] = r.get(sec, "solver_tol", float, base.solver_tol)
    try:
        return Numerics(**kw)
    except ConfigError as exc:
        raise r.error(sec, None, str(exc)) from None


def _apply_geometry(r, cfg):
    sec = "geometry"
    mode = r.get(sec, "mode", str, "vectors")
    if mode not in GEOMETRY_MODES:
        raise r.error(sec, "mode", f"must be one of {', '.join(GEOMETRY_MODES)}")
    s_deg = r.get(sec, "strong_angle_deg", float, None)
    w_deg = r.get(sec, "weak_angle_deg", float, None)
    p_deg = r.get(sec, "pump_angle_deg", float, None)
    if mode != "angles" and (s_deg is not None or w_deg is not None or p_deg is not None):
        raise r.error(sec, "mode", "angle keys need mode = angles")
    if mode == "vectors":
        return cfg
    if mode == "doppler-free":
        for name in ("strong", "weak"):
            if r.cp.has_option(f"lasers.{name}", "unit_k"):
                raise r.error(f"lasers.{name}", "unit_k",
                              "unit_k conflicts with geometry mode doppler-free")
        try:
            _, u_s, u_w = doppler_free_unit_vectors(
                cfg.probe.wavelength, cfg.strong.wavelength, cfg.weak.wavelength)
        except ValueError as exc:
            raise r.error(sec, "mode", str(exc)) from None
        return replace(cfg, strong=replace(cfg.strong, unit_k=u_s),
                       weak=replace(cfg.weak, unit_k=u_w))
    if s_deg is None or w_deg is None:
        raise r.error(sec, "mode", "mode = angles needs strong_angle_deg and weak_angle_deg")
    t = math.radians(s_deg)
    cfg = replace(cfg, strong=replace(cfg.strong, unit_k=(-math.cos(t), math.sin(t), 0.0)),
                  weak=replace(cfg.weak, unit_k=unit(w_deg)))
    if p_deg is not None:
        cfg = replace(cfg, pump=replace(cfg.pump, unit_k=unit(p_deg)))
    return cfg


def _read_run(r):
    run = {}
    if not r.has("run"):
        return run
    for key, conv in RUN_KEYS.items():
        value = r.get("run", key, _bool if conv is bool else conv, None)
        if value is not None:
            run[key] = value
    return run


def loads(text: str, base: Optional[SystemConfig] = None, source: str = "<config>"):
    """Parse configuration text. Returns ``(config, run)`` where ``run`` holds
    the optional command-line defaults of the ``run`` section."""
    base = base if base is not None else mercury_five_level_preset()
    r = _Reader(text, source)
    version = r.get("meta", "schema_version", int, SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise r.error("meta", "schema_version", f"unsupported version {version}")
    scheme = _read_scheme(r, base)
    lasers = {n: _read_laser(r, n, getattr(base, n)) for n in LASERS}
    cfg = SystemConfig(scheme=scheme, cell=_read_cell(r, base.cell),
                       pump=_read_pump(r, base.pump),
                       numerics=_read_numerics(r, base.numerics), **lasers)
    cfg = _apply_geometry(r, cfg)
    run = _read_run(r)
    r.check_unknown()
    return cfg, run


def load(path, base: Optional[SystemConfig] = None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return loads(text, base, source=str(path))


# --- writing -----------------------------------------------------------------

def _r(x):
    return repr(float(x))


def _emit(lines, f: _Scaled, value):
    if value is None:
        return
    if isinstance(value, complex):
        if value.imag != 0:
            raise ConfigError(f"{f.base}: complex values cannot be written")
        value = value.real
    shown = invert_scale(value, f.scale)
    if shown * f.scale == value:
        lines.append(f"{f.base}_{f.unit} = {_r(shown)}")
    else:
        lines.append(f"{f.base}_{f.si} = {_r(value)}")


def dumps(cfg: SystemConfig, run: Optional[dict] = None) -> str:
    """Serialise every field of ``cfg``; ``loads(dumps(cfg))`` equals ``cfg``."""
    out = ["[meta]", f"schema_version = {SCHEMA_VERSION}", ""]

    out.append("[scheme]")
    trap = cfg.scheme.trap_extension
    out.append(f"levels = {cfg.scheme.n}")
    for (name, _), pair in zip(_SCHEME_RATES, [(1, 0), (2, 1), (2, 3)]):
        _emit(out, _Scaled("", name, "mhz", _MHZ, "rad_s"), cfg.scheme.rate(*pair))
    if trap is not None:
        out.append(f"trap_decay_per_s = {_r(trap.decay_rate)}")
    out.append("")

    for name in LASERS:
        laser = getattr(cfg, name)
        out.append(f"[lasers.{name}]")
        out.append(f"enabled = {str(laser.enabled).lower()}")
        for f in _LASER_FIELDS:
            _emit(out, f, getattr(laser, f.attr))
        out.append("unit_k = " + ", ".join(_r(c) for c in laser.unit_k))
        out.append("")

    out.append("[cell]")
    for f in _CELL_FIELDS:
        _emit(out, f, getattr(cfg.cell, f.attr))
    out.append(f"reference_transmission = {_r(cfg.cell.reference_transmission_target)}")
    out.append("")

    out += ["[geometry]", "mode = vectors", ""]

    p = cfg.pump
    out.append("[pump]")
    out.append(f"enabled = {str(p.enabled).lower()}")
    for f in _PUMP_FIELDS:
        _emit(out, f, getattr(p, f.attr))
    out.append("axes_m = " + ", ".join(_r(a) for a in p.axes))
    out.append("unit_k = " + ", ".join(_r(c) for c in p.unit_k))
    out.append(f"rate_scale = {_r(p.rate_scale)}")
    out.append(f"lineshape = {p.lineshape}")
    out.append("")

    n = cfg.numerics
    out.append("[numerics]")
    out.append(f"order = {n.order}")
    for f in _NUMERIC_FIELDS:
        _emit(out, f, getattr(n, f.attr))
    out.append(f"axial_growth = {_r(n.axial_growth)}")
    out.append(f"axial_extent = {_r(n.axial_extent)}")
    out.append(f"solver_tol = {_r(n.solver_tol)}")

    if run:
        out += ["", "[run]"]
        for key in RUN_KEYS:
            if key in run:
                v = run[key]
                if isinstance(v, bool):
                    v = str(v).lower()
                elif isinstance(v, float):
                    v = _r(v)
                out.append(f"{key} = {v}")
    return "\n".join(out) + "\n"
