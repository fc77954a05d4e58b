"""Run configuration: JSON with unit-suffixed keys, validated against the bundled defaults."""
from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Any, Optional

import numpy as np

from .magnetostatics import ChipGeometry
from .noise import CantileverConfig, MetalFilmConfig, NoiseScenario
from .trap import LatticeConfig, SurfaceConfig
from .zeeman import parse_state

INT_KEYS = {"lattice_j", "n_cantilevers", "n_points", "n_max"}
OPTIONAL_SECTIONS = {"cantilever2"}
TWO_PI = 2 * np.pi


class ConfigError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)


def load_defaults() -> dict:
    text = resources.files("hybridsim").joinpath("data/paper_defaults.json").read_text()
    return json.loads(text)


def _line_of(text: str, key: str, after: int = 0) -> Optional[int]:
    pat = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for i, line in enumerate(text.splitlines()[after:], start=after + 1):
        if pat.search(line):
            return i
    return None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(key: str, value, default) -> Optional[str]:
    if key in INT_KEYS:
        return None if isinstance(value, int) and not isinstance(value, bool) else "must be an integer"
    if default is None:
        return None if value is None or _is_number(value) else "must be a number or null"
    if isinstance(default, bool):
        return None if isinstance(value, bool) else "must be true or false"
    if _is_number(default):
        if not _is_number(value) or not np.isfinite(value):
            return "must be a finite number"
        return None
    if isinstance(default, str):
        return None if isinstance(value, str) else "must be a string"
    if isinstance(default, list):
        if not isinstance(value, list):
            return "must be a list"
        proto = default[0] if default else None
        for v in value:
            if isinstance(proto, str) and not isinstance(v, str):
                return "must be a list of strings"
            if _is_number(proto) and not _is_number(v):
                return "must be a list of numbers"
        return None
    return None


@dataclass
class RunConfig:
    data: dict
    source: str = "<paper defaults>"
    text: str = ""

    @property
    def digest(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def section(self, name: str) -> dict:
        if name not in self.data:
            raise ConfigError(f"section '{name}' is required for this command", source=self.source)
        return self.data[name]

    def error(self, section: str, key: str, msg: str) -> ConfigError:
        sec_line = _line_of(self.text, section) or 0
        return ConfigError(f"{section}.{key} {msg}", _line_of(self.text, key, sec_line), self.source)

    # builders ---------------------------------------------------------------

    def geometry(self) -> ChipGeometry:
        g = self.section("geometry")
        return ChipGeometry(
            tip_size=tuple(x * 1e-9 for x in g["tip_size_nm"]),
            comp_size=tuple(x * 1e-9 for x in g["comp_size_nm"]),
            comp_gap=g["comp_gap_nm"] * 1e-9,
            magnetization=g["magnetization_A_per_m"],
            gap_r=g["gap_r_nm"] * 1e-9,
            membrane_h=g["membrane_h_nm"] * 1e-9,
            lambda_eff=g["lambda_eff_nm"] * 1e-9,
            lattice_j=g["lattice_j"],
            n_cantilevers=g["n_cantilevers"],
            bias_y=g["bias_y_uT"] * 1e-6,
        )

    def trap_height(self) -> float:
        return self.section("lattice")["trap_height_nm"] * 1e-9

    def lattice(self) -> LatticeConfig:
        lat = self.section("lattice")
        rw = lat["recoil_wavelength_nm"]
        return LatticeConfig(
            lambda_eff=self.section("geometry")["lambda_eff_nm"] * 1e-9,
            depth_Er=lat["depth_Er"],
            antinode_offset=lat["trap_height_nm"] * 1e-9,
            recoil_convention=lat["recoil_convention"],
            recoil_wavelength=None if rw is None else rw * 1e-9,
        )

    def surface(self) -> SurfaceConfig:
        s = self.section("surface")
        if s["C4_J_m4"] is None:
            return SurfaceConfig(membrane_thickness=self.section("geometry")["membrane_h_nm"] * 1e-9)
        return SurfaceConfig(cp_coefficient_C4=s["C4_J_m4"], membrane_thickness=self.section("geometry")["membrane_h_nm"] * 1e-9)

    def cantilever(self, name: str = "cantilever") -> CantileverConfig:
        c = self.section(name)
        tip = tuple(x * 1e-9 for x in self.section("geometry")["tip_size_nm"])
        return CantileverConfig(
            length=c["length_um"] * 1e-6,
            width=c["width_um"] * 1e-6,
            thickness=c["thickness_um"] * 1e-6,
            si_density=c["si_density_kg_per_m3"],
            magnet_size=tip,
            magnet_density=c["magnet_density_kg_per_m3"],
            spring_k=c["spring_constant_N_per_m"],
            omega_c=TWO_PI * c["frequency_MHz"] * 1e6,
            Q=c["Q"],
            T=c["temperature_mK"] * 1e-3,
        )

    def film(self) -> MetalFilmConfig:
        f = self.section("film")
        return MetalFilmConfig(1 / f["resistivity_ohm_m"], f["thickness_nm"] * 1e-9, f["temperature_K"])

    def noise_scenario(self) -> NoiseScenario:
        r = self.section("rates")
        return NoiseScenario(
            geometry=self.geometry(),
            cantilever=self.cantilever(),
            film=self.film(),
            state=parse_state(r["state"]),
            gamma_vac_Hz=r["gamma_vac_Hz"],
            trap_frequency=TWO_PI * r["trap_frequency_kHz"] * 1e3,
            omega_L=TWO_PI * r["larmor_MHz"] * 1e6,
            dB_bias=r["bias_noise_nT"] * 1e-9,
            bias_noise_bandwidth=r["bias_noise_bandwidth_Hz"],
            heating_amplitude=r["heating_amplitude"],
            resolve_bias=r["resolve_bias"],
        )


def _validate(user: dict, defaults: dict, text: str, source: str) -> dict:
    if not isinstance(user, dict):
        raise ConfigError("top level must be an object", 1, source)
    merged = {k: copy.deepcopy(v) for k, v in defaults.items() if k not in OPTIONAL_SECTIONS}
    for sec, body in user.items():
        line = _line_of(text, sec)
        if sec not in defaults:
            raise ConfigError(f"unknown section '{sec}'", line, source)
        if not isinstance(body, dict):
            raise ConfigError(f"section '{sec}' must be an object", line, source)
        target = merged.setdefault(sec, copy.deepcopy(defaults[sec]))
        for key, value in body.items():
            kline = _line_of(text, key, (line or 1) - 1)
            if key not in defaults[sec]:
                raise ConfigError(f"unknown key '{sec}.{key}'", kline, source)
            problem = _check_value(key, value, defaults[sec][key])
            if problem:
                raise ConfigError(f"{sec}.{key} {problem}", kline, source)
            target[key] = value
    return merged


def _semantic_checks(cfg: RunConfig) -> None:
    d = cfg.data
    for sec, keys in {
        "potential": ["z_min_nm", "z_max_nm"],
        "rates": ["d_min_nm", "d_max_nm", "gamma_vac_Hz", "trap_frequency_kHz", "bias_noise_bandwidth_Hz"],
        "film": ["resistivity_ohm_m", "thickness_nm"],
        "gate": ["g_eff_Hz", "gate_time_ms"],
        "entangle": ["g1_Hz", "g2_Hz"],
    }.items():
        for k in keys:
            if d[sec][k] <= 0:
                raise cfg.error(sec, k, "must be positive")
    for sec, lo, hi in (("potential", "z_min_nm", "z_max_nm"), ("rates", "d_min_nm", "d_max_nm")):
        if d[sec][lo] >= d[sec][hi]:
            raise cfg.error(sec, hi, f"must exceed {lo}")
    for sec in ("potential", "rates"):
        if d[sec]["n_points"] < 1:
            raise cfg.error(sec, "n_points", "must be >= 1")
    for sec in ("gate", "entangle"):
        if d[sec]["n_max"] < 3:
            raise cfg.error(sec, "n_max", "must be >= 3")
    if d["rates"]["heating_amplitude"] not in ("a_qm", "z_qm"):
        raise cfg.error("rates", "heating_amplitude", "must be 'a_qm' or 'z_qm'")
    if d["lattice"]["recoil_convention"] not in ("lambda_eff", "lambda_laser"):
        raise cfg.error("lattice", "recoil_convention", "must be 'lambda_eff' or 'lambda_laser'")
    for sec, key in (("potential", "states"), ("rates", "state")):
        vals = d[sec][key] if isinstance(d[sec][key], list) else [d[sec][key]]
        for v in vals:
            try:
                parse_state(v)
            except ValueError as e:
                raise cfg.error(sec, key, str(e)) from None
    if any(k < 0 for k in d["entangle"]["kappa_sweep_over_2pi_Hz"]):
        raise cfg.error("entangle", "kappa_sweep_over_2pi_Hz", "entries must be >= 0")


def load_config(path: Optional[str] = None) -> RunConfig:
    """Bundled defaults when `path` is None, otherwise the file overlaid on the defaults.

    Sections in OPTIONAL_SECTIONS are only present if the file provides them.
    """
    defaults = load_defaults()
    if path is None:
        cfg = RunConfig(defaults, "<paper defaults>", json.dumps(defaults, indent=2))
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e.strerror}", source=str(path)) from None
        try:
            user = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", e.lineno, str(path)) from None
        cfg = RunConfig(_validate(user, defaults, text, str(path)), str(path), text)
    _semantic_checks(cfg)
    try:
        cfg.geometry(), cfg.lattice(), cfg.surface(), cfg.cantilever(), cfg.film(), cfg.noise_scenario()
        if "cantilever2" in cfg.data:
            cfg.cantilever("cantilever2")
    except ValueError as e:
        raise ConfigError(str(e), source=cfg.source) from None
    return cfg
