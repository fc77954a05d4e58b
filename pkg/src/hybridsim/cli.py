"""hybridsim command-line interface.

    hybridsim <potential|rates|gate|entangle|sensitivity> [--config FILE] [--out DIR] ...

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .dynamics import IntegrationError
from .magnetostatics import GeometryError, Magnet, MagnetAssembly, default_assembly, tip_gradient_Gm, trap_point
from .noise import (
    CantileverConfig,
    g_eff_coupling,
    max_thermal_occupation,
    min_detectable_force,
    rate_rows,
    rate_sweep,
    spin_precession_force,
    zero_point_amplitude,
    RATE_COLUMNS,
)
from .physcore import H, K_B
from .protocols import (
    CNOT_TARGET_LABELS,
    LindbladConfig,
    cnot_schedule,
    drive_for_gate_time,
    entangle_schedule,
    run_cnot,
    run_entangle,
)
from .trap import TrapError, TrapModel, barrier_toward_surface, find_trap_minimum, trap_frequency
from .zeeman import HyperfineState, parse_state

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
TWO_PI = 2 * np.pi


def n_workers() -> int:
    raw = os.environ.get("HYBRIDSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"HYBRIDSIM_THREADS must be an integer, got {raw!r}", source="environment") from None


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(cfg: RunConfig, columns: Sequence[tuple[str, str]], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# hybridsim {__version__} config_sha256={cfg.digest}\n")
    buf.write("# units: " + ",".join(u for _, u in columns) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([name for name, _ in columns])
    for row in rows:
        w.writerow([x if isinstance(x, str) else repr(float(x)) for x in row])
    return buf.getvalue()


def report_text(cfg: RunConfig, body: str) -> str:
    return f"# hybridsim {__version__} config_sha256={cfg.digest}\n" + body


def state_tag(s: HyperfineState) -> str:
    return f"F{s.F}_m{s.m_F}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_potential(cfg: RunConfig, out: Path, states=None, **_) -> int:
    p = cfg.section("potential")
    sel = states or [parse_state(s) for s in p["states"]]
    d = cfg.trap_height()
    assembly = default_assembly(d, cfg.geometry())
    z = np.linspace(p["z_min_nm"], p["z_max_nm"], p["n_points"]) * 1e-9
    comp_cols = [("z_nm", "nm"), ("optical_Hz", "Hz"), ("casimir_polder_Hz", "Hz"), ("gravity_Hz", "Hz"), ("zeeman_Hz", "Hz"), ("total_Hz", "Hz")]
    summary = []
    for s in sel:
        model = TrapModel(s, assembly, cfg.lattice(), cfg.surface(), gravity_sign=cfg.section("surface")["gravity_sign"])
        c = model.components(z)
        total = c["optical"] + c["casimir_polder"] + c["gravity"] + c["zeeman"]
        tag = state_tag(s)
        write_atomic(out / f"potential_{tag}.csv", csv_text(cfg, [("z_nm", "nm"), ("U_total_Hz", "Hz")], zip(z * 1e9, total / H)))
        rows = zip(z * 1e9, c["optical"] / H, c["casimir_polder"] / H, c["gravity"] / H, c["zeeman"] / H, total / H)
        write_atomic(out / f"components_{tag}.csv", csv_text(cfg, comp_cols, rows))
        try:
            zmin = find_trap_minimum(model)
            f_t = trap_frequency(model, zmin) / TWO_PI
            bar = barrier_toward_surface(model, zmin) / H
        except TrapError:
            zmin = f_t = bar = float("nan")
        summary.append((s.name, zmin * 1e9, f_t / 1e3, bar / 1e3))
        print(f"{s.name}: z_min = {zmin * 1e9:.2f} nm, f_trap = {f_t / 1e3:.2f} kHz, barrier = {bar / 1e3:.2f} kHz")
    cols = [("state", "-"), ("z_min_nm", "nm"), ("trap_frequency_kHz", "kHz"), ("barrier_kHz", "kHz")]
    write_atomic(out / "potential_summary.csv", csv_text(cfg, cols, summary))
    return EXIT_OK


def cmd_rates(cfg: RunConfig, out: Path, **_) -> int:
    r = cfg.section("rates")
    d = np.linspace(r["d_min_nm"], r["d_max_nm"], r["n_points"]) * 1e-9
    budgets = rate_sweep(d, cfg.noise_scenario(), workers=n_workers())
    write_atomic(out / "rates.csv", csv_text(cfg, RATE_COLUMNS, rate_rows(budgets)))
    best = max(budgets, key=lambda b: b.ratio)
    print(f"{len(budgets)} distances; g_eff/sum(rates) is largest at d = {best.d * 1e9:.1f} nm (ratio {best.ratio:.3g})")
    return EXIT_OK


def _gate_lindblad(cfg: RunConfig, lossless: bool) -> LindbladConfig:
    g = cfg.section("gate")
    if lossless:
        return LindbladConfig()
    return LindbladConfig(
        kappa=(TWO_PI * g["kappa_over_2pi_Hz"],),
        n_th=(g["n_th"],),
        gamma_dephase=TWO_PI * g["dephasing_Hz"],
    )


def cmd_gate(cfg: RunConfig, out: Path, lossless: bool = False, **_) -> int:
    g = cfg.section("gate")
    g_eff = TWO_PI * g["g_eff_Hz"]
    try:
        Omega = drive_for_gate_time(g_eff, g["gate_time_ms"] * 1e-3)
    except ValueError as e:
        raise ConfigError(str(e), source=cfg.source) from None
    sched = cnot_schedule(g_eff, Omega)
    res = run_cnot(sched, _gate_lindblad(cfg, lossless), n_max=g["n_max"], workers=n_workers())
    body = res.report()
    write_atomic(out / "gate_report.txt", report_text(cfg, f"lossless = {lossless}\n" + body))
    cols = [("input", "-"), ("target", "-"), ("fidelity", "1")]
    rows = [(k, CNOT_TARGET_LABELS[k], f) for k, f in res.fidelities.items()]
    write_atomic(out / "gate_truth_table.csv", csv_text(cfg, cols, rows))
    write_atomic(out / "gate_schedule.json", sched.to_json() + "\n")
    sys.stdout.write(body)
    return EXIT_OK


def _entangle_lindblad(e: dict, lossless: bool, kappa_over_2pi=None) -> LindbladConfig:
    if lossless:
        return LindbladConfig()
    if kappa_over_2pi is not None:
        return LindbladConfig(kappa=(TWO_PI * kappa_over_2pi,) * 2)
    return LindbladConfig(kappa=(TWO_PI * e["kappa1_over_2pi_Hz"], TWO_PI * e["kappa2_over_2pi_Hz"]))


def cmd_entangle(cfg: RunConfig, out: Path, lossless: bool = False, kappa_sweep: bool = False, **_) -> int:
    cfg.section("cantilever2")  # two cantilevers are required
    e = cfg.section("entangle")
    sched = entangle_schedule(TWO_PI * e["g1_Hz"], TWO_PI * e["g2_Hz"])
    res = run_entangle(sched, _entangle_lindblad(e, lossless), n_max=e["n_max"])
    write_atomic(out / "entangle_report.txt", report_text(cfg, f"lossless = {lossless}\n" + res.report()))
    print(f"bell_fidelity = {res.bell_fidelity!r}\nconcurrence = {res.concurrence!r}\natom_purity = {res.atom_purity!r}")
    if kappa_sweep:
        ks = sorted(e["kappa_sweep_over_2pi_Hz"])
        rows = []
        for k in ks:
            r = run_entangle(sched, _entangle_lindblad(e, False, k), n_max=e["n_max"])
            rows.append((k, r.bell_fidelity, r.concurrence))
        cols = [("kappa_over_2pi_Hz", "Hz"), ("bell_fidelity", "1"), ("concurrence", "1")]
        write_atomic(out / "entangle_kappa_sweep.csv", csv_text(cfg, cols, rows))
    return EXIT_OK


def detection_gradient(cfg: RunConfig) -> float:
    """G_m of a lone tip magnet for an atom straight above its center, quantized along the bias (y)."""
    geo = cfg.geometry()
    s = cfg.section("sensitivity")
    tip = Magnet((0.0, 0.0, 0.0), tuple(np.asarray(geo.tip_size) / 2), (geo.magnetization, 0.0, 0.0))
    p = (0.0, 0.0, s["detection_distance_nm"] * 1e-9)
    return tip_gradient_Gm(MagnetAssembly((tip,)), p, tip=tip, quantization_axis=(0.0, 1.0, 0.0))


def cmd_sensitivity(cfg: RunConfig, out: Path, **_) -> int:
    s = cfg.section("sensitivity")
    det = CantileverConfig(
        spring_k=s["spring_constant_N_per_m"],
        omega_c=TWO_PI * s["frequency_MHz"] * 1e6,
        Q=s["Q"],
        T=s["temperature_mK"] * 1e-3,
    )
    F_min = min_detectable_force(det, s["bandwidth_Hz"])
    F_s = spin_precession_force(s["G_m_T_per_m"])
    G_geo = detection_gradient(cfg)
    nbound = max_thermal_occupation(TWO_PI * s["Omega0_over_2pi_Hz"], s["phonon_Q"], TWO_PI * s["phonon_frequency_MHz"] * 1e6)
    cant = cfg.cantilever()
    d = cfg.trap_height()
    G_op = tip_gradient_Gm(default_assembly(d, cfg.geometry()), trap_point(d, 0, cfg.geometry()))
    z_qm = zero_point_amplitude(cant)
    vals = [
        ("F_min_N", F_min),
        ("F_s_N", F_s),
        ("F_s_geometry_N", spin_precession_force(G_geo)),
        ("G_m_geometry_T_per_m", G_geo),
        ("N_th_bound", nbound),
        ("m_eff_kg", cant.m_eff),
        ("z_qm_m", z_qm),
        ("G_m_operating_point_T_per_m", G_op),
        ("g_eff_Hz", g_eff_coupling(G_op, z_qm)),
        ("kappa_over_2pi_Hz", cant.kappa / TWO_PI),
    ]
    body = "".join(f"{k} = {float(v)!r}\n" for k, v in vals)
    write_atomic(out / "sensitivity_report.txt", report_text(cfg, body))
    sys.stdout.write(body)
    return EXIT_OK


COMMANDS = {
    "potential": cmd_potential,
    "rates": cmd_rates,
    "gate": cmd_gate,
    "entangle": cmd_entangle,
    "sensitivity": cmd_sensitivity,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridsim", description="Atom-cantilever hybrid system simulations")
    ap.add_argument("--version", action="version", version=f"hybridsim {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config overlaid on the bundled defaults")
    ap.add_argument("--paper-defaults", action="store_true", help="use the bundled default config (same as omitting --config)")
    ap.add_argument("--out", default="hybridsim_out", help="output directory")
    ap.add_argument("--lossless", action="store_true", help="gate/entangle: switch off all dissipation")
    ap.add_argument("--states", nargs="+", help="potential: states as 'F,m' or aux/up/down")
    ap.add_argument("--kappa-sweep", action="store_true", help="entangle: also sweep the cantilever decay rate")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.paper_defaults and args.config:
            raise ConfigError("--paper-defaults and --config are mutually exclusive", source="command line")
        cfg = load_config(None if args.paper_defaults else args.config)
        states = None
        if args.states:
            try:
                states = [parse_state(s) for s in args.states]
            except ValueError as e:
                raise ConfigError(str(e), source="--states") from None
        return COMMANDS[args.command](cfg, Path(args.out), states=states, lossless=args.lossless, kappa_sweep=args.kappa_sweep)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrapError, IntegrationError, GeometryError, FloatingPointError, np.linalg.LinAlgError, ValueError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
