"""Command-line front end: sweeps, critical temperatures, verification, protocol and circuit runs.

Exit codes: 0 success, 1 verification failure, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import analytic, circuit, protocol, uhlmann
from .errors import UhlmannError
from .spin import SphereAngles, SpinJ, build_spin_operators
from .thermal import ThermalSpec

THREADS_ENV = "UHLMANN_THREADS"
SWEEP_HEADER = ("T", "G_real", "G_imag", "theta_U", "g")


class ConfigError(Exception):
    pass


def fmt(x: float) -> str:
    """12 significant digits, locale independent."""
    return format(float(x), ".12g")


@dataclass
class RunConfig:
    subcommand: str
    spin: SpinJ
    omega0: float
    winding: int
    temperatures: tuple
    steps: int
    tolerance: float
    output: str | None
    fmt: str
    raw_phase: bool
    natural_units: bool
    method: str
    include_transitions: bool
    circuit_out: str | None
    threads: int

    def physical(self, T: float) -> float:
        return T * self.omega0 if self.natural_units else T


def _float(name, value, positive=True):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(x) or (positive and x <= 0):
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
    return x


def _int(name, value, minimum):
    try:
        n = int(str(value))
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if n < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {n}")
    return n


def build_config(ns: argparse.Namespace) -> RunConfig:
    try:
        spin = SpinJ(_int("two_j", ns.two_j, 0)) if ns.two_j is not None else SpinJ.from_value(ns.j)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid j: {exc}") from None
    omega0 = _float("omega0", ns.omega0)
    winding = _int("winding", ns.winding, 0)
    if ns.temperature is not None:
        temps = (_float("temperature", ns.temperature),)
    else:
        tmin, tmax = _float("tmin", ns.tmin), _float("tmax", ns.tmax)
        count = _int("count", ns.count, 1)
        if count > 1 and tmax <= tmin:
            raise ConfigError("tmax must exceed tmin")
        if ns.spacing not in ("linear", "log"):
            raise ConfigError(f"spacing must be linear or log, got {ns.spacing!r}")
        grid = np.geomspace(tmin, tmax, count) if ns.spacing == "log" else np.linspace(tmin, tmax, count)
        temps = tuple(float(t) for t in ([tmin] if count == 1 else grid))
    threads = _int(THREADS_ENV, os.environ.get(THREADS_ENV, "1"), 1)
    if ns.format not in ("csv", "json", "text"):
        raise ConfigError(f"format must be csv, json or text, got {ns.format!r}")
    if ns.method not in ("analytic", "holonomy"):
        raise ConfigError(f"method must be analytic or holonomy, got {ns.method!r}")
    return RunConfig(
        subcommand=ns.command, spin=spin, omega0=omega0, winding=winding, temperatures=temps,
        steps=_int("steps", ns.steps, 2), tolerance=_float("tolerance", ns.tolerance),
        output=ns.output, fmt=ns.format, raw_phase=_bool(ns.raw_phase),
        natural_units=_bool(ns.natural_units), method=ns.method,
        include_transitions=_bool(ns.include_transitions), circuit_out=ns.circuit_out, threads=threads,
    )


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Keys use the long flag names."""
    out = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# --- output ------------------------------------------------------------------


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(cfg: RunConfig, header, rows, meta: dict) -> str:
    if cfg.fmt == "json":
        payload = {"config": meta, "columns": list(header),
                   "rows": [dict(zip(header, (float(fmt(v)) for v in r))) for r in rows]}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _meta(cfg: RunConfig) -> dict:
    return {"j": str(cfg.spin), "omega0": cfg.omega0, "winding": cfg.winding, "method": cfg.method,
            "natural_units": cfg.natural_units}


def read_sweep_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: float(v) for k, v in row.items()} for row in reader]


# --- subcommands -------------------------------------------------------------


def sweep_rows(cfg: RunConfig):
    temps = sorted(set(cfg.physical(t) for t in cfg.temperatures))
    if cfg.include_transitions and cfg.winding > 0:
        lo, hi = temps[0], temps[-1]
        if hi > lo:
            # bisect to machine precision so g lands on its clamp at each transition
            report = analytic.find_tqpt_zeros(cfg.spin, cfg.omega0, cfg.winding, (lo, hi), rtol=1e-15)
            temps = sorted(set(temps) | set(report.tstars))
    spec = analytic.SweepSpec(cfg.spin, cfg.omega0, cfg.winding, tuple(temps))
    rows = analytic.sweep(spec, method=cfg.method, steps=max(cfg.steps, 16), raw_phase=cfg.raw_phase,
                          threads=cfg.threads)
    scale = cfg.omega0 if cfg.natural_units else 1.0
    return [(r.T / scale, r.loschmidt.real, r.loschmidt.imag, r.theta_u, r.g) for r in rows]


def cmd_sweep(cfg: RunConfig) -> int:
    _emit(cfg, _table(cfg, SWEEP_HEADER, sweep_rows(cfg), _meta(cfg)))
    return 0


def transitions(cfg: RunConfig):
    """(tstars, labels, method) in the user's temperature units."""
    scale = cfg.omega0 if cfg.natural_units else 1.0
    if cfg.spin.two_j == 1:
        tstars = analytic.tstar_half(cfg.omega0, cfg.winding)
        labels = [float(math.pi * (cfg.winding % 2))]
        for _ in tstars:
            labels.append(math.pi - labels[-1])
        method = "closed-form"
    else:
        lo, hi = cfg.physical(min(cfg.temperatures)), cfg.physical(max(cfg.temperatures))
        rep = analytic.find_tqpt_zeros(cfg.spin, cfg.omega0, cfg.winding, (lo, hi))
        tstars, labels, method = list(rep.tstars), list(rep.phase_labels), "bisection"
    return [t / scale for t in tstars], labels, method


def cmd_tstar(cfg: RunConfig) -> int:
    tstars, labels, method = transitions(cfg)
    names = ["trivial" if lab == 0 else "nontrivial" for lab in labels]
    if cfg.fmt == "json":
        text = json.dumps({"config": _meta(cfg), "method": method, "tstars": [float(fmt(t)) for t in tstars],
                           "phase_labels": [float(fmt(x)) for x in labels], "phases": names},
                          indent=2, sort_keys=True) + "\n"
    elif cfg.fmt == "csv":
        text = _table(cfg, ("index", "T_star"), [(i, t) for i, t in enumerate(tstars)], _meta(cfg))
    else:
        lines = [f"# j={cfg.spin} omega0={fmt(cfg.omega0)} winding={cfg.winding} method={method}",
                 f"transitions: {len(tstars)}"]
        edges = ["0"] + [fmt(t) for t in tstars] + ["inf"]
        for k, name in enumerate(names):
            lines.append(f"phase {name:<10} theta_U={fmt(labels[k])} on ({edges[k]}, {edges[k + 1]})")
            if k < len(tstars):
                lines.append(f"T* = {fmt(tstars[k])}")
        text = "\n".join(lines) + "\n"
    _emit(cfg, text)
    return 0


def verification_matrix(cfg: RunConfig):
    """(name, max deviation, tolerance) for each cross-check."""
    rng = np.random.default_rng(20240521)
    spin, w0, W = cfg.spin, cfg.omega0, max(cfg.winding, 1)
    ops = build_spin_operators(spin)
    temps = [cfg.physical(t) for t in cfg.temperatures]
    tol = cfg.tolerance
    checks = []

    dev = 0.0
    for T in temps:
        spec = ThermalSpec(T, w0, spin)
        ref = analytic.loschmidt_great_circle(spin, w0, W, T)
        for path in (uhlmann.LoopPath.longitude(0.7, W), uhlmann.LoopPath.equator(W)):
            dev = max(dev, abs(uhlmann.holonomy(ops, spec, path, tol=tol).loschmidt - ref))
    checks.append(("holonomy_vs_analytic", dev, max(tol, 1e-6)))

    dev = 0.0
    if spin.two_j > 0:
        for _ in range(5):
            T = float(rng.choice(temps))
            a = SphereAngles(float(rng.uniform(0.1, np.pi - 0.1)), float(rng.uniform(0, 2 * np.pi)))
            spec = ThermalSpec(T, w0, spin)
            try:
                gen = uhlmann.connection_general(uhlmann.thermal_family(spec), a)
            except UhlmannError:
                continue
            ana = uhlmann.connection_spin_j(ops, a, uhlmann.chi(spec))
            dev = max(dev, np.abs(gen.a_theta - ana.a_theta).max(), np.abs(gen.a_phi - ana.a_phi).max())
    checks.append(("connection_general_vs_spin_j", float(dev), 1e-6))

    dev = 0.0
    sched = protocol.ProtocolSchedule.linear(W)
    for T in temps:
        spec = ThermalSpec(T, w0, spin)
        dev = max(dev, abs(protocol.protocol_fidelity(spec, sched) - analytic.loschmidt_great_circle(spin, w0, W, T)))
    checks.append(("protocol_vs_closed_form", dev, 1e-10))

    dev = 0.0
    if 2 * circuit.qubits_for(spin) <= circuit.MAX_QUBITS:
        for T in temps:
            spec = ThermalSpec(T, w0, spin)
            ov = circuit.run_protocol_on_register(circuit.prep_circuit_for(spec), spec, sched)
            dev = max(dev, abs(ov - analytic.loschmidt_great_circle(spin, w0, W, T)))
    checks.append(("circuit_vs_closed_form", dev, 1e-9))

    dev = 0.0
    for T in temps:
        spec = ThermalSpec(T, w0, spin)
        a = SphereAngles(float(rng.uniform(0.1, np.pi - 0.1)), float(rng.uniform(0, 2 * np.pi)))
        dev = max(dev, np.abs(uhlmann.curvature_fd(ops, spec, a) - uhlmann.curvature(ops, spec, a)).max())
    checks.append(("curvature_fd_vs_closed_form", float(dev), 1e-6))

    dev = max(abs(uhlmann.chern_number(ops, ThermalSpec(T, w0, spin), (64, 64))) for T in temps)
    checks.append(("chern_number_zero", dev, 1e-8))
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    checks = verification_matrix(cfg)
    failed = [name for name, dev, tol in checks if not dev <= tol]
    if cfg.fmt == "json":
        text = json.dumps({"config": _meta(cfg), "checks": [
            {"name": n, "max_deviation": float(fmt(d)), "tolerance": t, "pass": d <= t} for n, d, t in checks]},
            indent=2, sort_keys=True) + "\n"
    else:
        lines = [f"{name:<30} max_dev={fmt(dev):<20} tol={tol:g} {'PASS' if dev <= tol else 'FAIL'}"
                 for name, dev, tol in checks]
        lines.append("all checks passed" if not failed else f"FAILED: {', '.join(failed)}")
        text = "\n".join(lines) + "\n"
    _emit(cfg, text)
    return 1 if failed else 0


def cmd_protocol(cfg: RunConfig) -> int:
    T = cfg.physical(cfg.temperatures[0])
    spec = ThermalSpec(T, cfg.omega0, cfg.spin)
    sched = protocol.ProtocolSchedule.linear(cfg.winding)
    traj = protocol.evolve(spec, sched, cfg.steps)
    residual = max(abs(r) for r in protocol.transport_residual(traj))
    overlap = protocol.protocol_fidelity(spec, sched)
    exact = analytic.loschmidt_great_circle(cfg.spin, cfg.omega0, cfg.winding, T)
    values = {"T": T, "residual_max": residual, "overlap_real": overlap.real, "overlap_imag": overlap.imag,
              "analytic": exact, "deviation": abs(overlap - exact), "theta_U": uhlmann.z2_phase(overlap)}
    _emit(cfg, _report(cfg, values))
    return 0


def cmd_circuit(cfg: RunConfig) -> int:
    T = cfg.physical(cfg.temperatures[0])
    spec = ThermalSpec(T, cfg.omega0, cfg.spin)
    circ = circuit.prep_circuit_for(spec)
    text = circuit.format_circuit(circ)
    if cfg.circuit_out:
        with open(cfg.circuit_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    overlap = circuit.run_protocol_on_register(circ, spec, protocol.ProtocolSchedule.linear(cfg.winding))
    exact = analytic.loschmidt_great_circle(cfg.spin, cfg.omega0, cfg.winding, T)
    values = {"T": T, "qubits": circ.num_qubits, "gates": len(circ.gates), "overlap_real": overlap.real,
              "overlap_imag": overlap.imag, "analytic": exact, "deviation": abs(overlap - exact)}
    report = _report(cfg, values)
    _emit(cfg, report if cfg.circuit_out or cfg.fmt != "text" else text + report)
    return 0


def _report(cfg: RunConfig, values: dict) -> str:
    if cfg.fmt == "json":
        return json.dumps({"config": _meta(cfg), **{k: float(fmt(v)) for k, v in values.items()}},
                          indent=2, sort_keys=True) + "\n"
    if cfg.fmt == "csv":
        return _table(cfg, tuple(values), [tuple(values.values())], _meta(cfg))
    return "".join(f"{k} = {fmt(v)}\n" for k, v in values.items())


COMMANDS = {"sweep": cmd_sweep, "tstar": cmd_tstar, "verify": cmd_verify,
            "protocol": cmd_protocol, "circuit": cmd_circuit}

SUB_DEFAULTS = {
    "sweep": {"format": "csv"},
    "tstar": {"format": "text", "tmin": 0.01, "tmax": 20.0},
    "verify": {"format": "text", "tmin": 0.3, "tmax": 3.0, "count": 3, "spacing": "log"},
    "protocol": {"format": "text", "steps": 512},
    "circuit": {"format": "text"},
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file overriding defaults")
    common.add_argument("--j", default="0.5", help="spin, e.g. 0.5, 1, 3/2")
    common.add_argument("--two-j", dest="two_j", default=None, help="spin given as the integer 2j")
    common.add_argument("--omega0", default=1.0)
    common.add_argument("--winding", default=1)
    common.add_argument("--tmin", default=0.05)
    common.add_argument("--tmax", default=2.0)
    common.add_argument("--count", default=400)
    common.add_argument("--spacing", default="linear")
    common.add_argument("--temperature", default=None, help="single temperature (overrides the grid)")
    common.add_argument("--steps", default=256)
    common.add_argument("--tolerance", default=1e-8)
    common.add_argument("-o", "--output", default=None)
    common.add_argument("--format", default="csv")
    common.add_argument("--method", default="analytic", help="sweep evaluation: analytic or holonomy")
    common.add_argument("--raw-phase", dest="raw_phase", action="store_true", default=False)
    common.add_argument("--natural-units", dest="natural_units", action="store_true", default=False,
                        help="temperatures in units of omega0")
    common.add_argument("--include-transitions", dest="include_transitions", action="store_true",
                        default=False, help="add the critical temperatures to the sweep grid")
    common.add_argument("--circuit-out", dest="circuit_out", default=None)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uhlmann-spin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("sweep", "Loschmidt amplitude, Uhlmann phase and g over a temperature grid"),
        ("tstar", "critical temperatures and phase labels"),
        ("verify", "numeric vs analytic cross-validation"),
        ("protocol", "purified-state protocol run"),
        ("circuit", "qubit-register preparation circuit and overlap"),
    ]:
        # a fresh parent per subcommand so per-command defaults do not leak through shared actions
        p = sub.add_parser(name, parents=[_common_parser()], help=helptext)
        p.set_defaults(**SUB_DEFAULTS[name])
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.config:
            overrides = read_config_file(ns.config)
            sub = parser._subparsers._group_actions[0].choices[ns.command]
            known = {a.dest for a in sub._actions}
            unknown = sorted(set(overrides) - known)
            if unknown:
                raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
            sub.set_defaults(**overrides)
            ns = parser.parse_args(argv)
        cfg = build_config(ns)
        return COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"uhlmann-spin: error: {exc}", file=sys.stderr)
        return 2
    except UhlmannError as exc:
        print(f"uhlmann-spin: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
