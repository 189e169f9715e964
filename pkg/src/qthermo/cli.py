"""Command-line experiment runner.

    qthermo run CONFIG.toml [--out DIR] [--seed INT] [--mode exact|population]
    qthermo check [--out DIR] [--seed INT]

Each run writes ``results.csv`` (one row per scan point) and ``summary.json``
into the output directory. Exit codes: 0 success, 1 an invariant check failed,
2 bad usage or configuration, 3 the protocol was infeasible.

Config schema (TOML)::

    experiment = "extraction-scan"   # carnot | width-scan | strict-deficit | spin-demo | audit-suite
    seed = 0                         # seeds the "random" state preset
    out = "results/extraction"       # relative to the config file; --out overrides

    [system]
    dimension = 2                    # optional, checked against energies
    energies = [0.0, 1.0]            # H = diag(energies)
    state = "diag:0.9,0.1"           # plus | thermal | random | diag:p1,p2,...
    # matrix_file = "rho.csv"        # explicit state, rows of re,im pairs

    [bath]
    temperature = 1.0
    hot = 2.0                        # carnot only
    cold = 1.0

    [scan]
    N = [100, 200, 400, 800]         # step counts (spin-demo: steps per tau)
    mode = "population"

    [weight]
    sigma = 1.0
    p0 = 0.0
    widths = [0.01, 0.1, 1.0]        # width-scan: packet widths

    [spin]
    omega = 1.0
    theta = 1.5707963267948966
    tau = 1.0
    n_grid = 1024
    dx = 0.04
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import audit, carnot, protocol, spindemo
from .errors import QThermoError, ValidationError
from .qcore import as_density, random_density
from .thermo import BathSpec, thermal_state
from .weight import GaussianWavepacket

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXPERIMENTS = ("extraction-scan", "carnot", "width-scan", "strict-deficit", "spin-demo", "audit-suite")
FIRST_LAW_TOL = 1e-10

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    energies: list[float] = field(default_factory=lambda: [0.0, 1.0])
    state: str = "diag:0.9,0.1"
    matrix_file: Path | None = None
    temperature: float = 1.0
    hot: float = 2.0
    cold: float = 1.0
    N: list[int] = field(default_factory=lambda: [100, 200, 400, 800])
    mode: str = "population"
    sigma: float = 1.0
    p0: float = 0.0
    widths: list[float] = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0])
    spin: dict = field(default_factory=dict)
    seed: int = 0
    out: Path | None = None

    @property
    def hamiltonian(self) -> np.ndarray:
        return np.diag(np.asarray(self.energies, dtype=float)).astype(complex)

    @property
    def bath(self) -> BathSpec:
        return BathSpec(self.temperature)

    @property
    def packet(self) -> GaussianWavepacket:
        return GaussianWavepacket(sigma=self.sigma, p0=self.p0)


def load_config(path: Path, seed: int | None = None, mode: str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file {path} does not exist")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    try:
        return config_from_dict(raw, base_dir=path.parent, seed=seed, mode=mode)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def config_from_dict(raw: dict, base_dir: Path = Path("."), seed=None, mode=None) -> ExperimentConfig:
    name = raw.get("experiment")
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}; choose one of {', '.join(EXPERIMENTS)}")
    system = raw.get("system", {})
    bath = raw.get("bath", {})
    scan = raw.get("scan", {})
    weight = raw.get("weight", {})
    cfg = ExperimentConfig(experiment=name)
    cfg.energies = [float(e) for e in system.get("energies", cfg.energies)]
    if "dimension" in system and int(system["dimension"]) != len(cfg.energies):
        raise UsageError(f"system.dimension={system['dimension']} but {len(cfg.energies)} energies given")
    cfg.state = str(system.get("state", cfg.state))
    if "matrix_file" in system:
        cfg.matrix_file = (Path(base_dir) / system["matrix_file"]).resolve()
        if not cfg.matrix_file.is_file():
            raise UsageError(f"matrix file {cfg.matrix_file} does not exist")
    cfg.temperature = float(bath.get("temperature", cfg.temperature))
    cfg.hot = float(bath.get("hot", cfg.hot))
    cfg.cold = float(bath.get("cold", cfg.cold))
    cfg.N = [int(n) for n in scan.get("N", cfg.N)]
    if not cfg.N:
        raise UsageError("scan.N must not be empty")
    cfg.mode = str(mode or scan.get("mode", cfg.mode))
    if cfg.mode not in ("population", "exact"):
        raise UsageError(f"mode must be 'population' or 'exact', got {cfg.mode!r}")
    cfg.sigma = float(weight.get("sigma", cfg.sigma))
    cfg.p0 = float(weight.get("p0", cfg.p0))
    cfg.widths = [float(w) for w in weight.get("widths", cfg.widths)]
    cfg.spin = dict(raw.get("spin", {}))
    cfg.seed = int(seed if seed is not None else raw.get("seed", 0))
    if "out" in raw:
        cfg.out = Path(base_dir) / raw["out"]
    return cfg


def read_matrix_csv(path: Path) -> np.ndarray:
    """Row-major complex matrix stored as re,im column pairs under a header."""
    rows = list(csv.reader(Path(path).read_text().splitlines()))
    if not rows:
        raise ValidationError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if len(header) % 2 or any(h.strip() != ("re" if i % 2 == 0 else "im") for i, h in enumerate(header)):
        raise ValidationError(f"{path}: header must repeat 're,im'")
    vals = np.array([[float(v) for v in r] for r in body if r])
    m = vals[:, 0::2] + 1j * vals[:, 1::2]
    return m


def write_matrix_csv(path: Path, m: np.ndarray) -> None:
    m = np.asarray(m, dtype=complex)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im"] * m.shape[1])
    for row in m:
        w.writerow([_fmt(v) for z in row for v in (z.real, z.imag)])
    Path(path).write_text(buf.getvalue())


def build_state(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    d = len(cfg.energies)
    if cfg.matrix_file is not None:
        rho = read_matrix_csv(cfg.matrix_file)
    elif cfg.state == "plus":
        rho = np.full((d, d), 1.0 / d, dtype=complex)
    elif cfg.state == "thermal":
        rho, _ = thermal_state(cfg.hamiltonian, cfg.bath)
    elif cfg.state == "random":
        rho = random_density(d, rng)
    elif cfg.state.startswith("diag:"):
        rho = np.diag([float(v) for v in cfg.state[5:].split(",")]).astype(complex)
    else:
        raise UsageError(f"unknown state preset {cfg.state!r}")
    if rho.shape != (d, d):
        raise UsageError(f"state has shape {rho.shape}, Hamiltonian has {d} levels")
    return as_density(rho)


# ---------------------------------------------------------------- experiments


@dataclass
class Outcome:
    columns: list[str]
    rows: list[list[Any]]
    summary: dict
    checks: dict[str, dict]


def _check(value: float, threshold: float, passed: bool) -> dict:
    return {"value": float(value), "threshold": float(threshold), "passed": bool(passed)}


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QTHERMO_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn: Callable, items):
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def exp_extraction_scan(cfg: ExperimentConfig, rng) -> Outcome:
    rho = build_state(cfg, rng)
    h, bath = cfg.hamiltonian, cfg.bath
    w = cfg.packet if cfg.mode == "exact" else None
    ledgers = _map(lambda n: protocol.run_extraction(rho, h, bath, n, cfg.mode, w), cfg.N)
    rows = [[n, L.W, L.free_energy_change, L.deficit, n * L.deficit, L.first_law_residual]
            for n, L in zip(cfg.N, ledgers)]
    fl = max(L.first_law_residual for L in ledgers)
    last = ledgers[-1]
    checks = {
        "first_law": _check(fl, FIRST_LAW_TOL, fl <= FIRST_LAW_TOL),
        "deficit_positive": _check(min(L.deficit for L in ledgers), 0.0,
                                   all(L.deficit >= -1e-12 for L in ledgers)),
    }
    summary = {"free_energy_change": last.free_energy_change, "W": last.W, "deficit": last.deficit,
               "stage1_work": last.stage1.work if last.stage1 else 0.0}
    return Outcome(["N", "W", "free_energy_change", "deficit", "N_deficit", "first_law_residual"],
                   rows, summary, checks)


def exp_carnot(cfg: ExperimentConfig, rng) -> Outcome:
    hot, cold = BathSpec(cfg.hot), BathSpec(cfg.cold)
    reps = _map(lambda n: carnot.run_cycle(cfg.hamiltonian, hot, cold, n), cfg.N)
    rows = [[r.N, r.W, r.Q_H, r.Q_C, r.efficiency, r.carnot_efficiency, r.ideal_work]
            for r in reps]
    fl = max(r.first_law_residual for r in reps)
    bound = reps[-1].carnot_efficiency
    worst = max(r.efficiency for r in reps)
    checks = {
        "first_law": _check(fl, FIRST_LAW_TOL, fl <= FIRST_LAW_TOL),
        "carnot_bound": _check(worst, bound + 1e-12, worst <= bound + 1e-12),
    }
    return Outcome(["N", "W", "Q_H", "Q_C", "efficiency", "carnot_efficiency", "ideal_work"],
                   rows, reps[-1].summary(), checks)


def exp_width_scan(cfg: ExperimentConfig, rng) -> Outcome:
    rho = build_state(cfg, rng)
    n = cfg.N[0]
    run = protocol.run_extraction(rho, cfg.hamiltonian, cfg.bath, n, "exact", cfg.packet)
    spread = audit.offset_spread(run.weight)
    rows = []
    for s in cfg.widths:
        a = audit.entropy_audit(run, GaussianWavepacket(sigma=s, p0=cfg.p0))
        rows.append([s, s / spread if spread > 0 else math.inf, a.dS_weight, a.slack])
    worst = min(r[3] for r in rows)
    checks = {
        "first_law": _check(run.first_law_residual, FIRST_LAW_TOL, run.first_law_residual <= FIRST_LAW_TOL),
        "entropy_slack": _check(worst, -audit.SLACK_TOL, worst >= -audit.SLACK_TOL),
    }
    return Outcome(["sigma", "sigma_over_spread", "dS_weight", "slack"], rows,
                   {"N": n, "offset_spread": spread, "branches": len(run.ensemble)}, checks)


def exp_strict_deficit(cfg: ExperimentConfig, rng) -> Outcome:
    rho = build_state(cfg, rng)
    h, bath = cfg.hamiltonian, cfg.bath
    res = _map(lambda n: audit.strict_deficit_protocol_check(rho, h, bath, n), cfg.N)
    rows = [[n, r.deficit, r.work_full, r.work_decohered, r.discrepancy, 2 * max(r.protocol_deficits)]
            for n, r in zip(cfg.N, res)]
    fl = protocol.run_extraction(rho, h, bath, cfg.N[-1]).first_law_residual
    checks = {
        "protocol_agreement": _check(res[-1].discrepancy, 2 * max(res[-1].protocol_deficits),
                                     res[-1].passed),
        "first_law": _check(fl, FIRST_LAW_TOL, fl <= FIRST_LAW_TOL),
    }
    return Outcome(["N", "strict_deficit", "work_full", "work_decohered", "discrepancy", "allowed"],
                   rows, {"strict_deficit": res[-1].deficit}, checks)


def _spin_config(cfg: ExperimentConfig) -> spindemo.SpinFieldConfig:
    s = cfg.spin
    return spindemo.SpinFieldConfig(
        omega=float(s.get("omega", 1.0)),
        theta=float(s.get("theta", np.pi / 2)),
        tau=float(s.get("tau", 1.0)),
        n_grid=int(s.get("n_grid", 1024)),
        dx=float(s.get("dx", 0.04)),
        mg=float(s.get("mg", 1.0)),
        packet=cfg.packet,
    )


def exp_spin_demo(cfg: ExperimentConfig, rng) -> Outcome:
    base = _spin_config(cfg)
    psi0 = spindemo.LatticeWeightState.product(spindemo.spin_eigenstate(1, base), base)

    def one(n):
        c = spindemo.with_dt(base, base.tau / n)
        tr = spindemo.evolve(psi0, c)
        inf = 1 - spindemo.fidelity(spindemo.stage1_oracle(psi0, c), tr.final)
        return [n, c.time_step, spindemo.conservation_report(tr), inf, spindemo.weight_displacement(tr)]

    rows = _map(one, cfg.N)
    tol = 1e-6 * base.omega
    worst = max(r[2] for r in rows)
    checks = {
        "energy_conservation": _check(worst, tol, worst <= tol),
        "stage1_infidelity": _check(max(r[3] for r in rows), 1e-6, max(r[3] for r in rows) <= 1e-6),
        # the closed spin-weight dynamics has no heat, so the first law is energy conservation
        "first_law": _check(worst, tol, worst <= tol),
    }
    return Outcome(["steps", "dt", "conservation_residual", "infidelity", "displacement"], rows,
                   {"expected_displacement": base.shift / base.mg}, checks)


def exp_audit_suite(cfg: ExperimentConfig, rng) -> Outcome:
    checks = run_audit_suite(cfg.seed)
    rows = [[k, v["value"], v["threshold"], int(v["passed"])] for k, v in checks.items()]
    return Outcome(["check", "value", "threshold", "passed"], rows, {}, checks)


def run_audit_suite(seed: int = 0) -> dict[str, dict]:
    """Fast versions of the invariant checks; every entry carries pass/fail."""
    rng = np.random.default_rng(seed)
    h2, b1 = np.diag([0.0, 1.0]).astype(complex), BathSpec(1.0)
    out: dict[str, dict] = {}

    runs = [protocol.run_extraction(np.diag([0.9, 0.1]), h2, b1, n) for n in (100, 200, 400, 800)]
    fl = max(L.first_law_residual for L in runs)
    out["first_law"] = _check(fl, FIRST_LAW_TOL, fl <= FIRST_LAW_TOL)
    nd = [n * L.deficit for n, L in zip((100, 200, 400, 800), runs)]
    out["deficit_scaling_ratio"] = _check(max(nd) / min(nd), 2.0, min(nd) > 0 and max(nd) / min(nd) <= 2.0)

    h3 = np.diag([0.0, 0.4, 1.3]).astype(complex)
    slacks = []
    for h, n in ((h2, 8), (h3, 6)):
        rho = random_density(h.shape[0], rng)
        run = protocol.run_extraction(rho, h, b1, n, "exact", GaussianWavepacket(sigma=0.05))
        slacks.append(audit.entropy_audit(run).slack)
    out["entropy_slack"] = _check(min(slacks), -audit.SLACK_TOL, min(slacks) >= -audit.SLACK_TOL)

    nets = [audit.cyclic_second_law_check(random_density(2, rng), h2, b1, 200) for _ in range(10)]
    out["cyclic_second_law"] = _check(max(nets), 1e-10, max(nets) <= 1e-10)

    plus = np.full((2, 2), 0.5, dtype=complex)
    rep = audit.work_independence_check(
        audit.ShiftUnitary.from_stage1(plus, h2), plus,
        [GaussianWavepacket(sigma=s) for s in (0.1, 1.0, 10.0)], h=h2)
    out["work_independence"] = _check(rep.max_spread, 1e-10, rep.max_spread <= 1e-10)

    sd = audit.strict_deficit(plus, h2, b1)
    out["strict_deficit"] = _check(abs(sd - math.log(2)), 1e-12, abs(sd - math.log(2)) <= 1e-12)

    rep_c = carnot.run_cycle(h2, BathSpec(2.0), BathSpec(1.0), 1000)
    out["carnot_bound"] = _check(rep_c.efficiency, 0.5 + 1e-12, rep_c.efficiency <= 0.5 + 1e-12)

    sc = spindemo.with_dt(spindemo.SpinFieldConfig(), 1e-3)
    psi0 = spindemo.LatticeWeightState.product(spindemo.spin_eigenstate(1, sc), sc)
    dev = spindemo.conservation_report(spindemo.evolve(psi0, sc))
    out["spin_energy_conservation"] = _check(dev, 1e-6, dev <= 1e-6)
    return out


RUNNERS = {
    "extraction-scan": exp_extraction_scan,
    "carnot": exp_carnot,
    "width-scan": exp_width_scan,
    "strict-deficit": exp_strict_deficit,
    "spin-demo": exp_spin_demo,
    "audit-suite": exp_audit_suite,
}


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def render_csv(columns: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Run one experiment, write its artefacts and return the exit code."""
    rng = np.random.default_rng(cfg.seed)
    outcome = RUNNERS[cfg.experiment](cfg, rng)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(render_csv(outcome.columns, outcome.rows))
    checks = dict(outcome.checks)
    if "first_law" not in checks:
        checks["first_law"] = _check(0.0, FIRST_LAW_TOL, True)
    passed = all(c["passed"] for c in checks.values())
    summary = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "N": cfg.N,
        "first_law_residual": checks["first_law"]["value"],
        "results": outcome.summary,
        "checks": checks,
        "all_passed": passed,
    }
    (out_dir / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _print_summary(out_dir: Path) -> None:
    s = json.loads((Path(out_dir) / "summary.json").read_text())
    print(f"{s['experiment']}: results in {out_dir}")
    for name, c in s["checks"].items():
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"  [{mark}] {name}: {c['value']:.3e} (threshold {c['threshold']:.3e})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qthermo", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a TOML config")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--mode", choices=("exact", "population"), default=None)
    c = sub.add_parser("check", help="run the audit suite; exit 0 if every invariant holds")
    c.add_argument("--out", type=Path, default=Path("qthermo-check"))
    c.add_argument("--seed", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        if args.command == "run":
            cfg = load_config(args.config, seed=args.seed, mode=args.mode)
        else:
            cfg = ExperimentConfig(experiment="audit-suite", seed=args.seed)
        out = args.out or cfg.out or Path("qthermo-out")
        code = run_experiment(cfg, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qthermo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"qthermo: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QThermoError as exc:
        print(f"qthermo: infeasible protocol: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_summary(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
