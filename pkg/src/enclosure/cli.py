"""Command-line experiment runner.

Verbs::

    enclosure synthesize CONFIG --out DIR    forward data -> DIR/field.csv, DIR/flux.csv
    enclosure indicate   CONFIG --out DIR    data -> DIR/curve_<k>.csv
    enclosure extract    CONFIG --out DIR    curves -> DIR/estimates.json
    enclosure verify     CONFIG [--out DIR]  whole pipeline + tolerance check
    enclosure sweep      CONFIG --out DIR    grid over config fields, in parallel

Exit status: 0 pass, 1 tolerance failure, 2 configuration error. The worker
count for ``sweep`` comes from ``ENCLOSURE_WORKERS`` (default 1).
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Kind, ProblemConfig
from .extraction import (
    NoiseSpec,
    enclosure_classify,
    estimate_report,
    make_noise,
    noisy_estimate,
    reflection_arrival,
    robin_extract_heat,
    robin_extract_wave,
    travel_time_corrected,
    travel_time_normalized,
    travel_time_raw,
)
from .forward import (
    Field,
    PolyFlux,
    boundary_trace_series,
    continuous_data,
    heat_fd_solve,
    image_trace,
    sine_squared_pulse,
    wave_fd_solve,
)
from .indicator import IndicatorCurve, heat_curve, wave_curve
from .transform import BoundaryData, ContinuousData, Precision

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ReportRow",
    "load_config",
    "build_data",
    "inject_noise",
    "run_experiment",
    "atomic_write_text",
    "main",
    "WORKERS_ENV",
]

WORKERS_ENV = "ENCLOSURE_WORKERS"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """Invalid experiment configuration (exit status 2)."""


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# ---------------------------------------------------------------- config

_TOP = {"id", "problem", "flux", "solver", "tau_grid", "s_grid", "noise", "precision", "dps",
        "estimators", "regressor", "tolerance", "output", "sweep", "robin_top", "normalized_top"}
_ESTIMATORS = {"raw", "corrected", "normalized", "classify", "robin", "noisy", "arrival"}


@dataclass
class ExperimentConfig:
    problem: ProblemConfig
    flux: dict
    solver: dict
    tau_grid: dict | list
    id: str = "experiment"
    s_grid: list | None = None
    noise: NoiseSpec | None = None
    precision: str = "plain"
    dps: int | None = None
    estimators: list = field(default_factory=list)
    regressor: str = "log_tau"
    tolerance: dict | None = None
    output: dict = field(default_factory=dict)
    sweep: dict | None = None
    robin_top: int = 3
    normalized_top: int | None = None
    source: dict = field(default_factory=dict, repr=False)
    base_dir: Path = field(default_factory=Path.cwd, repr=False)

    def taus(self) -> np.ndarray:
        tg = self.tau_grid
        if isinstance(tg, list):
            return np.array(tg, dtype=float)
        lo, hi, n = float(tg["min"]), float(tg["max"]), int(tg["count"])
        if tg.get("spacing", "log") == "log":
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)

    def levels(self) -> list:
        return list(self.s_grid) if self.s_grid else [0.0]


def _err(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def load_config(src, base_dir=None) -> ExperimentConfig:
    """Parse and validate a JSON config (path, JSON text or dict).

    Every problem is reported with the dotted path of the offending field.
    """
    if isinstance(src, dict):
        raw = copy.deepcopy(src)
        base = Path(base_dir or Path.cwd())
    else:
        p = Path(src)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {src}: {exc}") from None
        base = p.resolve().parent
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        _err("config", "top level must be an object")
    extra = set(raw) - _TOP
    if extra:
        _err("config", f"unknown fields {sorted(extra)}")
    for key in ("problem", "flux", "solver", "tau_grid"):
        if key not in raw:
            _err(key, "missing")
    try:
        prob = ProblemConfig.from_dict(raw["problem"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem: {exc}") from None

    flux = raw["flux"]
    if not isinstance(flux, dict) or len(set(flux) & {"gamma", "pulse", "file"}) != 1:
        _err("flux", "give exactly one of 'gamma', 'pulse', 'file'")
    if "gamma" in flux:
        try:
            PolyFlux(tuple(flux["gamma"]))
        except (TypeError, ValueError) as exc:
            _err("flux.gamma", str(exc))
    if "pulse" in flux and not float(flux["pulse"].get("width", 0)) > 0:
        _err("flux.pulse.width", "must be positive")
    if "file" in flux and not (base / flux["file"]).exists():
        _err("flux.file", f"{flux['file']} does not exist")

    solver = raw["solver"]
    method = solver.get("method")
    if method not in {"series", "images", "fd", "exact", "file"}:
        _err("solver.method", "expected one of series, images, fd, exact, file")
    if method == "fd":
        for k in ("nx",):
            if not isinstance(solver.get(k), int) or solver[k] < 2:
                _err(f"solver.{k}", "positive integer required")
    if method in {"series", "images"} and not isinstance(solver.get("nt"), int):
        _err("solver.nt", "integer required for sampled data")
    if method == "exact":
        if "gamma" not in flux:
            _err("solver.method", "exact data need a polynomial flux")
        if prob.rho != 0 or prob.kind is not Kind.HEAT:
            _err("solver.method", "exact data exist for the Neumann heat problem only")
    if method in {"series", "images"} and (prob.rho != 0 or prob.kind is not Kind.HEAT or "gamma" not in flux):
        _err("solver.method", f"{method} needs a Neumann heat problem with polynomial flux")
    if method == "file":
        if "path" not in solver or not (base / solver["path"]).exists():
            _err("solver.path", "data file missing")

    tg = raw["tau_grid"]
    if isinstance(tg, list):
        if not tg:
            _err("tau_grid", "empty")
    elif isinstance(tg, dict):
        for k in ("min", "max", "count"):
            if k not in tg:
                _err(f"tau_grid.{k}", "missing")
        if int(tg["count"]) < 1:
            _err("tau_grid.count", "must be positive")
        if not float(tg["max"]) >= float(tg["min"]) > 0:
            _err("tau_grid", "need 0 < min <= max")
        if tg.get("spacing", "log") not in {"log", "linear"}:
            _err("tau_grid.spacing", "log or linear")
    else:
        _err("tau_grid", "object or list expected")

    noise = None
    if raw.get("noise") is not None:
        try:
            noise = NoiseSpec(**raw["noise"])
        except (TypeError, ValueError) as exc:
            _err("noise", str(exc))
    try:
        prec = Precision.parse(raw.get("precision", "plain")).value
    except ValueError:
        _err("precision", "plain, double_double or multiprecision")
    kind = prob.kind
    default_est = ["raw", "corrected"] if kind is Kind.HEAT else ["raw", "normalized"]
    est = raw.get("estimators", default_est)
    bad = set(est) - _ESTIMATORS
    if bad:
        _err("estimators", f"unknown {sorted(bad)}")
    if raw.get("regressor", "log_tau") not in {"log_tau", "log_abs_z"}:
        _err("regressor", "log_tau or log_abs_z")
    tol = raw.get("tolerance")
    if tol is not None:
        if "rel" not in tol and "abs" not in tol:
            _err("tolerance", "needs 'rel' or 'abs'")
        if tol.get("estimator", est[0]) not in est:
            _err("tolerance.estimator", "must name a configured estimator")

    cfg = ExperimentConfig(problem=prob, flux=flux, solver=solver, tau_grid=tg, id=str(raw.get("id", "experiment")),
                           s_grid=raw.get("s_grid"), noise=noise, precision=prec, dps=raw.get("dps"),
                           estimators=list(est), regressor=raw.get("regressor", "log_tau"), tolerance=tol,
                           output=raw.get("output", {}), sweep=raw.get("sweep"),
                           robin_top=int(raw.get("robin_top", 3)), normalized_top=raw.get("normalized_top"),
                           source=raw, base_dir=base)
    taus = cfg.taus()
    if np.any(np.diff(taus) <= 0):
        _err("tau_grid", "must be strictly ascending")
    if kind is Kind.HEAT and not taus[0] > 1.0 / prob.c**2:
        _err("tau_grid.min", f"must exceed 1/c^2 = {1.0 / prob.c**2:.6g}")
    return cfg


# ---------------------------------------------------------------- data

def _flux_poly(cfg: ExperimentConfig):
    return PolyFlux(tuple(cfg.flux["gamma"])) if "gamma" in cfg.flux else None


def _flux_samples(cfg: ExperimentConfig, times):
    f = cfg.flux
    if "gamma" in f:
        return PolyFlux(tuple(f["gamma"]))(times)
    if "pulse" in f:
        return sine_squared_pulse(float(f["pulse"]["width"]), float(f["pulse"].get("amplitude", 1.0)))(times)
    t, g = _read_columns(cfg.base_dir / f["file"], ("t", "g"))
    return np.interp(times, t, g)


def _read_columns(path, names):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or any(n not in rows[0] for n in names):
        raise ConfigError(f"{path}: expected columns {list(names)}")
    return tuple(np.array([float(r[n]) for r in rows]) for n in names)


def build_data(cfg: ExperimentConfig):
    """Forward data for the configured solver.

    Returns ``(data, field)`` where ``field`` is the FD solution when one was
    computed (else ``None``).
    """
    prob, sv = cfg.problem, cfg.solver
    method = sv["method"]
    if method == "exact":
        return continuous_data(prob, _flux_poly(cfg)), None
    if method == "file":
        t, u0, g = _read_columns(cfg.base_dir / sv["path"], ("t", "u0", "g"))
        return BoundaryData(t, u0, g), None
    if method in {"series", "images"}:
        nt = int(sv["nt"])
        t = np.linspace(0.0, prob.T, nt + 1)
        flux = _flux_poly(cfg)
        if method == "images":
            u0 = image_trace(prob.a, flux, t, "0")
        else:
            # the polynomial flux is used on all of [0, T]; evaluate the series there
            wide = prob.with_(T_prime=prob.T * (1 + 1e-12))
            u0, _ = boundary_trace_series(wide, flux, t)
        u0[0] = 0.0
        return BoundaryData(t, u0, flux(t)), None
    store = sv.get("store", "traces")
    if prob.kind is Kind.WAVE:
        if "pulse" in cfg.flux:
            fl = sine_squared_pulse(float(cfg.flux["pulse"]["width"]), float(cfg.flux["pulse"].get("amplitude", 1.0)))
        else:
            fl = lambda tt: _flux_samples(cfg, tt)  # noqa: E731
        fld = wave_fd_solve(prob, fl, int(sv["nx"]), sv.get("nt"), store=store)
    else:
        fl = _flux_poly(cfg) or (lambda tt: _flux_samples(cfg, tt))
        fld = heat_fd_solve(prob, fl, int(sv["nx"]), int(sv["nt"]), store=store)
    return fld.boundary_data(), fld


def inject_noise(data: BoundaryData, noise: NoiseSpec | None) -> BoundaryData:
    """Attach seeded noise with ``||E1|| + ||E2|| = delta`` (trapezoid norms)."""
    if noise is None or noise.delta == 0:
        return data
    return BoundaryData(data.times, data.u0, data.g, make_noise(noise, data.times))


def _field_csv(fld: Field | None, data) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if fld is not None:
        cols = [i for i in range(fld.nx + 1) if not np.all(np.isnan(fld.values[:, i]))]
        w.writerow(["t"] + [f"x{i}" for i in cols])
        for n in range(fld.nt + 1):
            w.writerow([f"{n * fld.dt:.17g}"] + [f"{fld.values[n, i]:.17g}" for i in cols])
    else:
        w.writerow(["t", "x0"])
        for t, u in zip(data.times, data.u0):
            w.writerow([f"{t:.17g}", f"{u:.17g}"])
    return buf.getvalue()


def _data_csv(data: BoundaryData) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "u0", "g"])
    for t, u, g in zip(data.times, data.observed_u0, data.observed_g):
        w.writerow([f"{t:.17g}", f"{u:.17g}", f"{g:.17g}"])
    return buf.getvalue()


# ---------------------------------------------------------------- pipeline

@dataclass(frozen=True)
class ReportRow:
    experiment: str
    estimate: str
    value: float
    target: float | None
    rel_error: float | None
    runtime: float

    @classmethod
    def make(cls, exp, kind, value, target, runtime):
        rel = None
        if target is not None and value is not None and target != 0 and math.isfinite(value):
            rel = abs(value - target) / abs(target)
        return cls(exp, kind, value, target, rel, runtime)


def _curves(cfg: ExperimentConfig, data):
    prob = cfg.problem
    taus = cfg.taus()
    known = {"c": prob.c, "M": prob.M, "T": prob.T, "kind": prob.kind.value}
    if prob.kind is Kind.WAVE:
        base = wave_curve(data, prob.c, taus, precision=cfg.precision, M=prob.M, dps=cfg.dps, config=known)
    else:
        base = heat_curve(data, prob.c, taus, 0.0, precision=cfg.precision, M=prob.M, dps=cfg.dps, config=known)
    out = []
    for s in cfg.levels():
        cv = base if s == 0.0 else base.shifted(float(s))
        cv.wprime0 = base.wprime0
        out.append(cv)
    return base, out


def _estimate(cfg: ExperimentConfig, data, base: IndicatorCurve, curves):
    prob = cfg.problem
    est, rows = {}, []
    truth = prob.travel_time  # synthetic truth, used for the target column only
    for name in cfg.estimators:
        t0 = time.perf_counter()
        if name == "raw":
            e = travel_time_raw(base)
            est[name] = estimate_report(e, _echo(cfg))
            val, tgt = e.value, truth
        elif name == "corrected":
            e = travel_time_corrected(base, cfg.regressor)
            est[name] = estimate_report(e, _echo(cfg))
            val, tgt = e.value, truth
        elif name == "normalized":
            e = travel_time_normalized(base, base.wprime0, top=cfg.normalized_top)
            est[name] = estimate_report(e, _echo(cfg))
            val, tgt = e.value, truth
        elif name == "classify":
            cl = enclosure_classify(curves)
            est[name] = {"labels": {repr(k): v for k, v in cl.labels.items()},
                         "slopes": {repr(k): v for k, v in cl.slopes.items()},
                         "dead_band": cl.dead_band, "estimate": cl.estimate, "config": _echo(cfg)}
            val, tgt = cl.estimate, None
        elif name == "robin":
            tt = travel_time_normalized(base, base.wprime0, top=cfg.normalized_top)
            a_est = tt.value / (2.0 * prob.c)
            fn = robin_extract_wave if prob.kind is Kind.WAVE else robin_extract_heat
            val = fn(base, base.wprime0, a_est, top=cfg.robin_top)
            est[name] = {"method": "robin", "value": val, "a_est": a_est, "config": _echo(cfg),
                         "tau_range": [float(base.taus[0]), float(base.taus[-1])], "residual": 0.0}
            tgt = prob.rho
        elif name == "noisy":
            if cfg.noise is None or not isinstance(data, BoundaryData):
                raise ConfigError("noise: the noisy estimator needs a noise block and sampled data")
            clean = BoundaryData(data.times, data.u0, data.g)
            e = noisy_estimate(clean, cfg.noise, prob.c, kind=prob.kind, precision=cfg.precision, M=prob.M)
            est[name] = estimate_report(e, _echo(cfg))
            val, tgt = e.value, truth
        elif name == "arrival":
            if not isinstance(data, BoundaryData):
                raise ConfigError("estimators: arrival needs sampled data")
            val, tgt = reflection_arrival(data, prob.c), truth
            est[name] = {"method": "arrival", "value": val, "residual": data.dt, "config": _echo(cfg),
                         "tau_range": [math.nan, math.nan]}
        rows.append(ReportRow.make(cfg.id, name, val, tgt, time.perf_counter() - t0))
    return est, rows


def _echo(cfg: ExperimentConfig) -> dict:
    return copy.deepcopy(cfg.source)


def _passes(cfg: ExperimentConfig, rows) -> bool | None:
    tol = cfg.tolerance
    if tol is None:
        return None
    name = tol.get("estimator", cfg.estimators[0])
    row = next(r for r in rows if r.estimate == name)
    target = tol.get("target", row.target)
    if row.value is None or target is None or not math.isfinite(row.value):
        return False
    err = abs(row.value - float(target))
    ok = True
    if "rel" in tol:
        ok &= err <= float(tol["rel"]) * abs(float(target))
    if "abs" in tol:
        ok &= err <= float(tol["abs"])
    return bool(ok)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Synthesize, indicate and extract; write CSV/JSON outputs when ``out_dir`` is given.

    Returns the report dictionary. ``report["passed"]`` is ``None`` without a
    declared tolerance.
    """
    t0 = time.perf_counter()
    data, _ = build_data(cfg)
    if isinstance(data, BoundaryData):
        data = inject_noise(data, cfg.noise) if "noisy" not in cfg.estimators else data
    base, curves = _curves(cfg, data)
    degenerate = bool(np.all(np.isneginf(base.log_abs)))
    if degenerate:
        est, rows = {}, [ReportRow.make(cfg.id, "degenerate", None, None, 0.0)]
    else:
        est, rows = _estimate(cfg, data, base, curves)
    report = {
        "id": cfg.id,
        "degenerate": degenerate,
        "estimates": est,
        "rows": [r.__dict__ for r in rows],
        "passed": False if degenerate and cfg.tolerance else _passes(cfg, rows),
        "runtime": time.perf_counter() - t0,
    }
    if out_dir is not None:
        out = Path(out_dir)
        for k, cv in enumerate(curves):
            cv.to_csv(out / f"curve_{k}.csv")
        atomic_write_text(out / "estimates.json", _dump_json(est))
        atomic_write_text(out / "report.json", _dump_json(report))
    return report


def _sweep_one(args):
    src, base, overrides, out = args
    raw = copy.deepcopy(src)
    raw.pop("sweep", None)
    for key, val in overrides.items():
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    raw["id"] = f"{raw.get('id', 'experiment')}[{','.join(f'{k}={v}' for k, v in overrides.items())}]"
    cfg = load_config(raw, base)
    rep = run_experiment(cfg, out)
    return {"overrides": overrides, "id": rep["id"], "passed": rep["passed"], "rows": rep["rows"]}


def _sweep_points(sweep: dict):
    keys = list(sweep)
    grids = [list(sweep[k]) for k in keys]
    if not keys or any(not g for g in grids):
        raise ConfigError("sweep: give a non-empty list per field")
    idx = np.indices([len(g) for g in grids]).reshape(len(keys), -1).T
    return [{k: grids[j][i[j]] for j, k in enumerate(keys)} for i in idx]


def workers() -> int:
    v = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(v)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer (got {v!r})") from None
    return max(1, n)


# ---------------------------------------------------------------- main

def _parser():
    ap = argparse.ArgumentParser(prog="enclosure", description="Travel-time extraction experiments.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("synthesize", "indicate", "extract", "verify", "sweep"):
        p = sub.add_parser(verb)
        p.add_argument("config")
        p.add_argument("--out", default=None)
        p.add_argument("--precision", choices=["plain", "double-double", "multiprecision"], default=None)
        if verb == "extract":
            p.add_argument("--curve", default=None, help="indicator CSV to read instead of recomputing")
    return ap


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.precision:
        cfg.precision = Precision.parse(args.precision).value
        cfg.source["precision"] = cfg.precision
    out = Path(args.out or cfg.output.get("dir", "out"))
    if args.verb == "synthesize":
        data, fld = build_data(cfg)
        if isinstance(data, ContinuousData):
            raise ConfigError("solver.method: exact data are analytic and cannot be written as samples")
        data = inject_noise(data, cfg.noise)
        atomic_write_text(out / "field.csv", _field_csv(fld, data))
        atomic_write_text(out / "data.csv", _data_csv(data))
        flux_csv = "t,g\n" + "".join(f"{t:.17g},{g:.17g}\n" for t, g in zip(data.times, data.observed_g))
        atomic_write_text(out / "flux.csv", flux_csv)
        return EXIT_PASS
    if args.verb == "indicate":
        data, _ = build_data(cfg)
        if isinstance(data, BoundaryData):
            data = inject_noise(data, cfg.noise)
        _, curves = _curves(cfg, data)
        for k, cv in enumerate(curves):
            cv.to_csv(out / f"curve_{k}.csv")
        return EXIT_PASS
    if args.verb == "extract" and args.curve:
        cv = IndicatorCurve.from_csv(args.curve, {"c": cfg.problem.c, "kind": cfg.problem.kind.value})
        ests = {}
        for name in cfg.estimators:
            if name == "raw":
                ests[name] = estimate_report(travel_time_raw(cv), _echo(cfg))
            elif name == "corrected":
                ests[name] = estimate_report(travel_time_corrected(cv, cfg.regressor), _echo(cfg))
            else:
                raise ConfigError(f"estimators: {name} needs flux transforms; run without --curve")
        atomic_write_text(out / "estimates.json", _dump_json(ests))
        return EXIT_PASS
    if args.verb in {"extract", "verify"}:
        rep = run_experiment(cfg, out)
        if args.verb == "verify" and rep["passed"] is False:
            return EXIT_FAIL
        return EXIT_PASS
    # sweep
    if not cfg.sweep:
        raise ConfigError("sweep: missing")
    points = _sweep_points(cfg.sweep)
    jobs = [(cfg.source, cfg.base_dir, pt, out / f"run_{i:03d}") for i, pt in enumerate(points)]
    n = workers()
    if n == 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(_sweep_one, jobs))
    atomic_write_text(out / "sweep.json", _dump_json(results))
    if cfg.tolerance and any(r["passed"] is False for r in results):
        return EXIT_FAIL
    return EXIT_PASS


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
