"""Command-line front end.

Commands: ``simulate``, ``region``, ``bounds``, ``compare`` and ``bvp``.
Outputs are CSV or JSON and start with the fully resolved configuration, so
that every file can be regenerated.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bvp, chain, meanvalue, regions
from .model import (FIELD_NAMES, SYMMETRIC_FIELD_NAMES, ModelParams, ParameterError,
                    SymmetricParams)

log = logging.getLogger("ragnet")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# symmetric defaults for the figure-style studies
BOUNDS_DEFAULT = dict(lam=0.1, alpha=0.45, s=0.2, l_minus=0.8, l_plus=0.2)
BOUNDS_SWEEP = "alpha:0.3:0.6:31"
COMPARE_DEFAULT = dict(lam=0.1, alpha=0.6, s=0.1, l_minus=0.0, l_plus=1.0)
COMPARE_SWEEP = "lambda:0.01:0.2:20"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Sweep:
    name: str
    start: float
    stop: float
    steps: int

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"sweep must be NAME:START:STOP:STEPS, got {text!r}")
        name, a, b, n = parts
        try:
            start, stop, steps = float(a), float(b), int(n)
        except ValueError as exc:
            raise ConfigError(f"bad sweep {text!r}: {exc}") from None
        if steps < 2:
            raise ConfigError("sweep steps must be at least 2")
        return cls(name, start, stop, steps)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def to_dict(self) -> dict:
        return dict(name=self.name, start=self.start, stop=self.stop, steps=self.steps)


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    sweeps: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params,
                "sweeps": [s.to_dict() for s in self.sweeps], **self.extra}


# ---------------------------------------------------------------------------
# parameter handling


def _load_json(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("parameter file must hold a JSON object")
    return data


def _model_params(data: dict) -> ModelParams:
    if "lambda" in data:
        return SymmetricParams.from_dict(data).embed()
    return ModelParams.from_dict(data)


def _symmetric_params(data: dict) -> SymmetricParams:
    if "lambda" in data:
        return SymmetricParams.from_dict(data)
    return SymmetricParams.from_model(ModelParams.from_dict(data))


def _apply(params, name, value):
    """Set a swept field, keeping ``l_minus + l_plus = 1``."""
    if isinstance(params, SymmetricParams):
        key = {"lambda": "lam"}.get(name, name)
        if name not in SYMMETRIC_FIELD_NAMES:
            raise ConfigError(f"unknown parameter {name!r} for the symmetric system")
        return params.replace(**{key: value})
    if name not in FIELD_NAMES:
        raise ConfigError(f"unknown parameter {name!r}")
    changes = {name: value}
    for k in (1, 2):
        if name == f"l{k}_plus":
            changes[f"l{k}_minus"] = 1.0 - value
        elif name == f"l{k}_minus":
            changes[f"l{k}_plus"] = 1.0 - value
    return params.replace(**changes)


def _threads() -> int:
    raw = os.environ.get("RAGNET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"RAGNET_THREADS must be an integer, got {raw!r}") from None


def _pmap(fn, items):
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def _csv_text(config: ExperimentConfig, columns, rows) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _json_text(config: ExperimentConfig, payload) -> str:
    return json.dumps(_clean({"config": config.to_dict(), "result": payload}), indent=2,
                      sort_keys=True) + "\n"


def _emit(args, config, columns, rows, payload=None):
    if args.format == "json":
        text = _json_text(config, payload if payload is not None else rows)
    else:
        text = _csv_text(config, columns, rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def _require_params(args):
    if not args.params:
        raise ConfigError("--params is required for this command")
    return _load_json(args.params)


def cmd_simulate(args) -> None:
    base = _model_params(_require_params(args))
    sweeps = args.sweep or []
    if len(sweeps) > 1:
        raise ConfigError("simulate accepts at most one sweep")
    config = ExperimentConfig("simulate", base.to_dict(), sweeps, dict(
        slots=args.slots, burn_in=args.burn_in, seed=args.seed, dominant=args.dominant,
        global_malfunction=args.global_malfunction))
    if sweeps:
        sw = sweeps[0]
        xs = sw.values()
        seeds = np.random.SeedSequence(args.seed).generate_state(len(xs))
        jobs = [(float(x), _apply(base, sw.name, float(x)), int(s)) for x, s in zip(xs, seeds)]
    else:
        jobs = [(None, base, args.seed)]

    def run(job):
        x, p, seed = job
        st = chain.simulate(p, args.slots, args.burn_in, seed, dominant=args.dominant,
                            global_malfunction=args.global_malfunction)
        row = {"x": x, **st.to_dict()}
        return row

    rows = _pmap(run, jobs)
    columns = (["x"] if sweeps else []) + [k for k in rows[0] if k != "x"]
    payload = rows if sweeps else rows[0]
    _emit(args, config, columns, rows, payload)
    if args.plot and sweeps:
        from .plotting import plot_series

        plot_series([r["x"] for r in rows], {"mean_q1": [r["mean_q1"] for r in rows],
                                              "mean_q2": [r["mean_q2"] for r in rows]},
                    args.plot, xlabel=sweeps[0].name, ylabel="mean queue")


def _region_point_rows(base, sweeps, which):
    if sweeps:
        names = [s.name for s in sweeps]
        if not set(names) <= {"lambda1", "lambda2"}:
            raise ConfigError("point mode sweeps only lambda1 and lambda2")
        grids = {s.name: s.values() for s in sweeps}
        l1s = grids.get("lambda1", [base.lambda1])
        l2s = grids.get("lambda2", [base.lambda2])
        points = [(float(a), float(b)) for a, b in itertools.product(l1s, l2s)]
    else:
        points = [(base.lambda1, base.lambda2)]
    rows = []
    for l1, l2, member, via, m1, m2, m3, m4, verdict in regions.verdict_rows(points, base, which):
        rows.append(dict(lambda1=l1, lambda2=l2, member=member, via=via, margin1=m1,
                         margin2=m2, margin3=m3, margin4=m4, verdict=verdict))
    return rows


def cmd_region(args) -> None:
    base = _model_params(_require_params(args))
    which = [args.which] if args.which else ["stability", "throughput"]
    config = ExperimentConfig("region", base.to_dict(), args.sweep or [], dict(
        mode=args.mode, which=which, resolution=args.resolution,
        alpha_resolution=args.alpha_resolution, lambda_resolution=args.lambda_resolution))
    if args.mode == "point":
        if len(which) != 1:
            which = ["stability"]
            config.extra["which"] = which
        rows = _region_point_rows(base, args.sweep, which[0])
        _emit(args, config, list(regions.CSV_COLUMNS), rows)
        return
    curves = {}
    rows = []
    if args.mode == "boundary":
        for w in which:
            pts = regions.trace_boundary(base, w, args.resolution)
            curves[w] = pts
            rows += [dict(series=w, lambda1=a, lambda2=b) for a, b in pts]
        columns = ["series", "lambda1", "lambda2"]
    elif args.mode == "closure":
        for w in which:
            lams, grid = regions.region_closure(base, w, args.alpha_resolution,
                                                args.lambda_resolution)
            edge = regions.closure_boundary(lams, grid)
            keep = ~np.isnan(edge)
            curves[w] = np.column_stack([edge[keep], lams[keep]])
            rows += [dict(series=w, lambda2=l2, lambda1_edge=e) for l2, e in zip(lams, edge)]
        columns = ["series", "lambda2", "lambda1_edge"]
    else:
        raise ConfigError(f"unknown mode {args.mode!r}")
    _emit(args, config, columns, rows)
    if args.plot:
        from .plotting import plot_region_curves

        plot_region_curves(curves, args.plot, title=f"{args.mode}: s1={base.s1}, s2={base.s2}")


def _symmetric_base(args, default):
    if args.params:
        return _symmetric_params(_load_json(args.params))
    return SymmetricParams(**default)


def _oracle_L(p: SymmetricParams, N: int):
    return chain.truncated_stationary(p.embed(), N).stats.mean_q1


def _bounds_row(p: SymmetricParams, closure, oracle, N):
    stable, _ = meanvalue.symmetric_stability(p)
    row = dict(stable=stable, L_low=None, L_up=None, L_oracle=None)
    if stable:
        b = meanvalue.queue_bounds(p, closure)
        row.update(L_low=b.L_low, L_up=b.L_up)
        if oracle:
            row["L_oracle"] = _oracle_L(p, N)
    return row


def cmd_bounds(args) -> None:
    base = _symmetric_base(args, BOUNDS_DEFAULT)
    sweeps = args.sweep or [Sweep.parse(BOUNDS_SWEEP)]
    if len(sweeps) != 1:
        raise ConfigError("bounds takes exactly one sweep")
    sw = sweeps[0]
    config = ExperimentConfig("bounds", base.to_dict(), sweeps, dict(
        closure=args.closure, oracle=args.oracle, N=args.N))
    points = [(float(x), _apply(base, sw.name, float(x))) for x in sw.values()]
    rows = _pmap(lambda t: {"x": t[0], **_bounds_row(t[1], args.closure, args.oracle, args.N)},
                 points)
    columns = ["x", "stable", "L_low", "L_up"] + (["L_oracle"] if args.oracle else [])
    _emit(args, config, columns, rows)
    if args.plot:
        from .plotting import plot_series

        series = {"L_low": [r["L_low"] for r in rows], "L_up": [r["L_up"] for r in rows]}
        if args.oracle:
            series["L_oracle"] = [r["L_oracle"] for r in rows]
        plot_series([r["x"] for r in rows], _nan(series), args.plot, xlabel=sw.name)


def _nan(series):
    return {k: [np.nan if v is None else v for v in vs] for k, vs in series.items()}


def cmd_compare(args) -> None:
    ragn = _symmetric_base(args, COMPARE_DEFAULT)
    aloha = ragn.replace(s=0.0)
    sweeps = args.sweep or [Sweep.parse(COMPARE_SWEEP)]
    if len(sweeps) != 1:
        raise ConfigError("compare takes exactly one sweep")
    sw = sweeps[0]
    config = ExperimentConfig("compare", ragn.to_dict(), sweeps, dict(
        baseline=aloha.to_dict(), closure=args.closure, oracle=args.oracle, N=args.N))

    def run(x):
        a = _bounds_row(_apply(aloha, sw.name, x), args.closure, args.oracle, args.N)
        r = _bounds_row(_apply(ragn, sw.name, x), args.closure, args.oracle, args.N)
        row = {"x": x}
        for tag, d in (("aloha", a), ("ragn", r)):
            row.update({f"{tag}_{k}": v for k, v in d.items()})
        for k in ("L_low", "L_up", "L_oracle"):
            if a[k] is not None and r[k] is not None:
                row[f"diff_{k}"] = r[k] - a[k]
        return row

    rows = _pmap(run, [float(x) for x in sw.values()])
    keys = ["stable", "L_low", "L_up"] + (["L_oracle"] if args.oracle else [])
    columns = (["x"] + [f"aloha_{k}" for k in keys] + [f"ragn_{k}" for k in keys]
               + [f"diff_{k}" for k in keys if k != "stable"])
    _emit(args, config, columns, rows)
    if args.plot:
        from .plotting import plot_series

        key = "L_oracle" if args.oracle else "L_low"
        plot_series([r["x"] for r in rows],
                    _nan({f"aloha {key}": [r.get(f"aloha_{key}") for r in rows],
                          f"ragn {key}": [r.get(f"ragn_{key}") for r in rows]}),
                    args.plot, xlabel=sw.name)


def cmd_bvp(args) -> None:
    p = _symmetric_params(_require_params(args))
    config = ExperimentConfig("bvp", p.to_dict(), [], dict(M=args.M))
    sol = bvp.solve_riemann(p, args.M)
    payload = sol.to_dict()
    row = {k: (v["re"] if isinstance(v, dict) else v) for k, v in payload.items()}
    if args.format == "csv":
        _emit(args, config, list(row), [row])
    else:
        _emit(args, config, None, None, payload)
    if args.plot:
        from .plotting import plot_region_curves

        g = sol.grid
        plot_region_curves({"contour S1": np.column_stack([g.x.real, g.x.imag])}, args.plot,
                           title="kernel contour")


# ---------------------------------------------------------------------------
# parser


def _count(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != int(v) or v < 0:
        raise argparse.ArgumentTypeError(f"not a nonnegative integer: {text!r}")
    return int(v)


def _sweep(text: str) -> Sweep:
    try:
        return Sweep.parse(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ragnet", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", metavar="FILE", help="JSON parameter file")
    common.add_argument("--out", metavar="FILE", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--plot", metavar="FILE", help="also render a figure to FILE")
    common.add_argument("--sweep", type=_sweep, action="append",
                        metavar="NAME:START:STOP:STEPS")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--slots", type=_count, default=1_000_000)
    common.add_argument("--burn-in", type=_count, default=10_000)
    common.add_argument("--dominant", choices=("R1", "R2"))
    common.add_argument("--mode", choices=("point", "boundary", "closure"), default="point")
    common.add_argument("--which", choices=("stability", "throughput"))
    common.add_argument("--oracle", action="store_true", help="add truncated-chain values")
    common.add_argument("--N", type=_count, default=64, help="initial truncation level")
    common.add_argument("--M", type=_count, default=None,
                        help="circle nodes (default: refine automatically)")
    common.add_argument("--global-malfunction", action="store_true")
    common.add_argument("--closure", choices=("exact", "dominant"), default="exact",
                        help="transfer-rate closure used by the bounds")
    common.add_argument("--resolution", type=_count, default=101)
    common.add_argument("--alpha-resolution", type=_count, default=101)
    common.add_argument("--lambda-resolution", type=_count, default=101)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("simulate", cmd_simulate, "Monte-Carlo estimates of the stationary quantities"),
        ("region", cmd_region, "stability and throughput region membership and boundaries"),
        ("bounds", cmd_bounds, "mean queue-length bounds over a parameter sweep"),
        ("compare", cmd_compare, "signals versus the plain collision channel"),
        ("bvp", cmd_bvp, "stationary metrics from the boundary value problem"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (bvp.BvpError, chain.TruncationError, meanvalue.UnstableError,
            regions.SaturatedCompanionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
