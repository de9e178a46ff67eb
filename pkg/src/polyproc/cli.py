"""Command-line interface: ``polyproc <command> [options]``.

Every command accepts ``--model``, ``--param``, ``--seed``, ``--out``,
``--format`` and ``--from-manifest``.  With ``--out`` a sidecar
``<out>.manifest.json`` records the resolved configuration so that
``--from-manifest`` reproduces the run.

Exit codes: 0 success, 2 user or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .generator import SpecError, build_matrix
from .models import Model, catalog_names, load_model
from .moments import GmmCondition, calibrate, harmonic_polynomial, mixed_moment, moment
from .montecarlo import MCConfig, estimate_cv, simulate, simulate_terminal
from .pricing import PolyClaim, fit_payoff, greeks, grid_sample, parse_payoff, pilot_fit, price
from .polybasis import PolyVector, enumerate_basis, monomial

EXIT_USER = 2
EXIT_NUMERIC = 3


class UserError(Exception):
    pass


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace("(", "").replace(")", "").split(",") if v.strip()]


def _index(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(v != int(v) or v < 0 for v in vals):
        raise UserError(f"multi-index entries must be nonnegative integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise UserError(f"--param expects key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


# ------------------------------------------------------------------ output


class Output:
    def __init__(self, args):
        self.args = args
        self.fmt = args.format

    def write(self, payload: dict, header: Sequence[str] | None = None, rows: Sequence[Sequence] | None = None):
        if self.fmt == "json" or rows is None:
            text = json.dumps(payload, indent=2, default=_json_default) + "\n"
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            if header:
                w.writerow(header)
            for r in rows:
                w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])
            text = buf.getvalue()
        if self.args.out:
            Path(self.args.out).write_text(text)
        else:
            sys.stdout.write(text)


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if hasattr(v, "to_json"):
        return v.to_json()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _write_manifest(args, argv: list[str], model: Model | None):
    if not args.out:
        return
    config = {k: v for k, v in vars(args).items() if k not in ("func", "from_manifest")}
    doc = {
        "command": args.command,
        "argv": argv,
        "config": config,
        "model": model.document() if model is not None and model.name != "custom" else None,
        "seed": args.seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    Path(str(args.out) + ".manifest.json").write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


# ---------------------------------------------------------------- helpers


def _model(args) -> Model:
    if not args.model:
        raise UserError(f"--model is required; catalog models: {', '.join(catalog_names())}")
    overrides = dict(_param(p) for p in args.param)
    return load_model(args.model, overrides or None)


def _start(args, model: Model) -> np.ndarray:
    x = np.asarray(_floats(args.x), dtype=float) if args.x else model.x0
    if x.size != model.n:
        raise UserError(f"--x needs {model.n} coordinates, got {x.size}")
    return x


def _cfg(args, paths: int | None = None) -> MCConfig:
    return MCConfig(paths or args.paths, args.steps, args.seed, args.workers)


def _claim_poly(args, model: Model) -> PolyVector:
    degree = args.degree
    basis = enumerate_basis(model.n, degree)
    if args.k:
        return monomial(basis, _index(args.k))
    payoff = parse_payoff(args.payoff)
    f = payoff.polynomial(basis, model.market)
    if f is None:
        raise UserError(f"payoff {args.payoff!r} is not a polynomial in the state; use 'fit' or 'compare-cv'")
    return f


def _poly_rows(p: PolyVector):
    return [["[" + ",".join(str(v) for v in k) + "]", c] for k, c in zip(p.basis, p.coeffs)]


# ---------------------------------------------------------------- commands


def cmd_generator(args, model: Model):
    A = build_matrix(model.spec, args.degree)
    if args.format == "json":
        Output(args).write(A.to_json())
    else:
        text = A.to_csv()
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)


def cmd_moment(args, model: Model):
    k = _index(args.k)
    value = moment(model.spec, k, args.t, _start(args, model))
    Output(args).write({"k": list(k), "t": args.t, "value": value}, ["value"], [[value]])


def cmd_mixed(args, model: Model):
    n_idx, m_idx = _index(args.n), _index(args.m)
    value = mixed_moment(model.spec, n_idx, m_idx, args.t, args.s, _start(args, model))
    Output(args).write({"n": list(n_idx), "m": list(m_idx), "t": args.t, "s": args.s, "value": value},
                       ["value"], [[value]])


def _prices_at(args, model: Model) -> np.ndarray:
    if args.s_t:
        s = np.asarray(_floats(args.s_t), dtype=float)
        if s.size != model.n:
            raise UserError(f"--s-t needs {model.n} coordinates, got {s.size}")
        return s
    return model.market.to_price(model.x0)


def _check_times(args):
    if not 0 <= args.t <= args.T:
        raise UserError(f"valuation time t={args.t} must lie in [0, T={args.T}]")


def cmd_price(args, model: Model):
    _check_times(args)
    claim = PolyClaim(_claim_poly(args, model), args.T)
    value = price(model.spec, claim, args.t, _prices_at(args, model), model.market)
    Output(args).write({"T": args.T, "t": args.t, "price": value}, ["price"], [[value]])


def cmd_greeks(args, model: Model):
    _check_times(args)
    claim = PolyClaim(_claim_poly(args, model), args.T)
    grad = greeks(model.spec, claim, args.t, _prices_at(args, model), model.market)
    Output(args).write({"T": args.T, "t": args.t, "gradient": grad.tolist()},
                       [f"d_{c}" for c in model.coords], [list(grad)])


def cmd_fit(args, model: Model):
    payoff = parse_payoff(args.payoff).bind(model.market)
    if args.sample == "pilot":
        fit = pilot_fit(model, payoff, args.degree, args.T, _cfg(args), pilot_paths=args.pilot_paths)
    else:
        lo, hi = _floats(args.grid_lo), _floats(args.grid_hi)
        if len(lo) != model.n or len(hi) != model.n:
            raise UserError(f"--grid-lo and --grid-hi need {model.n} coordinates")
        fit = fit_payoff(payoff, model.market, args.degree, grid_sample(lo, hi, args.grid_points))
    rows = _poly_rows(fit.poly)
    Output(args).write(fit.to_json(), ["monomial", "coefficient"], rows)


def cmd_simulate(args, model: Model):
    if model.sim is None:
        raise UserError("this model has no simulation face")
    res = simulate(model.sim, model.x0, args.T, _cfg(args))
    X = res.terminal
    payload = {"coords": list(model.coords), "terminals": X, "clamp_events": res.clamp_events}
    Output(args).write(payload, list(model.coords), X.tolist())


def cmd_compare_cv(args, model: Model):
    if model.sim is None:
        raise UserError("this model has no simulation face")
    payoff = parse_payoff(args.payoff).bind(model.market)
    cfg = _cfg(args)
    fit = pilot_fit(model, payoff, args.degree, args.T, cfg, pilot_paths=args.pilot_paths)
    exact = price(model.spec, PolyClaim(fit.poly, args.T), 0.0, model.market.to_price(model.x0), model.market)
    rows = []
    for b in range(args.batches):
        bcfg = replace(cfg, first_path=b * cfg.paths)
        X = simulate_terminal(model.sim, model.x0, args.T, bcfg)
        est = estimate_cv(payoff, model.market, fit.poly, exact, X, bcfg)
        rows.append([b, est.plain.mean, est.plain.stderr, est.mean, est.stderr, est.variance_ratio])
    header = ["batch", "plain_mean", "plain_se", "cv_mean", "cv_se", "variance_ratio"]
    payload = {"fit": fit.to_json(), "exact_control_mean": exact,
               "batches": [dict(zip(header, r)) for r in rows]}
    Output(args).write(payload, header, rows)


def _read_series(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise UserError(f"{path}: expected a header row and at least one data row")
    try:
        return np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise UserError(f"{path}: {exc}") from None


def _conditions(text: str) -> GmmCondition:
    if Path(text).is_file():
        return GmmCondition.from_json(json.loads(Path(text).read_text()))
    if text.strip().startswith("["):
        return GmmCondition.from_json(json.loads(text))
    terms = []
    for part in text.split(";"):
        if not part.strip():
            continue
        bits = part.split(":")
        if len(bits) != 3:
            raise UserError(f"condition {part!r} must read n:m:lag, e.g. '1:0:0'")
        terms.append((_index(bits[0]), _index(bits[1]), float(bits[2])))
    return GmmCondition(tuple(terms))


def cmd_calibrate(args, model: Model):
    data = _read_series(args.data)
    box = {}
    for item in args.box:
        try:
            name, rng = item.split("=", 1)
            lo, hi = (float(v) for v in rng.split(":"))
        except ValueError:
            raise UserError(f"--box expects name=lo:hi, got {item!r}") from None
        box[name.strip()] = (lo, hi)
    fixed = {k: v for k, v in (_param(p) for p in args.param) if k not in box}
    x = np.asarray(_floats(args.x), dtype=float) if args.x else None
    res = calibrate(_conditions(args.conditions), data, args.dt, box, model.name, fixed, x)
    rows = [[k, v] for k, v in res.params.items()] + [["objective", res.objective]]
    Output(args).write(res.to_json(), ["name", "value"], rows)


def cmd_harmonic(args, model: Model):
    f = _claim_poly(args, model)
    q = harmonic_polynomial(model.spec, f, args.s)
    Output(args).write({"s": args.s, **q.to_json()}, ["monomial", "coefficient"], _poly_rows(q))


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser):
    p.add_argument("--model", default=None,
                   help="catalog name, path to a JSON model document, or inline JSON")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="override a catalog parameter (value parsed as JSON when possible)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (a .manifest.json sidecar is written next to it)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--from-manifest", default=None, help="re-run the configuration stored in a manifest")
    p.add_argument("--workers", type=int, default=1)


def _mc(p: argparse.ArgumentParser, paths: int = 100_000):
    p.add_argument("--paths", type=int, default=paths)
    p.add_argument("--steps", type=int, default=400, help="Euler steps per unit time")


def _claim(p: argparse.ArgumentParser):
    p.add_argument("--payoff", default=None, help="'poly c0,c1,...' or 'power p' (polynomial in the state)")
    p.add_argument("--k", default=None, help="monomial claim x^k instead of --payoff")
    p.add_argument("--degree", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyproc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generator", help="generator matrix on the monomial basis")
    _common(p)
    p.add_argument("--degree", "-m", type=int, required=True)
    p.set_defaults(func=cmd_generator)

    p = sub.add_parser("moment", help="E[X_t^k]")
    _common(p)
    p.add_argument("--k", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", default=None, help="start point (default: model start point)")
    p.set_defaults(func=cmd_moment)

    p = sub.add_parser("mixed", help="E[X_t^n X_{t+s}^m]")
    _common(p)
    p.add_argument("--n", required=True)
    p.add_argument("--m", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--x", default=None)
    p.set_defaults(func=cmd_mixed)

    for name, func, helptext in (("price", cmd_price, "price of a polynomial claim"),
                                 ("greeks", cmd_greeks, "price gradient of a polynomial claim")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _claim(p)
        p.add_argument("--T", type=float, required=True)
        p.add_argument("--t", type=float, default=0.0)
        p.add_argument("--s-t", default=None, help="observed prices (default: prices at the model start point)")
        p.set_defaults(func=func)

    p = sub.add_parser("fit", help="polynomial fit of a payoff")
    _common(p)
    _mc(p)
    p.add_argument("--payoff", required=True, help="'call K', 'put K', 'power p' or 'poly c0,c1,...'")
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--sample", choices=("pilot", "grid"), default="pilot")
    p.add_argument("--pilot-paths", type=int, default=10_000)
    p.add_argument("--grid-lo", default=None)
    p.add_argument("--grid-hi", default=None)
    p.add_argument("--grid-points", type=int, default=21)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="terminal states of Euler paths (one row per path)")
    _common(p)
    _mc(p, 10_000)
    p.add_argument("--T", type=float, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare-cv", help="plain vs control-variate estimates over batches")
    _common(p)
    _mc(p)
    p.add_argument("--payoff", required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--pilot-paths", type=int, default=10_000)
    p.set_defaults(func=cmd_compare_cv)

    p = sub.add_parser("calibrate", help="GMM calibration of a catalog family")
    _common(p)
    p.add_argument("--data", required=True, help="CSV with a header row, one column per coordinate")
    p.add_argument("--dt", type=float, required=True, help="sampling interval of the series")
    p.add_argument("--conditions", required=True, help="'n:m:lag;...', JSON list or path to a JSON file")
    p.add_argument("--box", action="append", default=[], metavar="NAME=LO:HI", required=True)
    p.add_argument("--x", default=None, help="start point for conditional moments (default: stationary)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("harmonic", help="time-space harmonic polynomial Q(-s, .)")
    _common(p)
    _claim(p)
    p.add_argument("--s", type=float, required=True)
    p.set_defaults(func=cmd_harmonic)
    return parser


def _resolve_manifest(argv: list[str]) -> list[str]:
    if "--from-manifest" not in argv:
        return argv
    i = argv.index("--from-manifest")
    if i + 1 >= len(argv):
        raise KeyError("--from-manifest needs a path")
    doc = json.loads(Path(argv[i + 1]).read_text())
    replay = list(doc["argv"])
    if "--out" in argv:
        out = argv[argv.index("--out") + 1]
        if "--out" in replay:
            replay[replay.index("--out") + 1] = out
        else:
            replay += ["--out", out]
    return replay


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _resolve_manifest(argv)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_USER
    args = parser.parse_args(argv)
    try:
        model = _model(args)
        args.func(args, model)
        _write_manifest(args, argv, model)
    except SpecError as exc:
        print("error: model specification is invalid:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_USER
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UserError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    return 0


if __name__ == "__main__":
    sys.exit(main())
