"""Command-line front end: ``poisson-eiv {fit,bias,simulate,generate}``.

Exit codes: 0 success, 2 bad input (parse, domain or configuration
errors), 3 estimation failure (non-convergence, infeasible correction,
all-zero counts, degenerate moments).  Diagnostics go to stderr only.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bias import EivModel, naive_limit
from .corrected import correct_estimate, fit_nuisance
from .dists import DegenerateZero, Dist, Gamma, Normal, parse_law
from .errors import (
    AllZeroCountsError,
    ConfigError,
    DegenerateMomentError,
    DomainError,
    EivError,
    InvalidDatasetError,
    NoRootError,
    NonConvergenceError,
    SimulationError,
)
from .naive import Dataset, ModelParams, fit_naive
from .simulation import TABLE_COLUMNS, SimConfig, compare_with_theory, run_monte_carlo

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("poisson_eiv")

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION = 0, 2, 3
SCHEMA_VERSION = 1
BUNDLED_SCENARIOS = ("case1", "case2")

_ESTIMATION_ERRORS = (
    AllZeroCountsError,
    NonConvergenceError,
    DegenerateMomentError,
    NoRootError,
    SimulationError,
    OverflowError,
)


class InputError(EivError):
    """Malformed command-line input or input file."""


class InfeasibleCorrection(EivError):
    pass


# ---------------------------------------------------------------- output


def fmt17(v: float) -> str:
    return f"{v:.17g}"


_FLOAT_TAG = re.compile(r'"@@f:([^"@]*)@@"')


def _tag_floats(obj):
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return f"@@f:{fmt17(v)}@@" if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps_report(obj) -> str:
    """JSON text with every float written at 17 significant digits (non-finite as null)."""
    text = json.dumps(_tag_floats(obj), indent=2)
    return _FLOAT_TAG.sub(lambda m: m.group(1), text) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _params(p: ModelParams) -> dict:
    return {"beta0": p.beta0, "beta1": p.beta1}


def _law(d: Dist) -> dict:
    if isinstance(d, Gamma):
        return {"family": "gamma", "k": d.k, "lambda": d.lam}
    if isinstance(d, Normal):
        return {"family": "normal", "mu": d.mu, "sigma2": d.var}
    if isinstance(d, DegenerateZero):
        return {"family": "degenerate"}
    return {"family": str(d)}


# ---------------------------------------------------------------- inputs


def _parse_law_arg(text: str, partial: bool = False) -> Dist | str:
    """Full law spec, or in ``partial`` mode a bare family or family with shape."""
    try:
        return parse_law(text)
    except DomainError as exc:
        if partial:
            parts = text.strip().lower().split(":")
            if parts[0] in ("gamma", "normal") and len(parts) <= 2:
                return text.strip().lower()
        raise InputError(str(exc)) from None


def _partial_error_law(spec: Dist | str, error_param: float | None) -> Dist:
    """Error law template for moment estimation from a possibly partial spec."""
    if isinstance(spec, Dist):
        return spec
    parts = spec.split(":")
    try:
        first = float(parts[1]) if len(parts) == 2 else None
    except ValueError:
        raise InputError(f"bad law spec {spec!r}") from None
    if parts[0] == "normal":
        if error_param is None:
            raise InputError("normal error needs a variance: normal:mu:sigma2 or --error-param")
        return Normal(first if first is not None else 0.0, error_param)
    k2 = first if first is not None else error_param
    if k2 is None:
        raise InputError("gamma error needs a shape: gamma:k2 or --error-param")
    return Gamma(k2, 1.0)


def read_dataset(path: str) -> Dataset:
    """Read a UTF-8 CSV with header ``y,w`` (LF or CRLF line endings)."""
    try:
        with open(path, encoding="utf-8-sig", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows or [c.strip().lower() for c in rows[0]] != ["y", "w"]:
        raise InputError(f"{path}: expected header 'y,w'")
    ys, ws = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise InputError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            yv, wv = float(row[0]), float(row[1])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
        if not (math.isfinite(yv) and yv >= 0 and yv == int(yv)):
            raise InputError(f"{path}:{lineno}: y must be a non-negative integer, got {row[0]!r}")
        ys.append(int(yv))
        ws.append(wv)
    try:
        return Dataset(np.array(ys, dtype=np.int64), np.array(ws))
    except InvalidDatasetError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_dataset(path: str, data: Dataset) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["y", "w"])
        for y, w in zip(data.y, data.w):
            wr.writerow([int(y), fmt17(float(w))])


def _load_scenario_text(ref: str) -> tuple[str, str]:
    if ref in BUNDLED_SCENARIOS:
        text = resources.files("poisson_eiv.scenarios").joinpath(f"{ref}.toml").read_text("utf-8")
        return ref, text
    p = Path(ref)
    try:
        return p.stem, p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read scenario file {ref}: {exc}") from None


def load_scenarios(ref: str, overrides: dict | None = None) -> tuple[str, list[SimConfig]]:
    """Parse a scenario file into simulation configs.

    Top-level keys act as defaults for every ``[[scenario]]`` table; see
    the README for the grammar.
    """
    name, text = _load_scenario_text(ref)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"scenario {ref}: {exc}") from None
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(
            f"scenario {ref}: schema_version must be {SCHEMA_VERSION}, "
            f"got {doc.get('schema_version')!r}"
        )
    name = doc.get("name", name)
    tables = doc.get("scenario")
    if not tables:
        raise InputError(f"scenario {ref}: no [[scenario]] tables")
    defaults = {k: v for k, v in doc.items() if k not in ("scenario", "schema_version", "name")}
    configs = []
    for i, tab in enumerate(tables):
        merged = {**defaults, **tab, **(overrides or {})}
        try:
            configs.append(_scenario_config(merged, i))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, EivError):
                raise
            raise InputError(f"scenario {ref} entry {i}: {exc!r}") from None
    return name, configs


def _scenario_config(d: dict, index: int) -> SimConfig:
    allowed = {"label", "x", "u", "beta", "n", "mc", "seed", "nuisance", "error_param"}
    unknown = set(d) - allowed
    if unknown:
        raise InputError(f"scenario entry {index}: unknown keys {sorted(unknown)}")
    if "seed" not in d:
        raise InputError(f"scenario entry {index}: seed is required")
    x = _parse_law_arg(str(d["x"]))
    u = _parse_law_arg(str(d["u"]))
    b = d["beta"]
    if len(b) != 2:
        raise InputError(f"scenario entry {index}: beta must be [beta0, beta1]")
    mode = d.get("nuisance", "known")
    err = d.get("error_param")
    if mode == "moment" and err is None:
        if isinstance(u, Normal):
            err = u.var
        elif isinstance(u, Gamma):
            err = u.k
    return SimConfig(
        model=EivModel(x, u, ModelParams(float(b[0]), float(b[1]))),
        n=int(d["n"]),
        mc=int(d["mc"]),
        seed=int(d["seed"]),
        nuisance_mode=mode,
        error_known_param=None if err is None else float(err),
        label=str(d.get("label", f"scenario{index}")),
    )


# ---------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    data = read_dataset(args.csv)
    try:
        naive = fit_naive(data, tol=args.tol, max_iter=args.max_iter)
    except NonConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_ESTIMATION
    report = {
        "n": data.n,
        "naive": {
            **_params(naive.params),
            "iterations": naive.iterations,
            "converged": naive.converged,
            "score_norm": naive.score_norm,
        },
    }
    if args.correct:
        if args.x is None or args.u is None:
            raise InputError("--correct needs --x and --u")
        moment = args.nuisance == "moment"
        x_spec = _parse_law_arg(args.x, partial=moment)
        u_spec = _parse_law_arg(args.u, partial=moment)
        if moment:
            if not (isinstance(x_spec, Gamma) or x_spec == "gamma"):
                raise InputError("moment estimation assumes a gamma covariate (--x gamma)")
            u_tmpl = _partial_error_law(u_spec, args.error_param)
            x, u = fit_nuisance(data.w, u_tmpl, args.error_param)
        else:
            if isinstance(x_spec, str) or isinstance(u_spec, str):
                raise InputError("known nuisance mode needs fully specified laws")
            x, u = x_spec, u_spec
        try:
            corr = correct_estimate(naive, x, u)
        except DomainError as exc:
            raise InfeasibleCorrection(str(exc)) from None
        report["corrected"] = {**_params(corr.params), **corr.diagnostics}
        report["nuisance"] = {"mode": args.nuisance, "x": _law(x), "u": _law(u)}
    _emit(dumps_report(report), args.out)
    return EXIT_OK


def cmd_bias(args) -> int:
    if args.beta is not None:
        b0, b1 = args.beta
    else:
        if args.beta1 is None:
            raise InputError("give --beta B0 B1 or --beta1")
        b0, b1 = args.beta0, args.beta1
    x = _parse_law_arg(args.x)
    u = _parse_law_arg(args.u)
    model = EivModel(x, u, ModelParams(b0, b1))
    rep = naive_limit(model)
    doc = {
        "x": _law(x),
        "u": _law(u),
        "beta": {"beta0": b0, "beta1": b1},
        "b": _params(rep.b),
        "asy_bias": {"beta0": rep.bias[0], "beta1": rep.bias[1]},
        "asy_mse": {"beta0": rep.asy_mse[0], "beta1": rep.asy_mse[1]},
    }
    _emit(dumps_report(doc), args.out)
    return EXIT_OK


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(TABLE_COLUMNS)
    for r in rows:
        wr.writerow([fmt17(r[c]) if isinstance(r[c], float) else r[c] for c in TABLE_COLUMNS])
    return buf.getvalue()


def table_human(rows: list[dict]) -> str:
    head = ("scenario", "estimator", "Asy.Bias b0", "BIAS b0", "Asy.Bias b1", "BIAS b1",
            "Asy.MSE b0", "MSE b0", "Asy.MSE b1", "MSE b1")
    keys = TABLE_COLUMNS[:10]
    body = [[r[k] if isinstance(r[k], str) else f"{r[k]:.4g}" for k in keys] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    overrides = {}
    for key in ("seed", "n", "mc"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    name, configs = load_scenarios(args.scenario, overrides)
    rows, reports = [], []
    for cfg in configs:
        rep = run_monte_carlo(cfg, workers=args.threads)
        rows.extend(compare_with_theory(cfg, rep))
        reports.append({
            "label": cfg.label,
            "x": _law(cfg.model.x),
            "u": _law(cfg.model.u),
            "beta": _params(cfg.model.beta),
            "n": cfg.n,
            "mc": cfg.mc,
            "seed": cfg.seed,
            "nuisance": cfg.nuisance_mode,
            "error_param": cfg.error_known_param,
            "theory": {
                "b": _params(rep.theory.b),
                "asy_bias": list(rep.theory.bias),
                "asy_mse": list(rep.theory.asy_mse),
            },
            "bias_naive": rep.bias_naive.tolist(),
            "bias_corrected": rep.bias_corrected.tolist(),
            "mse_naive": rep.mse_naive.tolist(),
            "mse_corrected": rep.mse_corrected.tolist(),
            "se_naive": rep.se_naive.tolist(),
            "se_corrected": rep.se_corrected.tolist(),
            "replications_used": rep.replications_used,
            "failed_replications": rep.failed_replications,
            "failure_reasons": rep.failure_reasons,
        })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.csv").write_text(table_csv(rows), encoding="utf-8")
    (out / f"{name}.json").write_text(
        dumps_report({"schema_version": SCHEMA_VERSION, "name": name, "scenarios": reports}),
        encoding="utf-8",
    )
    sys.stdout.write(table_human(rows))
    return EXIT_OK


def cmd_generate(args) -> int:
    """Write one simulated dataset as CSV (handy for trying ``fit``)."""
    from .simulation import generate_dataset, replication_rng

    x = _parse_law_arg(args.x)
    u = _parse_law_arg(args.u)
    model = EivModel(x, u, ModelParams(*args.beta))
    data = generate_dataset(model, args.n, replication_rng(args.seed, 0))
    write_dataset(args.out, data)
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="poisson-eiv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="naive (and optionally corrected) fit of a y,w CSV")
    f.add_argument("csv")
    f.add_argument("--x", help="covariate law, e.g. gamma:2:1.2 (or just 'gamma' with --nuisance moment)")
    f.add_argument("--u", help="error law, e.g. normal:0:0.5 or gamma:0.72:1.2")
    f.add_argument("--correct", action="store_true", help="also report the corrected estimate")
    f.add_argument("--nuisance", choices=("known", "moment"), default="known")
    f.add_argument("--error-param", type=float, help="known error variance (normal) or shape (gamma)")
    f.add_argument("--tol", type=float, default=1e-10)
    f.add_argument("--max-iter", type=int, default=100)
    f.add_argument("--out", help="write the JSON report here instead of stdout")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bias", help="asymptotic bias and MSE of the naive estimator")
    b.add_argument("--x", required=True)
    b.add_argument("--u", default="degenerate")
    b.add_argument("--beta", type=float, nargs=2, metavar=("B0", "B1"))
    b.add_argument("--beta0", type=float, default=0.0)
    b.add_argument("--beta1", type=float)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bias)

    s = sub.add_parser("simulate", help="Monte Carlo study from a scenario file")
    s.add_argument("scenario", help=f"TOML scenario file or bundled name {BUNDLED_SCENARIOS}")
    s.add_argument("--out", default="sim_out", help="output directory (default: sim_out)")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--seed", type=int, help="override the scenario seed")
    s.add_argument("--n", type=int, help="override the sample size")
    s.add_argument("--mc", type=int, help="override the replication count")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate", help="write one simulated y,w dataset")
    g.add_argument("--x", required=True)
    g.add_argument("--u", required=True)
    g.add_argument("--beta", type=float, nargs=2, required=True, metavar=("B0", "B1"))
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InfeasibleCorrection, *_ESTIMATION_ERRORS) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ESTIMATION
    except (InputError, DomainError, ConfigError, InvalidDatasetError, ValueError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
