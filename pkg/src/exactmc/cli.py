"""Command-line front end.

Subcommands: constants, factory-bench, tau-sample, draw, oracle-compare,
contour.  Tabular output is CSV (RFC 4180 quoting, floats at 17
significant digits); run manifests are JSON.  Everything that affects
results is a flag; with a fixed seed the CSV outputs are byte-identical
across runs and across worker counts.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from typing import Any, Callable, Sequence, TextIO

import numpy as np
from scipy import stats

from . import __version__, _rng
from .bounds import TailBound, make_tail_bound, scale_a
from .factory import BernoulliBitSource, FactoryParams, initial_power, run_factory
from .model_gibbs import DEFAULT_BETA as GIBBS_BETA
from .model_gibbs import GibbsModel
from .model_mh import MhExpModel, beta_star_grid
from .model_ranef import DEFAULT_BETA as RANEF_BETA
from .model_ranef import RanefModel
from .sampler import DrawRecord, SamplerConfig, exact_draw

DEFAULT_KAPPA = 1.25


def fmt(x: float) -> str:
    """Lossless-enough float formatting: 17 significant digits."""
    return f"{float(x):.17g}"


def _write_csv(out: TextIO, header: Sequence[str],
               rows: Sequence[Sequence[Any]]) -> None:
    writer = csv.writer(out)
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [fmt(v) if isinstance(v, float) else v for v in row]
        )


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit_csv(path: str | None, header: Sequence[str],
              rows: Sequence[Sequence[Any]]) -> None:
    out, close = _open_out(path)
    try:
        _write_csv(out, header, rows)
    finally:
        if close:
            out.close()


# ---------------------------------------------------------------------------
# model registry
# ---------------------------------------------------------------------------

MODEL_PARAM_KEYS = {
    "mh": ("c", "gamma"),
    "gibbs": ("ybar", "s2", "m", "lam", "d"),
    "ranef": ("alpha1", "alpha2", "beta1", "beta2", "K_offset",
              "delta1", "delta2", "lam"),
}


def build_model(name: str, params: dict[str, Any]):
    kwargs = {k: v for k, v in params.items()
              if k in MODEL_PARAM_KEYS[name] and v is not None}
    if name == "mh":
        return MhExpModel(**kwargs)
    if name == "gibbs":
        if "m" in kwargs:
            kwargs["m"] = int(kwargs["m"])
        return GibbsModel(**kwargs)
    if name == "ranef":
        return RanefModel(**kwargs)
    raise ValueError(f"unknown model {name!r}")


def default_beta(name: str, model) -> float:
    if name == "mh":
        return model.default_beta()
    return GIBBS_BETA if name == "gibbs" else RANEF_BETA


def model_constants(name: str, model) -> dict[str, float]:
    """All derived constants specific to the model (before the tail bound)."""
    if name == "mh":
        spec = model.drift_spec()
        return {
            "c": model.c, "gamma": model.gamma, "lambda": spec.lam,
            "b": spec.b, "epsilon": spec.epsilon, "A_sup": spec.A_sup,
        }
    if name == "gibbs":
        return {
            "ybar": model.ybar, "s2": model.s2, "m": float(model.m),
            "lambda": model.lam, "b": model.b, "d": model.d_eff,
            "theta_star": model.theta_star, "epsilon": model.epsilon,
            "A_sup": model.A_sup,
        }
    return {
        "alpha1": model.alpha1, "alpha2": model.alpha2,
        "beta1": model.beta1, "beta2": model.beta2,
        "K": model.K_offset, "delta1": model.delta1,
        "delta2": model.delta2, "lambda": model.lam,
        "Delta2": model.Delta2, "lambda_star": model.lambda_star,
        "b": model.b, "d": model.d, "A_sup": model.A_sup,
        "sigma_phi_star": model.sigma_phi_star,
        "sigma_e_star": model.sigma_e_star, "epsilon": model.epsilon,
    }


def draw_columns(name: str) -> list[str]:
    if name == "mh":
        return ["x"]
    if name == "gibbs":
        return ["theta", "mu"]
    return ["sigma2_phi", "sigma2_e", "mu"]


def draw_values(name: str, value) -> list[float]:
    if name == "mh":
        return [float(value)]
    if name == "gibbs":
        return [float(value[0]), float(value[1])]
    (s2phi, s2e), (mu, _phi) = value
    return [float(s2phi), float(s2e), float(mu)]


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def run_manifest(
    command: str,
    model_name: str | None,
    model,
    bound: TailBound | None,
    seed: int | None,
    worker_count: int,
    budgets: dict[str, Any],
    started: float,
    extra: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Everything needed to reproduce the run bit-exactly.

    Timestamps live only here, never in the CSVs, so data outputs stay
    byte-identical across repeat runs.
    """
    manifest: dict[str, Any] = {
        "toolkit_version": __version__,
        "command": command,
        "seed": seed,
        "worker_count": worker_count,
        "budgets": budgets,
        "started_unix": started,
        "finished_unix": time.time(),
    }
    if model_name is not None:
        manifest["model"] = model_name
        manifest["model_constants"] = {
            k: fmt(v) for k, v in model_constants(model_name, model).items()
        }
    if bound is not None:
        manifest["tail_bound"] = {
            k: fmt(v) for k, v in bound.constants().items()
        }
    if extra:
        manifest.update(extra)
    return manifest


def _write_manifest(path: str | None, manifest: dict[str, Any]) -> None:
    if path is None:
        return
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_constants(args: argparse.Namespace) -> int:
    started = time.time()
    params = _model_params(args)
    model = build_model(args.model, params)
    beta = args.beta if args.beta is not None else default_beta(
        args.model, model)
    bound = make_tail_bound(model.drift_spec(), beta, args.kappa)
    consts = model_constants(args.model, model)
    consts.update(bound.constants())

    rows = [(k, v) for k, v in consts.items()]
    _emit_csv(args.out, ["constant", "value"], rows)

    if args.table_max_n > 0:
        table = []
        fparams_cache: dict[float, int] = {}
        r = 1.0 - 1.0 / bound.beta
        for n in range(1, args.table_max_n + 1):
            p_n = r * (1.0 - r) ** (n - 1)
            a_n = scale_a(bound, n)
            if a_n > 1.0:
                fp = FactoryParams(scale_a=a_n, omega=args.omega,
                                   delta_smooth=args.delta)
                minimum = initial_power(fp)
            else:
                minimum = 0
            table.append((n, p_n, a_n, minimum))
        _emit_csv(args.table_out, ["n", "p_n", "a_n", "factory_minimum"],
                  table)

    manifest = run_manifest(
        "constants", args.model, model, bound, None, 1,
        {}, started, extra={"beta": fmt(beta), "kappa": fmt(args.kappa)},
    )
    _write_manifest(args.manifest, manifest)
    return 0


def cmd_factory_bench(args: argparse.Namespace) -> int:
    started = time.time()
    a_list = [float(v) for v in args.a.split(",")]
    p_list = [float(v) for v in args.p.split(",")]
    rows = []
    skipped = []
    for a in a_list:
        for p in p_list:
            if a * p > 1.0 - args.omega:
                print(
                    f"warning: skipping (a={a}, p={p}): "
                    f"a*p = {a * p} > 1 - omega = {1.0 - args.omega}",
                    file=sys.stderr,
                )
                skipped.append((a, p))
                continue
            fparams = FactoryParams(
                scale_a=a, omega=args.omega, delta_smooth=args.delta,
                max_budget=args.budget,
            )
            consumed = np.empty(args.reps, dtype=np.int64)
            ones = 0
            for rep in range(args.reps):
                bit_rng = _rng.substream(args.seed, _rng.DOMAIN_BENCH,
                                         0, rep)
                g0_rng = _rng.substream(args.seed, _rng.DOMAIN_BENCH,
                                        1, rep)
                source = BernoulliBitSource(p, bit_rng)
                result = run_factory(fparams, source, g0_rng)
                consumed[rep] = result.consumed
                ones += result.bit or 0
            rows.append((
                a, p, args.reps, int(consumed.min()),
                float(consumed.mean()), float(consumed.std(ddof=1)),
                ones / args.reps,
            ))
    _emit_csv(args.out,
              ["a", "p", "reps", "min_consumed", "mean_consumed",
               "sd_consumed", "empirical_prob_one"],
              rows)
    manifest = run_manifest(
        "factory-bench", None, None, None, args.seed, 1,
        {"factory_budget": args.budget}, started,
        extra={"a_list": a_list, "p_list": p_list, "reps": args.reps,
               "omega": fmt(args.omega), "delta": fmt(args.delta),
               "skipped": skipped},
    )
    _write_manifest(args.manifest, manifest)
    return 0


def cmd_tau_sample(args: argparse.Namespace) -> int:
    started = time.time()
    params = _model_params(args)
    model = build_model(args.model, params)
    rng = _rng.substream(args.seed, _rng.DOMAIN_TAU, 0, 0, 0)
    taus = model.tau_values(rng, args.count)
    rows = [(i, int(t)) for i, t in enumerate(taus)]
    _emit_csv(args.out, ["index", "tau"], rows)
    manifest = run_manifest(
        "tau-sample", args.model, model, None, args.seed, 1, {}, started,
        extra={"count": args.count,
               "tau_mean": fmt(float(np.mean(taus))),
               "tau_max": int(np.max(taus))},
    )
    _write_manifest(args.manifest, manifest)
    return 0


def _load_checkpoint(path: str | None) -> dict[str, Any] | None:
    if path is None:
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        return None


def cmd_draw(args: argparse.Namespace) -> int:
    started = time.time()
    params = _model_params(args)
    model = build_model(args.model, params)
    beta = args.beta if args.beta is not None else default_beta(
        args.model, model)
    bound = make_tail_bound(model.drift_spec(), beta, args.kappa)
    config = SamplerConfig(
        bound=bound, seed=args.seed, worker_count=args.workers,
        factory_budget=args.factory_budget, tau_budget=args.tau_budget,
    )

    # Draws are independently addressed by draw_index, so resuming from a
    # checkpoint replays nothing and changes nothing: bit-exact by
    # construction.
    records: list[DrawRecord] = []
    rows: list[list[Any]] = []
    telemetry: list[list[Any]] = []
    start_index = 0
    ck = _load_checkpoint(args.checkpoint)
    if ck is not None:
        if ck.get("seed") != args.seed or ck.get("model") != args.model:
            print("error: checkpoint does not match this run", file=sys.stderr)
            return 1
        start_index = int(ck["completed"])
        rows = ck["rows"]
        telemetry = ck["telemetry"]

    value_cols = draw_columns(args.model)
    abandoned_count = 0
    for k in range(start_index, args.count):
        rec = exact_draw(config, model, k)
        records.append(rec)
        if rec.abandoned:
            abandoned_count += 1
            rows.append([k, 0] + [""] * len(value_cols))
        else:
            rows.append([k, rec.accepted_T]
                        + [fmt(v) for v in draw_values(args.model, rec.value)])
        telemetry.append([
            k, int(rec.abandoned), rec.accepted_T, rec.proposals_tried,
            rec.tau_consumed, rec.factory_invocations, rec.qn_restarts,
            fmt(rec.wall_time),
        ])
        if args.checkpoint and (k + 1) % args.checkpoint_every == 0:
            with open(args.checkpoint, "w") as fh:
                json.dump({"seed": args.seed, "model": args.model,
                           "completed": k + 1, "rows": rows,
                           "telemetry": telemetry}, fh)
    abandoned_count += sum(1 for row in rows[:start_index] if row[1] == 0)

    _emit_csv(args.out, ["draw", "T_star"] + value_cols, rows)
    if args.telemetry:
        _emit_csv(args.telemetry,
                  ["draw", "abandoned", "accepted_T", "proposals",
                   "tau_consumed", "factory_invocations", "qn_restarts",
                   "wall_time"],
                  telemetry)
    manifest = run_manifest(
        "draw", args.model, model, bound, args.seed, args.workers,
        {"factory_budget": args.factory_budget,
         "tau_budget": args.tau_budget},
        started,
        extra={"beta": fmt(beta), "kappa": fmt(args.kappa),
               "count": args.count, "abandoned": abandoned_count,
               "tau_total": sum(r.tau_consumed for r in records)},
    )
    _write_manifest(args.manifest, manifest)
    return 2 if abandoned_count else 0


def _read_draws(path: str, value_cols: list[str]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols: dict[str, list[float]] = {c: [] for c in value_cols}
        for row in reader:
            if row[value_cols[0]] == "":  # abandoned draw
                continue
            for c in value_cols:
                cols[c].append(float(row[c]))
    return {c: np.asarray(v) for c, v in cols.items()}


def cmd_oracle_compare(args: argparse.Namespace) -> int:
    started = time.time()
    params = _model_params(args)
    model = build_model(args.model, params)
    value_cols = draw_columns(args.model)
    draws = _read_draws(args.draws, value_cols)
    rng = _rng.substream(args.seed, _rng.DOMAIN_MISC, 0)

    rows: list[tuple[Any, ...]] = []
    if args.model == "mh":
        x = draws["x"]
        ks = stats.kstest(x, "expon")
        rows.append(("x", "ks_exp1", float(ks.statistic), float(ks.pvalue)))
        if args.qq_out:
            grid = (np.arange(x.size) + 0.5) / x.size
            _emit_csv(args.qq_out + "_x.csv",
                      ["theoretical", "empirical"],
                      list(zip(stats.expon.ppf(grid),
                               np.sort(x).astype(float))))
    elif args.model == "gibbs":
        oracle = np.array([model.sequential_oracle_draw(rng)
                           for _ in range(args.oracle_reps)])
        for j, name in enumerate(value_cols):
            ks = stats.ks_2samp(draws[name], oracle[:, j])
            rows.append((name, "ks_2samp", float(ks.statistic),
                         float(ks.pvalue)))
            if args.qq_out:
                grid = (np.arange(draws[name].size) + 0.5) / draws[name].size
                _emit_csv(args.qq_out + f"_{name}.csv",
                          ["oracle_quantile", "empirical"],
                          list(zip(np.quantile(oracle[:, j], grid),
                                   np.sort(draws[name]).astype(float))))
    else:
        # No analytic oracle for the random-effects posterior: report
        # marginal summary statistics only.
        for name in value_cols:
            v = draws[name]
            rows.append((name, "summary", float(v.mean()),
                         float(v.std(ddof=1))))
    _emit_csv(args.out, ["coordinate", "kind", "statistic", "pvalue_or_sd"],
              rows)
    manifest = run_manifest(
        "oracle-compare", args.model, model, None, args.seed, 1, {},
        started, extra={"draws_file": args.draws,
                        "oracle_reps": args.oracle_reps},
    )
    _write_manifest(args.manifest, manifest)
    return 0


def cmd_contour(args: argparse.Namespace) -> int:
    started = time.time()
    c_values = np.linspace(args.c_min, args.c_max, args.c_steps)
    g_values = np.linspace(args.gamma_min, args.gamma_max, args.gamma_steps)
    rows = beta_star_grid(c_values, g_values)
    _emit_csv(args.out, ["c", "gamma", "beta_star"],
              [(fmt(c), fmt(g), fmt(bs)) for c, g, bs in rows])
    manifest = run_manifest(
        "contour", None, None, None, None, 1, {}, started,
        extra={"c_range": [args.c_min, args.c_max, args.c_steps],
               "gamma_range": [args.gamma_min, args.gamma_max,
                               args.gamma_steps]},
    )
    _write_manifest(args.manifest, manifest)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _model_params(args: argparse.Namespace) -> dict[str, Any]:
    """Merge config-file values with flags; flags win."""
    params: dict[str, Any] = {}
    config = getattr(args, "config", None)
    if config:
        with open(config) as fh:
            doc = json.load(fh)
        params.update(doc.get(args.model, doc))
    for key in MODEL_PARAM_KEYS[args.model]:
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
    return params


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True,
                   choices=("mh", "gibbs", "ranef"))
    p.add_argument("--config", help="JSON file with model parameters")
    # mh
    p.add_argument("--c", type=float)
    p.add_argument("--gamma", type=float)
    # gibbs
    p.add_argument("--ybar", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--d", type=float)
    # ranef
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--K-offset", dest="K_offset", type=float)
    p.add_argument("--delta1", type=float)
    p.add_argument("--delta2", type=float)


def _add_bound_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float,
                   help="geometric proposal rate (default: model preset)")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--omega", type=float, default=0.2)
    p.add_argument("--delta", type=float, default=1.0 / 6.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exactmc",
        description="Exact i.i.d. sampling from Markov-chain stationary "
                    "distributions via regeneration.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants",
                       help="print model and tail-bound constants")
    _add_model_flags(p)
    _add_bound_flags(p)
    p.add_argument("--table-max-n", type=int, default=20)
    p.add_argument("--out", default="-")
    p.add_argument("--table-out", default="-")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("factory-bench",
                       help="benchmark the Bernoulli factory on "
                            "synthetic coins")
    p.add_argument("--a", required=True, help="comma-separated a values")
    p.add_argument("--p", required=True, help="comma-separated p values")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--omega", type=float, default=0.2)
    p.add_argument("--delta", type=float, default=1.0 / 6.0)
    p.add_argument("--budget", type=int, default=2**32)
    p.add_argument("--out", default="-")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_factory_bench)

    p = sub.add_parser("tau-sample",
                       help="draw i.i.d. regeneration times")
    _add_model_flags(p)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_tau_sample)

    p = sub.add_parser("draw", help="produce exact stationary draws")
    _add_model_flags(p)
    _add_bound_flags(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--factory-budget", type=int, default=2**32)
    p.add_argument("--tau-budget", type=int)
    p.add_argument("--out", default="-")
    p.add_argument("--telemetry")
    p.add_argument("--manifest")
    p.add_argument("--checkpoint")
    p.add_argument("--checkpoint-every", type=int, default=10)
    p.set_defaults(func=cmd_draw)

    p = sub.add_parser("oracle-compare",
                       help="compare a draws file against the model oracle")
    _add_model_flags(p)
    p.add_argument("--draws", required=True)
    p.add_argument("--oracle-reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--qq-out", help="prefix for Q-Q CSV files")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("contour",
                       help="grid of proposal-rate ceilings over (c, gamma)")
    p.add_argument("--c-min", type=float, default=0.005)
    p.add_argument("--c-max", type=float, default=0.1)
    p.add_argument("--c-steps", type=int, default=20)
    p.add_argument("--gamma-min", type=float, default=1.0)
    p.add_argument("--gamma-max", type=float, default=8.0)
    p.add_argument("--gamma-steps", type=int, default=15)
    p.add_argument("--out", default="-")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_contour)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
