"""Experiment harness.

Every subcommand resolves its configuration from (in increasing priority)
a JSON config file, command-line flags, and the TREEALIGN_SEED environment
variable as a seed fallback. Outputs are deterministic given the resolved
config: CSV files use fixed column order, '.' decimals and "\n" newlines,
JSON is serialized with sorted keys. Next to each output file a
<output>.meta.json sidecar records the resolved config.

Exit codes: 0 ok, 2 config error, 3 resource guard, 4 statistical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from .align import ntma, ntma2
from .likelihood import (
    cyclic_moment_analytic,
    estimate_cyclic_moment_mc,
    estimate_kl_mc,
    one_sided_lr_test,
)
from .eigen import (
    mixed_moment,
    mixed_moment_limit,
    verify_decomposition,
    verify_orthogonality,
)
from .matching import estimate_matching_rate
from .models import (
    ModelParams,
    RngStream,
    sample_correlated_er,
    sample_correlated_pair,
    sample_gw,
)
from .series import estimate_otter, tree_counts
from .trees import canonicalize

OK, CONFIG_ERROR, RESOURCE_GUARD, STAT_FAILURE = 0, 2, 3, 4

MAX_TRIALS = 10_000_000
MAX_GRAPH_N = 200_000
MAX_ENUM_N = 400


class ConfigError(Exception):
    pass


class ResourceGuard(Exception):
    pass


class StatFailure(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: str, header: List[str], rows: List[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: str, obj: Dict) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_meta(path: str, config: Dict) -> None:
    _write_json(path + ".meta.json", {"command": config.get("command"),
                                      "config": config})


def _parse_list(text: str, cast):
    return [cast(part) for part in text.split(",") if part != ""]


def _parse_range(text: str) -> List[int]:
    # "2..5" or "2,3,4"
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return _parse_list(text, int)


def _resolve(args: argparse.Namespace, required: List[str],
             stochastic: bool) -> Dict:
    config: Dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                config.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}")
    for key, value in vars(args).items():
        if key in ("config", "func") or value is None:
            continue
        config[key] = value
    if stochastic and config.get("seed") is None:
        env = os.environ.get("TREEALIGN_SEED")
        if env is not None:
            try:
                config["seed"] = int(env)
            except ValueError:
                raise ConfigError("TREEALIGN_SEED must be an integer")
    for key in required:
        if config.get(key) is None:
            raise ConfigError(f"missing required parameter: {key}")
    _validate(config)
    return config


def _validate(config: Dict) -> None:
    s = config.get("s")
    if s is not None and isinstance(s, (int, float)) and not 0.0 <= s <= 1.0:
        raise ConfigError("s out of [0,1]")
    lam = config.get("lam")
    if lam is not None and lam <= 0:
        raise ConfigError("lambda must be positive")
    gamma = config.get("gamma")
    if gamma is not None and gamma <= 1.0:
        raise ConfigError("gamma must exceed 1")
    trials = config.get("trials")
    if trials is not None:
        if trials <= 0:
            raise ConfigError("trials must be positive")
        if trials > MAX_TRIALS:
            raise ResourceGuard(f"trials {trials} exceeds cap {MAX_TRIALS}")
    n = config.get("n")
    if n is not None:
        if n < 2:
            raise ConfigError("n must be at least 2")
        if n > MAX_GRAPH_N:
            raise ResourceGuard(f"n {n} exceeds cap {MAX_GRAPH_N}")


def cmd_enumerate(args) -> int:
    config = _resolve(args, ["max_n", "output"], stochastic=False)
    if config["max_n"] > MAX_ENUM_N:
        raise ResourceGuard(f"max_n {config['max_n']} exceeds cap {MAX_ENUM_N}")
    depth = config.get("depth")
    counts = tree_counts(depth if depth is not None else None,
                         config["max_n"])
    rows = [(n, counts[n - 1]) for n in range(1, config["max_n"] + 1)]
    _write_csv(config["output"], ["n", "count"], rows)
    _write_meta(config["output"], config)
    return OK


def cmd_otter(args) -> int:
    config = _resolve(args, ["max_n", "output"], stochastic=False)
    if config["max_n"] > MAX_ENUM_N:
        raise ResourceGuard(f"max_n {config['max_n']} exceeds cap {MAX_ENUM_N}")
    est = estimate_otter(config["max_n"])
    _write_json(config["output"], {
        "estimate": est.value,
        "n_used": est.n_used,
        "raw_ratio": est.raw_ratio,
        "ratios_decreasing": est.ratios_decreasing,
    })
    _write_meta(config["output"], config)
    return OK


def cmd_gamma(args) -> int:
    config = _resolve(args, ["model", "lam", "d_values", "trials", "seed",
                             "output"], stochastic=True)
    if config["model"] not in ("null", "correlated", "shifted"):
        raise ConfigError("model must be null, correlated or shifted")
    if config["model"] != "null" and config.get("s") is None:
        raise ConfigError("s is required for correlated/shifted models")
    d_values = _parse_range(config["d_values"])
    if not d_values or min(d_values) < 1:
        raise ConfigError("d_values must be positive depths")
    params = ModelParams(lam=config["lam"], s=config.get("s", 0.0),
                         d=max(d_values), delta=config.get("delta", 0))
    rng = RngStream(config["seed"], 0)
    est = estimate_matching_rate(config["model"], params, d_values,
                                 config["trials"], rng)
    if any(k == 0 for k in est.n_survived):
        raise StatFailure("no surviving samples at some depth: "
                          + repr(list(zip(est.depths, est.n_survived))))
    rows = list(zip(est.depths, est.mean_log_w, est.stderr, est.n_survived))
    _write_csv(config["output"], ["d", "mean_logW", "stderr", "n_survived"],
               rows)
    config["slope"] = est.slope
    config["slope_stderr"] = est.slope_stderr
    config["intercept"] = est.intercept
    _write_meta(config["output"], config)
    return OK


def cmd_kl_curve(args) -> int:
    config = _resolve(args, ["lam", "s_values", "d_values", "trials", "seed",
                             "output"], stochastic=True)
    s_values = _parse_list(config["s_values"], float)
    d_values = _parse_range(config["d_values"])
    for s in s_values:
        if not 0.0 <= s < 1.0:
            raise ConfigError("s out of [0,1)")
    rows = []
    index = 0
    for s in s_values:
        for d in d_values:
            rng = RngStream(config["seed"], index)
            index += 1
            est = estimate_kl_mc(d, config["lam"], s, config["trials"], rng)
            rows.append((d, est.value, est.stderr, est.trials,
                         config["lam"], s))
    _write_csv(config["output"],
               ["d", "kl_estimate", "stderr", "trials", "lambda", "s"], rows)
    _write_meta(config["output"], config)
    return OK


def cmd_cyclic(args) -> int:
    config = _resolve(args, ["lam", "s", "d", "m_values", "trials", "seed",
                             "output"], stochastic=True)
    m_values = _parse_list(config["m_values"], int)
    rows = []
    worst = 0.0
    for index, m in enumerate(m_values):
        if m < 2:
            raise ConfigError("moment order m must be >= 2")
        rng = RngStream(config["seed"], index)
        est = estimate_cyclic_moment_mc(config["d"], config["lam"],
                                        config["s"], m, config["trials"], rng)
        analytic, _tail = cyclic_moment_analytic(config["d"], config["s"], m)
        rows.append((m, est.value, est.stderr, analytic))
        if est.stderr > 0:
            worst = max(worst, abs(est.value - analytic) / est.stderr)
    _write_csv(config["output"], ["m", "estimate", "stderr", "analytic"],
               rows)
    _write_meta(config["output"], config)
    if config.get("check") and worst > 3.0:
        raise StatFailure(f"cyclic moment deviates by {worst:.2f} stderr")
    return OK


def cmd_eigencheck(args) -> int:
    config = _resolve(args, ["lam", "d", "output"], stochastic=False)
    d = config["d"]
    if d not in (1, 2):
        raise ConfigError("eigencheck supports d in {1, 2}")
    report: Dict = {"d": d, "lambda": config["lam"]}
    default_cap = 200 if d == 1 else 26  # d=2 support enumeration is costly
    ortho = verify_orthogonality(
        d, config["lam"],
        config.get("max_index_size") or (9 if d == 1 else 5),
        support_cap=config.get("support_cap") or default_cap)
    report["orthogonality"] = ortho
    s = config.get("s")
    if s is not None:
        from .trees import enumerate_trees

        probes = enumerate_trees(4, d)
        pairs = [(a, b) for a in probes for b in probes
                 if a.depth == d and b.depth == d]
        dec = verify_decomposition(d, config["lam"], s,
                                   config.get("k_trunc") or 20, pairs)
        report["decomposition"] = {
            "max_error": dec["max_error"],
            "tail_bound": dec["tail_bound"],
        }
    if d == 1:
        lam = config["lam"]
        idx = (1, 1, 1)
        fin = mixed_moment(1, lam, tuple(star_indices(idx)))
        lim = mixed_moment_limit(tuple(star_indices(idx)))
        report["mixed_moment_alpha_111"] = {"finite": fin, "limit": lim,
                                            "difference": fin - lim}
    _write_json(config["output"], report)
    _write_meta(config["output"], config)
    return OK


def star_indices(orders) -> List:
    # depth-1 index trees: a star with k leaves encodes the k-th Charlier index
    from .trees import star_tree

    return [star_tree(k) for k in orders]


def cmd_lr_test(args) -> int:
    config = _resolve(args, ["lam", "s", "d", "trials", "seed", "output"],
                      stochastic=True)
    lam, s, d = config["lam"], config["s"], config["d"]
    if not 0.0 <= s < 1.0:
        raise ConfigError("s out of [0,1)")
    rng = RngStream(config["seed"], 0)
    res = one_sided_lr_test(d, lam, s, config["trials"], rng,
                            log_beta=config.get("log_beta"))
    result = {
        "log_beta": res.log_beta,
        "trials": res.trials,
        "type_i": res.type_one,
        "power": res.power,
    }
    _write_json(config["output"], result)
    _write_meta(config["output"], config)
    if config.get("check") and result["type_i"] > 0.05:
        raise StatFailure(f"type-I rate {result['type_i']} exceeds 0.05")
    return OK


def cmd_zstat(args) -> int:
    from .likelihood import pair_probability_alternative, z_statistic
    from .trees import star_tree

    config = _resolve(args, ["lam", "s", "d", "trials", "seed", "output"],
                      stochastic=True)
    lam, s, d = config["lam"], config["s"], config["d"]
    if d != 1:
        raise ConfigError("zstat event enumeration is implemented for d=1")
    min_count = config.get("min_count") or 3
    cap = 40  # Poisson(lam) mass beyond this is negligible for desk lam
    stars = [star_tree(k) for k in range(min_count, cap)]
    pairs = [(a, b) for a in stars for b in stars]
    params0 = ModelParams(lam=lam, s=0.0, d=d + 1)
    params1 = ModelParams(lam=lam, s=s, d=d + 1)
    rng = RngStream(config["seed"], 0)
    trials = config["trials"]
    h0_vals = np.empty(trials)
    for i in range(trials):
        t = canonicalize(sample_gw(params0, rng))
        tp = canonicalize(sample_gw(params0, rng))
        h0_vals[i] = z_statistic(t, tp, pairs, lam, d)
    h1_vals = np.empty(trials)
    for i in range(trials):
        t, tp, _ = sample_correlated_pair(params1, rng)
        h1_vals[i] = z_statistic(t, tp, pairs, lam, d)
    p1 = pair_probability_alternative(pairs, lam, s, d, trials,
                                      RngStream(config["seed"], 1))
    result = {
        "h0_mean": float(h0_vals.mean()),
        "h0_stderr": float(h0_vals.std(ddof=1) / math.sqrt(trials)),
        "h1_mean": float(h1_vals.mean()),
        "h1_stderr": float(h1_vals.std(ddof=1) / math.sqrt(trials)),
        "predicted_h1_mean": lam * s * p1.value,
        "p1_event": p1.value,
        "trials": trials,
    }
    _write_json(config["output"], result)
    _write_meta(config["output"], config)
    if config.get("check"):
        if abs(result["h0_mean"]) > 3 * result["h0_stderr"]:
            raise StatFailure("H0 mean of Z deviates from 0")
    return OK


def cmd_align(args) -> int:
    config = _resolve(args, ["algo", "n", "lam", "s", "d", "gamma", "seed",
                             "output"], stochastic=True)
    if config["algo"] not in ("ntma", "ntma2"):
        raise ConfigError("algo must be ntma or ntma2")
    rng = RngStream(config["seed"], 0)
    g, h, pi_star = sample_correlated_er(config["n"], config["lam"],
                                         config["s"], rng)
    fn = ntma if config["algo"] == "ntma" else ntma2
    res = fn(g, h, config["d"], config["gamma"], pi_star=pi_star,
             node_budget=config.get("node_budget", 5000))
    rows = [(u, v, 1 if pi_star[u] == v else 0) for u, v in res.pairs]
    _write_csv(config["output"], ["u", "u_prime", "correct"], rows)
    summary = {
        "n": config["n"],
        "lambda": config["lam"],
        "s": config["s"],
        "d": config["d"],
        "gamma": config["gamma"],
        "overlap": res.overlap,
        "error": res.error,
        "pairs": len(res.pairs),
        "skipped_pairs": res.skipped,
        "seed": config["seed"],
    }
    _write_json(config["output"] + ".summary.json", summary)
    _write_meta(config["output"], config)
    return OK


def _common(sub: argparse.ArgumentParser, stochastic: bool = True) -> None:
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--output", help="output file path")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker bound (results are thread-count independent)")
    if stochastic:
        sub.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treealign",
        description="Tree correlation detection and sparse graph alignment "
                    "experiments")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("enumerate", help="table of tree counts")
    _common(p, stochastic=False)
    p.add_argument("--max-n", dest="max_n", type=int)
    p.add_argument("--depth", type=int, default=None,
                   help="depth bound (omit for unbounded)")
    p.set_defaults(func=cmd_enumerate)

    p = subs.add_parser("otter", help="growth-constant estimate")
    _common(p, stochastic=False)
    p.add_argument("--max-n", dest="max_n", type=int)
    p.set_defaults(func=cmd_otter)

    p = subs.add_parser("gamma", help="matching-rate sweep")
    _common(p)
    p.add_argument("--model", choices=["null", "correlated", "shifted"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--d", dest="d_values",
                   help="depth range, e.g. 2..8 or 2,4,6")
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_gamma)

    p = subs.add_parser("kl-curve", help="Monte Carlo KL vs depth")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s", dest="s_values", help="comma list, e.g. 0.5,0.8")
    p.add_argument("--d", dest="d_values", help="depth range, e.g. 2..5")
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_kl_curve)

    p = subs.add_parser("cyclic", help="Monte Carlo vs analytic moments")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--m", dest="m_values", help="comma list of orders")
    p.add_argument("--trials", type=int)
    p.add_argument("--check", action="store_true",
                   help="exit 4 when MC deviates beyond 3 stderr")
    p.set_defaults(func=cmd_cyclic)

    p = subs.add_parser("eigencheck", help="orthogonality and decomposition "
                                           "reports")
    _common(p, stochastic=False)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--k-trunc", dest="k_trunc", type=int, default=None)
    p.add_argument("--max-index-size", dest="max_index_size", type=int,
                   default=None)
    p.add_argument("--support-cap", dest="support_cap", type=int,
                   default=None)
    p.set_defaults(func=cmd_eigencheck)

    p = subs.add_parser("lr-test", help="one-sided likelihood-ratio test "
                                        "calibration")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--log-beta", dest="log_beta", type=float, default=None)
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_lr_test)

    p = subs.add_parser("zstat", help="centered cross-moment statistic "
                                      "moments")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--min-count", dest="min_count", type=int, default=None)
    p.add_argument("--trials", type=int)
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_zstat)

    p = subs.add_parser("align", help="graph alignment experiment")
    _common(p)
    p.add_argument("--algo", choices=["ntma", "ntma2"])
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--node-budget", dest="node_budget", type=int,
                   default=None)
    p.set_defaults(func=cmd_align)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return CONFIG_ERROR
    except ResourceGuard as exc:
        json.dump({"error": "resource", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return RESOURCE_GUARD
    except StatFailure as exc:
        json.dump({"error": "statistical", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return STAT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
