"""Render figures from treealign experiment CSVs.

Three figure kinds, selected with --kind:

  slope  matching-weight growth: mean log W_d against d with one-standard-
         deviation error bars, the OLS fit, and the model growth reference
         line recomputed from the CSV's .meta.json sidecar
  kl     Monte Carlo KL divergence against depth, one line per s value
  score  alignment accuracy: mean correctness with a 95% confidence
         interval of the mean, one panel per input CSV

The rendered image is a pure function of the input CSV bytes and the figure
spec; PNG metadata is stripped so repeated runs are byte-identical.
"""

import argparse
import csv
import json
import math
import os
import sys
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


class RenderError(Exception):
    pass


def fit_slope(xs, ys) -> tuple:
    """OLS fit returning (slope, intercept)."""
    n = len(xs)
    if n < 2:
        raise RenderError("need at least two rows to fit a slope")
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    if sxx == 0:
        raise RenderError("degenerate abscissa: all d values equal")
    slope = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys)) / sxx
    return slope, ybar - slope * xbar


def _read_csv(path: str) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return rows


def _read_sidecar(path: str, suffix: str) -> dict:
    side = path + suffix
    if not os.path.exists(side):
        raise RenderError(f"missing sidecar {side}")
    with open(side) as fh:
        return json.load(fh)


def _require(rows: List[dict], columns) -> None:
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise RenderError("missing columns: " + ", ".join(missing))


def _render_slope(inputs: List[str], output: str) -> dict:
    if len(inputs) != 1:
        raise RenderError("slope figures take exactly one input CSV")
    rows = _read_csv(inputs[0])
    _require(rows, ("d", "mean_logW", "stderr"))
    ds = [float(r["d"]) for r in rows]
    ys = [float(r["mean_logW"]) for r in rows]
    es = [float(r["stderr"]) for r in rows]
    slope, intercept = fit_slope(ds, ys)

    config = _read_sidecar(inputs[0], ".meta.json").get("config", {})
    lam = config.get("lam")
    if lam is None:
        raise RenderError("sidecar config lacks the offspring mean")
    s = config.get("s") or 0.0
    if config.get("model") == "correlated" and s > 0:
        ref_rate = math.log(lam * s)
        ref_label = "d log(lambda s)"
    else:
        ref_rate = math.log(lam)
        ref_label = "d log(lambda)"

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.errorbar(ds, ys, yerr=es, fmt="o", color="black", capsize=3,
                label="mean log W_d")
    grid = [min(ds), max(ds)]
    ax.plot(grid, [intercept + slope * x for x in grid], "r--",
            label=f"fit slope = {slope:.6f}")
    ax.plot(grid, [ref_rate * x for x in grid], "b-", alpha=0.6,
            label=ref_label)
    ax.set_xlabel("d")
    ax.set_ylabel("mean log W_d")
    ax.legend()
    _save(fig, output)
    return {"slope": slope, "intercept": intercept, "reference": ref_rate,
            "label": f"fit slope = {slope:.6f}"}


def _render_kl(inputs: List[str], output: str) -> dict:
    if len(inputs) != 1:
        raise RenderError("kl figures take exactly one input CSV")
    rows = _read_csv(inputs[0])
    _require(rows, ("d", "kl_estimate", "stderr", "s"))
    by_s: dict = {}
    for r in rows:
        by_s.setdefault(r["s"], []).append(r)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for s_key in sorted(by_s, key=float):
        grp = sorted(by_s[s_key], key=lambda r: float(r["d"]))
        ds = [float(r["d"]) for r in grp]
        ys = [float(r["kl_estimate"]) for r in grp]
        es = [float(r["stderr"]) for r in grp]
        ax.errorbar(ds, ys, yerr=es, marker="o", capsize=3,
                    label=f"s = {s_key}")
    ax.set_xlabel("d")
    ax.set_ylabel("KL estimate")
    ax.legend()
    _save(fig, output)
    return {"series": sorted(by_s, key=float)}


def _render_score(inputs: List[str], output: str) -> dict:
    if not 1 <= len(inputs) <= 2:
        raise RenderError("score figures take one or two input CSVs")
    panels = []
    for path in inputs:
        rows = _read_csv(path)
        _require(rows, ("u", "u_prime", "correct"))
        vals = [float(r["correct"]) for r in rows]
        mean = sum(vals) / len(vals)
        if len(vals) > 1:
            var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
            ci = 1.96 * math.sqrt(var / len(vals))
        else:
            ci = 0.0
        summary = _read_sidecar(path, ".summary.json")
        s = summary.get("s")
        title = "Isomorphism case" if s == 1.0 else f"s = {s}"
        panels.append({"mean": mean, "ci": ci, "n_pairs": len(vals),
                       "title": title, "overlap": summary.get("overlap")})

    fig, axes = plt.subplots(1, len(panels), figsize=(6.4 * len(panels), 4.8),
                             squeeze=False)
    for ax, panel in zip(axes[0], panels):
        ax.errorbar([0], [panel["mean"]], yerr=[panel["ci"]], fmt="o",
                    color="black", capsize=4)
        ax.set_xticks([0])
        ax.set_xticklabels([f"{panel['n_pairs']} pairs"])
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel("fraction correct")
        ax.set_title(panel["title"])
    _save(fig, output)
    return {"panels": panels}


def _save(fig, output: str) -> None:
    # strip the writer tag so output bytes depend only on figure content
    fig.savefig(output, format="png", dpi=150,
                metadata={"Software": None})
    plt.close(fig)


_KINDS = {"slope": _render_slope, "kl": _render_kl, "score": _render_score}


def render(inputs: List[str], kind: str, output: str) -> dict:
    """Render one figure; returns the computed overlay values."""
    if kind not in _KINDS:
        raise RenderError(f"unknown kind {kind!r}")
    return _KINDS[kind](inputs, output)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="treealign-plots",
        description="Render figures from treealign experiment CSVs")
    parser.add_argument("--input", required=True, action="append",
                        help="input CSV; repeat or comma-separate for "
                             "multi-panel figures")
    parser.add_argument("--kind", required=True,
                        choices=sorted(_KINDS))
    parser.add_argument("--output", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    inputs = [p for chunk in args.input for p in chunk.split(",") if p]
    try:
        render(inputs, args.kind, args.output)
    except (RenderError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
