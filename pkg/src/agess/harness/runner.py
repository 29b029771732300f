"""Seeded multi-chain experiment execution and on-disk artifacts.

Layout under ``config.out``::

    config.json
    summary.json                 pooled per-arm diagnostics
    errors.json                  only when a chain aborted
    <arm>/chain<c>.csv           iter, x_1..x_P, loop_count, kernel_tag
    <arm>/chain<c>.json          per-chain report
    <arm>/chain<c>.error.json    only for an aborted chain
"""

from __future__ import annotations

import io
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..adaptation import run_agess
from ..diagnostics import chain_report, gelman_rubin
from ..errors import AgessError, ChainInitializationError, DiagnosticsError, ShrinkageError
from ..kernels import run_arw
from ..trace import TAG_CODE, TAGS, Trace
from .config import Arm, ExperimentConfig, adapt_config, build_target, chain_seed, family_of, resolve_start

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SAMPLING, EXIT_DIAGNOSTICS = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# trace files


def write_trace_csv(trace: Trace, path) -> None:
    """Write ``trace`` with 17 significant digits (lossless for float64)."""
    P = trace.dim
    header = ",".join(["iter"] + [f"x_{j + 1}" for j in range(P)] + ["loop_count", "kernel_tag"])
    body = io.StringIO()
    it = np.arange(trace.n)
    fmt = ["%d"] + ["%.17g"] * P + ["%d"]
    numeric = np.column_stack([it, trace.states, trace.loop_counts])
    np.savetxt(body, numeric, fmt=fmt, delimiter=",")
    lines = body.getvalue().splitlines()
    names = [TAGS[c] for c in trace.kernel_tags]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for line, tag in zip(lines, names):
            fh.write(f"{line},{tag}\n")


def read_trace_csv(path, burn_in: int = 0) -> Trace:
    """Inverse of :func:`write_trace_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[0] != "iter" or header[-2:] != ["loop_count", "kernel_tag"]:
        raise DiagnosticsError(f"{path}: not a trace CSV (header {header[:3]}...)")
    P = len(header) - 3
    num = np.loadtxt(path, delimiter=",", skiprows=1, usecols=range(P + 2), ndmin=2)
    tags = np.loadtxt(path, delimiter=",", skiprows=1, usecols=P + 2, dtype=str, ndmin=1)
    codes = np.array([TAG_CODE[t] for t in tags], dtype=np.int8)
    return Trace(num[:, 1 : P + 1], num[:, P + 1].astype(np.int64), codes, burn_in=burn_in)


def _dump(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# one chain


def run_chain(arm: Arm, chain: int, base_seed: int) -> Trace:
    """Run one chain of ``arm``; raises :class:`AgessError` subclasses on abort."""
    seed = chain_seed(base_seed, chain)
    rng = np.random.default_rng(seed)
    built = build_target(arm.target)
    mu0, sigma0, x0 = resolve_start(built, arm.sampler, rng)
    if arm.sampler["kind"] == "arw":
        trace = run_arw(built.target, x0, sigma0, arm.iterations, rng, burn_in=arm.burn_in,
                        eps_reg=float(arm.sampler.get("eps_reg", 1e-6)))
        if built.transform is not None:
            trace.states = built.transform.to_original(trace.states)
    else:
        cfg = adapt_config(arm.sampler, arm.iterations, arm.burn_in)
        trace = run_agess(built.target, built.transform, family_of(arm.sampler), mu0, sigma0, cfg, rng, x0=x0)
    trace.meta.update({"seed": seed, "chain": chain, "arm": arm.label})
    if built.dataset is not None and arm.target["name"] == "relu":
        from ..targets import zero_fraction

        trace.meta["zero_fraction"] = zero_fraction(built.dataset, trace.sampling_states().mean(axis=0))
    return trace


def _chain_record(arm: Arm, trace: Trace) -> dict:
    rep = chain_report(trace, arm.window).to_dict()
    rep.update({
        "arm": arm.label,
        "chain": trace.meta.get("chain"),
        "seed": trace.meta.get("seed"),
        "iterations": trace.n,
        "burn_in": trace.burn_in,
        "burn_in_seconds": float(trace.timings.get("burn_in", 0.0)),
        "window": arm.window,
        "posterior_mean": trace.sampling_states().mean(axis=0),
        "target": arm.target,
        "sampler": arm.sampler,
    })
    if trace.accepted is not None:
        rep["acceptance_rate"] = float(np.mean(trace.accepted[max(1, trace.burn_in):]))
    if "zero_fraction" in trace.meta:
        rep["zero_fraction"] = trace.meta["zero_fraction"]
    return rep


def _chain_task(arm: Arm, chain: int, base_seed: int, out: str) -> dict:
    """Worker entry point: run, write artifacts, return the report or an error record."""
    d = Path(out) / arm.label
    d.mkdir(parents=True, exist_ok=True)
    csv, js = d / f"chain{chain}.csv", d / f"chain{chain}.json"
    try:
        trace = run_chain(arm, chain, base_seed)
    except (ShrinkageError, ChainInitializationError, AgessError, ArithmeticError) as exc:
        err = {
            "arm": arm.label,
            "chain": chain,
            "seed": chain_seed(base_seed, chain),
            "error": type(exc).__name__,
            "message": str(exc),
            "traceback": traceback.format_exc(),
        }
        partial = getattr(exc, "trace", None)
        if partial is not None:
            write_trace_csv(partial, csv)
            err["partial_trace"] = str(csv)
            err["partial_states"] = partial.n
        if isinstance(exc, ShrinkageError):
            err["loop_count"] = exc.loop_count
        _dump(err, d / f"chain{chain}.error.json")
        return {"error": err}
    write_trace_csv(trace, csv)
    rep = _chain_record(arm, trace)
    _dump(rep, js)
    return {"report": rep, "states": trace.sampling_states()}


# ---------------------------------------------------------------------------
# experiment


@dataclass
class ExperimentResult:
    out: Path
    summary: dict
    errors: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_SAMPLING if self.errors else EXIT_OK


def summarize_arm(arm: Arm, reports: list[dict], chains: list[np.ndarray]) -> dict:
    """Pooled summary; totals are plain sums over the per-chain reports."""
    s = {
        "arm": arm.label,
        "chains": len(reports),
        "total_iterations": int(sum(r["iterations"] for r in reports)),
        "total_evals": int(sum(r["n_evals"] for r in reports)),
        "total_sampling_seconds": float(sum(r["sampling_seconds"] for r in reports)),
    }
    mess = [r["mess"] for r in reports]
    s["mess_per_chain"] = mess
    s["mess_total"] = float(np.sum(mess))
    s["ess_per_second"] = s["mess_total"] / s["total_sampling_seconds"] if s["total_sampling_seconds"] > 0 else None
    loops = [(r["mean_loop_count"], r["iterations"] - max(1, r["burn_in"])) for r in reports]
    w = sum(n for _, n in loops)
    s["mean_loop_count"] = float(sum(m * n for m, n in loops) / w) if w > 0 else None
    s["gelman_rubin"] = None
    if len(chains) >= 2:
        try:
            s["gelman_rubin"] = gelman_rubin(chains)
        except DiagnosticsError as exc:
            s["gelman_rubin_error"] = str(exc)
    if all("zero_fraction" in r for r in reports):
        s["zero_fraction"] = float(np.mean([r["zero_fraction"] for r in reports]))
    return s


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every (arm, chain) task and write all artifacts under ``config.out``.

    Configuration problems raise :class:`ConfigurationError` before any
    sampling starts; chain aborts are collected into ``errors.json``.
    """
    for arm in config.arms:
        build_target(arm.target)  # surfaces bad target specs early
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(config.to_dict(), out / "config.json")

    tasks = [(arm, c) for arm in config.arms for c in range(config.chains)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_chain_task, arm, c, config.base_seed, str(out)) for arm, c in tasks]
            results = [f.result() for f in futures]
    else:
        results = []
        for arm, c in tasks:
            log.info("running %s chain %d", arm.label, c)
            results.append(_chain_task(arm, c, config.base_seed, str(out)))

    errors, arms = [], {}
    for arm in config.arms:
        rows = [r for (a, _), r in zip(tasks, results) if a is arm]
        errors += [r["error"] for r in rows if "error" in r]
        ok = [r for r in rows if "report" in r]
        if ok:
            arms[arm.label] = summarize_arm(arm, [r["report"] for r in ok], [r["states"] for r in ok])
    summary = {
        "name": config.name,
        "preset": config.preset,
        "base_seed": config.base_seed,
        "arms": arms,
        "total_iterations": int(sum(a["total_iterations"] for a in arms.values())),
        "total_evals": int(sum(a["total_evals"] for a in arms.values())),
        "failed_chains": len(errors),
    }
    _dump(summary, out / "summary.json")
    if errors:
        _dump({"errors": errors}, out / "errors.json")
    return ExperimentResult(out, summary, errors)


def diagnose_traces(paths, window: float = 1.0, burn_in: int = 0) -> dict:
    """Recompute per-trace reports (and GR when several traces share a dimension)."""
    reports, chains = {}, []
    for p in paths:
        tr = read_trace_csv(p, burn_in=burn_in)
        reports[str(p)] = chain_report(tr, window).to_dict()
        chains.append(tr.sampling_states())
    out = {"traces": reports}
    dims = {c.shape for c in chains}
    if len(chains) >= 2 and len(dims) == 1:
        out["gelman_rubin"] = gelman_rubin(chains)
    return _jsonable(out)
