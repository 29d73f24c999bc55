"""Experiment jobs: multi-chain runs, grid search, geodesic traces, MALA tuning.

Chain ``c`` of a run with master seed ``s`` draws from
``Generator(PCG64(SeedSequence([s, c])))``. SeedSequence hashes its entropy
words, so streams are independent across chains and reproducible on any
machine with the same numpy bit generator.
"""
import copy
import hashlib
import itertools
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import samplers as S
from ..diagnostics import diagnose
from ..errors import ConfigurationError, IntegrationError, MagssError
from ..geodesics import GeodesicCurve
from ..metrics import make_metric, sample_unit_tangent
from . import io
from .config import (GRID_AXES, build_config, build_sampler_config, build_target, burn_in_of,
                     canonical_json, config_hash, integrator_config, set_path)

log = logging.getLogger("magss")

# stream for diagnostics (reference draws, KSD subsampling), disjoint from the
# chain streams whose second word is a small chain index
DIAGNOSTIC_STREAM = 2**32 - 1

TIMING_KEYS = ("wall_clock", "chain_wall_clock")


def chain_rng(seed, chain):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(chain)])))


def make_step(cfg, target):
    """Transition function ``state -> state`` for the configured sampler."""
    name = cfg["sampler"]["name"]
    sc = build_sampler_config(cfg, target)
    if name == "magss":
        return lambda st: S.magss_step(st, target, sc)
    if name == "hit_and_run":
        return lambda st: S.hit_and_run_step(st, target, sc)
    if name == "meta_magss":
        return lambda st: S.meta_magss_step(st, target, sc)
    if name == "mala":
        return lambda st: S.mala_step(st, target, sc)
    if name == "pt":
        return lambda st: S.pt_step(st, target, sc)
    if name == "digs":
        return lambda st: S.digs_step(st, target, sc)
    raise ConfigurationError(f"config 'sampler.name': unknown sampler {name!r}")


def initial_point(cfg, target, rng):
    init = cfg["init"]
    if init["kind"] == "fixed":
        x0 = np.asarray(init["point"], dtype=np.float64)
        if x0.ndim == 0:
            x0 = np.full(target.dim, float(x0))
        if x0.shape != (target.dim,):
            raise ConfigurationError(
                f"config 'init.point': expected {target.dim} coordinates, got {x0.size}")
        return x0
    if init["kind"] == "reference":
        if not target.has_reference:
            raise ConfigurationError("config 'init.kind': target has no reference sampler")
        return target.reference_sample(1, rng)[0]
    return rng.standard_normal(target.dim)


_COUNTERS = ("expansions", "step_out_evals", "shrink_iters", "geodesic_steps", "slice_steps",
             "local_steps", "local_accepted", "init_accepted")


def _summarize(totals, n_transitions):
    slice_steps = totals["slice_steps"]
    out = {"n_transitions": n_transitions, "fallbacks": totals["fallback"]}
    out["avg_step_out"] = totals["expansions"] / slice_steps if slice_steps else None
    out["avg_shrink"] = totals["shrink_iters"] / slice_steps if slice_steps else None
    out["avg_geodesic_steps"] = totals["geodesic_steps"] / slice_steps if slice_steps else None
    ls = totals["local_steps"]
    out["local_acceptance"] = totals["local_accepted"] / ls if ls else None
    sw = totals["swap_attempted"]
    out["swap_acceptance"] = totals["swap_accepted"] / sw if sw else None
    out["init_accepted"] = totals["init_accepted"]
    return out


def run_chain(cfg, chain_id):
    """Run one chain; returns a plain dict (picklable for worker processes)."""
    target = build_target(cfg)
    step = make_step(cfg, target)
    rng = chain_rng(cfg["seed"], chain_id)
    burn = burn_in_of(cfg)
    thin = cfg["thinning"]
    n = cfg["n_samples"]
    total = burn + n * thin
    X = np.empty((n, target.dim))
    its = np.empty(n, dtype=np.int64)
    totals = dict.fromkeys(_COUNTERS, 0)
    totals.update(fallback=0, swap_attempted=0, swap_accepted=0)
    out = {"chain_id": chain_id, "failed": False, "error": None}
    t0 = time.perf_counter()
    done = 0
    try:
        state = S.initial_state(initial_point(cfg, target, rng), rng)
        k = 0
        for it in range(1, total + 1):
            state = step(state)
            st = state.stats
            for c in _COUNTERS:
                totals[c] += getattr(st, c)
            totals["fallback"] += int(st.fallback)
            totals["swap_attempted"] += int(st.swap_attempted)
            totals["swap_accepted"] += int(st.swap_accepted)
            if not np.all(np.isfinite(state.x)):
                raise MagssError(f"non-finite state at iteration {it}")
            done = it
            if it > burn and (it - burn) % thin == 0:
                X[k] = state.x
                its[k] = it
                k += 1
    except (MagssError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        out["failed"] = True
        out["error"] = f"{type(exc).__name__}: {exc}"
    out["chain_wall_clock"] = time.perf_counter() - t0
    out["samples"] = None if out["failed"] else X
    out["iterations"] = None if out["failed"] else its
    out["stats"] = _summarize(totals, done)
    return out


def _run_chain_job(args):
    cfg, chain_id = args
    return run_chain(cfg, chain_id)


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


@dataclass
class RunReport:
    config: dict
    config_hash: str
    output_dir: str
    chain_files: list
    failed_chains: list
    diagnostics: dict
    chain_stats: list
    stats: dict
    wall_clock: float
    content_hash: str = ""
    errors: dict = field(default_factory=dict)

    @property
    def exit_code(self):
        return 1 if len(self.failed_chains) == self.config["n_chains"] else 0

    def to_dict(self):
        return {
            "config": self.config, "config_hash": self.config_hash,
            "output_dir": self.output_dir, "chain_files": self.chain_files,
            "failed_chains": self.failed_chains, "errors": self.errors,
            "diagnostics": self.diagnostics, "chain_stats": self.chain_stats,
            "stats": self.stats, "wall_clock": self.wall_clock,
            "content_hash": self.content_hash, "burn_in": burn_in_of(self.config),
            "thinning": self.config["thinning"],
        }


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def content_hash(report_dict):
    """Hash of a report with wall-clock fields removed."""
    doc = {k: v for k, v in report_dict.items() if k not in ("content_hash", "output_dir")}
    doc["config"] = {k: v for k, v in doc["config"].items() if k not in ("output_dir", "workers")}
    doc["chain_files"] = [Path(p).name for p in doc["chain_files"]]
    return hashlib.sha256(canonical_json(_strip_timing(doc)).encode()).hexdigest()


def _pool_stats(chain_stats):
    ok = [s for s in chain_stats if s is not None]
    out = {"fallbacks": sum(s["fallbacks"] for s in ok)}
    for key in ("avg_step_out", "avg_shrink", "avg_geodesic_steps", "local_acceptance",
                "swap_acceptance"):
        vals = [s[key] for s in ok if s[key] is not None]
        out[key] = float(np.mean(vals)) if vals else None
    return out


def compute_diagnostics(cfg, target, chains, wall_clock):
    rng = chain_rng(cfg["seed"], DIAGNOSTIC_STREAM)
    ref = None
    ref_n = cfg["diagnostics"]["reference_n"]
    if ref_n is not None and target.has_reference:
        ref = target.reference_sample(int(ref_n), rng)
    rep = diagnose(chains, target, wall_clock=wall_clock, reference=ref, rng=rng,
                   ksd_max_n=int(cfg["diagnostics"]["ksd_max_n"]))
    return rep.to_dict()


SUMMARY_HEADER = ["sampler", "metric", "jump%", "KSD", "t(s)", "w1_mean", "min_ess",
                  "avg_ess", "avg_step_out", "avg_shrink", "fallbacks", "chains_ok"]


def summary_row(report):
    cfg = report["config"]
    d = report["diagnostics"] or {}
    st = report["stats"]
    metric = cfg["metric"]["name"] if cfg["sampler"]["name"] in ("magss", "meta_magss") else ""
    return [cfg["sampler"]["name"], metric, d.get("jump_rate"), d.get("ksd"),
            report["wall_clock"], d.get("w1_mean"), d.get("min_ess"), d.get("avg_ess"),
            st.get("avg_step_out"), st.get("avg_shrink"), st.get("fallbacks"),
            cfg["n_chains"] - len(report["failed_chains"])]


def _write_outputs(out_dir, report):
    d = report.to_dict()
    d["content_hash"] = content_hash(d)
    report.content_hash = d["content_hash"]
    io.write_json(out_dir / "report.json", d)
    io.write_table(out_dir / "summary.csv", SUMMARY_HEADER, [summary_row(d)])


def run_experiment(cfg, output_dir=None):
    """Run all chains, persist them and write ``report.json`` and ``summary.csv``."""
    out_dir = Path(output_dir or cfg["output_dir"])
    target = build_target(cfg)
    h = config_hash(cfg)
    t0 = time.perf_counter()
    results = _pool_map(_run_chain_job, [(cfg, c) for c in range(cfg["n_chains"])],
                        cfg["workers"])
    wall = time.perf_counter() - t0
    chain_dir = out_dir / "chains"
    chain_dir.mkdir(parents=True, exist_ok=True)
    files, failed, errors, good = [], [], {}, []
    for r in results:
        c = r["chain_id"]
        sidecar = {"chain_id": c, "seed": cfg["seed"], "seed_sequence": [cfg["seed"], c],
                   "config_hash": h, "failed": r["failed"], "error": r["error"],
                   "stats": r["stats"], "chain_wall_clock": r["chain_wall_clock"]}
        csv_path = chain_dir / f"chain_{c:03d}.csv"
        if r["failed"]:
            failed.append(c)
            errors[str(c)] = r["error"]
            # a stale file from an earlier run must not be mistaken for output
            csv_path.unlink(missing_ok=True)
            log.warning("chain %d failed: %s", c, r["error"])
        else:
            io.write_chain_csv(csv_path, c, r["iterations"], r["samples"])
            files.append(str(csv_path))
            good.append(r["samples"])
        io.write_json(chain_dir / f"chain_{c:03d}.json", sidecar)
    diag = compute_diagnostics(cfg, target, good, wall) if good else None
    chain_stats = [r["stats"] for r in results]
    report = RunReport(config=cfg, config_hash=h, output_dir=str(out_dir), chain_files=files,
                       failed_chains=failed, diagnostics=diag, chain_stats=chain_stats,
                       stats=_pool_stats(chain_stats), wall_clock=wall, errors=errors)
    _write_outputs(out_dir, report)
    return report


def rebuild_report(output_dir):
    """Recompute diagnostics from the chain files of an earlier run."""
    out_dir = Path(output_dir)
    old = io.read_json(out_dir / "report.json")
    cfg = build_config({k: v for k, v in old["config"].items()})
    target = build_target(cfg)
    chains, files = [], []
    for p in old["chain_files"]:
        p = out_dir / "chains" / Path(p).name
        chains.append(io.read_chain_csv(p)[2])
        files.append(str(p))
    diag = compute_diagnostics(cfg, target, chains, old["wall_clock"]) if chains else None
    report = RunReport(config=cfg, config_hash=config_hash(cfg), output_dir=str(out_dir),
                       chain_files=files, failed_chains=old["failed_chains"], diagnostics=diag,
                       chain_stats=old["chain_stats"], stats=old["stats"],
                       wall_clock=old["wall_clock"], errors=old.get("errors", {}))
    _write_outputs(out_dir, report)
    return report


# ------------------------------------------------------------------------ grid

def grid_search(cfg, output_dir=None):
    """Run every cell of ``cfg['grid']['params']`` and rank them.

    Cells are ranked by mean marginal W1 (ascending) when the target has a
    reference sampler, otherwise by jump rate (descending).
    """
    out_dir = Path(output_dir or cfg["output_dir"])
    axes = cfg["grid"]["params"]
    if not axes:
        raise ConfigurationError("config 'grid.params': no grid axes given")
    names = list(axes)
    target = build_target(cfg)
    by_w1 = target.has_reference
    cells = []
    for k, values in enumerate(itertools.product(*(axes[a] for a in names))):
        doc = copy.deepcopy(cfg)
        doc["grid"] = {"params": {}, "n_samples": None}
        if cfg["grid"]["n_samples"] is not None:
            doc["n_samples"] = int(cfg["grid"]["n_samples"])
        for a, v in zip(names, values):
            set_path(doc, GRID_AXES[a], v)
        cell = {"cell": k, "values": dict(zip(names, values)), "score": None,
                "status": "ok", "w1_mean": None, "jump_rate": None, "ksd": None}
        try:
            cell_cfg = build_config(doc)
            rep = run_experiment(cell_cfg, out_dir / "cells" / f"cell_{k:03d}")
        except ConfigurationError as exc:
            cell["status"] = f"invalid: {exc}"
            cells.append(cell)
            continue
        d = rep.diagnostics
        if rep.exit_code != 0 or d is None:
            cell["status"] = "failed"
        else:
            cell.update(w1_mean=d["w1_mean"], jump_rate=d["jump_rate"], ksd=d["ksd"])
            cell["score"] = d["w1_mean"] if by_w1 else d["jump_rate"]
            if cell["score"] is None or not math.isfinite(cell["score"]):
                cell["status"] = "no score"
                cell["score"] = None
        cell["config"] = cell_cfg
        cells.append(cell)
    valid = [c for c in cells if c["score"] is not None]
    if not valid:
        raise MagssError("grid search: no valid cells")
    valid.sort(key=lambda c: (c["score"] if by_w1 else -c["score"], c["cell"]))
    rank = {c["cell"]: i + 1 for i, c in enumerate(valid)}
    rows = []
    for c in sorted(cells, key=lambda c: (rank.get(c["cell"], len(cells) + 1), c["cell"])):
        rows.append([rank.get(c["cell"]), c["cell"]] + [c["values"][a] for a in names]
                    + [c["score"], c["w1_mean"], c["jump_rate"], c["ksd"], c["status"]])
    header = ["rank", "cell"] + names + ["score", "w1_mean", "jump%", "KSD", "status"]
    io.write_table(out_dir / "grid.csv", header, rows)
    best = valid[0]
    io.write_json(out_dir / "best_config.json", best["config"])
    out = {"best": best, "cells": cells, "ranked_by": "w1_mean" if by_w1 else "jump%",
           "table": rows, "header": header}
    if "seed" in names:
        out["seed_spread"] = _seed_spread(cells, [a for a in names if a != "seed"])
        io.write_json(out_dir / "seed_spread.json", out["seed_spread"])
    return out


def _seed_spread(cells, others):
    """Mean and spread across seeds of each diagnostic, per setting of the other axes."""
    groups = {}
    for c in cells:
        if c["status"] == "ok":
            key = tuple(c["values"][a] for a in others)
            groups.setdefault(key, []).append(c)
    out = []
    for key, cs in groups.items():
        row = {"values": dict(zip(others, key)), "n_seeds": len(cs)}
        for k in ("ksd", "w1_mean", "jump_rate"):
            vals = [c[k] for c in cs if c[k] is not None]
            if vals:
                row[k + "_seed_mean"] = float(np.mean(vals))
                row[k + "_seed_std"] = float(np.std(vals))
        out.append(row)
    return out


# ----------------------------------------------------------------------- trace

def trace_geodesics(cfg, output_dir=None):
    """Trace geodesics from one origin along random unit tangents.

    Writes ``trace.csv`` with one row per (direction, t) that the integrator
    reached; a direction whose integration fails is truncated there and flagged.
    """
    out_dir = Path(output_dir or cfg["output_dir"])
    target = build_target(cfg)
    metric = make_metric(cfg["metric"]["name"], target, **dict(cfg["metric"]["params"]))
    tr = cfg["trace"]
    origin = tr["origin"]
    x0 = np.zeros(target.dim) if origin is None else np.asarray(origin, dtype=np.float64)
    if x0.ndim == 0:
        x0 = np.full(target.dim, float(x0))
    if x0.shape != (target.dim,):
        raise ConfigurationError(f"config 'trace.origin': expected {target.dim} coordinates")
    n_dir = int(tr["n_directions"])
    t_max = float(tr["t_max"])
    dt = float(tr["dt"])
    if n_dir < 1 or not t_max > 0 or not dt > 0:
        raise ConfigurationError("config 'trace': need n_directions >= 1, t_max > 0, dt > 0")
    rng = chain_rng(cfg["seed"], 0)
    ts = np.arange(int(round(t_max / dt)) + 1) * dt
    integ = integrator_config(cfg)
    rows, meta = [], []
    for d in range(n_dir):
        v0 = sample_unit_tangent(metric, x0, rng)
        curve = GeodesicCurve(metric, x0, v0, integ)
        reached, truncated_at, reason = [], None, None
        for t in ts:
            try:
                x, v = curve.eval_with_velocity(t)
                rs = curve.speed(t)
            except IntegrationError as exc:
                truncated_at, reason = float(t), str(exc)
                break
            reached.append((float(t), x, float(np.sqrt(v @ v)), rs))
        flag = int(truncated_at is not None)
        for t, x, es, rs in reached:
            rows.append([d, t] + [float(c) for c in x] + [es, rs, flag])
        meta.append({"direction_id": d, "v0": v0.tolist(), "truncated_at": truncated_at,
                     "reason": reason, "n_steps": curve.n_steps})
    header = ["direction_id", "t"] + [f"x_{k + 1}" for k in range(target.dim)] + [
        "euclidean_speed", "riemannian_speed", "truncated"]
    io.write_table(out_dir / "trace.csv", header, rows)
    io.write_json(out_dir / "trace.json", {"config_hash": config_hash(cfg), "origin": x0.tolist(),
                                           "directions": meta})
    return {"header": header, "rows": rows, "directions": meta}


# ------------------------------------------------------------------------ tune

def _pilot_acceptance(target, x0, eps, n_pilot, seed):
    # common random numbers across candidates keep the bisection monotone
    rng = chain_rng(seed, 0)
    st = S.mala_step(S.initial_state(x0, rng), target, eps, n_steps=n_pilot)
    return st.stats.local_accepted / n_pilot


def mala_tune(cfg, output_dir=None):
    """Bisect (in log space) on the MALA step size for a target acceptance rate."""
    tune = cfg["tune"]
    rate = float(tune["rate"])
    lo, hi = (float(b) for b in tune["bracket"])
    tol = float(tune["tolerance"])
    n_pilot = int(tune["n_pilot"])
    target = build_target(cfg)
    x0 = initial_point(cfg, target, chain_rng(cfg["seed"], DIAGNOSTIC_STREAM))
    history = []

    def acc(eps):
        a = _pilot_acceptance(target, x0, eps, n_pilot, cfg["seed"])
        history.append({"step_size": eps, "acceptance": a})
        return a

    result = None
    a_hi = acc(hi)
    if a_hi >= rate - tol:
        if abs(a_hi - rate) > tol:
            warnings.warn("acceptance stays above the target across the bracket; "
                          "returning the bracket maximum", RuntimeWarning, stacklevel=2)
        result = {"step_size": hi, "acceptance": a_hi, "converged": abs(a_hi - rate) <= tol}
    else:
        a_lo = acc(lo)
        if a_lo <= rate + tol:
            if abs(a_lo - rate) > tol:
                warnings.warn("acceptance stays below the target across the bracket; "
                              "returning the bracket minimum", RuntimeWarning, stacklevel=2)
            result = {"step_size": lo, "acceptance": a_lo, "converged": abs(a_lo - rate) <= tol}
    if result is None:
        best = None
        for _ in range(int(tune["max_iter"])):
            mid = math.sqrt(lo * hi)
            a = acc(mid)
            if best is None or abs(a - rate) < abs(best[1] - rate):
                best = (mid, a)
            if abs(a - rate) <= tol:
                break
            if a > rate:
                lo = mid
            else:
                hi = mid
        conv = abs(best[1] - rate) <= tol
        if not conv:
            warnings.warn("bracket exhausted before reaching the target acceptance; "
                          "returning the best step size found", RuntimeWarning, stacklevel=2)
        result = {"step_size": best[0], "acceptance": best[1], "converged": conv}
    result.update(target_rate=rate, history=history, config_hash=config_hash(cfg))
    if output_dir is not None or cfg["output_dir"]:
        io.write_json(Path(output_dir or cfg["output_dir"]) / "tune.json", result)
    return result


