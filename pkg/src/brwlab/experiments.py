"""Verification suites: reproducible runs binding samplers, estimators, distances.

Each suite draws every random number from a stream derived by hashing
(master seed, suite, cell, batch index), so results are identical at any
thread count and farm order. Suite outputs are flat measurement cells; a
cell carries its value, an SE or an exactness flag, any baseline and bound
it was compared against, and a pass verdict where the suite asserts one.
Wall-clock time lives only in the metadata file so the JSONL payload is
byte-stable across reruns.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, validate
from .engine import (
    OccupancyBatch,
    merge_batches,
    spine_occupancy,
    spine_z,
    unconditioned_z,
)
from .estimators import estimate_A, estimate_mu_kappa, fourth_moment_ratio, sigma_tilde
from .lattice import make_lattice
from .offspring import OffspringLaw, survival_exact
from .reference import (
    GeometricSumSpec,
    coin_summand_spec,
    default_c_mvn,
    default_c_r,
    empirical_summand_spec,
    mvn_compare_bound,
    renyi_bound,
    sample_exp,
    sample_geometric_sum,
    sample_mvn,
    sample_sl,
    sqrt_factor,
    two_point_summand_spec,
)
from .streams import substream
from .wasserstein import (
    Baseline,
    w1_integer_vs_geometric,
    w1_matching,
    w1_sorted,
    w1_vs_exp,
)

__all__ = [
    "DegenerateSigma",
    "RunRecord",
    "run_survival",
    "run_yaglom",
    "run_theorem1",
    "run_theorem3",
    "run_decomposition_gap",
    "run_random_sum_suite",
    "run_clt_suite",
    "run_estimate_kappa",
    "run_estimate_sigma",
    "RUNNERS",
    "run_suite",
    "write_record",
]

ARTIFACT_VERSION = "0.1.0"


class DegenerateSigma(UserWarning):
    """Estimated covariance is statistically indistinguishable from zero."""


@dataclass
class RunRecord:
    """Everything one suite run produced.

    ``cells`` is the deterministic payload (one dict per measurement);
    ``failures`` lists violated suite assertions in plain words;
    ``estimates`` collects fitted quantities the cells were built from.
    """

    suite: str
    config: dict
    cells: list[dict] = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    seed: int = 0
    version: str = ARTIFACT_VERSION
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def payload(self) -> dict:
        return {
            "suite": self.suite,
            "config": self.config,
            "cells": self.cells,
            "estimates": self.estimates,
            "failures": self.failures,
            "seed": self.seed,
            "version": self.version,
        }


def _pyify(x):
    if isinstance(x, dict):
        return {k: _pyify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_pyify(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_pyify(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _cell(
    cfg: ExperimentConfig,
    law: str,
    statistic: str,
    value: float,
    se: float | None = None,
    *,
    n: int | None = None,
    d: int | None = None,
    trials: int | None = None,
    baseline: float | None = None,
    baseline_sd: float | None = None,
    bound: float | None = None,
    passed: bool | None = None,
    exact: bool = False,
    out_of_hypothesis: bool = False,
    extra: dict | None = None,
) -> dict:
    return _pyify(
        {
            "suite": cfg.suite,
            "law": law,
            "d": cfg.d if d is None else d,
            "n": n,
            "trials": trials,
            "statistic": statistic,
            "value": value,
            "se": se,
            "baseline": baseline,
            "baseline_sd": baseline_sd,
            "bound": bound,
            "passed": passed,
            "exact": exact,
            "out_of_hypothesis": out_of_hypothesis,
            "extra": extra or {},
        }
    )


def _farm(fn, args_list, threads: int) -> list:
    """Run fn over argument tuples, results in submission order."""
    if threads <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = [ex.submit(fn, *args) for args in args_list]
        return [f.result() for f in futures]


def _batch_plan(total: int, size: int) -> list[tuple[int, int]]:
    plan = []
    done = 0
    while done < total:
        take = min(size, total - done)
        plan.append((len(plan), take))
        done += take
    return plan


def _spine_z_sample(cfg: ExperimentConfig, law: OffspringLaw, n: int, trials: int) -> np.ndarray:
    def one(idx: int, take: int) -> np.ndarray:
        rng = substream(cfg.seed, cfg.suite, "z", n, idx)
        return spine_z(law, n, take, rng)

    parts = _farm(one, _batch_plan(trials, cfg.batch_size), cfg.threads)
    return np.concatenate(parts)


def _occupancy_sample(
    cfg: ExperimentConfig,
    law: OffspringLaw,
    n: int,
    trials: int,
    r: int,
    tag: str,
    d: int | None = None,
    m: int | None = None,
    gap_j: int | None = None,
) -> OccupancyBatch:
    lat = make_lattice(cfg.d if d is None else d)

    def one(idx: int, take: int) -> OccupancyBatch:
        rng = substream(cfg.seed, cfg.suite, tag, lat.d, n, idx)
        return spine_occupancy(
            law, lat, n, take, rng, r=r, m=m, gap_j=gap_j, spine_term=cfg.spine_term
        )

    parts = _farm(one, _batch_plan(trials, cfg.batch_size), cfg.threads)
    return merge_batches(parts)


def _occupancy_chunks(
    cfg: ExperimentConfig, law: OffspringLaw, n: int, r: int
) -> list[OccupancyBatch]:
    """One conditioned-tree chunk per matching evaluation, independently seeded."""
    lat = make_lattice(cfg.d)

    def one(k: int) -> OccupancyBatch:
        rng = substream(cfg.seed, cfg.suite, "chunk", n, k)
        return spine_occupancy(law, lat, n, cfg.ot_cap, rng, r=r)

    return _farm(one, [(k,) for k in range(cfg.matchings)], cfg.threads)


def _chunked_matching(
    cfg: ExperimentConfig,
    vector_chunks: list[np.ndarray],
    target_sampler,
    path: tuple,
) -> tuple[float, float, list[float]]:
    """Mean and SE of W1 over per-chunk optimal matchings against target draws.

    The target stream depends only on the chunk index, so calls that share a
    path see identical target points chunk by chunk; per-chunk distances at
    different horizons can then be differenced with the target noise removed.
    """

    def one(k: int) -> float:
        rng = substream(cfg.seed, *path, "target", k)
        target = target_sampler(rng, len(vector_chunks[k]))
        return w1_matching(vector_chunks[k], target, cap=cfg.ot_cap).value

    vals = _farm(one, [(k,) for k in range(len(vector_chunks))], cfg.threads)
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))), vals.tolist()


def _matching_baseline(cfg: ExperimentConfig, target_sampler, path: tuple) -> Baseline:
    """Same-law matching distance at the OT cap, the finite-sample floor."""

    def one(i: int) -> float:
        rng = substream(cfg.seed, *path, "baseline", i)
        a = target_sampler(rng, cfg.ot_cap)
        b = target_sampler(rng, cfg.ot_cap)
        return w1_matching(a, b, cap=cfg.ot_cap).value

    vals = np.asarray(_farm(one, [(i,) for i in range(cfg.baseline_pairs)], cfg.threads))
    return Baseline(mean=float(vals.mean()), sd=float(vals.std(ddof=1)), pairs=len(vals))


def _sorted_baseline(cfg: ExperimentConfig, sampler, size: int, path: tuple) -> Baseline:
    """Same-law two-sample sorted-coupling floor at the given sample size."""

    def one(i: int) -> float:
        rng = substream(cfg.seed, *path, "baseline", i)
        return w1_sorted(sampler(rng, size), sampler(rng, size)).value

    vals = np.asarray(_farm(one, [(i,) for i in range(cfg.baseline_pairs)], cfg.threads))
    return Baseline(mean=float(vals.mean()), sd=float(vals.std(ddof=1)), pairs=len(vals))


def _excess_se(se: float, base: Baseline) -> float:
    return math.sqrt(se**2 + base.sd**2 / base.pairs)


def _loglog_slope(xs, ys, ses=None) -> tuple[float | None, float | None]:
    """LS slope of log(y) on log(x); propagated SE when y-errors are given."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if (ys <= 0).any():
        return None, None
    lx = np.log(xs)
    ly = np.log(ys)
    w = lx - lx.mean()
    sxx = float(w @ w)
    slope = float(w @ ly / sxx)
    if ses is None:
        return slope, None
    rel = np.asarray(ses, dtype=np.float64) / ys
    return slope, float(math.sqrt(((w / sxx) ** 2 * rel**2).sum()))


def _margin(cfg: ExperimentConfig) -> float:
    return float(cfg.threshold("se_margin"))


def _check_decreasing(
    cfg: ExperimentConfig,
    record: RunRecord,
    label: str,
    grid,
    values,
    ses,
) -> None:
    """Assert last grid value sits below the first by the SE margin."""
    lo, hi = values[-1], values[0]
    gap = hi - lo
    need = _margin(cfg) * math.sqrt(ses[0] ** 2 + ses[-1] ** 2)
    if not gap > need:
        record.failures.append(
            f"{label}: value at {grid[-1]} ({lo:.5g}) is not below value at "
            f"{grid[0]} ({hi:.5g}) by more than {need:.5g}"
        )


def _check_decreasing_paired(
    cfg: ExperimentConfig,
    record: RunRecord,
    label: str,
    grid,
    values,
    se_diff: float,
) -> float:
    """Endpoint decrease where the difference SE came from paired sampling.

    When both endpoints are measured against shared target draws (and a
    shared baseline floor), the noise common to the pair cancels in the
    difference, so the honest margin is the SE of the paired difference
    rather than the quadrature of two marginal SEs.
    """
    lo, hi = values[-1], values[0]
    gap = hi - lo
    need = _margin(cfg) * se_diff
    if not gap > need:
        record.failures.append(
            f"{label}: value at {grid[-1]} ({lo:.5g}) is not below value at "
            f"{grid[0]} ({hi:.5g}) by more than {need:.5g}"
        )
    return need


# ---------------------------------------------------------------------------
# suites


def run_survival(cfg: ExperimentConfig) -> RunRecord:
    """Monte Carlo survival frequencies against the iterated-pgf exact values."""
    law = cfg.law_object()
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    margin = _margin(cfg)
    kol = []
    for n in cfg.n_grid:
        def one(idx: int, take: int) -> int:
            rng = substream(cfg.seed, cfg.suite, "u", n, idx)
            return int((unconditioned_z(law, n, take, rng) > 0).sum())

        alive = sum(_farm(one, _batch_plan(cfg.trials, cfg.batch_size), cfg.threads))
        p_hat = alive / cfg.trials
        exact = survival_exact(law, n)
        se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / cfg.trials)
        err = abs(p_hat - exact)
        ok = err <= margin * se
        record.cells.append(
            _cell(
                cfg, law.name, "survival", p_hat, se, n=n, trials=cfg.trials,
                bound=margin * se, passed=ok,
                extra={"exact_value": exact, "abs_error": err},
            )
        )
        if not ok:
            record.failures.append(
                f"survival: |p_hat - exact| = {err:.3g} at n={n} exceeds {margin} SE"
            )
        kol.append(abs(n * exact - 2.0 / law.sigma2))
        record.cells.append(
            _cell(
                cfg, law.name, "kolmogorov_gap", kol[-1], None, n=n, exact=True,
                extra={"n_times_survival": n * exact, "limit": 2.0 / law.sigma2},
            )
        )
    if len(cfg.n_grid) > 1 and not kol[-1] < kol[0]:
        record.failures.append(
            f"survival: |n s_n - 2/sigma^2| did not shrink from n={cfg.n_grid[0]} "
            f"to n={cfg.n_grid[-1]}"
        )
    return record


def run_yaglom(cfg: ExperimentConfig) -> RunRecord:
    """W1 of the scaled conditioned population against its exponential limit."""
    law = cfg.law_object()
    rate = law.sigma2 / 2.0
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)

    def exact_sampler(rng, size):
        return sample_exp(rate, rng, size)

    def one_floor(i: int) -> float:
        rng = substream(cfg.seed, cfg.suite, "floor", i)
        return w1_vs_exp(exact_sampler(rng, cfg.trials), rate).value

    floor_vals = np.asarray(
        _farm(one_floor, [(i,) for i in range(cfg.baseline_pairs)], cfg.threads)
    )
    base = Baseline(float(floor_vals.mean()), float(floor_vals.std(ddof=1)), len(floor_vals))

    values, ses = [], []
    for n in cfg.n_grid:
        z = _spine_z_sample(cfg, law, n, cfg.trials)
        rep = w1_vs_exp(z / n, rate, n_boot=48, rng=substream(cfg.seed, cfg.suite, "boot", n))
        values.append(rep.value)
        ses.append(rep.se)
        record.cells.append(
            _cell(
                cfg, law.name, "w1_yaglom", rep.value, rep.se, n=n, trials=cfg.trials,
                baseline=base.mean, baseline_sd=base.sd,
                extra={"mean_z_over_n": float(np.mean(z / n)), "rate": rate},
            )
        )
    threshold = float(cfg.threshold("yaglom_w1_max"))
    if not values[-1] < threshold:
        record.failures.append(
            f"yaglom: w1 at n={cfg.n_grid[-1]} ({values[-1]:.4g}) is not below {threshold}"
        )
    record.cells.append(
        _cell(
            cfg, law.name, "w1_yaglom_final_vs_threshold", values[-1], ses[-1],
            n=cfg.n_grid[-1], bound=threshold, passed=values[-1] < threshold,
        )
    )
    if len(cfg.n_grid) > 1:
        _check_decreasing(cfg, record, "yaglom", cfg.n_grid, values, ses)
    slope, slope_se = _loglog_slope(cfg.n_grid, values, ses)
    record.estimates["loglog_slope"] = slope
    record.estimates["loglog_slope_se"] = slope_se
    # the raw distance flattens onto the finite-sample floor at large n, so
    # the floor-corrected slope is logged alongside
    exc_slope, exc_slope_se = _loglog_slope(
        cfg.n_grid, [v - base.mean for v in values], ses
    )
    record.estimates["loglog_slope_excess"] = exc_slope
    if slope is not None:
        record.cells.append(
            _cell(
                cfg, law.name, "loglog_slope", slope, slope_se,
                extra={"asserted": False, "floor_corrected_slope": exc_slope,
                       "floor_corrected_slope_se": exc_slope_se},
            )
        )
    return record


def run_theorem1(cfg: ExperimentConfig) -> RunRecord:
    """Joint occupancy vector against its rank-one exponential limit.

    Per horizon n the conditioned vector (Z_n/n, M_n(1)/n, ..., M_n(r)/n) is
    matched against (1, k_1, ..., k_r) E with E exponential of rate
    sigma^2/2 and k the occupancy-mean estimates from the largest horizon;
    the assertion is that the baseline-corrected distance shrinks along the
    grid. With r = 0 the vector degenerates to Z_n/n alone.
    """
    law = cfg.law_object()
    rate = law.sigma2 / 2.0
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    lat = make_lattice(cfg.d)

    chunks = {n: _occupancy_chunks(cfg, law, n, max(cfg.r, 1)) for n in cfg.n_grid}
    n_top = cfg.n_grid[-1]
    top = merge_batches(chunks[n_top])
    ke = estimate_mu_kappa(law, lat, n_top, r=max(cfg.r, 1), sample=top)
    coeffs = np.concatenate([[1.0], ke.kappa[: cfg.r]])
    record.estimates["kappa"] = _pyify(ke.to_dict())
    record.estimates["target_coefficients"] = _pyify(coeffs)

    def target_sampler(rng, size):
        return np.outer(sample_exp(rate, rng, size), coeffs)

    # the target's first coordinate is the exponential factor itself
    tdraw = target_sampler(substream(cfg.seed, cfg.suite, "targetmean"), 8192)[:, 0]
    t_mean, t_se = float(tdraw.mean()), float(tdraw.std(ddof=1) / math.sqrt(len(tdraw)))
    t_ok = abs(t_mean - 2.0 / law.sigma2) <= _margin(cfg) * t_se
    record.cells.append(
        _cell(
            cfg, law.name, "target_first_coordinate_mean", t_mean, t_se,
            bound=2.0 / law.sigma2, passed=t_ok,
        )
    )
    if not t_ok:
        record.failures.append(
            f"theorem1: target first-coordinate mean {t_mean:.4g} is off 2/sigma^2"
        )

    base = _matching_baseline(cfg, target_sampler, (cfg.suite,))
    excesses, exc_ses, dists_by_n = [], [], {}
    for n in cfg.n_grid:
        vec_chunks = [
            np.column_stack(
                [b.z_final / n] + [b.m_counts[:, j] / n for j in range(1, cfg.r + 1)]
            )
            for b in chunks[n]
        ]
        # target substreams omit n: chunk k faces the same draws at every
        # horizon, so endpoint differences shed the target noise
        value, se, dists = _chunked_matching(cfg, vec_chunks, target_sampler, (cfg.suite,))
        excess = value - base.mean
        e_se = _excess_se(se, base)
        excesses.append(excess)
        exc_ses.append(e_se)
        dists_by_n[n] = np.asarray(dists)
        record.cells.append(
            _cell(
                cfg, law.name, "w1_vector", value, se, n=n,
                trials=cfg.matchings * cfg.ot_cap,
                baseline=base.mean, baseline_sd=base.sd,
                extra={"distances": dists},
            )
        )
        record.cells.append(
            _cell(cfg, law.name, "excess_w1", excess, e_se, n=n,
                  baseline=base.mean, baseline_sd=base.sd)
        )
    if len(cfg.n_grid) > 1:
        paired = dists_by_n[cfg.n_grid[0]] - dists_by_n[cfg.n_grid[-1]]
        se_diff = float(paired.std(ddof=1) / math.sqrt(len(paired)))
        need = _check_decreasing_paired(
            cfg, record, "theorem1 excess", cfg.n_grid, excesses, se_diff
        )
        record.cells.append(
            _cell(
                cfg, law.name, "excess_w1_endpoint_drop", float(paired.mean()), se_diff,
                bound=need, passed=float(paired.mean()) > need,
                extra={"n_low": cfg.n_grid[0], "n_high": cfg.n_grid[-1]},
            )
        )
    slope, slope_se = _loglog_slope(cfg.n_grid, excesses, exc_ses)
    record.estimates["loglog_slope"] = slope
    record.estimates["loglog_slope_se"] = slope_se
    if slope is not None:
        record.cells.append(
            _cell(cfg, law.name, "loglog_slope", slope, slope_se, extra={"asserted": False})
        )
    return record


def run_theorem3(cfg: ExperimentConfig) -> RunRecord:
    """Centered occupancy counts against the symmetric Laplace limit.

    Per-tree vectors ((M_n(j) - k_j Z_n)/sqrt(n))_j on conditioned trees are
    compared with SL_r of covariance (sigma^2/2) A. A coefficient error dk
    shifts every vector by dk Z_n/sqrt(n), whose conditional mean grows like
    sqrt(n), so k comes from a dedicated sample at a small horizon where
    trees are ~ n^2 cheaper and the finite-n coefficient bias (decaying like
    n^{1-d/2}) is already far below the achievable SE. The covariance is
    estimated at the largest horizon from its own stream. Asserts the
    baseline-corrected distance shrinks along the grid, checks a
    marginal-variance consistency identity out-of-sample, and checks that
    swapping k for the finite-n occupancy means moves the distance by no
    more than the propagated coefficient noise allows.
    """
    law = cfg.law_object()
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    lat = make_lattice(cfg.d)
    out_hyp = cfg.d < 7
    margin = _margin(cfg)
    n_top = cfg.n_grid[-1]

    est_sample = _occupancy_sample(
        cfg, law, cfg.estimation_n, cfg.estimation_trials, cfg.r, "estimate"
    )
    ke = estimate_mu_kappa(law, lat, cfg.estimation_n, r=cfg.r, sample=est_sample)
    del est_sample
    kappa = ke.kappa[: cfg.r]
    kappa_se = ke.se[: cfg.r]
    record.estimates["kappa"] = _pyify(ke.to_dict())

    # centering pinned to the high-precision coefficients: the covariance
    # estimate's own plug-in means would re-inject their sampling noise
    # through d(A)/d(mu) = -2 s_n E[Z U | survival], which dominates at
    # feasible sample sizes
    scale_sample = _occupancy_sample(cfg, law, n_top, cfg.scale_trials, cfg.r, "scale")
    ae = estimate_A(
        law, lat, n_top, r=cfg.r, sample=scale_sample, n_boot=cfg.boot,
        boot_rng=substream(cfg.seed, cfg.suite, "aboot"), mu=kappa,
    )
    del scale_sample
    cov = sigma_tilde(ae, law)
    record.estimates["a_matrix"] = _pyify(ae.to_dict())
    record.estimates["sigma_tilde"] = _pyify(cov.entries)

    top_j = int(np.argmax(np.diag(ae.matrix)))
    top_eig = float(np.linalg.eigvalsh((ae.matrix + ae.matrix.T) / 2.0).max())
    if top_eig < margin * ae.se[top_j, top_j]:
        warnings.warn(
            DegenerateSigma(
                f"largest eigenvalue {top_eig:.3g} of the estimated covariance is "
                f"below {margin} SE ({ae.se[top_j, top_j]:.3g}); the Laplace target "
                "is statistically indistinguishable from a point mass"
            )
        )

    def vectors(batch: OccupancyBatch, n: int, coeff: np.ndarray) -> np.ndarray:
        m = batch.m_counts[:, 1 : cfg.r + 1].astype(np.float64)
        return (m - np.outer(batch.z_final, coeff)) / math.sqrt(n)

    def target_sampler(rng, size):
        return sample_sl(cov, rng, size)

    # per-horizon conditioned samples; distances against one shared target
    # sample (r = 1: exact sorted coupling on the full sample) or against
    # shared per-chunk matching draws (r > 1), so horizon differences are
    # paired and the common floor cancels
    scalar = cfg.r == 1
    batches: dict[int, OccupancyBatch] = {}
    dists_by_n: dict[int, np.ndarray] = {}
    values, ses, excesses, exc_ses, mean_z = [], [], [], [], {}
    if scalar:
        tgt = target_sampler(substream(cfg.seed, cfg.suite, "target"), cfg.trials)[:, 0]
        base = _sorted_baseline(
            cfg, lambda rng, size: target_sampler(rng, size)[:, 0], cfg.trials,
            (cfg.suite,),
        )
        vecs_1d: dict[int, np.ndarray] = {}
        for n in cfg.n_grid:
            batches[n] = _occupancy_sample(cfg, law, n, cfg.trials, cfg.r, "eval")
            vecs_1d[n] = vectors(batches[n], n, kappa)[:, 0]
            rep = w1_sorted(
                vecs_1d[n], tgt, n_boot=cfg.boot,
                rng=substream(cfg.seed, cfg.suite, "boot", n),
            )
            values.append(rep.value)
            ses.append(rep.se)
            mean_z[n] = float(batches[n].z_final.mean())
    else:
        chunk_lists = {n: _occupancy_chunks(cfg, law, n, cfg.r) for n in cfg.n_grid}
        base = _matching_baseline(cfg, target_sampler, (cfg.suite,))
        for n in cfg.n_grid:
            vec_chunks = [vectors(b, n, kappa) for b in chunk_lists[n]]
            value, se, dists = _chunked_matching(
                cfg, vec_chunks, target_sampler, (cfg.suite,)
            )
            batches[n] = merge_batches(chunk_lists[n])
            dists_by_n[n] = np.asarray(dists)
            values.append(value)
            ses.append(se)
            mean_z[n] = float(batches[n].z_final.mean())

    for i, n in enumerate(cfg.n_grid):
        excess = values[i] - base.mean
        e_se = _excess_se(ses[i], base)
        excesses.append(excess)
        exc_ses.append(e_se)
        record.cells.append(
            _cell(
                cfg, law.name, "w1_vector", values[i], ses[i], n=n, trials=cfg.trials,
                baseline=base.mean, baseline_sd=base.sd, out_of_hypothesis=out_hyp,
            )
        )
        record.cells.append(
            _cell(cfg, law.name, "excess_w1", excess, e_se, n=n,
                  baseline=base.mean, baseline_sd=base.sd, out_of_hypothesis=out_hyp)
        )

    if len(cfg.n_grid) > 1:
        n_lo, n_hi = cfg.n_grid[0], cfg.n_grid[-1]
        if scalar:
            rngb = substream(cfg.seed, cfg.suite, "trendboot")
            v_lo, v_hi, t_n = vecs_1d[n_lo], vecs_1d[n_hi], len(tgt)
            diffs = np.empty(cfg.boot)
            for b in range(cfg.boot):
                ts = np.sort(tgt[rngb.integers(0, t_n, t_n)])
                d_lo = np.abs(np.sort(v_lo[rngb.integers(0, t_n, t_n)]) - ts).mean()
                d_hi = np.abs(np.sort(v_hi[rngb.integers(0, t_n, t_n)]) - ts).mean()
                diffs[b] = d_lo - d_hi
            pair_se = float(diffs.std(ddof=1))
            tgt_sorted = np.sort(tgt)

            def endpoint_gap(coeff: np.ndarray) -> float:
                lo = np.sort(vectors(batches[n_lo], n_lo, coeff)[:, 0])
                hi = np.sort(vectors(batches[n_hi], n_hi, coeff)[:, 0])
                return float(
                    np.abs(lo - tgt_sorted).mean() - np.abs(hi - tgt_sorted).mean()
                )
        else:
            paired = dists_by_n[n_lo] - dists_by_n[n_hi]
            pair_se = float(paired.std(ddof=1) / math.sqrt(len(paired)))

            def endpoint_gap(coeff: np.ndarray) -> float:
                lo, _, _ = _chunked_matching(
                    cfg, [vectors(b, n_lo, coeff) for b in chunk_lists[n_lo]],
                    target_sampler, (cfg.suite,),
                )
                hi, _, _ = _chunked_matching(
                    cfg, [vectors(b, n_hi, coeff) for b in chunk_lists[n_hi]],
                    target_sampler, (cfg.suite,),
                )
                return lo - hi

        # residual coefficient noise enters endpoint i as dk * mean_z_i/sqrt(n_i)
        # with one shared dk; the linear worst case |dk| * sens_diff badly
        # overstates the realized response (the coupling absorbs mean shifts
        # far smaller than the residual discrepancy), so the term is measured
        # by finite difference at the +-2 SE noise scale on the same samples
        gap0 = values[0] - values[-1]
        probe_var = 0.0
        probe_steps = []
        for jj in range(cfg.r):
            h = 2.0 * float(kappa_se[jj])
            probe_steps.append(h)
            if h <= 0.0:
                continue
            e = np.zeros(cfg.r)
            e[jj] = h
            wiggle = max(
                abs(endpoint_gap(kappa + e) - gap0),
                abs(endpoint_gap(kappa - e) - gap0),
            )
            probe_var += (wiggle / 2.0) ** 2
        se_diff = math.sqrt(pair_se**2 + probe_var)
        need = _check_decreasing_paired(
            cfg, record, "theorem3 excess", cfg.n_grid, excesses, se_diff
        )
        drop = excesses[0] - excesses[-1]
        record.cells.append(
            _cell(
                cfg, law.name, "excess_w1_endpoint_drop", drop, se_diff,
                bound=need, passed=drop > need, out_of_hypothesis=out_hyp,
                extra={"n_low": n_lo, "n_high": n_hi, "paired_se": pair_se,
                       "coefficient_noise_se": math.sqrt(probe_var),
                       "coefficient_probe_steps": probe_steps},
            )
        )
    slope, slope_se = _loglog_slope(cfg.n_grid, excesses, exc_ses)
    record.estimates["loglog_slope"] = slope
    record.estimates["loglog_slope_se"] = slope_se

    # marginal variance of the vectors should track the target's diagonal
    # through the exact conditioning factor 2/(sigma^2 n s_n); the covariance
    # came from its own stream, so this is an out-of-sample consistency check
    s_n = survival_exact(law, n_top)
    factor = 2.0 / (law.sigma2 * n_top * s_n)
    rel_tol = float(cfg.threshold("marginal_var_rel_tol"))
    top_vectors = vectors(batches[n_top], n_top, kappa)
    for j in range(1, cfg.r + 1):
        got = float(top_vectors[:, j - 1].var(ddof=1))
        want = float(cov.entries[j - 1, j - 1] * factor)
        rel = abs(got / want - 1.0) if want > 0 else math.inf
        ok = rel <= rel_tol
        record.cells.append(
            _cell(
                cfg, law.name, f"marginal_var_ratio_{j}", got / want if want > 0 else math.nan,
                None, n=n_top, bound=rel_tol, passed=ok, out_of_hypothesis=out_hyp,
                extra={"observed": got, "predicted": want, "conditioning_factor": factor},
            )
        )
        if not ok:
            record.failures.append(
                f"theorem3: marginal variance of coordinate {j} at n={n_top} is "
                f"{got:.4g}, off the predicted {want:.4g} by more than {rel_tol:.0%}"
            )

    # swapping the limit coefficients for finite-n means re-forms the same
    # vectors against the same target draws, so the only genuine variation
    # is the coefficient noise itself, amplified by mean_z/sqrt(n)
    mu_est = estimate_mu_kappa(law, lat, n_top, r=cfg.r, sample=batches[n_top])
    mu_top = mu_est.kappa[: cfg.r]
    if scalar:
        value_mu = w1_sorted(vectors(batches[n_top], n_top, mu_top)[:, 0], tgt).value
    else:
        vec_chunks_mu = [vectors(b, n_top, mu_top) for b in chunk_lists[n_top]]
        value_mu, _, _ = _chunked_matching(
            cfg, vec_chunks_mu, target_sampler, (cfg.suite,)
        )
    value_k = values[-1]
    shift = abs(value_mu - value_k)
    sens_top = mean_z[n_top] / math.sqrt(n_top)
    se_swap = sens_top * float(
        np.sqrt(np.sum(kappa_se**2 + mu_est.se[: cfg.r] ** 2))
    )
    allowed = float(cfg.threshold("swap_shift_se")) * se_swap
    ok = shift <= allowed
    record.cells.append(
        _cell(
            cfg, law.name, "coefficient_swap_shift", shift, se_swap, n=n_top,
            bound=allowed, passed=ok, out_of_hypothesis=out_hyp,
            extra={"with_limit_coeffs": value_k, "with_finite_n_means": value_mu,
                   "sensitivity": sens_top},
        )
    )
    if not ok:
        record.failures.append(
            f"theorem3: swapping limit coefficients for finite-n means moved the "
            f"distance by {shift:.4g} (> {allowed:.4g}) at n={n_top}"
        )
    return record


def run_decomposition_gap(cfg: ExperimentConfig) -> RunRecord:
    """Blocked-spectrum gap and cross-ancestor sharing across dimensions."""
    law = cfg.law_object()
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    gaps: dict[tuple[int, int], tuple[float, float]] = {}
    shares: dict[tuple[int, int], tuple[float, float]] = {}
    for d in cfg.d_grid:
        for n in cfg.n_grid:
            m = cfg.m if cfg.m is not None else n // 2
            batch = _occupancy_sample(
                cfg, law, n, cfg.trials, cfg.r, "gap", d=d, m=m, gap_j=cfg.j
            )
            t = len(batch.z_final)
            gap_over_n = batch.gap.astype(np.float64) / n
            g_mean = float(gap_over_n.mean())
            g_se = float(gap_over_n.std(ddof=1) / math.sqrt(t))
            sh = batch.shared.astype(np.float64)
            s_mean = float(sh.mean())
            s_se = float(sh.std(ddof=1) / math.sqrt(t))
            gaps[(d, n)] = (g_mean, g_se)
            shares[(d, n)] = (s_mean, s_se)
            record.cells.append(
                _cell(
                    cfg, law.name, "gap_over_n", g_mean, g_se, n=n, d=d, trials=t,
                    extra={"m": m, "j": cfg.j, "spine_term": cfg.spine_term,
                           "mean_gap": float(batch.gap.mean())},
                )
            )
            record.cells.append(
                _cell(
                    cfg, law.name, "shared_sites", s_mean, s_se, n=n, d=d, trials=t,
                    extra={"m": m, "mean_ancestors": float(batch.ancestors_at_m.mean())},
                )
            )
    d_lo, d_hi = cfg.d_grid[0], cfg.d_grid[-1]
    if d_hi > d_lo:
        for n in cfg.n_grid:
            for name, table in (("gap_over_n", gaps), ("shared_sites", shares)):
                lo_v, lo_se = table[(d_hi, n)]
                hi_v, hi_se = table[(d_lo, n)]
                need = _margin(cfg) * math.sqrt(lo_se**2 + hi_se**2)
                if not hi_v - lo_v > need:
                    record.failures.append(
                        f"decomposition: {name} at n={n} did not decrease from "
                        f"d={d_lo} ({hi_v:.4g}) to d={d_hi} ({lo_v:.4g}) by {need:.4g}"
                    )
    return record


def _occupancy_pool(cfg: ExperimentConfig, law: OffspringLaw) -> np.ndarray:
    """Per-tree occupancy count vectors used as an empirical summand pool."""
    pool_d = 3
    pool_n = 50
    pool_trials = 2_000
    lat = make_lattice(pool_d)
    rng = substream(cfg.seed, cfg.suite, "pool")
    batch = spine_occupancy(law, lat, pool_n, pool_trials, rng, r=2)
    return batch.m_counts[:, 1:3].astype(np.float64)


def run_random_sum_suite(cfg: ExperimentConfig) -> RunRecord:
    """Scaled random sums against the symmetric Laplace law with closed bounds."""
    law = cfg.law_object()
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    margin = _margin(cfg)
    pool = _occupancy_pool(cfg, law)

    def menu(p: float) -> list[GeometricSumSpec]:
        return [
            coin_summand_spec(p),
            two_point_summand_spec(p),
            empirical_summand_spec("occupancy", pool, ("geometric", p)),
        ]

    def eval_spec(spec: GeometricSumSpec, tag: str) -> dict:
        cov = sqrt_factor(spec.cov)
        c_r = cfg.c_r if cfg.c_r is not None else default_c_r(spec.r)
        kind, par = spec.stopping
        if kind == "geometric":
            dw_stop = 0.0
        else:
            dw_stop = w1_integer_vs_geometric([int(par)], [1.0], 1.0 / spec.mu)
        bound = renyi_bound(spec.mu, spec.abs_third_l1, np.diag(spec.cov), dw_stop, c_r=c_r)
        if spec.r == 1:
            rng_s = substream(cfg.seed, cfg.suite, tag, "sums")
            sums = sample_geometric_sum(spec, rng_s, cfg.trials).ravel()
            rng_t = substream(cfg.seed, cfg.suite, tag, "target")
            target = sample_sl(cov, rng_t, cfg.trials).ravel()
            rep = w1_sorted(
                sums, target, n_boot=32, rng=substream(cfg.seed, cfg.suite, tag, "boot")
            )
            base = _sorted_baseline(
                cfg, lambda r, s: sample_sl(cov, r, s).ravel(), cfg.trials,
                (cfg.suite, tag),
            )
            value, se = rep.value, rep.se
            trials = cfg.trials
        else:
            def sum_chunk(k: int) -> np.ndarray:
                rng = substream(cfg.seed, cfg.suite, tag, "sums", k)
                return sample_geometric_sum(spec, rng, cfg.ot_cap)

            vec_chunks = _farm(sum_chunk, [(k,) for k in range(cfg.matchings)], cfg.threads)
            value, se, _ = _chunked_matching(
                cfg, vec_chunks, lambda r, s: sample_sl(cov, r, s), (cfg.suite, tag)
            )
            base = _matching_baseline(
                cfg, lambda r, s: sample_sl(cov, r, s), (cfg.suite, tag)
            )
            trials = cfg.matchings * cfg.ot_cap
        excess = value - base.mean
        e_se = _excess_se(se, base)
        return {
            "value": value, "se": se, "bound": float(bound), "baseline": base.mean,
            "baseline_sd": base.sd, "excess": excess, "excess_se": e_se,
            "dw_stop": dw_stop, "trials": trials, "mu": spec.mu, "c_r": float(c_r),
        }

    for p in cfg.p_grid:
        for spec in menu(p):
            tag = f"{spec.name}-p{p!r}"
            out = eval_spec(spec, tag)
            ok = out["value"] <= out["bound"]
            record.cells.append(
                _cell(
                    cfg, spec.name, "w1_sl", out["value"], out["se"],
                    trials=out["trials"], baseline=out["baseline"],
                    baseline_sd=out["baseline_sd"], bound=out["bound"], passed=ok,
                    extra={"p": p, "mu": out["mu"], "r": spec.r, "c_r": out["c_r"],
                           "excess": out["excess"], "excess_se": out["excess_se"]},
                )
            )
            if not ok:
                record.failures.append(
                    f"random-sum: {spec.name} at p={p} has W1 {out['value']:.4g} "
                    f"above the bound {out['bound']:.4g}"
                )
            if spec.name == "coin" and p == min(cfg.p_grid):
                ok_exc = out["excess"] <= margin * out["excess_se"]
                record.cells.append(
                    _cell(
                        cfg, spec.name, "coin_smallest_p_excess", out["excess"],
                        out["excess_se"], bound=margin * out["excess_se"], passed=ok_exc,
                        extra={"p": p},
                    )
                )
                if not ok_exc:
                    record.failures.append(
                        f"random-sum: coin at p={p} is distinguishable from its "
                        f"Laplace limit (excess {out['excess']:.4g} > "
                        f"{margin} x {out['excess_se']:.4g})"
                    )

    # deterministic stopping at the ceiling of the mean: the geometric
    # comparison term carries the bound
    p_mid = cfg.p_grid[len(cfg.p_grid) // 2]
    k0 = math.ceil(1.0 / p_mid)
    det = GeometricSumSpec(
        name="coin-deterministic", r=1,
        sampler=coin_summand_spec(p_mid).sampler,
        cov=np.array([[1.0]]), abs_third_l1=1.0,
        stopping=("deterministic", k0),
    )
    out = eval_spec(det, f"det-{k0}")
    ok = out["value"] <= out["bound"]
    record.cells.append(
        _cell(
            cfg, det.name, "w1_sl_deterministic_stop", out["value"], out["se"],
            trials=out["trials"], baseline=out["baseline"], baseline_sd=out["baseline_sd"],
            bound=out["bound"], passed=ok,
            extra={"k0": k0, "dw_stop_term": out["dw_stop"], "mu": out["mu"]},
        )
    )
    if not ok:
        record.failures.append(
            f"random-sum: deterministic stopping at {k0} has W1 {out['value']:.4g} "
            f"above the bound {out['bound']:.4g}"
        )
    return record


def run_clt_suite(cfg: ExperimentConfig) -> RunRecord:
    """I.i.d. coin sums against the normal law, and Gaussian-pair scaling.

    The Gaussian comparison perturbs a rank-deficient base covariance
    diag(1, 0) by eps I; the flat direction makes the response the pure
    square-root mode, so the fitted log-log slope of the baseline-corrected
    distance against eps is the scaling diagnostic.
    """
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    margin = _margin(cfg)

    values, ses = [], []
    for n in cfg.n_grid:
        rng = substream(cfg.seed, cfg.suite, "sum", n)
        sums = (2.0 * rng.binomial(n, 0.5, cfg.trials) - n) / math.sqrt(n)
        target = substream(cfg.seed, cfg.suite, "normal", n).standard_normal(cfg.trials)
        rep = w1_sorted(sums, target, n_boot=32, rng=substream(cfg.seed, cfg.suite, "boot", n))
        bound = 2.0 * (2.0 * 1 * 1.0 / math.sqrt(n)) ** (1.0 / 3.0)
        ok = rep.value <= bound
        values.append(rep.value)
        ses.append(rep.se)
        record.cells.append(
            _cell(
                cfg, "coin", "w1_normal", rep.value, rep.se, n=n, trials=cfg.trials,
                bound=bound, passed=ok, extra={"third_moment": 1.0},
            )
        )
        if not ok:
            record.failures.append(
                f"clt: coin sum W1 {rep.value:.4g} at n={n} exceeds the bound {bound:.4g}"
            )
    if len(cfg.n_grid) > 1:
        _check_decreasing(cfg, record, "clt distance", cfg.n_grid, values, ses)

    base_cov = sqrt_factor(np.diag([1.0, 0.0]))
    c_mvn = cfg.c_mvn if cfg.c_mvn is not None else default_c_mvn(2)
    excesses, exc_ses = [], []
    for eps in cfg.eps_grid:
        pert_entries = base_cov.entries + eps * np.eye(2)
        pert_cov = sqrt_factor(pert_entries)

        def chunk(k: int) -> np.ndarray:
            rng = substream(cfg.seed, cfg.suite, "mvn", repr(eps), k)
            return sample_mvn(base_cov, rng, cfg.ot_cap)

        vec_chunks = _farm(chunk, [(k,) for k in range(cfg.matchings)], cfg.threads)
        value, se, _ = _chunked_matching(
            cfg, vec_chunks, lambda r, s: sample_mvn(pert_cov, r, s),
            (cfg.suite, "mvn", repr(eps)),
        )
        base = _matching_baseline(
            cfg, lambda r, s: sample_mvn(pert_cov, r, s), (cfg.suite, "mvn", repr(eps))
        )
        bound = mvn_compare_bound(base_cov.entries, pert_entries, c=c_mvn)
        excess = value - base.mean
        e_se = _excess_se(se, base)
        excesses.append(excess)
        exc_ses.append(e_se)
        ok = value <= bound
        record.cells.append(
            _cell(
                cfg, "mvn-pair", "w1_mvn", value, se, trials=cfg.matchings * cfg.ot_cap,
                baseline=base.mean, baseline_sd=base.sd, bound=float(bound), passed=ok,
                extra={"eps": eps, "excess": excess, "excess_se": e_se, "c": float(c_mvn)},
            )
        )
        if not ok:
            record.failures.append(
                f"clt: Gaussian pair at eps={eps} has W1 {value:.4g} above the "
                f"bound {bound:.4g}"
            )
    slope, slope_se = _loglog_slope(cfg.eps_grid, excesses, exc_ses)
    lo, hi = cfg.threshold("mvn_slope_window")
    ok = slope is not None and lo <= slope <= hi
    record.cells.append(
        _cell(
            cfg, "mvn-pair", "mvn_loglog_slope",
            slope if slope is not None else math.nan, slope_se,
            passed=ok, extra={"window": [lo, hi]},
        )
    )
    record.estimates["mvn_slope"] = slope
    record.estimates["mvn_slope_se"] = slope_se
    if not ok:
        record.failures.append(
            f"clt: Gaussian-pair scaling slope {slope} outside [{lo}, {hi}]"
        )
    return record


def run_estimate_kappa(cfg: ExperimentConfig) -> RunRecord:
    """Occupancy-mean spectrum per horizon with its mass identities."""
    law = cfg.law_object()
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    lat = make_lattice(cfg.d)
    margin = _margin(cfg)
    for n in cfg.n_grid:
        batch = _occupancy_sample(cfg, law, n, cfg.trials, cfg.r, "kappa")
        ke = estimate_mu_kappa(law, lat, n, r=cfg.r, sample=batch)
        for j in range(1, cfg.r + 1):
            record.cells.append(
                _cell(
                    cfg, law.name, f"kappa_{j}", ke.value_at(j), ke.se_at(j),
                    n=n, trials=ke.trials, extra={"survival": ke.survival},
                )
            )
        # truncated weighted mass stays at or below the exact total of 1
        m = batch.m_counts[:, 1 : cfg.r + 1].astype(np.float64)
        w = m @ np.arange(1, cfg.r + 1, dtype=np.float64)
        trunc = ke.survival * float(w.mean())
        trunc_se = ke.survival * float(w.std(ddof=1) / math.sqrt(len(w)))
        ok_trunc = trunc <= 1.0 + margin * trunc_se
        record.cells.append(
            _cell(
                cfg, law.name, "truncated_mass", trunc, trunc_se, n=n,
                bound=1.0, passed=ok_trunc,
                extra={"overflow_share": ke.overflow_share},
            )
        )
        ok_total = abs(ke.weighted_total - 1.0) <= margin * ke.weighted_total_se
        record.cells.append(
            _cell(
                cfg, law.name, "weighted_total_mass", ke.weighted_total,
                ke.weighted_total_se, n=n, bound=1.0, passed=ok_total,
            )
        )
        if not ok_trunc:
            record.failures.append(
                f"estimate-kappa: truncated mass {trunc:.4g} at n={n} exceeds "
                f"1 + {margin} SE"
            )
        if not ok_total:
            record.failures.append(
                f"estimate-kappa: total mass {ke.weighted_total:.4g} at n={n} is "
                f"off the exact value 1 by more than {margin} SE"
            )
        # unconditioned occupancy-count variance against its linear cap
        s_n = ke.survival
        for j in (1,):
            mj = batch.m_counts[:, j].astype(np.float64)
            second = s_n * float((mj**2).mean())
            var_hat = second - (s_n * float(mj.mean())) ** 2
            var_se = s_n * float((mj**2).std(ddof=1) / math.sqrt(len(mj)))
            cap = 1.0 + n * law.sigma2
            ok = var_hat <= cap + margin * var_se
            record.cells.append(
                _cell(
                    cfg, law.name, f"var_m_{j}", var_hat, var_se, n=n,
                    bound=cap, passed=ok,
                )
            )
            if not ok:
                record.failures.append(
                    f"estimate-kappa: Var(M_n({j})) = {var_hat:.4g} at n={n} "
                    f"exceeds {cap:.4g} + {margin} SE"
                )
    return record


def run_estimate_sigma(cfg: ExperimentConfig) -> RunRecord:
    """Covariance of centered occupancy counts plus the fourth-moment check."""
    law = cfg.law_object()
    record = RunRecord(suite=cfg.suite, config=cfg.to_dict(), seed=cfg.seed)
    lat = make_lattice(cfg.d)
    margin = _margin(cfg)
    out_hyp = cfg.d < 7
    n = cfg.n_grid[-1]
    batch = _occupancy_sample(cfg, law, n, cfg.trials, cfg.r, "sigma")
    ae = estimate_A(
        law, lat, n, r=cfg.r, sample=batch, n_boot=cfg.boot,
        boot_rng=substream(cfg.seed, cfg.suite, "aboot"),
    )
    cov = sigma_tilde(ae, law)
    record.estimates["a_matrix"] = _pyify(ae.to_dict())
    record.estimates["sigma_tilde"] = _pyify(cov.entries)
    for j in range(1, cfg.r + 1):
        for k in range(j, cfg.r + 1):
            record.cells.append(
                _cell(
                    cfg, law.name, f"a_{j}{k}", ae.value_at(j, k), ae.se_at(j, k),
                    n=n, trials=ae.trials, out_of_hypothesis=out_hyp,
                )
            )
    top_eig = float(np.linalg.eigvalsh((ae.matrix + ae.matrix.T) / 2.0).max())
    top_j = int(np.argmax(np.diag(ae.matrix)))
    if top_eig < margin * ae.se[top_j, top_j]:
        warnings.warn(
            DegenerateSigma(
                f"largest eigenvalue {top_eig:.3g} of the estimated covariance "
                f"is below {margin} SE"
            )
        )
    fm = fourth_moment_ratio(
        law, lat, n, j=cfg.j, sample=batch, n_boot=cfg.boot,
        boot_rng=substream(cfg.seed, cfg.suite, "fboot"),
    )
    lo, hi = cfg.threshold("fourth_moment_window")
    ok = lo <= fm.ratio <= hi
    record.cells.append(
        _cell(
            cfg, law.name, "fourth_moment_ratio", fm.ratio, fm.ratio_se, n=n,
            trials=fm.trials, passed=ok, out_of_hypothesis=out_hyp,
            extra={"window": [lo, hi], "value": fm.value, "value_se": fm.value_se,
                   "companion": fm.companion, "companion_se": fm.companion_se,
                   "j": cfg.j},
        )
    )
    record.estimates["fourth_moment"] = _pyify(fm.to_dict())
    if not ok:
        record.failures.append(
            f"estimate-sigma: fourth-moment ratio {fm.ratio:.4g} outside "
            f"[{lo}, {hi}] at n={n}"
        )
    return record


RUNNERS = {
    "survival": run_survival,
    "yaglom": run_yaglom,
    "theorem1": run_theorem1,
    "theorem3": run_theorem3,
    "decomposition": run_decomposition_gap,
    "random-sum": run_random_sum_suite,
    "clt": run_clt_suite,
    "estimate-kappa": run_estimate_kappa,
    "estimate-sigma": run_estimate_sigma,
}


def run_suite(cfg: ExperimentConfig, write: bool = True) -> RunRecord:
    """Validate, dispatch, time, and optionally persist one suite run."""
    validate(cfg)
    start = time.perf_counter()
    record = RUNNERS[cfg.suite](cfg)
    record.wall_clock_s = time.perf_counter() - start
    if write:
        write_record(record, cfg.out_dir)
    return record


def write_record(record: RunRecord, out_dir: str) -> dict[str, str]:
    """Persist one run: JSONL cells, summary CSV, long CSV, metadata JSON."""
    os.makedirs(out_dir, exist_ok=True)
    stem = record.suite.replace("-", "_")
    paths = {
        "jsonl": os.path.join(out_dir, f"{stem}.jsonl"),
        "summary": os.path.join(out_dir, f"{stem}_summary.csv"),
        "long": os.path.join(out_dir, f"{stem}_long.csv"),
        "meta": os.path.join(out_dir, f"{stem}_meta.json"),
    }
    with open(paths["jsonl"], "w", encoding="utf-8") as fh:
        for cell in record.cells:
            fh.write(json.dumps(cell, sort_keys=True) + "\n")
    summary_fields = [
        "suite", "law", "d", "n", "trials", "statistic", "value", "se",
        "baseline", "baseline_sd", "bound", "passed", "exact", "out_of_hypothesis",
    ]
    with open(paths["summary"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=summary_fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(record.cells)
    with open(paths["long"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "statistic", "value", "se"])
        for cell in record.cells:
            writer.writerow([cell["n"], cell["statistic"], cell["value"], cell["se"]])
    meta = record.payload()
    meta["wall_clock_s"] = record.wall_clock_s
    meta["passed"] = record.passed
    with open(paths["meta"], "w", encoding="utf-8") as fh:
        json.dump(_pyify(meta), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
