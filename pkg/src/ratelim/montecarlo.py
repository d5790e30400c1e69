"""Trial orchestration and empirical stability classification.

The verdict is driven by the scaling parameter rather than the output:
the output is bounded by a fixed multiple of the recent scaling values,
and the scaling sequence is deterministic given the loss sequence, so its
sample mean has far lower variance.  Mean squared output is reported
alongside.  Trials are embarrassingly parallel with injective per-trial
seeds; aggregation is order-insensitive.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelConfig, derive_seed, uniform01
from .codec_loop import CONVERGED, DIVERGED, QuantizerSpec, SimTrace, run_closed_loop
from .limits import necessary_bounds
from .mjls import min_sufficient_level_real, spectral_radius, build_F
from .plant import ParamStrategy, UncertainPlant
from .timeshare import (
    TimeShareConfig,
    deltas,
    kappa_bar,
    lossless_bound,
    min_feasible_average_level,
    run_timeshare_loop,
)

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Experiment:
    trials: int
    steps: int
    base_seed: int = 0
    strategy: ParamStrategy = field(default_factory=ParamStrategy)
    tol_slope: float = 1e-3

    def __post_init__(self):
        if self.trials < 1 or self.steps < 2:
            raise ValueError("need at least 1 trial and 2 steps")


@dataclass(frozen=True)
class DecayReport:
    mean_sq_y: np.ndarray
    mean_sq_sigma: np.ndarray
    slope: float
    verdict: str
    diverged_trials: int
    converged_trials: int

    def to_csv(self, stream) -> None:
        stream.write("k,mean_sq_y,mean_sq_sigma\n")
        for k in range(len(self.mean_sq_y)):
            stream.write(
                f"{k},{float(self.mean_sq_y[k])!r},{float(self.mean_sq_sigma[k])!r}\n"
            )


def _trial_seeds(base_seed: int, trial: int) -> tuple[int, int, int]:
    root = derive_seed(base_seed, trial)
    return derive_seed(root, 0), derive_seed(root, 1), derive_seed(root, 2)


def _run_one_trial(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, str]:
    target, quantizer, channel, exp, trial = args
    ch_seed, strat_seed, y0_seed = _trial_seeds(exp.base_seed, trial)
    ch = ChannelConfig(p=channel.p, seed=ch_seed)
    strat = exp.strategy.with_seed(strat_seed)
    bound = target.y0_bound
    y0 = (2.0 * uniform01(y0_seed, 0) - 1.0) * bound / 2.0
    if isinstance(target, TimeShareConfig):
        trace = run_timeshare_loop(target, ch, strat, exp.steps, y0)
    else:
        trace = run_closed_loop(target, quantizer, ch, strat, exp.steps, y0)
    return _trial_arrays(trace, exp.steps)


def _trial_arrays(trace: SimTrace, steps: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, str]:
    got = len(trace)
    sq_y = np.zeros(steps)
    sq_sigma = np.zeros(steps)
    weight = np.zeros(steps)
    y = np.asarray(trace.y[:got])
    s = np.asarray(trace.sigma[:got])
    sq_y[:got] = y * y
    sq_sigma[:got] = s * s
    if trace.status == DIVERGED:
        weight[:got] = 1.0  # nothing meaningful to contribute past divergence
    else:
        weight[:] = 1.0  # converged trials contribute their (zero) tail
    return sq_y, sq_sigma, weight, trace.status


def _workers() -> int:
    env = os.environ.get("RATELIM_THREADS", "")
    if not env:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def run_experiment(
    target: UncertainPlant | TimeShareConfig,
    quantizer: QuantizerSpec | None,
    channel: ChannelConfig,
    exp: Experiment,
) -> DecayReport:
    """Average many seeded trials and classify the decay of E[sigma^2].

    The slope is a least-squares fit to log mean-square sigma over the
    second half of the horizon; below -tol_slope per step is stable,
    above +tol_slope (or any diverged trial) unstable, else inconclusive.
    """
    if isinstance(target, UncertainPlant) and quantizer is None:
        raise ValueError("closed-loop experiments need a quantizer spec")
    jobs = [(target, quantizer, channel, exp, t) for t in range(exp.trials)]
    workers = min(_workers(), exp.trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one_trial, jobs, chunksize=8))
    else:
        results = [_run_one_trial(j) for j in jobs]
    sq_y = np.stack([r[0] for r in results])
    sq_sigma = np.stack([r[1] for r in results])
    weight = np.stack([r[2] for r in results])
    statuses = [r[3] for r in results]
    counts = weight.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_sq_y = np.where(counts > 0, (sq_y * weight).sum(axis=0) / counts, np.nan)
        mean_sq_sigma = np.where(
            counts > 0, (sq_sigma * weight).sum(axis=0) / counts, np.nan
        )
    slope = _fit_slope(mean_sq_sigma)
    diverged = sum(1 for s in statuses if s == DIVERGED)
    converged = sum(1 for s in statuses if s == CONVERGED)
    if diverged > 0:
        verdict = UNSTABLE
    elif slope < -exp.tol_slope:
        verdict = STABLE
    elif slope > exp.tol_slope:
        verdict = UNSTABLE
    else:
        verdict = INCONCLUSIVE
    return DecayReport(
        mean_sq_y=mean_sq_y,
        mean_sq_sigma=mean_sq_sigma,
        slope=slope,
        verdict=verdict,
        diverged_trials=diverged,
        converged_trials=converged,
    )


def _fit_slope(mean_sq_sigma: np.ndarray) -> float:
    """Log-decay rate per step over the second half of the horizon.

    Steps where the mean has underflowed to zero mean every trial
    converged past the floor; if the whole window is like that the decay
    is as strong as representable, reported as -inf.
    """
    steps = len(mean_sq_sigma)
    half = steps // 2
    ks = np.arange(half, steps)
    vals = mean_sq_sigma[half:]
    ok = np.isfinite(vals) & (vals > 0.0)
    if ok.sum() == 0:
        return -math.inf
    if ok.sum() == 1:
        return -math.inf if vals[ok][0] == 0.0 else 0.0
    coeff = np.polyfit(ks[ok], np.log(vals[ok]), 1)
    return float(coeff[0])


def sweep(
    plant: UncertainPlant,
    var: str,
    values,
    *,
    channel_p: float = 0.0,
    n_levels: float | None = None,
    channel_seed: int = 0,
    empirical: Experiment | None = None,
) -> list[dict]:
    """Grid evaluation of the analytic limits, one row per grid point.

    var is one of lambda (sweeps the magnitude of the last coefficient,
    keeping its sign), p, or N.  Columns follow the fixed schema: grid
    value, the necessary bounds, the loss limit, the spectral radius at
    n_levels (empty when not given), the minimal real sufficient level,
    and the empirical verdict (empty unless an experiment is supplied).
    """
    if var not in ("lambda", "p", "N"):
        raise ValueError(f"sweep variable must be lambda, p, or N, got {var!r}")
    rows = []
    for v in values:
        cur_plant = plant
        cur_p = channel_p
        cur_n = n_levels
        if var == "lambda":
            sign = 1.0 if plant.a_star[-1] >= 0 else -1.0
            coeffs = plant.a_star[:-1] + (sign * v,)
            cur_plant = replace(plant, a_star=coeffs)
        elif var == "p":
            cur_p = v
        else:
            cur_n = v
        nb = necessary_bounds(abs(cur_plant.a_star[-1]), cur_plant.eps[-1], cur_p)
        rho = ""
        if cur_n is not None and cur_n >= 2.0:
            rho = spectral_radius(build_F(cur_plant, cur_n, cur_p).lifted)
        min_level = min_sufficient_level_real(cur_plant, cur_p)
        verdict = ""
        if empirical is not None:
            if cur_n is None or cur_n < 1 or cur_n != int(cur_n):
                raise ValueError("empirical sweeps need an integer quantizer level")
            report = run_experiment(
                cur_plant,
                QuantizerSpec(int(cur_n)),
                ChannelConfig(p=cur_p, seed=channel_seed),
                empirical,
            )
            verdict = report.verdict
        rows.append(
            {
                var: v,
                "r_nec0": nb.r_nec0,
                "r_nec1": nb.r_nec1,
                "r_nec": nb.r_nec,
                "p_nec": nb.p_nec,
                "rho": rho,
                "min_N": min_level,
                "verdict": verdict,
            }
        )
    return rows


def sweep_timeshare(
    a_star: float,
    eps: float,
    m_values,
    *,
    channel_p: float = 0.0,
    level_cap: int = 1_000_000,
) -> list[dict]:
    """Duration sweep for the time-sharing protocol (fixed column schema)."""
    rows = []
    for m in m_values:
        dp, dm = deltas(a_star, eps, m)
        r_bar, feasible = lossless_bound(a_star, eps, m)
        found = min_feasible_average_level(a_star, eps, channel_p, m, cap=level_cap)
        total, avg = found if found is not None else ("", "")
        kbar = ""
        if found is not None:
            kbar = kappa_bar(
                TimeShareConfig(a_star=a_star, eps=eps, m=m, levels=avg, p=channel_p)
            )
        rows.append(
            {
                "m": m,
                "delta_plus": dp,
                "delta_minus": dm,
                "kappa_bar": kbar,
                "r_bar": r_bar,
                "feasible": feasible,
                "min_total_level": total,
                "avg_level": avg,
            }
        )
    return rows


def write_rows_csv(rows: list[dict], stream) -> None:
    if not rows:
        return
    cols = list(rows[0].keys())
    stream.write(",".join(cols) + "\n")
    for row in rows:
        out = []
        for c in cols:
            v = row[c]
            out.append(repr(v) if isinstance(v, float) else str(v))
        stream.write(",".join(out) + "\n")
