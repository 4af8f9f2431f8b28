"""
Stability coefficient of the volatility filter.

The coefficient is the ergodic mean of ``log|dH/dx|`` along the stationary
true path. Its sign decides local invertibility: negative means filter errors
near the truth contract, positive means they expand. Three routes are
provided and are meant to check one another:

* ``closed_form_mc``: EGARCH only, ``E log|beta - (gamma |eps| + delta eps) / 2|``
  from i.i.d. draws; the volatility level cancels out of the derivative.
* ``ergodic_mc``: any family, average over a simulated stationary path with a
  batch-means standard error.
* ``quadrature``: deterministic integral against the innovation density, for
  EGARCH and for VGARCH with ``beta = 0``.

GARCH has a constant derivative and is handled exactly (``analytic``).
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coupled_sim import SimConfig, simulate_true_path
from .errors import ConfigurationError, DivergenceError
from .innovations import InnovationDist, expect, log_moment_quad, sample
from .models import (
    PARAM_KEYS,
    INDETERMINATE,
    Egarch,
    Garch,
    ModelSpec,
    StationarityCheck,
    Vgarch,
    check_stationarity,
    log_abs_dH_dx,
)
from .rng import STREAM_AUX, STREAM_CHUNK, stream

LOCALLY_INVERTIBLE = "locally_invertible"
LOCALLY_NONINVERTIBLE = "locally_noninvertible"

INVERTIBLE = "invertible"
PROPERLY_NONINVERTIBLE = "properly_noninvertible"

# decision band in standard errors
BAND = 4.0
# Monte-Carlo work unit; fixed so results do not depend on the worker count
CHUNK = 1 << 20


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    stderr: float
    n_samples: int
    method: str
    verdict: str
    skipped: int = 0


def verdict_for(value: float, stderr: float) -> str:
    if value + BAND * stderr < 0:
        return LOCALLY_INVERTIBLE
    if value - BAND * stderr > 0:
        return LOCALLY_NONINVERTIBLE
    return INDETERMINATE


def _estimate(value: float, stderr: float, n: int, method: str, skipped: int = 0) -> LambdaEstimate:
    if skipped:
        warnings.warn(f"{skipped} draws hit the log singularity and were skipped", RuntimeWarning, stacklevel=3)
    return LambdaEstimate(float(value), float(stderr), int(n), method, verdict_for(value, stderr), skipped)


def _egarch_chunk(args) -> tuple[int, float, float, int]:
    model, dist, seed, k, size = args
    eps = sample(dist, stream(seed, STREAM_CHUNK, k), size)
    arg = np.abs(model.beta - 0.5 * (model.gamma * np.abs(eps) + model.delta * eps))
    ok = arg > 0
    vals = np.log(arg[ok])
    cnt = int(vals.size)
    mean = float(vals.mean()) if cnt else 0.0
    m2 = float(((vals - mean) ** 2).sum()) if cnt else 0.0
    return cnt, mean, m2, size - cnt


def _merge(parts) -> tuple[int, float, float, int]:
    """Chan et al. pairwise merge of (count, mean, M2), applied in chunk order."""
    n, mean, m2, skipped = 0, 0.0, 0.0, 0
    for cnt, mu, q, sk in parts:
        skipped += sk
        if cnt == 0:
            continue
        tot = n + cnt
        delta = mu - mean
        mean += delta * cnt / tot
        m2 += q + delta * delta * n * cnt / tot
        n = tot
    return n, mean, m2, skipped


def lambda_egarch_closed(model: Egarch, dist: InnovationDist, n: int, seed: int, threads: int = 1) -> LambdaEstimate:
    """i.i.d. Monte-Carlo estimate of the EGARCH coefficient; needs no volatility path."""
    if not isinstance(model, Egarch):
        raise ConfigurationError("closed-form coefficient exists for egarch only")
    if n < 2:
        raise ConfigurationError("need at least 2 draws")
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    tasks = [(model, dist, seed, k, s) for k, s in enumerate(sizes)]
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_egarch_chunk, tasks))
    else:
        parts = [_egarch_chunk(t) for t in tasks]
    cnt, mean, m2, skipped = _merge(parts)
    if cnt == 0:
        # every draw sits on the zero of the derivative (only possible for atomic innovations)
        return LambdaEstimate(-math.inf, 0.0, 0, "closed_form_mc", LOCALLY_INVERTIBLE, skipped)
    se = math.sqrt(m2 / (cnt - 1) / cnt) if cnt > 1 else math.inf
    return _estimate(mean, se, cnt, "closed_form_mc", skipped)


def batch_means(values: np.ndarray, n_batches: int | None = None) -> tuple[float, float]:
    """Mean and batch-means standard error (``floor(sqrt(n))`` batches by default)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n_batches is None:
        n_batches = max(int(math.isqrt(n)), 2)
    size = n // n_batches
    if size < 1:
        raise ValueError("not enough samples for batch means")
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(values.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


def lambda_ergodic(
    model: ModelSpec,
    dist: InnovationDist,
    path_len: int,
    burn_in: int = 10_000,
    seed: int = 0,
) -> LambdaEstimate:
    """Average ``log|dH/dx(sigma_k eps_k, sigma2_k)|`` along a stationary path."""
    if path_len < 4:
        raise ConfigurationError("path_len must be >= 4")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        true = simulate_true_path(SimConfig(model, dist, path_len, seed, burn_in=burn_in))
    if true.diverged or len(true) < path_len:
        raise DivergenceError(f"true path diverged after {len(true)} of {path_len} steps; estimate aborted")
    vals = log_abs_dH_dx(model, true.y, true.sigma2)
    ok = np.isfinite(vals)
    skipped = int(vals.size - ok.sum())
    mean, se = batch_means(vals[ok])
    return _estimate(mean, se, int(ok.sum()), "ergodic_mc", skipped)


def lambda_vgarch_two_draw(model: Vgarch, dist: InnovationDist, n: int, seed: int) -> LambdaEstimate:
    """
    Path-free oracle for VGARCH with ``beta = 0``.

    The stationary variance is then ``alpha + gamma (eps_{-1} - delta)**2``, so
    the coefficient is ``E log|gamma eps0 (eps0 - delta) / (alpha + gamma (eps1 - delta)**2)|``
    over two independent draws.
    """
    if not isinstance(model, Vgarch) or model.beta != 0.0:
        raise ConfigurationError("two-draw oracle requires vgarch with beta = 0")
    e0 = sample(dist, stream(seed, STREAM_AUX, 0), n)
    e1 = sample(dist, stream(seed, STREAM_AUX, 1), n)
    with np.errstate(divide="ignore"):
        vals = np.log(np.abs(model.gamma * e0 * (e0 - model.delta))) - np.log(
            model.alpha + model.gamma * (e1 - model.delta) ** 2
        )
    ok = np.isfinite(vals)
    v = vals[ok]
    return _estimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size), "closed_form_mc", int(n - v.size))


def egarch_breakpoints(model: Egarch) -> tuple[float, ...]:
    """Zeros of ``beta - (gamma |x| + delta x) / 2`` plus the kink at 0."""
    pts = [0.0]
    if model.gamma + model.delta > 0:
        pts.append(2.0 * model.beta / (model.gamma + model.delta))
    if model.gamma - model.delta > 0:
        pts.append(-2.0 * model.beta / (model.gamma - model.delta))
    return tuple(pts)


def lambda_quadrature(model: ModelSpec, dist: InnovationDist, abs_tol: float = 1e-9) -> LambdaEstimate:
    """Deterministic value of the coefficient where a one-dimensional integral exists."""
    if isinstance(model, Garch):
        return lambda_analytic(model)
    if isinstance(model, Egarch):

        def h(x):
            with np.errstate(divide="ignore"):
                return np.log(np.abs(model.beta - 0.5 * (model.gamma * np.abs(x) + model.delta * x)))

        value = expect(dist, h, breakpoints=egarch_breakpoints(model), abs_tol=abs_tol)
        return _estimate(value, 0.0, 0, "quadrature")
    if model.beta != 0.0:
        raise ConfigurationError("VGARCH quadrature needs beta = 0; use lambda_ergodic")
    if model.gamma == 0.0:
        return _estimate(-math.inf, 0.0, 0, "quadrature")
    # independence of eps0 and eps_{-1} splits the two-draw expectation into 1-d integrals
    num = math.log(model.gamma) + log_moment_quad(dist, 0.0) + log_moment_quad(dist, model.delta)
    den = expect(dist, lambda x: np.log(model.alpha + model.gamma * (x - model.delta) ** 2), breakpoints=(model.delta,), abs_tol=abs_tol)
    return _estimate(num - den, 0.0, 0, "quadrature")


def lambda_analytic(model: Garch) -> LambdaEstimate:
    """GARCH: the filter error obeys a linear recursion in the betas; return its log spectral radius."""
    if not model.betas or not any(model.betas):
        return _estimate(-math.inf, 0.0, 0, "analytic")
    if model.q == 1:
        return _estimate(math.log(model.betas[0]), 0.0, 0, "analytic")
    q = model.q
    comp = np.zeros((q, q))
    comp[0, :] = model.betas
    comp[1:, :-1] = np.eye(q - 1)
    rho = float(np.max(np.abs(np.linalg.eigvals(comp))))
    return _estimate(math.log(rho), 0.0, 0, "analytic")


@dataclass(frozen=True)
class Classification:
    estimate: LambdaEstimate
    stationary: StationarityCheck
    invertibility_prediction: str


def estimate_default(model: ModelSpec, dist: InnovationDist, budget: int, seed: int, threads: int = 1) -> LambdaEstimate:
    """The route used by heatmaps: analytic, closed-form MC (EGARCH) or ergodic MC (VGARCH)."""
    if isinstance(model, Garch):
        return lambda_analytic(model)
    if isinstance(model, Egarch):
        return lambda_egarch_closed(model, dist, budget, seed, threads=threads)
    return lambda_ergodic(model, dist, budget, seed=seed)


def classify(model: ModelSpec, dist: InnovationDist, budget: int = 1_000_000, seed: int = 0, threads: int = 1) -> Classification:
    """Combine the stationarity check and the coefficient sign into an invertibility prediction."""
    stat = check_stationarity(model, dist, n=min(budget, 200_000), seed=seed)
    est = estimate_default(model, dist, budget, seed, threads=threads)
    if stat.status != "satisfied" or est.verdict == INDETERMINATE:
        prediction = INDETERMINATE
    elif est.verdict == LOCALLY_INVERTIBLE:
        prediction = INVERTIBLE
    else:
        prediction = PROPERLY_NONINVERTIBLE
    return Classification(est, stat, prediction)


def lambda_csv_header(model: ModelSpec) -> tuple[str, ...]:
    return ("model", *PARAM_KEYS[model.family], "dist", "method", "n", "lambda", "stderr", "verdict")


def write_lambda_csv(model: ModelSpec, dist: InnovationDist, est: LambdaEstimate, fh) -> None:
    """One-row result table; GARCH coefficient lists are joined with ``;``."""

    def cell(v) -> str:
        if isinstance(v, (tuple, list)):
            return ";".join(repr(float(x)) for x in v)
        return repr(float(v))

    w = csv.writer(fh, lineterminator="\n")
    w.writerow(lambda_csv_header(model))
    params = model.params()
    w.writerow((
        model.family,
        *(cell(params[k]) for k in PARAM_KEYS[model.family]),
        dist.name,
        est.method,
        est.n_samples,
        repr(est.value),
        repr(est.stderr),
        est.verdict,
    ))
