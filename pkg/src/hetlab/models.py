"""
GARCH(p, q), EGARCH and VGARCH volatility recursions.

Each family is an immutable parameter record. The volatility update of the
true process is driven by the innovation, the filter update by the observed
return ``y = sigma * eps``::

    sigma2_t     = H(theta, sigma_{t-1} eps_{t-1}, sigma2_{t-1})
    sigma2hat_t  = H(theta, y_{t-1},             sigma2hat_{t-1})

with

    H_E(y, x) = exp(alpha + beta log x + (gamma |y| + delta y) x**-0.5)
    H_V(y, x) = alpha + beta x + gamma (y x**-0.5 - delta)**2
    H_G(y, x) = alpha0 + sum alpha_i y_{t-i}**2 + sum beta_j x_{t-j}

EGARCH is evaluated in log space; log-volatilities outside ``[-LOG_CLAMP,
LOG_CLAMP]`` are reported as divergence (``inf`` or ``0.0``) instead of
silently overflowing.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericDomainError
from .innovations import InnovationDist, sample
from .rng import stream

LOG_CLAMP = 700.0

SATISFIED = "satisfied"
VIOLATED = "violated"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Garch:
    alpha0: float
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    family: str = field(default="garch", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if not self.alpha0 > 0:
            raise ConfigurationError("GARCH requires alpha0 > 0")
        if not self.alphas and not self.betas:
            raise ConfigurationError("GARCH requires at least one alpha or beta lag")
        if any(not a >= 0 for a in self.alphas):
            raise ConfigurationError("GARCH requires alpha_i >= 0")
        if any(not b >= 0 for b in self.betas):
            raise ConfigurationError("GARCH requires beta_j >= 0")

    @property
    def p(self) -> int:
        return len(self.alphas)

    @property
    def q(self) -> int:
        return len(self.betas)

    @property
    def lags(self) -> int:
        return max(self.p, self.q)

    def params(self) -> dict[str, object]:
        return {"alpha0": self.alpha0, "alphas": self.alphas, "betas": self.betas}


@dataclass(frozen=True)
class Egarch:
    alpha: float
    beta: float
    gamma: float
    delta: float = 0.0
    family: str = field(default="egarch", init=False)

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"EGARCH {name} must be finite")
        if not self.beta > 0:
            raise ConfigurationError("EGARCH requires beta > 0")
        if not self.beta < 1:
            raise ConfigurationError(f"EGARCH requires β < 1 for stationarity (got beta={self.beta!r})")
        if not self.gamma >= abs(self.delta):
            raise ConfigurationError("EGARCH requires gamma >= |delta|")

    def params(self) -> dict[str, object]:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta}


@dataclass(frozen=True)
class Vgarch:
    alpha: float
    beta: float
    gamma: float
    delta: float = 0.0
    family: str = field(default="vgarch", init=False)

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"VGARCH {name} must be finite")
        if not self.alpha > 0:
            raise ConfigurationError("VGARCH requires alpha > 0")
        # beta = 0 is admitted: it is the degenerate case used for the two-draw construction
        if not self.beta >= 0:
            raise ConfigurationError("VGARCH requires beta >= 0")
        if not self.gamma >= 0:
            raise ConfigurationError("VGARCH requires gamma >= 0")

    def params(self) -> dict[str, object]:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta}


ModelSpec = Garch | Egarch | Vgarch

PARAM_KEYS = {
    "garch": ("alpha0", "alphas", "betas"),
    "egarch": ("alpha", "beta", "gamma", "delta"),
    "vgarch": ("alpha", "beta", "gamma", "delta"),
}


def make_model(family: str, **params) -> ModelSpec:
    """Build a model from a family tag and keyword parameters."""
    family = family.strip().lower()
    if family not in PARAM_KEYS:
        raise ConfigurationError(f"unknown model {family!r}; expected garch, egarch or vgarch")
    unknown = set(params) - set(PARAM_KEYS[family])
    if unknown:
        raise ConfigurationError(f"parameters {sorted(unknown)} do not apply to {family}")
    try:
        if family == "garch":
            return Garch(float(params["alpha0"]), tuple(params["alphas"]), tuple(params["betas"]))
        cls = Egarch if family == "egarch" else Vgarch
        return cls(**{k: float(v) for k, v in params.items()})
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{family} is missing a required parameter: {exc}") from None


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NumericDomainError(f"non-finite input {v!r}")


def _lags(value, n: int, name: str) -> list[float]:
    if isinstance(value, Sequence) or isinstance(value, np.ndarray):
        vals = [float(v) for v in value]
    else:
        vals = [float(value)]
    if len(vals) < n:
        raise NumericDomainError(f"{name} needs {n} lags, got {len(vals)}")
    return vals


def exp_clamped(log_value: float) -> float:
    """exp of a log-volatility; outside the clamp the result is inf (or 0.0)."""
    if log_value > LOG_CLAMP:
        return math.inf
    if log_value < -LOG_CLAMP:
        return 0.0
    return math.exp(log_value)


def is_diverged(value: float) -> bool:
    return not (math.isfinite(value) and value > 0.0)


# --- EGARCH log-space steps, shared by the simulators ---------------------

# The true and filter steps share one association order, (shock terms) + beta * state,
# so that a filter sitting exactly on the truth stays on it bitwise.

def egarch_log_step(m: Egarch, resid: float, log_x: float) -> float:
    return (m.alpha + m.gamma * abs(resid) + m.delta * resid) + m.beta * log_x


def vgarch_step(m: Vgarch, resid: float, x: float) -> float:
    return (m.alpha + m.gamma * (resid - m.delta) ** 2) + m.beta * x


def egarch_log_true(m: Egarch, eps_prev: float, log_sigma2_prev: float) -> float:
    return egarch_log_step(m, eps_prev, log_sigma2_prev)


def egarch_log_filter(m: Egarch, y_prev: float, log_sigma2hat_prev: float) -> float:
    return egarch_log_step(m, y_prev * math.exp(-0.5 * log_sigma2hat_prev), log_sigma2hat_prev)


def update_true(model: ModelSpec, eps_prev, sigma2_prev) -> float:
    """
    One step of the true volatility recursion driven by the innovation.

    For GARCH(p, q) with p or q above one, ``eps_prev`` holds the last p
    innovations and ``sigma2_prev`` the last max(p, q) variances, most recent
    first.
    """
    if isinstance(model, Garch):
        eps = _lags(eps_prev, model.p, "eps_prev")
        s2 = _lags(sigma2_prev, model.lags, "sigma2_prev")
        _check_finite(*eps, *s2)
        if any(v <= 0 for v in s2):
            raise NumericDomainError("sigma2_prev must be positive")
        out = model.alpha0
        for i, a in enumerate(model.alphas):
            out += a * s2[i] * eps[i] * eps[i]
        for j, b in enumerate(model.betas):
            out += b * s2[j]
        return out
    eps_prev = float(eps_prev)
    sigma2_prev = float(sigma2_prev)
    _check_finite(eps_prev, sigma2_prev)
    if not sigma2_prev > 0:
        raise NumericDomainError("sigma2_prev must be positive")
    if isinstance(model, Egarch):
        return exp_clamped(egarch_log_true(model, eps_prev, math.log(sigma2_prev)))
    return vgarch_step(model, eps_prev, sigma2_prev)


def update_filter(model: ModelSpec, y_prev, sigma2hat_prev) -> float:
    """
    One step of the volatility filter driven by the observed return.

    For GARCH(p, q) pass the last p returns and the last q filtered variances,
    most recent first.
    """
    if isinstance(model, Garch):
        ys = _lags(y_prev, model.p, "y_prev")
        xs = _lags(sigma2hat_prev, model.q, "sigma2hat_prev")
        _check_finite(*ys, *xs)
        out = model.alpha0
        for i, a in enumerate(model.alphas):
            out += a * ys[i] * ys[i]
        for j, b in enumerate(model.betas):
            out += b * xs[j]
        return out
    y_prev = float(y_prev)
    x = float(sigma2hat_prev)
    _check_finite(y_prev, x)
    if not x > 0:
        raise NumericDomainError("sigma2hat_prev must be positive")
    if isinstance(model, Egarch):
        return exp_clamped(egarch_log_filter(model, y_prev, math.log(x)))
    out = vgarch_step(model, y_prev / math.sqrt(x), x)
    assert out >= model.alpha
    return out


def H(model: Egarch | Vgarch, y, x):
    """Vectorized volatility map ``H(theta, y, x)`` for the one-lag families."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if isinstance(model, Egarch):
        out = np.exp(model.alpha + model.beta * np.log(x) + (model.gamma * np.abs(y) + model.delta * y) / np.sqrt(x))
    elif isinstance(model, Vgarch):
        out = model.alpha + model.beta * x + model.gamma * (y / np.sqrt(x) - model.delta) ** 2
    else:
        raise TypeError("H is defined here for egarch and vgarch only")
    return out if out.ndim else float(out)


def dH_dx(model: ModelSpec, y, x):
    """Analytic partial derivative of ``H`` in its volatility argument (vectorized)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise NumericDomainError("dH_dx requires x > 0")
    if isinstance(model, Garch):
        b1 = model.betas[0] if model.betas else 0.0
        out = np.full(np.broadcast(y, x).shape, b1)
    elif isinstance(model, Egarch):
        shock = model.gamma * np.abs(y) + model.delta * y
        out = H(model, y, x) * (model.beta / x - 0.5 * shock * x**-1.5)
    else:
        out = model.beta - model.gamma * y * x**-1.5 * (y / np.sqrt(x) - model.delta)
    return out if np.ndim(out) else float(out)


def log_abs_dH_dx(model: ModelSpec, y, x) -> np.ndarray:
    """``log|dH_dx|`` evaluated without forming ``H`` itself (EGARCH would overflow)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        if isinstance(model, Garch):
            b1 = model.betas[0] if model.betas else 0.0
            return np.full(np.broadcast(y, x).shape, math.log(b1) if b1 > 0 else -math.inf)
        if isinstance(model, Egarch):
            shock = model.gamma * np.abs(y) + model.delta * y
            rx = np.sqrt(x)
            log_h = model.alpha + model.beta * np.log(x) + shock / rx
            return log_h - np.log(x) + np.log(np.abs(model.beta - 0.5 * shock / rx))
        return np.log(np.abs(model.beta - model.gamma * y * x**-1.5 * (y / np.sqrt(x) - model.delta)))


@dataclass(frozen=True)
class StationarityCheck:
    status: str
    statistic: float
    stderr: float
    note: str = ""

    @property
    def satisfied(self) -> bool:
        return self.status == SATISFIED


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    n = vals.size
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(vals.mean()), se


def check_stationarity(model: ModelSpec, dist: InnovationDist, n: int = 100_000, seed: int = 0) -> StationarityCheck:
    """
    Decide the strict-stationarity condition of ``model`` under ``dist``.

    GARCH(1,1) uses the Monte-Carlo estimate of ``E log(alpha1 eps**2 + beta1)``
    with a 4-standard-error band. Higher-order GARCH only has the sufficient
    check ``sum(alphas) + sum(betas) < 1``; failing it is reported as
    indeterminate. EGARCH/VGARCH reduce to ``beta < 1`` with a finiteness
    sanity check on the log moment.
    """
    if isinstance(model, Garch):
        if model.p <= 1 and model.q <= 1:
            a1 = model.alphas[0] if model.alphas else 0.0
            b1 = model.betas[0] if model.betas else 0.0
            if a1 == 0.0:
                stat = math.log(b1) if b1 > 0 else -math.inf
                return StationarityCheck(SATISFIED if stat < 0 else VIOLATED, stat, 0.0, "exact: alpha1 = 0")
            eps = sample(dist, stream(seed, 0), n)
            stat, se = _mean_se(np.log(a1 * eps * eps + b1))
            if stat + 4 * se < 0:
                status = SATISFIED
            elif stat - 4 * se >= 0:
                status = VIOLATED
            else:
                status = INDETERMINATE
            return StationarityCheck(status, stat, se, "E log(alpha1 eps^2 + beta1) < 0")
        persistence = sum(model.alphas) + sum(model.betas)
        status = SATISFIED if persistence < 1 else INDETERMINATE
        return StationarityCheck(status, persistence, 0.0, "sufficient: sum(alphas) + sum(betas) < 1")

    eps = sample(dist, stream(seed, 0), n)
    with np.errstate(divide="ignore"):
        if isinstance(model, Egarch):
            vals = np.log(np.abs(model.alpha + model.gamma * np.abs(eps) + model.delta * eps))
        else:
            vals = np.log(model.alpha + model.gamma * (eps - model.delta) ** 2)
    vals = vals[np.isfinite(vals)]
    stat, se = _mean_se(vals) if vals.size else (math.nan, math.nan)
    if not model.beta < 1:
        return StationarityCheck(VIOLATED, stat, se, "beta < 1 fails")
    if not math.isfinite(stat):
        return StationarityCheck(INDETERMINATE, stat, se, "log moment not finite in sample")
    return StationarityCheck(SATISFIED, stat, se, "beta < 1; log moment finite")
