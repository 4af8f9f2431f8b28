"""
Simulation of the true volatility and its recursive filter on one innovation stream.

The true process is run for ``burn_in`` steps from ``sigma2 = 1`` and then
``n_steps`` states ``t = 0 .. n_steps - 1`` are emitted. The filter starts at
``t = 0`` from the configured initial value and is fed the returns
``y_t = sigma_t * eps_t`` of the same path.

Recorded coordinates per family:

=======  =================  ==================================
family   z                  d_or_zhat
=======  =================  ==================================
egarch   log sigma2         log sigma2hat - log sigma2
vgarch   sigma2             sigma2hat
garch    sigma2             sigma2hat - sigma2
=======  =================  ==================================

GARCH filter errors are propagated in difference form
(``diff_t = sum_j beta_j diff_{t-j}``), which is algebraically identical to
running the filter and avoids cancellation once the error is far below the
volatility level.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections.abc import Iterator
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .innovations import InnovationDist, sample
from .models import (
    LOG_CLAMP,
    Egarch,
    Garch,
    ModelSpec,
    Vgarch,
    check_stationarity,
    egarch_log_step,
    exp_clamped,
    vgarch_step,
)
from .rng import STREAM_PATH, stream

DEFAULT_BURN_IN = 10_000
INIT_MODES = ("constant", "sample_mean", "log_offset")
CSV_HEADER = ("t", "sigma2", "sigma2hat", "z", "d_or_zhat", "diverged")


@dataclass(frozen=True)
class SimConfig:
    """
    Settings for one simulated path.

    ``init_mode`` selects the filter start: ``constant`` uses ``init_value``
    as ``sigma2hat_0``; ``sample_mean`` uses the mean of ``y_t**2`` over the
    emitted path; ``log_offset`` starts at ``sigma2_0 * exp(init_value)``.
    """

    model: ModelSpec
    dist: InnovationDist
    n_steps: int
    seed: int
    burn_in: int = DEFAULT_BURN_IN
    init_mode: str = "constant"
    init_value: float = 1.0
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in must be >= 0")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ConfigurationError(f"init_mode must be one of {INIT_MODES}")
        if self.init_mode == "constant" and not (self.init_value > 0 and math.isfinite(self.init_value)):
            raise ConfigurationError("constant initial value s2 must be positive")
        if self.init_mode == "log_offset" and not math.isfinite(self.init_value):
            raise ConfigurationError("log offset must be finite")

    def with_(self, **changes) -> SimConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class CoupledState:
    t: int
    sigma2: float
    sigma2hat: float
    z: float
    d_or_zhat: float
    diverged: bool


@dataclass
class CoupledPath:
    """Columns of a coupled simulation; iterating yields ``CoupledState`` records."""

    family: str
    t: np.ndarray
    sigma2: np.ndarray
    sigma2hat: np.ndarray
    z: np.ndarray
    d_or_zhat: np.ndarray
    diverged: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.t.size)

    def __getitem__(self, i: int) -> CoupledState:
        return CoupledState(
            int(self.t[i]),
            float(self.sigma2[i]),
            float(self.sigma2hat[i]),
            float(self.z[i]),
            float(self.d_or_zhat[i]),
            bool(self.diverged[i]),
        )

    def __iter__(self) -> Iterator[CoupledState]:
        for i in range(len(self)):
            yield self[i]

    @property
    def any_diverged(self) -> bool:
        return bool(self.diverged.any())

    def difference(self) -> np.ndarray:
        """``sigma2hat - sigma2`` computed without cancellation where possible."""
        if self.family == "egarch":
            with np.errstate(over="ignore"):
                return self.sigma2 * np.expm1(self.d_or_zhat)
        if self.family == "garch":
            return self.d_or_zhat.copy()
        return self.sigma2hat - self.sigma2


@dataclass
class TruePath:
    sigma2: np.ndarray
    y: np.ndarray
    eps: np.ndarray
    # log sigma2 for EGARCH, sigma2 otherwise
    state: np.ndarray
    diverged: bool = False
    warnings: list[str] = field(default_factory=list)
    # GARCH(p, q): true variances at times -1, -2, ... before t = 0
    sigma2_hist: tuple[float, ...] = ()

    def __len__(self) -> int:
        return int(self.sigma2.size)


def fmt(x: float) -> str:
    """Shortest round-trip text for a float; the CSV byte format depends on it."""
    return repr(float(x))


def write_path_csv(path: CoupledPath, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(len(path)):
        w.writerow((
            int(path.t[i]),
            fmt(path.sigma2[i]),
            fmt(path.sigma2hat[i]),
            fmt(path.z[i]),
            fmt(path.d_or_zhat[i]),
            int(bool(path.diverged[i])),
        ))


def _innovations(config: SimConfig) -> np.ndarray:
    return sample(config.dist, stream(config.seed, STREAM_PATH), config.burn_in + config.n_steps)


def _stationarity_warning(config: SimConfig) -> list[str]:
    chk = check_stationarity(config.model, config.dist, n=20_000, seed=config.seed)
    if chk.satisfied:
        return []
    msg = f"stationarity condition {chk.status} ({chk.note}); path may not be stationary"
    warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return [msg]


def _true_state_path(model: ModelSpec, eps: np.ndarray, n_out: int) -> tuple[list[float], bool]:
    """
    State path of length ``n_out`` (fewer on divergence) starting from sigma2 = 1.

    The state is log sigma2 for EGARCH and sigma2 otherwise. GARCH(p, q) with
    more than one lag is handled by ``_garch_path``.
    """
    out = [0.0] * n_out
    e = eps.tolist()
    if isinstance(model, Egarch):
        x = 0.0
        for t in range(n_out):
            if t > 0:
                x = egarch_log_step(model, e[t - 1], x)
                if not -LOG_CLAMP <= x <= LOG_CLAMP:
                    return out[:t], True
            out[t] = x
        return out, False
    if isinstance(model, Vgarch):
        x = 1.0
        for t in range(n_out):
            if t > 0:
                x = vgarch_step(model, e[t - 1], x)
            out[t] = x
        return out, False
    raise TypeError(model)


def _garch_path(m: Garch, eps: np.ndarray, n_out: int) -> list[float]:
    """sigma2 for times -(lags-1) .. n_out-1, with all pre-sample lags equal to 1."""
    L = m.lags
    s2 = [1.0] * L + [0.0] * (n_out - 1)
    e = [0.0] * (L - 1) + eps.tolist()
    a0, alphas, betas = m.alpha0, m.alphas, m.betas
    for k in range(L, L + n_out - 1):
        v = a0
        for i, a in enumerate(alphas):
            v += a * s2[k - 1 - i] * e[k - 1 - i] * e[k - 1 - i]
        for j, b in enumerate(betas):
            v += b * s2[k - 1 - j]
        s2[k] = v
    return s2


def simulate_true_path(config: SimConfig, eps: np.ndarray | None = None) -> TruePath:
    """
    Stationary true path ``(sigma2_t, y_t)`` of length ``n_steps`` after burn-in.

    An EGARCH path whose log-volatility leaves the clamp range is truncated at
    the first hit and flagged ``diverged``.
    """
    model = config.model
    warn_msgs = _stationarity_warning(config)
    if eps is None:
        eps = _innovations(config)
    B, n = config.burn_in, config.n_steps
    hist: tuple[float, ...] = ()
    diverged = False
    if isinstance(model, Garch):
        L = model.lags
        full = _garch_path(model, eps, B + n)
        # full[k] is time k - (L - 1)
        sig2 = np.asarray(full[B + L - 1:])
        hist = tuple(full[B:B + L - 1][::-1])
        state = sig2
    else:
        states, diverged = _true_state_path(model, eps, B + n)
        state = np.asarray(states[B:])
        sig2 = np.exp(state) if isinstance(model, Egarch) else state
    e = eps[B:B + sig2.size]
    y = np.sqrt(sig2) * e
    if diverged:
        warn_msgs.append("true EGARCH log-volatility left the clamp range; path truncated")
    return TruePath(sig2, y, e, state, diverged, warn_msgs, hist)


def _initial_hat(config: SimConfig, true: TruePath) -> float:
    if config.init_mode == "constant":
        return float(config.init_value)
    if config.init_mode == "sample_mean":
        return float(np.mean(true.y * true.y))
    return float(true.sigma2[0] * math.exp(config.init_value))


def _pack(family, sigma2, sigma2hat, z, dz, div, every, warn_msgs) -> CoupledPath:
    idx = np.arange(0, len(sigma2), every)
    return CoupledPath(
        family,
        idx,
        np.asarray(sigma2, dtype=float)[idx],
        np.asarray(sigma2hat, dtype=float)[idx],
        np.asarray(z, dtype=float)[idx],
        np.asarray(dz, dtype=float)[idx],
        np.asarray(div, dtype=bool)[idx],
        warn_msgs,
    )


def simulate_coupled(config: SimConfig) -> CoupledPath:
    """
    Run the true recursion and the filter side by side on one innovation stream.

    The filter residual ``y / sigmahat`` is evaluated as ``eps * sigma / sigmahat``
    so that it equals ``eps`` exactly when the filter sits on the truth.
    """
    true = simulate_true_path(config)
    model = config.model
    n = len(true)
    s2 = true.sigma2
    hat0 = _initial_hat(config, true)
    div = [False] * n
    if isinstance(model, Garch):
        diffs = _garch_diffs(model, true, hat0)
        return _pack("garch", s2, s2 + diffs, s2, diffs, div, config.record_every, true.warnings)

    eps = true.eps.tolist()
    if isinstance(model, Egarch):
        z = true.state.tolist()
        z_rec = list(z)
        zhat = [0.0] * n
        zh = math.log(hat0) if config.init_mode != "log_offset" else z[0] + config.init_value
        frozen_at = -1
        for t in range(n):
            if t > 0:
                resid = eps[t - 1] * math.exp(-0.5 * (zh - z[t - 1]))
                nxt = egarch_log_step(model, resid, zh)
                if not -LOG_CLAMP <= nxt <= LOG_CLAMP:
                    frozen_at = t
                    break
                zh = nxt
            zhat[t] = zh
        if frozen_at > 0:
            # freeze every reported column at the last finite state
            for t in range(frozen_at, n):
                zhat[t] = zhat[frozen_at - 1]
                z_rec[t] = z[frozen_at - 1]
                div[t] = True
        zhat_a = np.asarray(zhat)
        z_a = np.asarray(z_rec)
        return _pack("egarch", np.exp(z_a), np.exp(zhat_a), z_a, zhat_a - z_a, div, config.record_every, true.warnings)

    sig = np.sqrt(s2).tolist()
    hat = [0.0] * n
    x = hat0
    for t in range(n):
        if t > 0:
            x = vgarch_step(model, eps[t - 1] * (sig[t - 1] / math.sqrt(x)), x)
        hat[t] = x
    return _pack("vgarch", s2, hat, s2, hat, div, config.record_every, true.warnings)


def _garch_diffs(model: Garch, true: TruePath, hat0: float) -> np.ndarray:
    """Filter error sigma2hat - sigma2 for a GARCH path started at hat0."""
    n = len(true)
    q = model.q
    # true variances at times 0, -1, ..., -(q-1)
    hist = [float(true.sigma2[0]), *true.sigma2_hist][:q] if q else []
    lag = [hat0 - h for h in hist]
    betas = model.betas
    diffs = [0.0] * n
    diffs[0] = hat0 - float(true.sigma2[0])
    for t in range(1, n):
        cur = 0.0
        for j, bj in enumerate(betas):
            cur += bj * lag[j]
        lag = [cur, *lag[:-1]]
        diffs[t] = cur
    return np.asarray(diffs)


def egarch_d_step(beta: float, estar: float, d: float) -> float:
    """Log filter error update ``d -> beta d + estar (exp(-d/2) - 1)``."""
    return beta * d + estar * math.expm1(-0.5 * d)


def simulate_coupled_coords(config: SimConfig) -> CoupledPath:
    """
    Evolve the pair in transformed coordinates: ``(log sigma2, d)`` for EGARCH,
    ``(sigma2, sigma2hat)`` for VGARCH with the residual written as
    ``eps * sqrt(z / zhat)``.

    The EGARCH error ``d`` stays finite even when ``sigma2hat`` itself overflows.
    """
    model = config.model
    if not isinstance(model, (Egarch, Vgarch)):
        raise ConfigurationError("transformed coordinates exist for egarch and vgarch only")
    true = simulate_true_path(config)
    n = len(true)
    s2 = true.sigma2
    eps = true.eps
    hat0 = _initial_hat(config, true)
    div = [False] * n
    if isinstance(model, Egarch):
        z = true.state
        estar = (model.gamma * np.abs(eps) + model.delta * eps).tolist()
        d_arr = [0.0] * n
        d = math.log(hat0) - float(z[0]) if config.init_mode != "log_offset" else float(config.init_value)
        beta = model.beta
        frozen = False
        for t in range(n):
            if t > 0 and not frozen:
                try:
                    nxt = egarch_d_step(beta, estar[t - 1], d)
                except OverflowError:
                    nxt = math.inf
                if not math.isfinite(nxt):
                    frozen = True
                else:
                    d = nxt
            d_arr[t] = d
            div[t] = frozen
        d_a = np.asarray(d_arr)
        with np.errstate(over="ignore"):
            hat = np.array([exp_clamped(v) for v in (z + d_a)])
        return _pack("egarch", s2, hat, z, d_a, div, config.record_every, true.warnings)

    e = eps.tolist()
    zs = s2.tolist()
    zhat = [0.0] * n
    x = hat0
    for t in range(n):
        if t > 0:
            x = vgarch_step(model, e[t - 1] * math.sqrt(zs[t - 1] / x), x)
        zhat[t] = x
    return _pack("vgarch", s2, zhat, s2, zhat, div, config.record_every, true.warnings)
