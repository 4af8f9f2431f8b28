"""
Innovation laws for the simulated models.

Three families are supported:

``standard_normal``
    N(0, 1).
``exp_mixture``
    ``eps = shift + scale * X`` where ``X = xi1`` with probability
    ``weight_pos`` and ``X = -xi2`` otherwise, ``xi1 ~ Exp(rate_pos)`` and
    ``xi2 ~ Exp(rate_neg)`` (rates, so ``E xi1 = 1 / rate_pos``). Its density
    is ``g(x) = f_X((x - shift) / scale) / scale``; it is positive everywhere,
    bounded, and decays exponentially in both tails, so ``(|x| + 1) g(x)`` is
    bounded.
``rademacher``
    +1 or -1 with probability 1/2. Has no density and is only meant for the
    deterministic EGARCH experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import ConfigurationError, UnsupportedDensityError
from .rng import stream

KINDS = ("standard_normal", "exp_mixture", "rademacher")

_ALIASES = {
    "normal": "standard_normal",
    "standard_normal": "standard_normal",
    "gaussian": "standard_normal",
    "exp_mixture": "exp_mixture",
    "exp-mixture": "exp_mixture",
    "mixture": "exp_mixture",
    "rademacher": "rademacher",
}

# normal density is < 1e-300 beyond +-40; mixture tails use TAIL_LOG / decay rate
NORMAL_LIMIT = 40.0
TAIL_LOG = 750.0


@dataclass(frozen=True)
class InnovationDist:
    kind: str
    rate_pos: float = 1.0
    rate_neg: float = 4.0
    weight_pos: float = 0.3
    shift: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown innovation kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "exp_mixture":
            if not (self.rate_pos > 0 and self.rate_neg > 0):
                raise ConfigurationError("exp_mixture rates must be positive")
            if not 0.0 <= self.weight_pos <= 1.0:
                raise ConfigurationError("exp_mixture weight_pos must lie in [0, 1]")
            if not self.scale > 0:
                raise ConfigurationError("exp_mixture scale must be positive")
            if not math.isfinite(self.shift):
                raise ConfigurationError("exp_mixture shift must be finite")

    @property
    def has_density(self) -> bool:
        return self.kind != "rademacher"

    @property
    def name(self) -> str:
        if self.kind != "exp_mixture":
            return self.kind
        return (
            f"exp_mixture(p={self.weight_pos!r},rate_pos={self.rate_pos!r},rate_neg={self.rate_neg!r},"
            f"shift={self.shift!r},scale={self.scale!r})"
        )


def standard_normal() -> InnovationDist:
    return InnovationDist("standard_normal")


def rademacher() -> InnovationDist:
    return InnovationDist("rademacher")


def exp_mixture(weight_pos: float = 0.3, rate_pos: float = 1.0, rate_neg: float = 4.0) -> InnovationDist:
    """Mixture of ``xi1`` and ``-xi2`` standardized to mean 0 and variance 1.

    The default weight 0.3 puts the mode at about -0.15 rather than at 0.
    """
    if not 0.0 <= weight_pos <= 1.0:
        raise ConfigurationError("exp_mixture weight_pos must lie in [0, 1]")
    if not (rate_pos > 0 and rate_neg > 0):
        raise ConfigurationError("exp_mixture rates must be positive")
    p = weight_pos
    m1 = p / rate_pos - (1.0 - p) / rate_neg
    m2 = 2.0 * p / rate_pos**2 + 2.0 * (1.0 - p) / rate_neg**2
    sd = math.sqrt(m2 - m1 * m1)
    return InnovationDist("exp_mixture", rate_pos, rate_neg, p, shift=-m1 / sd, scale=1.0 / sd)


def from_name(name: str) -> InnovationDist:
    try:
        kind = _ALIASES[name.strip().lower()]
    except KeyError:
        raise ConfigurationError(f"unknown distribution {name!r}; use normal, exp_mixture or rademacher") from None
    if kind == "exp_mixture":
        return exp_mixture()
    return InnovationDist(kind)


def sample(dist: InnovationDist, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. innovations from ``rng``."""
    if n < 1:
        raise ConfigurationError("sample count must be >= 1")
    if dist.kind == "standard_normal":
        return rng.standard_normal(n)
    if dist.kind == "rademacher":
        return np.where(rng.integers(0, 2, size=n) == 1, 1.0, -1.0)
    u = rng.random(n)
    e = rng.standard_exponential(n)
    x = np.where(u < dist.weight_pos, e / dist.rate_pos, -e / dist.rate_neg)
    return dist.shift + dist.scale * x


def sample_seeded(dist: InnovationDist, seed: int, n: int, *key: int) -> np.ndarray:
    return sample(dist, stream(seed, *key), n)


def density(dist: InnovationDist, x):
    """Density ``g(x)``; accepts scalars or arrays."""
    if dist.kind == "rademacher":
        raise UnsupportedDensityError("rademacher innovations have no density")
    x = np.asarray(x, dtype=float)
    if dist.kind == "standard_normal":
        out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    else:
        u = (x - dist.shift) / dist.scale
        p = dist.weight_pos
        with np.errstate(over="ignore"):
            pos = p * dist.rate_pos * np.exp(-dist.rate_pos * np.maximum(u, 0.0))
            neg = (1.0 - p) * dist.rate_neg * np.exp(dist.rate_neg * np.minimum(u, 0.0))
        out = np.where(u > 0, pos, np.where(u < 0, neg, 0.5 * (pos + neg))) / dist.scale
    return out if out.ndim else float(out)


def kinks(dist: InnovationDist) -> tuple[float, ...]:
    """Points where the density is not smooth (quadrature breakpoints)."""
    return (dist.shift,) if dist.kind == "exp_mixture" else ()


def quad_window(dist: InnovationDist) -> tuple[float, float]:
    """Finite interval outside which the density underflows to 0 in double precision."""
    if dist.kind == "exp_mixture":
        lo = dist.shift - TAIL_LOG * dist.scale / dist.rate_neg
        hi = dist.shift + TAIL_LOG * dist.scale / dist.rate_pos
        return lo, hi
    return -NORMAL_LIMIT, NORMAL_LIMIT


def _bulk_points(dist: InnovationDist, lo: float, hi: float) -> list[float]:
    """Geometric split points around the mode so the bulk is never lost inside one wide panel."""
    if dist.kind == "exp_mixture":
        center = dist.shift
        unit = dist.scale / max(dist.rate_pos, dist.rate_neg)
    else:
        center, unit = 0.0, 1.0
    pts = [center]
    step = unit / 8
    while center - step > lo or center + step < hi:
        pts += [center - step, center + step]
        step *= 2
    return [x for x in pts if lo < x < hi]


def expect(dist: InnovationDist, h, breakpoints=(), abs_tol: float = 1e-9) -> float:
    """E h(eps) by quadrature (exact two-point sum for rademacher)."""
    if dist.kind == "rademacher":
        return float(0.5 * (h(np.array([1.0]))[0] + h(np.array([-1.0]))[0]))
    lo, hi = quad_window(dist)
    value, _ = quadrature.integrate(
        lambda x: h(x) * density(dist, x),
        lo,
        hi,
        breakpoints=(*_bulk_points(dist, lo, hi), *(b for b in breakpoints if lo < b < hi)),
        abs_tol=abs_tol,
    )
    return value


def log_moment_check(dist: InnovationDist, shift: float, n: int, seed: int) -> float:
    """Monte-Carlo estimate of ``E log|eps - shift|``."""
    eps = sample(dist, stream(seed, 0), n)
    with np.errstate(divide="ignore"):
        vals = np.log(np.abs(eps - shift))
    vals = vals[np.isfinite(vals)]
    return float(vals.mean())


def log_moment_quad(dist: InnovationDist, shift: float) -> float:
    """Quadrature value of ``E log|eps - shift|``."""

    def h(x):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(x - shift))

    return expect(dist, h, breakpoints=(shift,))
