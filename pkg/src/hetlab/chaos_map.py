"""
Deterministic EGARCH: the scalar map followed by the log filter error.

With rademacher innovations and ``delta = 0`` the shock ``gamma |eps| +
delta eps`` is the constant ``gamma``, so the log filter error evolves by a
fixed map. Two variants are shipped:

``derived``
    ``f(x) = beta x + gamma (exp(-x/2) - 1)``, obtained from the filter-error
    recursion. Fixed point 0 with slope ``beta - gamma / 2``, so the first
    flip bifurcation sits at ``gamma = 2 (1 + beta)``.
``literal``
    ``f(x) = alpha + beta x + gamma exp(-x/2)``, the additive-constant form.
    It is conjugate to the derived map by a shift of the fixed point, with an
    effective gain of ``gamma exp(-x*/2)``.

Period detection labels each gamma with the smallest closing period (up to
64), ``slow`` when the orbit is still visibly contracting onto a cycle (this
happens right at bifurcation points), or ``aperiodic``. The last is a
numerical label, not a proof of chaos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .coupled_sim import egarch_d_step
from .errors import ConfigurationError
from .parallel import map_ordered

VARIANTS = ("derived", "literal")
MAX_PERIOD = 64
CLOSURE_TOL = 1e-8
DEFAULT_TRANSIENT = 10_000
DEFAULT_KEEP = 512
APERIODIC = "aperiodic"
SLOW = "slow"
DIVERGED = "diverged"


@dataclass(frozen=True)
class ScalarMapSpec:
    alpha: float
    beta: float
    gamma: float
    variant: str = "derived"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}")
        if not 0 < self.beta < 1:
            raise ConfigurationError("map requires 0 < beta < 1")
        if not self.gamma >= 0:
            raise ConfigurationError("map requires gamma >= 0")

    def __call__(self, x: float) -> float:
        if self.variant == "derived":
            return egarch_d_step(self.beta, self.gamma, x)
        return self.alpha + self.beta * x + self.gamma * math.exp(-0.5 * x)

    def derivative(self, x: float) -> float:
        return self.beta - 0.5 * self.gamma * math.exp(-0.5 * x)

    def with_gamma(self, gamma: float) -> ScalarMapSpec:
        return ScalarMapSpec(self.alpha, self.beta, gamma, self.variant)


@dataclass
class Orbit:
    values: list[float]
    overflow: bool = False


def iterate(fmap: ScalarMapSpec, x0: float, n: int) -> Orbit:
    """Orbit ``x0, f(x0), ..., f^n(x0)``, truncated at the first non-finite value."""
    if not math.isfinite(x0):
        raise ConfigurationError("x0 must be finite")
    out = [float(x0)]
    x = float(x0)
    for _ in range(n):
        try:
            x = fmap(x)
        except OverflowError:
            return Orbit(out, True)
        if not math.isfinite(x):
            return Orbit(out, True)
        out.append(x)
    return Orbit(out)


@dataclass(frozen=True)
class FixedPoint:
    x_star: float
    derivative: float
    stable: bool


def fixed_point(fmap: ScalarMapSpec, tol: float = 1e-12) -> FixedPoint:
    """
    Unique fixed point by bisection.

    ``g(x) = f(x) - x`` has slope ``beta - 1 - (gamma / 2) exp(-x / 2) < 0``,
    so it crosses zero exactly once.
    """

    def g(x: float) -> float:
        return fmap(x) - x

    lo, hi = -1.0, 1.0
    while g(lo) <= 0:
        lo *= 2.0
    while g(hi) >= 0:
        hi *= 2.0
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        gm = g(mid)
        if gm == 0.0:
            lo = hi = mid
            break
        if gm > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    slope = fmap.derivative(x)
    return FixedPoint(x, slope, abs(slope) < 1.0)


def detect_period(samples: list[float], max_period: int = MAX_PERIOD, tol: float = CLOSURE_TOL) -> int | None:
    """Smallest p with ``|x[t + p] - x[t]| < tol`` across the whole window, else None."""
    n = len(samples)
    for p in range(1, min(max_period, n - 1) + 1):
        if all(abs(samples[t + p] - samples[t]) < tol for t in range(n - p)):
            return p
    return None


def still_contracting(samples: list[float], max_period: int = MAX_PERIOD) -> bool:
    """
    True when, for some p, every stride-p subsequence of ``|x[t + p] - x[t]|``
    is non-increasing over the window.

    That is the signature of an orbit still creeping onto a cycle near a
    bifurcation point; a chaotic orbit does not produce monotone gaps.
    """
    n = len(samples)
    for p in range(1, min(max_period, n // 4) + 1):
        gaps = [abs(samples[t + p] - samples[t]) for t in range(n - p)]
        if all(
            gaps[t + p] <= gaps[t] * (1 + 1e-12) + 1e-15
            for t in range(len(gaps) - p)
        ):
            return True
    return False


@dataclass
class BifurcationCell:
    gamma: float
    samples: list[float]
    period: int | str


@dataclass
class BifurcationScan:
    gamma_grid: list[float]
    transient: int
    keep: int
    cells: list[BifurcationCell] = field(default_factory=list)

    def periods(self) -> list[int | str]:
        return [c.period for c in self.cells]


def _scan_cell(args) -> BifurcationCell:
    fmap, x0, transient, keep = args
    orbit = iterate(fmap, x0, transient + keep - 1)
    if orbit.overflow:
        return BifurcationCell(fmap.gamma, [], DIVERGED)
    kept = orbit.values[transient:]
    p = detect_period(kept)
    if p is not None:
        return BifurcationCell(fmap.gamma, kept, p)
    return BifurcationCell(fmap.gamma, kept, SLOW if still_contracting(kept) else APERIODIC)


def bifurcation_scan(
    fmap: ScalarMapSpec,
    gamma_grid,
    x0: float = 0.5,
    transient: int = DEFAULT_TRANSIENT,
    keep: int = DEFAULT_KEEP,
    threads: int = 1,
) -> BifurcationScan:
    """
    Attractor samples and detected period for each gamma of an ascending grid.

    ``x0`` should be off the fixed point; the derived map started at 0 never moves.
    """
    grid = [float(g) for g in gamma_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("gamma_grid must be strictly increasing")
    if transient < 1 or keep < 1:
        raise ConfigurationError("transient and keep must be >= 1")
    tasks = [(fmap.with_gamma(g), x0, transient, keep) for g in grid]
    cells = map_ordered(_scan_cell, tasks, threads)
    return BifurcationScan(grid, transient, keep, cells)


def first_gamma_with_period(scan: BifurcationScan, period: int) -> float | None:
    for c in scan.cells:
        if c.period == period:
            return c.gamma
    return None
