"""
Experiment drivers: coefficient heatmaps, divergence paths, and the
long-run behaviour of the (true, filtered) volatility pair.

Every task derives its own seed from the base seed and its index, and results
are assembled in task order, so outputs are identical for any worker count.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from .chaos_map import BifurcationScan
from .coupled_sim import CoupledPath, SimConfig, fmt, simulate_coupled, simulate_coupled_coords
from .errors import ConfigurationError, DivergenceError
from .innovations import InnovationDist
from .models import PARAM_KEYS, Egarch, Vgarch, make_model
from .parallel import map_ordered
from .rng import STREAM_CELL, derive_seed
from .stability import LambdaEstimate, estimate_default

INVALID = "invalid"
DIVERGED = "diverged"

HEATMAP_HEADER = ("axis1", "axis2", "lambda", "stderr", "verdict")
DIVERGENCE_HEADER = ("offset", "t", "sigma2", "sigma2hat", "diff", "diverged")
LLN_HEADER = ("start", "half", "ks_d", "mu", "frac_separated")
BIFURCATION_HEADER = ("gamma", "sample_index", "x", "detected_period")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ConfigurationError(f"axis {self.name!r} needs at least 2 steps")
        if not self.hi > self.lo:
            raise ConfigurationError(f"axis {self.name!r} needs max > min")

    @classmethod
    def parse(cls, text: str) -> Axis:
        """``name:min:max:steps``, e.g. ``beta:0.05:0.95:10``."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigurationError(f"axis {text!r} must look like name:min:max:steps")
        try:
            return cls(parts[0].strip(), float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError:
            raise ConfigurationError(f"axis {text!r} has non-numeric bounds") from None

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.lo, self.hi, self.steps)]

    def spec(self) -> str:
        return f"{self.name}:{self.lo!r}:{self.hi!r}:{self.steps}"


@dataclass(frozen=True)
class SweepGrid:
    model_family: str
    axis1: Axis
    axis2: Axis
    fixed_params: dict
    dist: InnovationDist
    budget_per_cell: int
    base_seed: int

    def __post_init__(self) -> None:
        fam = self.model_family
        if fam not in ("egarch", "vgarch"):
            raise ConfigurationError("heatmaps sweep egarch or vgarch")
        names = {self.axis1.name, self.axis2.name}
        if len(names) != 2:
            raise ConfigurationError("the two axes must sweep different parameters")
        if not names <= set(PARAM_KEYS[fam]):
            raise ConfigurationError(f"axis parameters must be among {PARAM_KEYS[fam]}")
        if names & set(self.fixed_params):
            raise ConfigurationError("axis parameters must not also be fixed")
        if self.budget_per_cell < 4:
            raise ConfigurationError("budget per cell must be >= 4")

    def cell_seed(self, i: int, j: int) -> int:
        return derive_seed(self.base_seed, STREAM_CELL, i, j)

    def cell_params(self, i: int, j: int) -> dict:
        params = dict(self.fixed_params)
        params[self.axis1.name] = self.axis1.values()[i]
        params[self.axis2.name] = self.axis2.values()[j]
        return params


@dataclass(frozen=True)
class HeatmapCell:
    i: int
    j: int
    x1: float
    x2: float
    estimate: LambdaEstimate | None
    verdict: str


def _heatmap_cell(args) -> HeatmapCell:
    grid, i, j = args
    x1, x2 = grid.axis1.values()[i], grid.axis2.values()[j]
    try:
        model = make_model(grid.model_family, **grid.cell_params(i, j))
    except ConfigurationError:
        return HeatmapCell(i, j, x1, x2, None, INVALID)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = estimate_default(model, grid.dist, grid.budget_per_cell, grid.cell_seed(i, j))
    except DivergenceError:
        return HeatmapCell(i, j, x1, x2, None, DIVERGED)
    return HeatmapCell(i, j, x1, x2, est, est.verdict)


def run_heatmap(grid: SweepGrid, threads: int = 1) -> list[HeatmapCell]:
    """One coefficient estimate per grid cell, row-major in (axis1, axis2)."""
    tasks = [(grid, i, j) for i in range(grid.axis1.steps) for j in range(grid.axis2.steps)]
    return map_ordered(_heatmap_cell, tasks, threads)


def write_heatmap_csv(cells: list[HeatmapCell], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HEATMAP_HEADER)
    for c in cells:
        if c.estimate is None:
            w.writerow((fmt(c.x1), fmt(c.x2), "nan", "nan", c.verdict))
        else:
            w.writerow((fmt(c.x1), fmt(c.x2), fmt(c.estimate.value), fmt(c.estimate.stderr), c.verdict))


# --- divergence paths -----------------------------------------------------

def _coupled(config: SimConfig) -> CoupledPath:
    """Transformed coordinates where they exist (EGARCH error stays finite there)."""
    if isinstance(config.model, (Egarch, Vgarch)):
        return simulate_coupled_coords(config)
    return simulate_coupled(config)


def _divergence_task(config: SimConfig) -> CoupledPath:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return _coupled(config)


def run_divergence(config: SimConfig, offsets: list[float], threads: int = 1) -> list[tuple[float, CoupledPath]]:
    """A coupled path per initial log-offset ``log sigma2hat_0 - log sigma2_0``, same innovations."""
    if not isinstance(config.model, (Egarch, Vgarch)):
        raise ConfigurationError("divergence paths are defined for egarch and vgarch")
    configs = [config.with_(init_mode="log_offset", init_value=float(o)) for o in offsets]
    paths = map_ordered(_divergence_task, configs, threads)
    return list(zip([float(o) for o in offsets], paths))


def write_divergence_csv(results: list[tuple[float, CoupledPath]], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DIVERGENCE_HEADER)
    for offset, path in results:
        diff = path.difference()
        for k in range(len(path)):
            w.writerow((
                fmt(offset),
                int(path.t[k]),
                fmt(path.sigma2[k]),
                fmt(path.sigma2hat[k]),
                fmt(diff[k]),
                int(bool(path.diverged[k])),
            ))


# --- long-run behaviour of the pair ---------------------------------------

def log_error(path: CoupledPath) -> np.ndarray:
    """The filter error on a log scale: d for EGARCH, log(zhat / z) for VGARCH, raw difference for GARCH."""
    if path.family == "egarch":
        return path.d_or_zhat
    if path.family == "vgarch":
        return np.log(path.d_or_zhat) - np.log(path.z)
    return path.d_or_zhat


def frac_separated(path: CoupledPath, mu: float, lo: int = 0, hi: int | None = None) -> float:
    """Fraction of recorded t in [lo, hi) with ``|sigma2hat - sigma2| > mu``."""
    diff = np.abs(path.difference()[lo:hi])
    if diff.size == 0:
        return math.nan
    with np.errstate(invalid="ignore"):
        return float(np.mean(~(diff <= mu)))


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(ks_2samp(a, b).statistic)


@dataclass
class PairDistributionReport:
    start: float
    n: int
    ks_halves: float
    ks_vs_first_start: float
    ks_sigma2: float = math.nan
    ks_sigma2hat: float = math.nan
    frac_separated: dict = field(default_factory=dict)  # (half, mu) -> fraction
    diverged: bool = False
    params: dict = field(default_factory=dict)


def _lln_task(config: SimConfig) -> CoupledPath:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return _coupled(config.with_(record_every=1))


def run_pair_lln(
    config: SimConfig,
    s2_list: list[float],
    mu_list: list[float],
    threads: int = 1,
) -> list[PairDistributionReport]:
    """
    One long coupled path per filter start ``s2`` (same innovations for all
    starts). Reports the two-sample KS distance between the first- and
    second-half distributions of the log filter error, the KS distance of the
    second-half distribution against the first start's, half-vs-half KS
    distances of the two volatility marginals, and the separated fraction per
    half and threshold.
    """
    if not s2_list:
        raise ConfigurationError("need at least one start")
    configs = [config.with_(init_mode="constant", init_value=float(s)) for s in s2_list]
    paths = map_ordered(_lln_task, configs, threads)
    reports = []
    ref = None
    for s2, path in zip(s2_list, paths):
        d = log_error(path)
        n = len(path)
        h = n // 2
        second = d[h:]
        if ref is None:
            ref = second
        rep = PairDistributionReport(
            float(s2),
            n,
            ks_distance(d[:h], second),
            ks_distance(ref, second),
            ks_distance(path.sigma2[:h], path.sigma2[h:]),
            ks_distance(path.sigma2hat[:h], path.sigma2hat[h:]),
            diverged=path.any_diverged,
            params=dict(config.model.params()),
        )
        for mu in mu_list:
            rep.frac_separated[(1, float(mu))] = frac_separated(path, mu, 0, h)
            rep.frac_separated[(2, float(mu))] = frac_separated(path, mu, h, None)
        reports.append(rep)
    return reports


def write_lln_csv(reports: list[PairDistributionReport], fh) -> None:
    """Rows per (start, half, mu); a trailing ``cross`` row per start carries the KS distance to the first start."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LLN_HEADER)
    for rep in reports:
        for (half, mu), frac in sorted(rep.frac_separated.items()):
            w.writerow((fmt(rep.start), half, fmt(rep.ks_halves), fmt(mu), fmt(frac)))
        w.writerow((fmt(rep.start), "cross", fmt(rep.ks_vs_first_start), "", ""))


def ks_halves_band(d: np.ndarray, n_boot: int = 200, block: int = 1000, seed: int = 0, level: float = 0.95) -> float:
    """
    Upper ``level`` quantile of the half-vs-half KS distance under a moving-block
    bootstrap of ``d`` (blocks keep the serial dependence).
    """
    d = np.asarray(d)
    n = d.size
    n_blocks = max(n // block, 2)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    stats = np.empty(n_boot)
    for b in range(n_boot):
        starts = rng.integers(0, n - block + 1, size=n_blocks)
        sample = np.concatenate([d[s:s + block] for s in starts])
        h = sample.size // 2
        stats[b] = ks_distance(sample[:h], sample[h:])
    return float(np.quantile(stats, level))


def garch_steps_to_within(s2: float, sigma2_0: float, beta1: float, mu: float) -> int:
    """Steps after which a GARCH(1,1) filter error ``beta1**t |s2 - sigma2_0|`` is at most mu."""
    gap = abs(s2 - sigma2_0)
    if gap <= mu:
        return 0
    return math.ceil(math.log(mu / gap) / math.log(beta1))


def write_bifurcation_csv(scan: BifurcationScan, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BIFURCATION_HEADER)
    for c in scan.cells:
        if not c.samples:
            w.writerow((fmt(c.gamma), "", "", c.period))
            continue
        for k, x in enumerate(c.samples):
            w.writerow((fmt(c.gamma), k, fmt(x), c.period))
