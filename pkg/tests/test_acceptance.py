"""
Acceptance criteria 1-9, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict that is printed in the pytest
terminal summary (and to stdout, visible with ``-s``). Thresholds marked as
pilot-derived were measured on the seeds fixed below.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from hetlab.chaos_map import ScalarMapSpec, bifurcation_scan, first_gamma_with_period
from hetlab.coupled_sim import SimConfig, simulate_coupled
from hetlab.innovations import exp_mixture, log_moment_quad, rademacher, standard_normal
from hetlab.models import Egarch, Garch, H, Vgarch, dH_dx, update_filter
from hetlab.experiments import run_pair_lln
from hetlab.stability import (
    LOCALLY_NONINVERTIBLE,
    lambda_egarch_closed,
    lambda_ergodic,
    lambda_quadrature,
    lambda_vgarch_two_draw,
)

NONINV_E = Egarch(0.1, 0.25, 5.4, 0.0)
NONINV_V = Vgarch(0.001, 0.01, 1.0, -0.3)

# pilot-derived fixtures and the seeds they were measured with
C1_SEED = 20240101
C2_SEED = 7
C4_SEED = 40
C6A = dict(model=Egarch(0.1, 0.5, 0.1, 0.0), seed=4, mu=0.01, limit=0.01)
C6B = dict(model=NONINV_E, seed=10, mu=0.05, frac_floor=0.3, ks_ceiling=0.05)  # pilot: frac ~0.65, KS <= 0.038 over seeds 10-39
C7_SEED = 11


def record(k: int, name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[k] = (ok, name, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {name} ({detail})")
    assert ok, detail


def test_criterion_1_garch_exact_decay():
    rng = np.random.default_rng(C1_SEED)
    t0 = time.perf_counter()
    worst = 0.0
    checked = 0
    for _ in range(50):
        a1 = rng.uniform(0.0, 0.3)
        b1 = rng.uniform(0.05, 0.99 - a1)
        m = Garch(rng.uniform(0.01, 1.0), (a1,), (b1,))
        s2 = math.exp(rng.uniform(-5, 5))
        path = simulate_coupled(SimConfig(m, standard_normal(), 1500, int(rng.integers(2**32)), burn_in=int(rng.integers(0, 500)), init_value=s2))
        diff = np.abs(path.difference())
        live = (diff[:-1] > 1e-300) & (diff[1:] > 1e-300)
        ratio = diff[1:][live] / diff[:-1][live]
        if ratio.size:
            worst = max(worst, float(np.max(np.abs(ratio / b1 - 1.0))))
            checked += ratio.size
    elapsed = time.perf_counter() - t0
    record(1, "GARCH filter error shrinks by exactly beta1 per step", worst <= 1e-12 and checked > 0,
           f"max relative deviation {worst:.2e} over {checked} steps, {elapsed:.2f}s")


def test_criterion_2_egarch_closed_form_vs_quadrature():
    t0 = time.perf_counter()
    q = lambda_quadrature(NONINV_E, standard_normal())
    mc = lambda_egarch_closed(NONINV_E, standard_normal(), 10**7, C2_SEED)
    gap = abs(mc.value - q.value)
    ok = gap < 4 * mc.stderr and mc.value > 0 and q.value > 0
    record(2, "EGARCH coefficient at (0.1, 0.25, 5.4, 0): MC vs quadrature, both positive", ok,
           f"MC {mc.value:.5f} +- {mc.stderr:.5f}, quadrature {q.value:.8f}, gap {gap / mc.stderr:.2f} se, "
           f"{time.perf_counter() - t0:.1f}s")


def test_criterion_3_rademacher_boundary():
    m = Egarch(0.1, 0.5, 3.0, 0.0)
    mc = lambda_egarch_closed(m, rademacher(), 10_000, 0)
    q = lambda_quadrature(m, rademacher())
    ok = abs(mc.value) <= 1e-12 and abs(q.value) <= 1e-12
    record(3, "rademacher EGARCH (beta 0.5, gamma 3) sits exactly on zero", ok, f"MC {mc.value!r}, exact {q.value!r}")


def test_criterion_4_route_agreement_grid():
    t0 = time.perf_counter()
    betas = [0.1, 0.3, 0.5, 0.7, 0.9]
    gammas = [0.2, 1.0, 2.0, 4.0, 6.0]
    agree = 0
    worst = 0.0
    for i, b in enumerate(betas):
        for j, g in enumerate(gammas):
            m = Egarch(0.1, b, g, 0.0)
            cf = lambda_egarch_closed(m, standard_normal(), 1_000_000, C4_SEED + 100 * i + j)
            erg = lambda_ergodic(m, standard_normal(), 200_000, seed=C4_SEED + 100 * i + j)
            z = abs(cf.value - erg.value) / math.hypot(cf.stderr, erg.stderr)
            worst = max(worst, z)
            agree += z < 4
    record(4, "ergodic vs closed-form MC over a 5x5 EGARCH grid", agree >= 24,
           f"{agree}/25 cells within 4 combined se, worst {worst:.2f} se, {time.perf_counter() - t0:.1f}s")


def _fd_points(rng, family, n):
    for _ in range(n):
        if family == "egarch":
            g = rng.uniform(0, 3)
            m = Egarch(rng.uniform(-1, 1), rng.uniform(0.05, 0.95), g, rng.uniform(-g, g))
        elif family == "vgarch":
            m = Vgarch(rng.uniform(0.001, 1), rng.uniform(0, 0.95), rng.uniform(0, 3), rng.uniform(-1, 1))
        else:
            m = Garch(rng.uniform(0.01, 1), (rng.uniform(0, 0.3),), (rng.uniform(0.01, 0.95),))
        yield m, rng.normal() * rng.uniform(0.1, 3), math.exp(rng.uniform(-2, 2))


def test_criterion_5_derivative_finite_differences():
    rng = np.random.default_rng(5)
    worst = {}
    for family in ("egarch", "vgarch", "garch"):
        w = 0.0
        for m, y, x in _fd_points(rng, family, 200):
            h = 1e-6 * x
            f = (lambda v: update_filter(m, y, v)) if family == "garch" else (lambda v: H(m, y, v))
            fd = (f(x + h) - f(x - h)) / (2 * h)
            an = dH_dx(m, y, x)
            w = max(w, abs(fd - an) / abs(an))
        worst[family] = w
    ok = all(v <= 1e-5 for v in worst.values())
    record(5, "analytic dH/dx vs central differences, 200 points per family", ok,
           ", ".join(f"{k} max rel {v:.1e}" for k, v in worst.items()))


def test_criterion_6_dichotomy():
    t0 = time.perf_counter()
    inv = run_pair_lln(SimConfig(C6A["model"], standard_normal(), 100_000, C6A["seed"]), [0.5, 2.0], [C6A["mu"]])
    fracs_a = [r.frac_separated[(2, C6A["mu"])] for r in inv]
    ok_a = all(f < C6A["limit"] for f in fracs_a) and not any(r.diverged for r in inv)
    non = run_pair_lln(SimConfig(C6B["model"], standard_normal(), 100_000, C6B["seed"]), [0.5, 2.0], [C6B["mu"]])
    fracs_b = [r.frac_separated[(2, C6B["mu"])] for r in non]
    ks_b = [r.ks_halves for r in non]
    ok_b = all(f > C6B["frac_floor"] for f in fracs_b) and all(k < C6B["ks_ceiling"] for k in ks_b)
    record(6, "invertible regime couples, expanding regime keeps a non-degenerate stationary pair", ok_a and ok_b,
           f"(a) frac {fracs_a}; (b) frac {[round(f, 3) for f in fracs_b]}, half-vs-half KS {[round(k, 4) for k in ks_b]}, "
           f"{time.perf_counter() - t0:.1f}s")


def test_criterion_7_vgarch_construction():
    t0 = time.perf_counter()
    d = exp_mixture()
    shifted, plain = log_moment_quad(d, -0.3), log_moment_quad(d, 0.0)
    est = lambda_ergodic(NONINV_V, d, 1_000_000, seed=C7_SEED)
    m0 = Vgarch(0.001, 0.0, 1.0, -0.3)
    erg0 = lambda_ergodic(m0, d, 1_000_000, seed=C7_SEED)
    two = lambda_vgarch_two_draw(m0, d, 1_000_000, C7_SEED)
    gap = abs(erg0.value - two.value) / math.hypot(erg0.stderr, two.stderr)
    ok = shifted < plain and est.verdict == LOCALLY_NONINVERTIBLE and gap < 4
    record(7, "VGARCH with the skewed exponential mixture is locally non-invertible", ok,
           f"E log|e+0.3| {shifted:.4f} < E log|e| {plain:.4f}; lambda {est.value:.4f} +- {est.stderr:.4f} ({est.verdict}); "
           f"beta=0 ergodic vs two-draw {gap:.2f} se, {time.perf_counter() - t0:.1f}s")


def test_criterion_8_bifurcation():
    t0 = time.perf_counter()
    flips = {}
    for beta in (0.25, 0.5, 0.75):
        thr = 2 * (1 + beta)
        grid = np.round(np.arange(thr - 0.5, thr + 0.5, 0.01), 10)
        scan = bifurcation_scan(ScalarMapSpec(0.0, beta, 1.0), grid)
        flips[beta] = (thr, first_gamma_with_period(scan, 2))
    ok_derived = all(g2 is not None and abs(g2 - thr) <= 0.05 for thr, g2 in flips.values())

    scan = bifurcation_scan(ScalarMapSpec(0.2, 0.5, 50.0, "literal"), np.arange(50.0, 700.0, 2.0))
    seq = []
    for c in scan.cells:
        if c.period == "aperiodic":
            break
        if isinstance(c.period, int) and (not seq or seq[-1] != c.period):
            seq.append(c.period)
    reached = any(c.period == "aperiodic" for c in scan.cells)
    ok_literal = seq[:3] == [1, 2, 4] and seq == sorted(seq) and reached
    record(8, "period-doubling thresholds and ordered plateaus", ok_derived and ok_literal,
           f"derived flips {', '.join(f'beta {b}: {g} vs {t}' for b, (t, g) in flips.items())}; "
           f"literal plateaus {seq} then aperiodic; {time.perf_counter() - t0:.1f}s")


CLI_RUNS = {
    "simulate": ["simulate", "--model", "egarch", "--beta", "0.25", "--gamma", "5.4", "--steps", "20000", "--seed", "2",
                 "--init", "constant:2.0", "--record-every", "3"],
    "simulate_offsets": ["simulate", "--model", "vgarch", "--alpha", "0.001", "--beta", "0.01", "--gamma", "1",
                         "--delta", "-0.3", "--dist", "exp_mixture", "--steps", "5000", "--offsets", "0,0.001,1", "--seed", "5"],
    "lambda": ["lambda", "--model", "vgarch", "--alpha", "0.001", "--beta", "0.01", "--gamma", "1", "--delta", "-0.3",
               "--dist", "exp_mixture", "--budget", "50000", "--seed", "6"],
    "heatmap": ["heatmap", "--family", "egarch", "--axis1", "beta:0.05:0.95:4", "--axis2", "gamma:0.1:8:4",
                "--budget", "3000000", "--seed", "9"],
    "heatmap_vgarch": ["heatmap", "--family", "vgarch", "--axis1", "beta:0.01:0.5:2", "--axis2", "gamma:0.5:1:2",
                       "--budget", "20000", "--seed", "3"],
    "bifurcation": ["bifurcation", "--variant", "literal", "--gamma-min", "50", "--gamma-max", "600", "--steps", "12",
                    "--transient", "2000", "--keep", "64"],
    "lln": ["lln", "--model", "egarch", "--beta", "0.25", "--gamma", "5.4", "--steps", "20000", "--starts", "0.5,2.0",
            "--mu", "0.01,0.05", "--seed", "8"],
}


def _cli(args):
    return subprocess.run([sys.executable, "-m", "hetlab.cli", *args], capture_output=True, text=True)


def test_criterion_9_cli_reproducibility(tmp_path):
    t0 = time.perf_counter()
    failures = []
    for name, args in CLI_RUNS.items():
        first = tmp_path / f"{name}_t1.csv"
        again = tmp_path / f"{name}_t8.csv"
        p1 = _cli([*args, "--threads", "1", "--out", str(first)])
        p2 = _cli([args[0], "--config", f"{first}.manifest", "--threads", "8", "--out", str(again)])
        if p1.returncode != 0 or p2.returncode != 0:
            failures.append(f"{name}: exit {p1.returncode}/{p2.returncode} {p1.stderr.strip()} {p2.stderr.strip()}")
        elif first.read_bytes() != again.read_bytes():
            failures.append(f"{name}: CSV differs")
    record(9, "CLI reruns from the manifest are byte-identical at 1 and 8 threads", not failures,
           f"{len(CLI_RUNS) - len(failures)}/{len(CLI_RUNS)} runs identical, {time.perf_counter() - t0:.1f}s"
           + (f"; {failures}" if failures else ""))
