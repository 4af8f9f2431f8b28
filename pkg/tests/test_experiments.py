import io
import math

import numpy as np
import pytest

from hetlab import experiments
from hetlab.coupled_sim import SimConfig, simulate_coupled, simulate_coupled_coords
from hetlab.errors import ConfigurationError, DivergenceError
from hetlab.experiments import (
    DIVERGED,
    INVALID,
    Axis,
    SweepGrid,
    frac_separated,
    garch_steps_to_within,
    ks_halves_band,
    log_error,
    run_divergence,
    run_heatmap,
    run_pair_lln,
    write_divergence_csv,
    write_heatmap_csv,
    write_lln_csv,
)
from hetlab.innovations import exp_mixture, standard_normal
from hetlab.models import INDETERMINATE, Egarch, Garch, Vgarch
from hetlab.stability import LOCALLY_INVERTIBLE, LOCALLY_NONINVERTIBLE, classify, lambda_quadrature

NONINV_E = Egarch(0.1, 0.25, 5.4, 0.0)
INV_E = Egarch(0.1, 0.5, 0.1, 0.0)
EGARCH_FIXED = {"alpha": 0.1, "delta": 0.0}


def _csv(writer, payload):
    buf = io.StringIO()
    writer(payload, buf)
    return buf.getvalue()


def test_axis_parse_and_values():
    ax = Axis.parse("beta:0.05:0.95:10")
    assert ax.name == "beta" and ax.steps == 10
    assert ax.values()[0] == 0.05 and ax.values()[-1] == 0.95
    assert Axis.parse(ax.spec()) == ax
    for bad in ("beta:0:1", "beta:a:1:3", "beta:0:1:1", "beta:1:0:3"):
        with pytest.raises(ConfigurationError):
            Axis.parse(bad)


def test_grid_validation():
    a, g = Axis("beta", 0.1, 0.9, 2), Axis("gamma", 0.1, 1.0, 2)
    with pytest.raises(ConfigurationError):
        SweepGrid("egarch", a, a, EGARCH_FIXED, standard_normal(), 100, 0)
    with pytest.raises(ConfigurationError):
        SweepGrid("egarch", a, g, {"alpha": 0.1, "beta": 0.5}, standard_normal(), 100, 0)
    with pytest.raises(ConfigurationError):
        SweepGrid("egarch", a, Axis("alpha0", 0.1, 1.0, 2), {}, standard_normal(), 100, 0)
    with pytest.raises(ConfigurationError):
        SweepGrid("garch", a, g, {}, standard_normal(), 100, 0)


def test_heatmap_rows_change_sign_at_most_once():
    grid = SweepGrid("egarch", Axis("beta", 0.05, 0.95, 10), Axis("gamma", 0.1, 8.0, 10), EGARCH_FIXED, standard_normal(), 100_000, 9)
    cells = run_heatmap(grid)
    assert len(cells) == 100
    assert [(c.i, c.j) for c in cells] == [(i, j) for i in range(10) for j in range(10)]
    for i in range(10):
        row = [c.verdict for c in cells if c.i == i and c.verdict != INDETERMINATE]
        changes = sum(a != b for a, b in zip(row, row[1:]))
        assert changes <= 1
        # oracle: the sign pattern of the quadrature values along the row
        oracle = [lambda_quadrature(Egarch(0.1, c.x1, c.x2, 0.0), standard_normal()).value > 0 for c in cells if c.i == i]
        assert sum(a != b for a, b in zip(oracle, oracle[1:])) <= 1


def test_heatmap_named_cells():
    grid = SweepGrid("egarch", Axis("beta", 0.25, 0.5, 2), Axis("gamma", 0.1, 5.4, 2), EGARCH_FIXED, standard_normal(), 200_000, 1)
    verdicts = {(c.x1, c.x2): c.verdict for c in run_heatmap(grid)}
    assert verdicts[(0.25, 5.4)] == LOCALLY_NONINVERTIBLE
    assert verdicts[(0.25, 0.1)] == LOCALLY_INVERTIBLE


def test_heatmap_invalid_cells():
    grid = SweepGrid("egarch", Axis("gamma", 0.1, 1.0, 3), Axis("delta", -0.5, 0.5, 3), {"alpha": 0.1, "beta": 0.5}, standard_normal(), 1000, 0)
    cells = run_heatmap(grid)
    by = {(c.x1, c.x2): c for c in cells}
    assert by[(0.1, -0.5)].verdict == INVALID and by[(0.1, -0.5)].estimate is None
    assert by[(1.0, 0.5)].verdict != INVALID
    text = _csv(write_heatmap_csv, cells)
    assert "0.1,-0.5,nan,nan,invalid" in text


def test_heatmap_diverged_cells(monkeypatch):
    def boom(*args, **kwargs):
        raise DivergenceError("forced")

    monkeypatch.setattr(experiments, "estimate_default", boom)
    grid = SweepGrid("vgarch", Axis("beta", 0.1, 0.5, 2), Axis("gamma", 0.1, 1.0, 2), {"alpha": 0.01, "delta": 0.0}, exp_mixture(), 100, 0)
    assert {c.verdict for c in run_heatmap(grid)} == {DIVERGED}


def test_heatmap_csv_deterministic_across_workers():
    grid = SweepGrid("vgarch", Axis("beta", 0.01, 0.5, 2), Axis("gamma", 0.5, 1.0, 2), {"alpha": 0.001, "delta": -0.3}, exp_mixture(), 5000, 4)
    a = _csv(write_heatmap_csv, run_heatmap(grid, threads=1))
    b = _csv(write_heatmap_csv, run_heatmap(grid, threads=2))
    assert a == b
    assert a.splitlines()[0] == "axis1,axis2,lambda,stderr,verdict"
    assert len(a.splitlines()) == 5


@pytest.mark.parametrize(
    "family, fixed, dist",
    [("egarch", EGARCH_FIXED, standard_normal()), ("vgarch", {"alpha": 0.001, "delta": -0.3}, exp_mixture())],
)
def test_heatmap_verdict_matches_classify(family, fixed, dist):
    grid = SweepGrid(family, Axis("beta", 0.01, 0.6, 3), Axis("gamma", 0.5, 5.0, 3), fixed, dist, 20_000, 17)
    for c in run_heatmap(grid):
        model = Egarch(**grid.cell_params(c.i, c.j)) if family == "egarch" else Vgarch(**grid.cell_params(c.i, c.j))
        ref = classify(model, dist, budget=grid.budget_per_cell, seed=grid.cell_seed(c.i, c.j))
        assert c.verdict == ref.estimate.verdict
        assert c.estimate == ref.estimate


def test_divergence_invertible_regime_collapses():
    (offset, path), = run_divergence(SimConfig(INV_E, standard_normal(), 100_000, 1), [1.0])
    assert offset == 1.0
    assert np.max(np.abs(path.d_or_zhat[90_000:])) < 1e-6


def test_divergence_noninvertible_persists():
    (_, small), (_, zero) = run_divergence(SimConfig(NONINV_E, standard_normal(), 100_000, 2), [1e-3, 0.0])
    assert np.max(np.abs(small.d_or_zhat[50_000:])) > 0.1
    assert np.all(zero.difference() == 0.0)


def test_divergence_rejects_garch_and_writes_csv():
    with pytest.raises(ConfigurationError):
        run_divergence(SimConfig(Garch(0.1, (0.1,), (0.8,)), standard_normal(), 10, 0), [0.1])
    res = run_divergence(SimConfig(Vgarch(0.1, 0.5, 0.3, 0.0), standard_normal(), 20, 0, record_every=5), [0.0, 0.5])
    lines = _csv(write_divergence_csv, res).splitlines()
    assert lines[0] == "offset,t,sigma2,sigma2hat,diff,diverged"
    assert len(lines) == 1 + 2 * 4
    assert lines[1].startswith("0.0,0,")
    assert lines[5].startswith("0.5,0,")


def test_lln_noninvertible_two_starts():
    reports = run_pair_lln(SimConfig(NONINV_E, standard_normal(), 100_000, 3), [0.5, 2.0], [0.05])
    assert reports[0].ks_vs_first_start == 0.0
    assert reports[1].ks_vs_first_start < 0.02
    for r in reports:
        assert r.frac_separated[(2, 0.05)] > 0.3
        assert 0 <= r.ks_halves <= 1 and 0 <= r.ks_sigma2 <= 1 and 0 <= r.ks_sigma2hat <= 1
        assert not r.diverged


def test_lln_invertible():
    reports = run_pair_lln(SimConfig(INV_E, standard_normal(), 100_000, 4), [0.5, 2.0], [0.01])
    for r in reports:
        assert r.frac_separated[(2, 0.01)] < 0.01


def test_lln_csv_layout():
    reports = run_pair_lln(SimConfig(INV_E, standard_normal(), 1000, 4), [0.5, 2.0], [0.01, 0.1])
    lines = _csv(write_lln_csv, reports).splitlines()
    assert lines[0] == "start,half,ks_d,mu,frac_separated"
    assert len(lines) == 1 + 2 * (2 * 2 + 1)
    assert lines[5].startswith("0.5,cross,")
    for line in lines[1:]:
        fields = line.split(",")
        if fields[1] != "cross":
            assert 0.0 <= float(fields[4]) <= 1.0


@pytest.mark.parametrize("beta1, s2", [(0.8, 3.0), (0.5, 0.01), (0.95, 10.0)])
def test_garch_separation_hits_zero_on_schedule(beta1, s2):
    m = Garch(0.1, (0.05,), (beta1,))
    mu = 1e-3
    path = simulate_coupled(SimConfig(m, standard_normal(), 2000, 5, init_value=s2))
    steps = garch_steps_to_within(s2, path.sigma2[0], beta1, mu)
    diff = np.abs(path.difference())
    assert frac_separated(path, mu, steps, None) == 0.0
    assert diff[steps - 1] > mu


def test_log_error_forms():
    p = simulate_coupled(SimConfig(Vgarch(0.1, 0.5, 0.3, 0.0), standard_normal(), 50, 0, init_value=2.0))
    assert np.allclose(log_error(p), np.log(p.sigma2hat / p.sigma2))


def test_ks_doubling_within_bootstrap_band():
    cfg = SimConfig(NONINV_E, standard_normal(), 50_000, 21, init_value=2.0)
    (short,) = run_pair_lln(cfg, [2.0], [0.05])
    (long_,) = run_pair_lln(cfg.with_(n_steps=100_000), [2.0], [0.05])
    d = log_error(simulate_coupled_coords(cfg.with_(init_mode="constant", init_value=2.0)))
    band = ks_halves_band(d, n_boot=100, block=500, seed=0)
    assert long_.ks_halves <= band
    assert short.ks_halves <= band


def test_lln_requires_start():
    with pytest.raises(ConfigurationError):
        run_pair_lln(SimConfig(INV_E, standard_normal(), 10, 0), [], [0.1])


def test_garch_steps_formula():
    assert garch_steps_to_within(1.0, 1.0, 0.5, 0.1) == 0
    assert garch_steps_to_within(2.0, 1.0, 0.5, 0.1) == math.ceil(math.log(0.1) / math.log(0.5))
