import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from objlab.mixturefit import (
    STD_FLOOR,
    GaussianMixtureParams,
    GridInadequateError,
    QuadratureGrid,
    default_init,
    desire_fig1,
    desire_mode,
    divergence_loss,
    evidence_loss,
    gradient,
    loss,
    optimize,
    refined_kl,
)

# High-precision references computed independently with mpmath quadrature.
DENSITY_AT_4 = 0.317607489458489010
KL_UNIT_VS_DESIRE = 0.59132062551575782
CE_UNIT_VS_DESIRE = 2.01025915872043056
CE_UNIT_VS_UNNORMALIZED = 1.31711197816048525
DESIRE_ENTROPY = 1.79576025805317527
DESIRE_MODE = 3.99137219051144865
NEG_LOG_DESIRE_AT_MODE = 1.14684869021941060

GRID = QuadratureGrid()


def _gauss(mu, var):
    return GaussianMixtureParams.from_moments([1.0], [mu], [var])


def _random_params(rng, k=2):
    return GaussianMixtureParams(rng.normal(size=k), rng.uniform(-1, 6, size=k), rng.uniform(-1.0, 0.5, size=k))


class TestDensity:
    def test_value_at_4(self):
        assert desire_fig1().density(np.array([4.0]))[0] == pytest.approx(DENSITY_AT_4, abs=1e-14)

    def test_unnormalized_doubles(self):
        o = np.linspace(-2, 7, 11)
        np.testing.assert_allclose(desire_fig1(unnormalized=True).density(o), 2 * desire_fig1().density(o), rtol=1e-14)

    def test_integrates_to_one(self):
        assert GRID.integrate(desire_fig1().density(GRID.points)) == pytest.approx(1.0, abs=1e-9)

    def test_entropy(self):
        p = desire_fig1().density(GRID.points)
        assert -GRID.integrate(p * np.log(p)) == pytest.approx(DESIRE_ENTROPY, abs=1e-8)

    def test_mode(self):
        mode = desire_mode(desire_fig1())
        assert mode == pytest.approx(DESIRE_MODE, abs=GRID.spacing)
        assert -math.log(desire_fig1().density(np.array([DESIRE_MODE]))[0]) == pytest.approx(NEG_LOG_DESIRE_AT_MODE, abs=1e-13)

    def test_mass_between(self):
        assert _gauss(0.0, 1.0).mass_between(-1.96, 1.96) == pytest.approx(0.9500042097, abs=1e-9)

    def test_vector_roundtrip(self):
        p = _random_params(np.random.default_rng(0), 3)
        q = GaussianMixtureParams.from_vector(p.as_vector())
        np.testing.assert_array_equal(q.as_vector(), p.as_vector())

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            GaussianMixtureParams([0.0], [1.0, 2.0], [0.0])


class TestLosses:
    def test_divergence(self):
        assert divergence_loss(_gauss(1.0, 1.0), desire_fig1(), GRID) == pytest.approx(KL_UNIT_VS_DESIRE, abs=1e-9)

    def test_evidence_normalized(self):
        assert evidence_loss(_gauss(1.0, 1.0), desire_fig1(), GRID) == pytest.approx(CE_UNIT_VS_DESIRE, abs=1e-9)

    def test_evidence_unnormalized(self):
        value = evidence_loss(_gauss(1.0, 1.0), desire_fig1(unnormalized=True), GRID)
        assert value == pytest.approx(CE_UNIT_VS_UNNORMALIZED, abs=1e-9)
        normalized = evidence_loss(_gauss(1.0, 1.0), desire_fig1(), GRID)
        assert normalized - value == pytest.approx(math.log(2), abs=1e-12)

    def test_refined_matches_grid(self):
        p = _gauss(1.0, 1.0)
        assert refined_kl(p, desire_fig1()) == pytest.approx(KL_UNIT_VS_DESIRE, abs=1e-9)

    def test_zero_at_desire(self):
        assert divergence_loss(desire_fig1(), desire_fig1(), GRID) == pytest.approx(0.0, abs=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            loss("squared", _gauss(0, 1), desire_fig1(), GRID)

    @given(st.floats(-2.0, 2.0))
    def test_translation_invariance(self, shift):
        p, d = _random_params(np.random.default_rng(1)), desire_fig1()
        moved = GaussianMixtureParams(p.logits, p.means + shift, p.log_stds)
        d_moved = GaussianMixtureParams(d.logits, d.means + shift, d.log_stds)
        g_moved = QuadratureGrid(GRID.lo + shift, GRID.hi + shift, GRID.n_points)
        for kind in ("evidence", "divergence"):
            assert loss(kind, moved, d_moved, g_moved) == pytest.approx(loss(kind, p, d, GRID), abs=1e-9)

    def test_grid_inadequate(self):
        with pytest.raises(GridInadequateError):
            QuadratureGrid(0.0, 3.0, 500).check_adequate(desire_fig1())

    @pytest.mark.parametrize("kwargs", [dict(n_points=1), dict(lo=1.0, hi=0.0), dict(rule="simpson")])
    def test_grid_validation(self, kwargs):
        with pytest.raises(ValueError):
            QuadratureGrid(**kwargs)


class TestGradient:
    @pytest.mark.parametrize("kind", ["evidence", "divergence"])
    def test_finite_differences(self, kind):
        rng = np.random.default_rng(2)
        desire = desire_fig1(unnormalized=(kind == "evidence"))
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            p = _random_params(rng)
            vec = p.as_vector()
            g = gradient(kind, p, desire, GRID)
            fd = np.empty_like(vec)
            for i in range(vec.size):
                e = np.zeros_like(vec)
                e[i] = h
                fd[i] = (loss(kind, GaussianMixtureParams.from_vector(vec + e), desire, GRID) - loss(kind, GaussianMixtureParams.from_vector(vec - e), desire, GRID)) / (2 * h)
            worst = max(worst, np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-8))
        assert worst < 1e-4

    def test_stationary_at_desire(self):
        assert np.max(np.abs(gradient("divergence", desire_fig1(), desire_fig1(), GRID))) < 1e-8

    def test_mean_pulled_toward_mode(self):
        g = gradient("evidence", _gauss(3.0, 0.5), desire_fig1(), GRID)
        assert g[1] < 0  # descending raises the mean toward 4

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gradient("other", _gauss(0, 1), desire_fig1(), GRID)


class TestOptimize:
    def test_zero_steps(self):
        tr = optimize("divergence", default_init(), steps=0)
        assert len(tr.params) == 1
        np.testing.assert_array_equal(tr.final.as_vector(), default_init().as_vector())

    @pytest.mark.parametrize("kind", ["evidence", "divergence"])
    def test_losses_non_increasing(self, kind):
        tr = optimize(kind, default_init(), steps=200, record_every=1)
        assert np.all(np.diff(tr.losses) <= 0.0)

    def test_evidence_stds_collapse(self):
        tr = optimize("evidence", default_init(), steps=500, record_every=50)
        mins = [p.stds.min() for p in tr.params]
        assert all(b <= a for a, b in zip(mins, mins[1:]))
        assert tr.final.stds.min() < 0.05
        assert tr.final.stds.min() >= GRID.std_floor

    def test_divergence_converges(self):
        tr = optimize("divergence", default_init(), steps=300, record_every=300)
        assert refined_kl(tr.final, desire_fig1()) < 1e-6

    def test_plain_descent_finds_local_mode(self):
        """Without per-coordinate scaling the evidence fit settles on the mode at 1."""
        tr = optimize("evidence", default_init(), steps=500, record_every=500, optimizer="gd")
        final = tr.final
        heavy = int(np.argmax(final.weights))
        assert final.weights[heavy] > 0.8
        assert final.means[heavy] == pytest.approx(1.0, abs=0.05)

    @pytest.mark.parametrize("kwargs", [dict(steps=-1), dict(learning_rate=0.0), dict(optimizer="sgd")])
    def test_argument_validation(self, kwargs):
        with pytest.raises(ValueError):
            optimize("divergence", default_init(), **kwargs)

    def test_init_must_fit_grid(self):
        with pytest.raises(GridInadequateError):
            optimize("divergence", _gauss(30.0, 1.0), steps=1)

    def test_default_grid_floor(self):
        assert GRID.std_floor == pytest.approx(GRID.spacing)
        assert QuadratureGrid(n_points=40_000).std_floor == STD_FLOOR

    @pytest.mark.xfail(strict=True, reason="the default grid cannot resolve stds below its spacing (about 4.25e-3)")
    def test_default_grid_reaches_nominal_floor(self):
        assert GRID.std_floor <= STD_FLOOR
