import numpy as np
import pytest

from ebmono import gibbs
from ebmono.base_measures import BaseMeasure, Family
from ebmono.diagnostics import _chi2_counts, geweke, marginal_draw, regenerate_events
from ebmono.gibbs import HyperState, Strategy
from ebmono.mixture import MixtureState

G = BaseMeasure(Family.INV_SHIFTED_GAMMA, 1.0)


def weights_before_concentration(state, events, hyper, base, rng, n=None, zeta=1.0,
                                 max_proposals=10 ** 6):
    """Sweep with the Dirichlet weight draw placed before the update of A."""
    gibbs.update_slices(state, zeta, rng)
    gibbs.extend_sticks(state, hyper.A, base, rng)
    k_star = state.k_star
    gibbs.update_allocations(state, events, zeta, rng)
    state, stats = gibbs.update_nonempty_atoms(state, events, base, rng, max_proposals)
    represented = state.atoms.copy()
    gibbs.update_weights(state, hyper.A, rng)
    hyper.A = gibbs.update_concentration(hyper.A, state.k_nonempty, events.size,
                                         hyper.a_A, hyper.b_A, rng)
    hyper.gamma = gibbs.update_gamma(represented, base.a, base.T, hyper.a_gamma,
                                     hyper.b_gamma, rng)
    return base.with_rate(hyper.gamma), stats, k_star


def test_regenerated_events_are_feasible(rng):
    for _ in range(200):
        h, b, state, events = marginal_draw(HyperState.hierarchical(2.0, 2.0, a_A=1.0, b_A=1.0),
                                            20, G, rng)
        assert events.size == 20
        assert np.all(events <= state.atoms[state.alloc])
        assert np.array_equal(np.unique(state.alloc), np.arange(state.k_nonempty))
        first = [int(np.flatnonzero(state.alloc == k)[0]) for k in range(state.k_nonempty)]
        assert first == sorted(first)


def test_regenerated_labels_follow_weights(rng):
    counts = np.zeros(3)
    for _ in range(3000):
        s = MixtureState(np.array([0.5, 0.3]), np.array([1.0, 2.0]), 0.2, 8.0)
        regenerate_events(s, 1, 1.0, G, rng)
        a = s.atoms[s.alloc[0]]
        counts[0 if a == 1.0 else 1 if a == 2.0 else 2] += 1
    assert np.allclose(counts / counts.sum(), [0.5, 0.3, 0.2], atol=0.03)


def test_chi2_pooling():
    x = np.array([1] * 50 + [2] * 50 + [9])
    assert _chi2_counts(x, x) == pytest.approx(1.0)
    assert _chi2_counts(np.ones(10), np.ones(10)) == 1.0


def test_geweke_smoke():
    res = geweke(n_rounds=1500, steps=5, seed=11)
    assert set(res.pvalues) == {"K_nonempty", "A", "gamma"}
    assert min(res.pvalues.values()) > 1e-3


def test_geweke_fixed_rate_truncated_family():
    template = HyperState(gamma=0.5, a_A=1.0, b_A=1.0)
    res = geweke(n_rounds=1500, steps=5, template=template, family=Family.TRUNCATED_GAMMA, seed=5)
    assert "gamma" not in res.pvalues
    assert min(res.pvalues.values()) > 1e-3


@pytest.mark.slow
def test_geweke_detects_weights_before_concentration():
    res = geweke(n_rounds=10_000, steps=10, seed=0, sweep_fn=weights_before_concentration)
    assert min(res.pvalues.values()) < 1e-3
