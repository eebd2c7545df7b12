"""Joint-distribution tests of the sampler on small synthetic problems.

Two simulators of ``(K_nonempty, A, gamma)`` must agree in distribution:

* marginal-conditional: hyperparameters and mixture from the prior, then
  events from the mixture;
* successive-conditional: alternate one Gibbs sweep with a fresh draw of the
  events given the current mixture.

The successive-conditional side is run as independent replicates: each round
starts from a marginal-conditional draw (an exact draw of the joint) and
records the state after ``steps`` sweep/regenerate cycles. Every round is then
an independent draw of the joint if the sampler is correct, so the two-sample
tests hold their nominal level, while a wrong kernel drifts away within a few
cycles.

The events are conditioned on their count, so the mass ``M`` drops out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .base_measures import BaseMeasure, Family
from .gibbs import HyperState, Strategy, sweep
from .mixture import MixtureState, break_sticks, relabel_by_appearance


@dataclass
class GewekeResult:
    marginal: np.ndarray
    successive: np.ndarray
    pvalues: dict

    COLUMNS = ("K_nonempty", "A", "gamma")


def _draw_labels(state: MixtureState, size: int, A: float, base: BaseMeasure,
                 rng: np.random.Generator) -> np.ndarray:
    """Cluster labels drawn from the full stick-breaking measure.

    Sticks are broken off the remainder only as far as the uniforms require.
    """
    u = rng.random(size)
    w_new, r = break_sticks(state.remainder, 1.0 - u.max(), A, rng)
    if w_new.size:
        state.weights = np.concatenate((state.weights, w_new))
        state.atoms = np.concatenate((state.atoms,
                                      np.atleast_1d(base.sample(rng, size=w_new.size))))
        state.remainder = r
    labels = np.searchsorted(np.cumsum(state.weights), u, side="right")
    return np.minimum(labels, state.k_star - 1)


def regenerate_events(state: MixtureState, size: int, A: float, base: BaseMeasure,
                      rng: np.random.Generator) -> np.ndarray:
    """Fresh events from the mixture; updates allocations in place."""
    labels = _draw_labels(state, size, A, base, rng)
    events = state.atoms[labels] * (1.0 - rng.random(size))
    order, state.alloc, _ = relabel_by_appearance(labels, state.k_star)
    state.weights = state.weights[order]
    state.atoms = state.atoms[order]
    return events


def prior_hyper(template: HyperState, rng: np.random.Generator) -> HyperState:
    h = HyperState(**vars(template))
    h.A = float(rng.gamma(h.a_A, 1.0 / h.b_A))
    if h.strategy is Strategy.HIERARCHICAL:
        h.gamma = float(rng.gamma(h.a_gamma, 1.0 / h.b_gamma))
    return h


def marginal_draw(template: HyperState, n_events: int, base: BaseMeasure,
                  rng: np.random.Generator):
    h = prior_hyper(template, rng)
    b = base.with_rate(h.gamma)
    state = MixtureState(np.empty(0), np.empty(0), 1.0, b.T)
    events = regenerate_events(state, n_events, h.A, b, rng)
    return h, b, state, events


def successive_draw(template: HyperState, n_events: int, base: BaseMeasure, steps: int,
                    rng: np.random.Generator, sweep_fn=sweep):
    h, b, state, events = marginal_draw(template, n_events, base, rng)
    for _ in range(steps):
        b, _, _ = sweep_fn(state, events, h, b, rng)
        events = regenerate_events(state, n_events, h.A, b, rng)
    return h, state


def geweke(n_rounds: int = 10_000, n_events: int = 20, steps: int = 10,
           template: HyperState | None = None, family: Family = Family.INV_SHIFTED_GAMMA,
           a: float = 2.0, T: float = 8.0, seed: int = 0, sweep_fn=sweep) -> GewekeResult:
    """Run both simulators and compare them with two-sample tests.

    ``K_nonempty`` is compared with a chi-square test on pooled counts, ``A``
    and ``gamma`` with two-sample KS tests. ``sweep_fn`` lets a test swap in a
    modified sweep.
    """
    if template is None:
        template = HyperState(a_A=1.0, b_A=1.0, a_gamma=2.0, b_gamma=2.0,
                              strategy=Strategy.HIERARCHICAL)
    base0 = BaseMeasure(family, template.gamma, a, T)
    ss = np.random.SeedSequence(seed)
    rng_m, rng_s = (np.random.Generator(np.random.Philox(s)) for s in ss.spawn(2))

    marg = np.empty((n_rounds, 3))
    succ = np.empty((n_rounds, 3))
    for i in range(n_rounds):
        h, _, state, _ = marginal_draw(template, n_events, base0, rng_m)
        marg[i] = state.k_nonempty, h.A, h.gamma
        h, state = successive_draw(template, n_events, base0, steps, rng_s, sweep_fn)
        succ[i] = state.k_nonempty, h.A, h.gamma

    pvalues = {"K_nonempty": _chi2_counts(marg[:, 0], succ[:, 0]),
               "A": float(stats.ks_2samp(marg[:, 1], succ[:, 1]).pvalue)}
    if template.strategy is Strategy.HIERARCHICAL:
        pvalues["gamma"] = float(stats.ks_2samp(marg[:, 2], succ[:, 2]).pvalue)
    return GewekeResult(marg, succ, pvalues)


def _chi2_counts(x, y, min_expected: float = 5.0) -> float:
    """Chi-square homogeneity test on integer samples, sparse tail pooled."""
    hi = int(max(x.max(), y.max()))
    cx = np.bincount(x.astype(int), minlength=hi + 1)
    cy = np.bincount(y.astype(int), minlength=hi + 1)
    table = np.vstack((cx, cy))
    table = table[:, table.sum(axis=0) > 0]
    # merge columns from the right until every expected count is large enough
    cols = []
    acc = np.zeros(2)
    for col in table.T[::-1]:
        acc = acc + col
        exp = acc.sum() * np.array([x.size, y.size]) / (x.size + y.size)
        if exp.min() >= min_expected:
            cols.append(acc)
            acc = np.zeros(2)
    if acc.sum() and cols:
        cols[-1] = cols[-1] + acc
    if len(cols) < 2:
        return 1.0
    return float(stats.chi2_contingency(np.array(cols).T)[1])
