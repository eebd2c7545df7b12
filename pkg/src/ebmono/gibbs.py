"""Slice-sampler Gibbs algorithm for Dirichlet process mixtures of uniforms.

One sweep updates, in order: slice variables, represented sticks and their
atoms, allocations, the concentration ``A``, non-empty atoms (exact
accept-reject), weights and remainder (Dirichlet), the base rate ``gamma``
(hierarchical strategy only) and the total mass ``M``.

``A`` is drawn from its conditional given the allocations with the weights
integrated out, so it has to come before the Dirichlet weight update; the
other order pairs the remainder stick with a stale ``A``.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .atoms import AcceptRejectStall, draw_atoms
from .base_measures import BaseMeasure, Family, _theta_to_u
from .mixture import MixtureState, break_sticks, mixture_eval, relabel_by_appearance
from .point_process import make_rng

log = logging.getLogger(__name__)

GRID_POINTS = 4096
MAX_PROPOSALS = 10 ** 6


class Strategy(str, Enum):
    EMPIRICAL_BAYES = "EmpiricalBayes"
    FIXED_GAMMA = "FixedGamma"
    HIERARCHICAL = "Hierarchical"


class ChainError(RuntimeError):
    pass


@dataclass
class HyperState:
    A: float = 10.0
    gamma: float = 1.0
    M: float = 1.0
    a_A: float = 0.1
    b_A: float = 0.1
    a_gamma: float = 1.0
    b_gamma: float = 1.0
    a_M: float = 0.1
    b_M: float = 0.1
    strategy: Strategy = Strategy.EMPIRICAL_BAYES

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        for name in ("A", "gamma", "M", "a_A", "b_A", "a_gamma", "b_gamma", "a_M", "b_M"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def hierarchical(cls, a_gamma: float, b_gamma: float, **kw) -> "HyperState":
        return cls(gamma=a_gamma / b_gamma, a_gamma=a_gamma, b_gamma=b_gamma,
                   strategy=Strategy.HIERARCHICAL, **kw)


@dataclass
class ChainConfig:
    n_iter: int = 5000
    burn_in: int = 2500
    thin: int = 1
    zeta: float = 1.0
    seed: int = 0
    record_grid: np.ndarray | None = None
    max_proposals: int = MAX_PROPOSALS
    audit: bool = False

    def __post_init__(self):
        if self.n_iter < 0 or not 0 <= self.burn_in <= self.n_iter:
            raise ValueError("need 0 <= burn_in <= n_iter")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not 0.0 < self.zeta <= 1.0:
            raise ValueError("zeta must lie in (0, 1]")

    def grid_for(self, T: float) -> np.ndarray:
        if self.record_grid is None:
            return np.linspace(0.0, T, GRID_POINTS)
        return np.asarray(self.record_grid, dtype=float)


@dataclass
class ARStats:
    proposals: int = 0
    accepted: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 1.0


@dataclass
class ChainTrace:
    grid: np.ndarray
    sweep: list = field(default_factory=list)
    k_star: list = field(default_factory=list)
    k_nonempty: list = field(default_factory=list)
    A: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    M: list = field(default_factory=list)
    ar_rate: list = field(default_factory=list)
    draws: list = field(default_factory=list)
    wall_time: float = 0.0

    COLUMNS = ("sweep", "K_star", "K_nonempty", "A", "gamma", "M", "ar_accept_rate")

    def __len__(self):
        return len(self.sweep)

    @property
    def lambda_grid(self) -> np.ndarray:
        if not self.draws:
            return np.empty((0, self.grid.size))
        return np.vstack(self.draws)

    def rows(self):
        return zip(self.sweep, self.k_star, self.k_nonempty, self.A, self.gamma,
                   self.M, self.ar_rate)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.COLUMNS)
            for s, ks, kn, A, g, M, ar in self.rows():
                wr.writerow([s, ks, kn, repr(A), repr(g), repr(M), repr(ar)])

    def grid_to_csv(self, path, fmt: str = "%.8g") -> None:
        header = ",".join(f"{t:.10g}" for t in self.grid)
        np.savetxt(path, self.lambda_grid, fmt=fmt, delimiter=",", header=header,
                   comments="")


# -- single conditional updates ---------------------------------------------

def update_slices(state: MixtureState, zeta: float, rng: np.random.Generator) -> MixtureState:
    cap = np.minimum(state.weights[state.alloc], zeta)
    state.slices = cap * rng.random(cap.size)
    return state


def extend_sticks(state: MixtureState, A: float, base: BaseMeasure,
                  rng: np.random.Generator) -> MixtureState:
    """Represent every stick that some slice variable can reach."""
    u_star = float(state.slices.min()) if state.slices.size else 1.0
    if u_star < 1e-300:
        raise ChainError(f"degenerate slice variable u* = {u_star:g}")
    w_new, r = break_sticks(state.remainder, u_star, A, rng)
    if w_new.size:
        atoms_new = np.atleast_1d(base.sample(rng, size=w_new.size))
        state.weights = np.concatenate((state.weights, w_new))
        state.atoms = np.concatenate((state.atoms, atoms_new))
        state.remainder = r
    return state


def allocation_probabilities(state: MixtureState, events: np.ndarray, zeta: float) -> np.ndarray:
    """Unnormalized allocation weights, one row per event."""
    w, theta = state.weights, state.atoms
    cap = np.minimum(w, zeta)
    elig = (events[:, None] <= theta[None, :]) & (state.slices[:, None] < cap[None, :])
    return np.where(elig, (w / cap / theta)[None, :], 0.0)


def eligible_pairs(state: MixtureState, events: np.ndarray, zeta: float):
    """Sparse form of :func:`allocation_probabilities`.

    Returns ``(event_idx, cluster_idx, weight)`` for the positive entries,
    grouped by event in increasing order. Clusters are scanned in decreasing
    order of their slice cap, so each event's candidates form a prefix.
    """
    w, theta = state.weights, state.atoms
    cap = np.minimum(w, zeta)
    by_cap = np.argsort(-cap, kind="stable")
    m = np.searchsorted(-cap[by_cap], -state.slices, side="left")
    ev = np.repeat(np.arange(events.size), m)
    starts = np.cumsum(m) - m
    rank = np.arange(ev.size) - np.repeat(starts, m)
    cl = by_cap[rank]
    ok = events[ev] <= theta[cl]
    ev, cl = ev[ok], cl[ok]
    return ev, cl, (w / cap / theta)[cl]


def update_allocations(state: MixtureState, events: np.ndarray, zeta: float,
                       rng: np.random.Generator) -> MixtureState:
    ev, cl, p = eligible_pairs(state, events, zeta)
    n_ev = events.size
    size = np.bincount(ev, minlength=n_ev)
    if np.any(size == 0):
        i = int(np.flatnonzero(size == 0)[0])
        raise ChainError(f"slice produced empty support for event {i}")
    end = np.cumsum(size)
    start = end - size
    cum = np.cumsum(p)
    base = np.where(start > 0, cum[np.maximum(start - 1, 0)], 0.0)
    tot = cum[end - 1] - base
    target = base + rng.random(n_ev) * tot
    pos = np.searchsorted(cum, target, side="right")
    pos = np.clip(pos, start, end - 1)
    alloc = cl[pos]
    order, state.alloc, _ = relabel_by_appearance(alloc, state.k_star)
    state.weights = state.weights[order]
    state.atoms = state.atoms[order]
    return state


def update_nonempty_atoms(state: MixtureState, events: np.ndarray, base: BaseMeasure,
                          rng: np.random.Generator, max_proposals: int = MAX_PROPOSALS):
    k = state.k_nonempty
    counts = np.bincount(state.alloc, minlength=k)[:k]
    wmax = np.zeros(k)
    np.maximum.at(wmax, state.alloc, events)
    theta, spent = draw_atoms(base, wmax, counts, rng, max_proposals)
    state.atoms = state.atoms.copy()
    state.atoms[:k] = theta
    return state, ARStats(int(spent.sum()), k)


def update_weights(state: MixtureState, A: float, rng: np.random.Generator) -> MixtureState:
    """Dirichlet(n_1, ..., n_K, A) for the non-empty weights and the remainder.

    Empty represented clusters are dropped.
    """
    k = state.k_nonempty
    counts = np.bincount(state.alloc, minlength=k)[:k].astype(float)
    g = rng.standard_gamma(np.append(counts, A))
    g /= g.sum()
    state.weights = g[:k]
    state.remainder = max(1.0 - g[:k].sum(), 0.0)
    state.atoms = state.atoms[:k]
    return state


def west_mixture_prob(x: float, k: int, n_obs: int, a_A: float, b_A: float) -> float:
    """Weight of the Gamma(a_A + k, .) component given the auxiliary ``x``."""
    odds = (a_A + k - 1.0) / (n_obs * (b_A - np.log(x)))
    return odds / (1.0 + odds)


def update_concentration(A: float, k: int, n_obs: int, a_A: float, b_A: float,
                         rng: np.random.Generator) -> float:
    """Auxiliary-variable update of the DP concentration under a Gamma prior."""
    x = rng.beta(A + 1.0, n_obs)
    pi = west_mixture_prob(x, k, n_obs, a_A, b_A)
    shape = a_A + k if rng.random() < pi else a_A + k - 1.0
    return float(rng.gamma(shape, 1.0 / (b_A - np.log(x))))


def update_gamma(atoms, a: float, T: float, a_gamma: float, b_gamma: float,
                 rng: np.random.Generator, family: Family = Family.INV_SHIFTED_GAMMA) -> float:
    """Conjugate draw of the base rate given every represented atom."""
    if Family(family) is not Family.INV_SHIFTED_GAMMA:
        raise NotImplementedError("no conjugate rate update for the truncated gamma family")
    atoms = np.asarray(atoms, dtype=float)
    if np.any(atoms >= T):
        raise ChainError("atom at the horizon gives an infinite rate")
    shape = a_gamma + a * atoms.size
    rate = b_gamma + _theta_to_u(atoms, T).sum()
    return float(rng.gamma(shape, 1.0 / rate))


def update_mass(n_events: int, n: int, a_M: float, b_M: float,
                rng: np.random.Generator) -> float:
    return float(rng.gamma(a_M + n_events, 1.0 / (b_M + n)))


# -- orchestration -----------------------------------------------------------

def initial_state(events: np.ndarray, A: float, base: BaseMeasure,
                  rng: np.random.Generator, max_proposals: int = MAX_PROPOSALS) -> MixtureState:
    """One cluster per event, atoms and weights from their full conditionals."""
    n_ev = events.size
    state = MixtureState(np.empty(n_ev), np.empty(n_ev), 0.0, base.T,
                         np.arange(n_ev, dtype=np.intp))
    state, _ = update_nonempty_atoms(state, events, base, rng, max_proposals)
    return update_weights(state, A, rng)


def sweep(state: MixtureState, events: np.ndarray, hyper: HyperState, base: BaseMeasure,
          rng: np.random.Generator, n: int | None = None, zeta: float = 1.0,
          max_proposals: int = MAX_PROPOSALS):
    """One full Gibbs sweep; mutates ``state`` and ``hyper``.

    Returns ``(base, stats, k_star)``: ``base`` carries the current rate and
    ``k_star`` is the number of represented clusters after stick extension.
    """
    update_slices(state, zeta, rng)
    extend_sticks(state, hyper.A, base, rng)
    k_star = state.k_star
    update_allocations(state, events, zeta, rng)
    hyper.A = update_concentration(hyper.A, state.k_nonempty, events.size,
                                   hyper.a_A, hyper.b_A, rng)
    state, stats = update_nonempty_atoms(state, events, base, rng, max_proposals)
    represented = state.atoms.copy()
    update_weights(state, hyper.A, rng)
    if hyper.strategy is Strategy.HIERARCHICAL:
        hyper.gamma = update_gamma(represented, base.a, base.T, hyper.a_gamma,
                                   hyper.b_gamma, rng, base.family)
        base = base.with_rate(hyper.gamma)
    if n is not None:
        hyper.M = update_mass(events.size, n, hyper.a_M, hyper.b_M, rng)
    return base, stats, k_star


def run_chain(events, n: int, config: ChainConfig, hyper: HyperState,
              base: BaseMeasure, init: MixtureState | None = None) -> ChainTrace:
    """Run the sampler and keep thinned post-burn-in draws of the normalized intensity."""
    events = np.asarray(getattr(events, "events", events), dtype=float)
    if events.size == 0:
        raise ValueError("cannot fit an empty sample")
    hyper = HyperState(**vars(hyper))
    base = base.with_rate(hyper.gamma)
    rng = make_rng(config.seed)
    grid = config.grid_for(base.T)
    trace = ChainTrace(grid)
    t0 = time.perf_counter()
    state = init.copy() if init is not None else initial_state(
        events, hyper.A, base, rng, config.max_proposals)
    for it in range(1, config.n_iter + 1):
        try:
            base, stats, k_star = sweep(state, events, hyper, base, rng, n,
                                        config.zeta, config.max_proposals)
            if config.audit:
                state.audit(events)
        except Exception as exc:
            raise ChainError(f"sweep {it}: {exc}") from exc
        if it > config.burn_in and (it - config.burn_in - 1) % config.thin == 0:
            trace.sweep.append(it)
            trace.k_star.append(k_star)
            trace.k_nonempty.append(state.k_nonempty)
            trace.A.append(hyper.A)
            trace.gamma.append(hyper.gamma)
            trace.M.append(hyper.M)
            trace.ar_rate.append(stats.rate)
            trace.draws.append(mixture_eval(state.weights, state.atoms, grid))
        if it % 1000 == 0:
            log.debug("sweep %d: K*=%d K=%d A=%.3g gamma=%.4g", it, k_star,
                      state.k_nonempty, hyper.A, hyper.gamma)
    trace.wall_time = time.perf_counter() - t0
    trace.final_state = state
    return trace
