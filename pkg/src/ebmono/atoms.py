"""Exact draws of cluster atoms from ``g(theta) * theta**-n`` on ``[wmax, T]``.

The primary route is plain accept-reject: propose from the base measure
restricted to ``[wmax, T]`` and accept with probability ``(wmax/theta)**n``.
Its acceptance rate collapses when ``wmax`` is small and ``n`` is large, so
clusters still pending after a short budget switch to an adaptive rejection
sampler on a log scale. Conditionally on the first stage failing, the second
stage is an independent exact sampler, so the composite draw is exact.

Envelope construction. With ``z = logit(theta/T)`` (inverse-shifted gamma) or
``z = log(theta)`` (truncated gamma) the log target reads

    phi(z) = alpha*z + beta*softplus(z) - c*exp(z)

a linear, a convex and a concave term. On a piece ``[l, r]`` the chord of the
convex term and a tangent of the concave term give a linear upper bound, so
the envelope is piecewise exponential. Rejected points refine the envelope.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .base_measures import BaseMeasure, Family

PLAIN_BUDGET = 64
MAX_KNOTS = 256


class AcceptRejectStall(RuntimeError):
    pass


def _log_piece_mass(q, width):
    """log of the integral of ``exp(q x)`` over ``[0, width]`` (width may be inf)."""
    q = np.asarray(q, dtype=float)
    width = np.asarray(width, dtype=float)
    out = np.empty(np.broadcast(q, width).shape)
    q, width = np.broadcast_arrays(q, width)
    qw = q * width
    small = np.isfinite(width) & (np.abs(qw) < 1e-10)
    pos = ~small & (q > 0.0)
    neg = ~small & ~pos
    out[small] = np.log(width[small]) + 0.5 * qw[small]
    out[pos] = qw[pos] + np.log(-np.expm1(-qw[pos])) - np.log(q[pos])
    with np.errstate(invalid="ignore"):
        tail = np.where(np.isinf(width[neg]), 0.0, np.log(-np.expm1(qw[neg])))
    out[neg] = tail - np.log(-q[neg])
    return out


def _sample_piece(q, width, u):
    """Inverse-cdf draw from density ``exp(q x)`` on ``[0, width]``."""
    if np.isinf(width):
        return -np.log1p(-u) / -q
    qw = q * width
    if abs(qw) < 1e-10:
        return u * width
    if q < 0.0:
        return np.log1p(u * np.expm1(qw)) / q
    return width - np.log1p(u * np.expm1(-qw)) / -q


class _Envelope:
    def __init__(self, alpha, beta, c, z0, zmax, knots):
        self.alpha, self.beta, self.c = alpha, beta, c
        self.z0, self.zmax = z0, zmax
        self.knots = np.asarray(knots, dtype=float)
        self._build()

    def phi(self, z):
        return self.alpha * z + self.beta * np.logaddexp(0.0, z) - self.c * np.exp(z)

    def _build(self):
        k = self.knots
        lo = k
        hi = np.append(k[1:], self.zmax)
        width = hi - lo
        sp_lo = np.logaddexp(0.0, lo)
        with np.errstate(invalid="ignore"):
            chord = np.where(np.isfinite(hi), (np.logaddexp(0.0, hi) - sp_lo) / width, 1.0)
        mid = np.where(np.isfinite(hi), 0.5 * (lo + hi), lo)
        em = self.c * np.exp(mid)
        slope = self.alpha + self.beta * chord - em
        # value of the linear bound at the left end of each piece
        left = self.alpha * lo + self.beta * sp_lo - em * (1.0 + lo - mid)
        self.lo, self.width, self.slope, self.left = lo, width, slope, left
        self.mid, self.chord = mid, chord
        logm = left + _log_piece_mass(slope, width)
        self.logm = logm
        self.prob = np.exp(logm - logm.max())
        self.prob /= self.prob.sum()

    def draw(self, rng):
        j = rng.choice(self.prob.size, p=self.prob)
        x = _sample_piece(self.slope[j], self.width[j], rng.random())
        z = self.lo[j] + x
        return z, self.left[j] + self.slope[j] * x

    def insert(self, z):
        if self.knots.size < MAX_KNOTS and np.isfinite(z) and z > self.z0:
            self.knots = np.unique(np.append(self.knots, z))
            self._build()


def _envelope_for(base: BaseMeasure, wmax: float, n: float) -> tuple[_Envelope, callable]:
    a, g, T = base.a, base.rate, base.T
    if base.family is Family.INV_SHIFTED_GAMMA:
        alpha, beta, c = a - n, n, g * T
        z0, zmax = float(special.logit(wmax / T)), np.inf
        to_theta = lambda z: T * special.expit(z)
    else:
        alpha, beta, c = a - n, 0.0, g
        z0, zmax = float(np.log(wmax)), float(np.log(T))
        to_theta = np.exp
    # geometric spacing away from z0, where the mass concentrates for large n
    knots = [z0]
    step = 1.0 / (n + 1.0)
    z_end = zmax if np.isfinite(zmax) else max(z0, np.log((a + 2.0) / c)) + 1.0
    while knots[-1] + step < z_end:
        knots.append(knots[-1] + step)
        step = min(2.0 * step, 0.5)
        if len(knots) > MAX_KNOTS // 2:
            break
    if np.isinf(zmax):
        # the tail piece needs a decreasing bound: a - c*exp(z) < 0
        knots.append(max(knots[-1] + 1e-9, np.log((a + 2.0) / c)))
    return _Envelope(alpha, beta, c, z0, zmax, np.unique(knots)), to_theta


def draw_atom_envelope(base: BaseMeasure, wmax: float, n: float, rng: np.random.Generator,
                       max_iter: int = 100_000) -> tuple[float, int]:
    """Adaptive-envelope rejection draw; returns ``(theta, proposals)``."""
    if not 0.0 < wmax < base.T:
        raise ValueError("need 0 < wmax < T")
    env, to_theta = _envelope_for(base, wmax, n)
    for it in range(1, max_iter + 1):
        z, bound = env.draw(rng)
        if np.log(rng.random()) < env.phi(z) - bound:
            return float(min(max(to_theta(z), wmax), base.T)), it
        env.insert(z)
    raise AcceptRejectStall(f"envelope sampler did not accept in {max_iter} proposals "
                            f"(wmax={wmax:.6g}, n_k={int(n)}, rate={base.rate:.6g})")


def draw_atoms(base: BaseMeasure, wmax, counts, rng: np.random.Generator,
               max_proposals: int = 10 ** 6, plain_budget: int = PLAIN_BUDGET):
    """Exact draws from ``g(theta) theta**-n_k`` on ``[wmax_k, T]``, one per cluster.

    Returns the atoms and the number of proposals spent on each.
    """
    wmax = np.atleast_1d(np.asarray(wmax, dtype=float))
    counts = np.atleast_1d(np.asarray(counts, dtype=float))
    if np.any(wmax <= 0.0):
        raise ValueError("non-empty cluster whose largest event is not positive")
    out = np.full(wmax.size, base.T)
    spent = np.zeros(wmax.size, dtype=np.int64)
    spent[wmax >= base.T] = 1
    pending = np.flatnonzero(wmax < base.T)
    batch = 4
    while pending.size and batch <= plain_budget:
        lower = np.repeat(wmax[pending], batch)
        theta = base.sample_above(lower, rng).reshape(pending.size, batch)
        log_acc = counts[pending, None] * np.log(wmax[pending, None] / theta)
        acc = np.log(rng.random(theta.shape)) < log_acc
        hit = acc.any(axis=1)
        first = acc.argmax(axis=1)
        spent[pending] += np.where(hit, first + 1, batch)
        out[pending[hit]] = theta[hit, first[hit]]
        pending = pending[~hit]
        batch *= 4
    for k in pending:
        budget = max(max_proposals - int(spent[k]), 1)
        out[k], used = draw_atom_envelope(base, wmax[k], counts[k], rng, budget)
        spent[k] += used
    return out, spent
