"""Base measures for the mixing distribution of uniform kernels.

Two families on (0, T] are supported:

``TRUNCATED_GAMMA``
    Gamma(a, rate) restricted to [0, T].
``INV_SHIFTED_GAMMA``
    theta such that ``u = (1/theta - 1/T)**-1`` is Gamma(a, rate). Every
    computation goes through the monotone map ``u <-> theta``, so cdf,
    quantile and sampling are exact and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import special

# below this upper-tail mass the inverse-cdf route loses all precision
_TAIL_SWITCH = 1e-200


class Family(str, Enum):
    TRUNCATED_GAMMA = "TruncatedGamma"
    INV_SHIFTED_GAMMA = "InvShiftedGamma"


def _theta_to_u(theta, T):
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        return T * theta / (T - theta)


def _u_to_theta(u, T):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return T / (T / u + 1.0)


def log_gammaincc(a, x):
    """log Q(a, x), finite far beyond the point where Q underflows."""
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        out = np.log(special.gammaincc(a, x))
    deep = (out < -650.0) & np.isfinite(x)
    if deep.any():
        xd = x[deep]
        # modified Lentz evaluation of the continued fraction for Q
        tiny = 1e-300
        b = xd + 1.0 - a
        c = np.full_like(xd, 1.0 / tiny)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, 200):
            an = -i * (i - a)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < tiny, tiny, d)
            c = b + an / c
            c = np.where(np.abs(c) < tiny, tiny, c)
            d = 1.0 / d
            delta = d * c
            h = h * delta
            if np.all(np.abs(delta - 1.0) < 1e-15):
                break
        out[deep] = -xd + a * np.log(xd) - special.gammaln(a) + np.log(h)
    return out.reshape(shape)


def gammainccinv_log(a, logq):
    """Inverse of :func:`log_gammaincc` in its second argument."""
    shape = np.shape(logq)
    logq = np.atleast_1d(np.asarray(logq, dtype=float))
    out = special.gammainccinv(a, np.exp(logq))
    deep = logq < -650.0
    if deep.any():
        lq = logq[deep]
        x = -lq + (a - 1.0) * np.log(-lq) - special.gammaln(a)
        for _ in range(50):
            f = log_gammaincc(a, x) - lq
            dlog = -np.exp((a - 1.0) * np.log(x) - x - special.gammaln(a)
                           - log_gammaincc(a, x))
            step = f / dlog
            x = x - step
            if np.all(np.abs(step) < 1e-13 * x):
                break
        out[deep] = x
    return out.reshape(shape)


def _gamma_tail(x0, a, rng, upper=np.inf):
    """Exact draws from Gamma(a, 1) restricted to [x0, upper], for a >= 1.

    Exponential proposal with rate ``1 - (a - 1)/x0`` anchored at ``x0``; the
    acceptance ratio is maximal at ``x0`` so the envelope is tight.
    """
    x0 = np.asarray(x0, dtype=float)
    out = np.empty_like(x0)
    todo = np.arange(x0.size)
    while todo.size:
        lo = x0[todo]
        lam = 1.0 - (a - 1.0) / lo
        x = lo + rng.exponential(size=todo.size) / lam
        log_acc = (a - 1.0) * (np.log(x / lo) - (x - lo) / lo)
        ok = (np.log(rng.random(todo.size)) < log_acc) & (x <= upper)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


@dataclass(frozen=True)
class BaseMeasure:
    family: Family
    rate: float
    a: float = 2.0
    T: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.a > 1.0:
            raise ValueError(f"shape a must exceed 1, got {self.a}")
        if not self.rate > 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if not self.T > 0.0:
            raise ValueError(f"horizon must be positive, got {self.T}")

    def with_rate(self, rate: float) -> "BaseMeasure":
        return replace(self, rate=float(rate))

    def _check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(~(theta > 0.0)) or np.any(theta > self.T):
            raise ValueError(f"theta outside (0, {self.T}]")
        return theta

    # -- truncated gamma helpers -------------------------------------------
    @property
    def _norm(self) -> float:
        return float(special.gammainc(self.a, self.rate * self.T))

    def pdf(self, theta):
        theta = self._check_theta(theta)
        a, g, T = self.a, self.rate, self.T
        if self.family is Family.TRUNCATED_GAMMA:
            logp = (a * np.log(g) + (a - 1.0) * np.log(theta) - g * theta
                    - special.gammaln(a) - np.log(self._norm))
            return np.exp(logp)
        u = _theta_to_u(theta, T)
        with np.errstate(invalid="ignore", over="ignore"):
            logp = (a * np.log(g) + (a + 1.0) * np.log(u) - g * u
                    - special.gammaln(a) - 2.0 * np.log(theta))
        return np.where(np.isinf(u), 0.0, np.exp(logp))

    def cdf(self, theta):
        theta = self._check_theta(theta)
        if self.family is Family.TRUNCATED_GAMMA:
            return special.gammainc(self.a, self.rate * theta) / self._norm
        return special.gammainc(self.a, self.rate * _theta_to_u(theta, self.T))

    def sf(self, theta):
        """``1 - cdf(theta)`` computed without cancellation."""
        theta = self._check_theta(theta)
        if self.family is Family.TRUNCATED_GAMMA:
            q = (special.gammaincc(self.a, self.rate * theta)
                 - special.gammaincc(self.a, self.rate * self.T))
            return q / self._norm
        return special.gammaincc(self.a, self.rate * _theta_to_u(theta, self.T))

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(~((p >= 0.0) & (p <= 1.0))):
            raise ValueError("probability outside [0, 1]")
        a, g = self.a, self.rate
        if self.family is Family.TRUNCATED_GAMMA:
            target = p * self._norm
            upper = target > 0.5
            # complement in the upper half keeps precision near theta = T
            qc = special.gammaincc(a, g * self.T) + (1.0 - p) * self._norm
            x = np.where(upper, special.gammainccinv(a, np.minimum(qc, 1.0)),
                         special.gammaincinv(a, target))
            out = np.minimum(x / g, self.T)
            return out if out.ndim else float(out)
        x = np.where(p > 0.5, special.gammainccinv(a, 1.0 - p),
                     special.gammaincinv(a, p))
        out = _u_to_theta(x / g, self.T)
        return out if out.ndim else float(out)

    def isf(self, q):
        """Inverse of :meth:`sf`; use it where the cdf rounds to 1."""
        q = np.asarray(q, dtype=float)
        if np.any(~((q >= 0.0) & (q <= 1.0))):
            raise ValueError("probability outside [0, 1]")
        a, g = self.a, self.rate
        if self.family is Family.TRUNCATED_GAMMA:
            x = special.gammainccinv(a, special.gammaincc(a, g * self.T) + q * self._norm)
            out = np.minimum(x / g, self.T)
        else:
            out = _u_to_theta(special.gammainccinv(a, q) / g, self.T)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        if self.family is Family.INV_SHIFTED_GAMMA:
            u = rng.gamma(self.a, 1.0 / self.rate, size=size)
            out = _u_to_theta(u, self.T)
            return out if out.ndim else float(out)
        return self.quantile(rng.random(size))

    def sample_above(self, lower, rng: np.random.Generator):
        """One draw per entry of ``lower`` from the measure restricted to [lower, T]."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        if np.any(lower > self.T):
            raise ValueError("truncation point beyond the horizon")
        a, g, T = self.a, self.rate, self.T
        if self.family is Family.INV_SHIFTED_GAMMA:
            x0 = g * _theta_to_u(np.maximum(lower, 0.0), T)
            q0 = special.gammaincc(a, x0)
            x = np.empty_like(x0)
            inv = q0 > _TAIL_SWITCH
            if inv.any():
                x[inv] = special.gammainccinv(a, rng.random(inv.sum()) * q0[inv])
            tail = ~inv & np.isfinite(x0)
            if tail.any():
                x[tail] = _gamma_tail(x0[tail], a, rng)
            x[np.isinf(x0)] = np.inf
            theta = _u_to_theta(x / g, T)
        else:
            xl, xT = g * np.maximum(lower, 0.0), g * T
            ql = special.gammaincc(a, xl)
            mass = ql - special.gammaincc(a, xT)
            theta = np.full_like(lower, T)
            inv = mass > _TAIL_SWITCH
            if inv.any():
                v = rng.random(inv.sum())
                q = ql[inv] - v * mass[inv]
                p = special.gammainc(a, xl[inv]) + v * mass[inv]
                x = np.where(p < 0.5, special.gammaincinv(a, np.minimum(p, 1.0)),
                             special.gammainccinv(a, q))
                theta[inv] = x / g
            deep = ~inv & (lower < T)
            if deep.any():
                theta[deep] = _gamma_tail(xl[deep], a, rng, upper=xT) / g
        return np.clip(theta, lower, T)


def psi_transform(theta, G_from: BaseMeasure, G_to: BaseMeasure):
    """Quantile map sending draws of ``G_from`` to draws of ``G_to``."""
    if (G_from.family is not G_to.family or G_from.a != G_to.a
            or G_from.T != G_to.T):
        raise ValueError("prior transport needs the same family, shape and horizon")
    theta = G_from._check_theta(theta)
    g, gp, T = G_from.rate, G_to.rate, G_from.T
    if g == gp:
        return theta if theta.ndim else float(theta)
    if G_from.family is Family.INV_SHIFTED_GAMMA:
        out = T * g * theta / (gp * (T - theta) + g * theta)
        return out if np.ndim(out) else float(out)
    a = G_from.a
    P, Q = special.gammainc, special.gammaincc
    norm = P(a, g * T)
    p = P(a, g * theta) * P(a, gp * T) / norm
    # 1 - p as a sum of non-negative terms, in logs so deep tails survive
    lq_theta = log_gammaincc(a, g * theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_t1 = lq_theta + np.log1p(-np.exp(log_gammaincc(a, g * T) - lq_theta))
        log_t2 = np.log(P(a, g * theta)) + log_gammaincc(a, gp * T)
    logq = np.logaddexp(log_t1, log_t2) - np.log(norm)
    x = np.where(p < 0.5, special.gammaincinv(a, p), gammainccinv_log(a, logq))
    out = np.minimum(x / gp, T)
    return out if np.ndim(out) else float(out)
