"""Calibration of the base-measure rate from the mean event time.

``psi(gamma)`` is the prior-predictive mean event time when the mixing
distribution is the inverse-shifted gamma base measure: a uniform kernel on
(0, theta) has mean theta / 2, so ``psi(gamma) = E[theta] / 2`` with
``theta = 1 / (1/u + 1/T)`` and ``u ~ Gamma(a, rate=gamma)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .base_measures import Family
from .intensities import TruthIntensity, TruthId, truth


class CalibrationError(ValueError):
    pass


class CalibrationWarning(UserWarning):
    pass


def _check_family(family) -> None:
    if Family(getattr(family, "family", family)) is not Family.INV_SHIFTED_GAMMA:
        raise NotImplementedError(
            "rate calibration is only available for the inverse-shifted gamma family")


def psi(gamma: float, a: float = 2.0, T: float = 8.0,
        family: Family = Family.INV_SHIFTED_GAMMA) -> float:
    """Expected mean event time under the prior with base rate ``gamma``.

    Integrates over ``x = gamma * u ~ Gamma(a, 1)``, where the integrand
    ``T x / (T gamma + x)`` is bounded and smooth.
    """
    _check_family(family)
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    c = T * gamma
    lg = special.gammaln(a)

    def integrand(x):
        return T * x / (c + x) * math.exp((a - 1.0) * math.log(x) - x - lg)

    # split at the kernel's knee and at the gamma bulk
    knots = sorted({min(c, 1e3), a})
    pieces = [0.0] + [k for k in knots if k > 0.0]
    total = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        total += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    total += integrate.quad(integrand, pieces[-1], np.inf, epsabs=0.0,
                            epsrel=1e-12, limit=200)[0]
    return 0.5 * total


def psi_closed_form(gamma: float, a: float = 2.0, T: float = 8.0) -> float:
    """``psi`` through the confluent hypergeometric function U(a, a, T*gamma)."""
    c = T * gamma
    return 0.5 * T * (1.0 - c ** a * special.hyperu(a, a, c))


def psi_inverse(target: float, a: float = 2.0, T: float = 8.0,
                family: Family = Family.INV_SHIFTED_GAMMA) -> float:
    """Rate whose prior mean event time equals ``target``."""
    _check_family(family)
    if not 0.0 < target < T / 2.0:
        raise CalibrationError(
            f"mean event time incompatible with base measure: {target} not in (0, {T / 2})")
    lo, hi = math.log(1e-6), math.log(1e6)
    f = lambda lg: psi(math.exp(lg), a, T) - target
    while f(lo) < 0.0:
        lo -= 2.0 * abs(lo) + 1.0
    while f(hi) > 0.0:
        hi += 2.0 * abs(hi) + 1.0
    root = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(root)


@dataclass(frozen=True)
class PsiTable:
    """``psi`` tabulated on a log-spaced grid; brackets the exact inversion."""

    a: float = 2.0
    T: float = 8.0
    log_min: float = -8.0
    log_max: float = 8.0
    size: int = 200
    log_gamma: np.ndarray = field(init=False, repr=False)
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lg = np.linspace(self.log_min, self.log_max, self.size)
        vals = np.array([psi(math.exp(x), self.a, self.T) for x in lg])
        object.__setattr__(self, "log_gamma", lg)
        object.__setattr__(self, "values", vals)

    def __call__(self, gamma):
        # values decrease, np.interp wants increasing abscissae
        return np.interp(np.log(gamma), self.log_gamma, self.values)

    def inverse(self, target: float) -> float:
        if not 0.0 < target < self.T / 2.0:
            raise CalibrationError(
                f"mean event time incompatible with base measure: {target}")
        idx = np.searchsorted(-self.values, -target)
        if idx == 0 or idx == self.size:
            return psi_inverse(target, self.a, self.T)
        lo, hi = self.log_gamma[idx - 1], self.log_gamma[idx]
        f = lambda lg: psi(math.exp(lg), self.a, self.T) - target
        return math.exp(optimize.brentq(f, lo, hi, xtol=1e-14,
                                        rtol=4 * np.finfo(float).eps))


@lru_cache(maxsize=32)
def psi_table(a: float = 2.0, T: float = 8.0) -> PsiTable:
    return PsiTable(a, T)


def gamma_hat(events, a: float = 2.0, T: float = 8.0,
              family: Family = Family.INV_SHIFTED_GAMMA) -> float:
    """Empirical Bayes rate: invert ``psi`` at the mean event time.

    The mean is clamped into ``(delta, T/2 - delta)``, ``delta = 1e-6 T``,
    with a :class:`CalibrationWarning` when the clamp fires.
    """
    _check_family(family)
    w = np.asarray(getattr(events, "events", events), dtype=float)
    if w.size == 0:
        raise CalibrationError("cannot calibrate on an empty sample")
    mean = float(w.mean())
    delta = 1e-6 * T
    clamped = min(max(mean, delta), T / 2.0 - delta)
    if clamped != mean:
        warnings.warn(f"mean event time {mean:.6g} clamped to {clamped:.6g}",
                      CalibrationWarning, stacklevel=2)
    return psi_inverse(clamped, a, T)


def gamma_star(truth_id: TruthId | str | TruthIntensity, a: float = 2.0,
               T: float = 8.0) -> float:
    """Well-calibrated rate for a known truth: ``psi_inverse(E_theo)``."""
    lam = truth_id if isinstance(truth_id, TruthIntensity) else truth(truth_id, T)
    return psi_inverse(lam.e_theo(), a, lam.T)


def gamma_fixed(rho: float, truth_id: TruthId | str | TruthIntensity,
                a: float = 2.0, T: float = 8.0) -> float:
    """Deliberately perturbed rate ``rho * psi_inverse(E_theo)``."""
    if not rho > 0.0:
        raise ValueError(f"perturbation factor must be positive, got {rho}")
    return rho * gamma_star(truth_id, a, T)


def hierarchical_prior(mean: float, sd: float) -> tuple[float, float]:
    """Gamma (shape, rate) with the given mean and standard deviation."""
    if not (mean > 0.0 and sd > 0.0):
        raise ValueError("prior mean and standard deviation must be positive")
    return (mean / sd) ** 2, mean / sd ** 2
