"""Benchmark intensity functions on [0, T] and their normalizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate, special


class TruthId(str, Enum):
    LAMBDA01 = "Lambda01"
    LAMBDA02 = "Lambda02"
    LAMBDA03 = "Lambda03"


DEFAULT_HORIZON = 8.0
# Decay rate of Lambda02; with rate 1 its calibrated base rate is 0.6667.
LAMBDA02_DECAY = 1.0


def _check_domain(t, T):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > T):
        raise ValueError(f"time outside the horizon [0, {T}]")
    return t


def _step(t):
    return np.where(t < 3.0, 4.0, 2.0)


def _arccos_phi3():
    return float(np.arccos(special.ndtr(3.0)))


def _arccos_spline(t):
    c = _arccos_phi3()
    left = np.arccos(special.ndtr(np.minimum(t, 3.0)))
    right = -(c * t / 6.0 - 1.5 * c)
    return np.where(t <= 3.0, left, right)


@dataclass(frozen=True)
class TruthIntensity:
    """A non-negative rate function on [0, T].

    Use :func:`truth` for the three benchmark intensities; arbitrary callables
    are accepted for tests and experiments.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    T: float = DEFAULT_HORIZON
    breakpoints: tuple[float, ...] = ()
    closed_mass: float | None = None
    closed_moment: float | None = None

    def __call__(self, t):
        t = _check_domain(t, self.T)
        out = np.asarray(self.func(t), dtype=float)
        return out if out.ndim else float(out)

    def _quad(self, g):
        pts = [p for p in self.breakpoints if 0.0 < p < self.T]
        val, _ = integrate.quad(g, 0.0, self.T, points=pts or None,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        return val

    def mass_quad(self) -> float:
        return self._quad(lambda t: float(self.func(np.asarray(t))))

    def moment_quad(self) -> float:
        return self._quad(lambda t: t * float(self.func(np.asarray(t))))

    def mass(self) -> float:
        """Total mass on [0, T]; closed form when known, quadrature otherwise."""
        if self.closed_mass is not None:
            return self.closed_mass
        return self.mass_quad()

    def e_theo(self) -> float:
        """First moment of the normalized intensity."""
        if self.closed_moment is not None:
            return self.closed_moment
        return self.moment_quad() / self.mass()

    def normalized(self) -> "NormalizedIntensity":
        return NormalizedIntensity(self, self.mass())


@dataclass(frozen=True)
class NormalizedIntensity:
    """The probability density ``base / mass`` on [0, T]."""

    base: TruthIntensity
    mass: float = field(default=0.0)

    @property
    def T(self) -> float:
        return self.base.T

    def __call__(self, t):
        return self.base(t) / self.mass

    def e_theo(self) -> float:
        return self.base.e_theo()


def _exp_decay(rate: float, T: float) -> TruthIntensity:
    e = np.exp(-rate * T)
    mass = (1.0 - e) / rate
    moment = (1.0 - e * (1.0 + rate * T)) / (rate * (1.0 - e))
    return TruthIntensity(
        name=TruthId.LAMBDA02.value,
        func=lambda t: np.exp(-rate * t),
        T=T,
        closed_mass=mass,
        closed_moment=moment,
    )


def truth(truth_id: TruthId | str, T: float = DEFAULT_HORIZON,
          decay: float = LAMBDA02_DECAY) -> TruthIntensity:
    """Return one of the benchmark intensities.

    ``decay`` only affects Lambda02, ``t -> exp(-decay * t)``.
    """
    tid = TruthId(truth_id)
    if tid is TruthId.LAMBDA01:
        # 4 on [0, 3), 2 on [3, T]
        mass = 4.0 * min(T, 3.0) + 2.0 * max(T - 3.0, 0.0)
        first = 2.0 * min(T, 3.0) ** 2 + (max(T, 3.0) ** 2 - 9.0)
        return TruthIntensity(tid.value, _step, T, (3.0,), mass, first / mass)
    if tid is TruthId.LAMBDA02:
        return _exp_decay(decay, T)
    return TruthIntensity(tid.value, _arccos_spline, T, (3.0,))


def eval_truth(truth_id: TruthId | str, t, T: float = DEFAULT_HORIZON):
    return truth(truth_id, T)(t)


def mass(truth_id: TruthId | str, T: float = DEFAULT_HORIZON) -> float:
    return truth(truth_id, T).mass()


def e_theo(truth_id: TruthId | str, T: float = DEFAULT_HORIZON) -> float:
    return truth(truth_id, T).e_theo()
