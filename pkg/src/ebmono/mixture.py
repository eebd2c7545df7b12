"""Dirichlet process mixtures of uniform kernels ``1{0 < t < theta} / theta``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .base_measures import BaseMeasure

PRIOR_TAIL_TOL = 1e-8
_STICK_BATCH = 32


def break_sticks(remainder: float, threshold: float, A: float, rng: np.random.Generator):
    """Append stick-breaking weights until the leftover mass drops below ``threshold``.

    Returns ``(weights, new_remainder)``. Nothing is drawn when ``remainder``
    is already below ``threshold``.
    """
    out = []
    r = float(remainder)
    while r >= threshold:
        v = rng.beta(1.0, A, size=_STICK_BATCH)
        rs = r * np.cumprod(1.0 - v)
        w = np.concatenate(([r], rs[:-1])) * v
        stop = np.flatnonzero(rs < threshold)
        if stop.size:
            k = stop[0] + 1
            out.append(w[:k])
            r = float(rs[k - 1])
            break
        out.append(w)
        r = float(rs[-1])
        if r == 0.0:
            break
    weights = np.concatenate(out) if out else np.empty(0)
    return weights, r


def relabel_by_appearance(alloc: np.ndarray, k_total: int):
    """Permutation putting clusters in order of first appearance, empties last.

    Returns ``(order, new_alloc, k_nonempty)`` where ``order[j]`` is the old
    label of new cluster ``j``.
    """
    labels, first = np.unique(alloc, return_index=True)
    seen = labels[np.argsort(first)]
    empty = np.setdiff1d(np.arange(k_total), seen, assume_unique=True)
    order = np.concatenate((seen, empty)).astype(np.intp)
    inv = np.empty(k_total, dtype=np.intp)
    inv[order] = np.arange(k_total)
    return order, inv[alloc], int(seen.size)


def mixture_eval(weights, atoms, t):
    """``sum_k w_k 1{t < theta_k} / theta_k`` on an array of times."""
    t = np.asarray(t, dtype=float)
    atoms = np.asarray(atoms, dtype=float)
    if atoms.size == 0:
        return np.zeros_like(t)
    order = np.argsort(atoms)
    a = atoms[order]
    contrib = np.asarray(weights, dtype=float)[order] / a
    suffix = np.concatenate((np.cumsum(contrib[::-1])[::-1], [0.0]))
    return suffix[np.searchsorted(a, t, side="right")]


@dataclass
class GridFunction:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape[-1:]:
            raise ValueError("grid and values disagree in length")


@dataclass
class MixtureState:
    """Finite representation of a stick-breaking mixture.

    ``weights`` and ``atoms`` hold the represented clusters, non-empty ones
    first in order of appearance. ``remainder`` is the unrepresented stick.
    """

    weights: np.ndarray
    atoms: np.ndarray
    remainder: float
    T: float = 8.0
    alloc: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    slices: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.atoms = np.asarray(self.atoms, dtype=float)
        self.alloc = np.asarray(self.alloc, dtype=np.intp)
        self.slices = np.asarray(self.slices, dtype=float)
        self.remainder = float(self.remainder)

    @property
    def k_star(self) -> int:
        return int(self.weights.size)

    @property
    def k_nonempty(self) -> int:
        return int(np.unique(self.alloc).size) if self.alloc.size else 0

    def counts(self) -> np.ndarray:
        return np.bincount(self.alloc, minlength=self.k_star)

    def copy(self) -> "MixtureState":
        return MixtureState(self.weights.copy(), self.atoms.copy(), self.remainder,
                            self.T, self.alloc.copy(), self.slices.copy())

    def eval_bar_lambda(self, t, with_remainder: bool = False):
        """Mixture density at ``t``; the stick remainder is ignored by default.

        With ``with_remainder=True`` returns ``(value, upper)`` where ``upper``
        adds the largest density the unrepresented mass could contribute at
        ``t``, namely ``remainder / t``.
        """
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.T):
            raise ValueError(f"time outside [0, {self.T}]")
        val = mixture_eval(self.weights, self.atoms, t)
        if not with_remainder:
            return val if val.ndim else float(val)
        with np.errstate(divide="ignore"):
            upper = val + np.where(self.remainder > 1e-12, self.remainder / t, 0.0)
        return val, upper

    def intensity_draw(self, M: float, grid) -> GridFunction:
        grid = np.asarray(grid, dtype=float)
        return GridFunction(grid, M * self.eval_bar_lambda(grid))

    def audit(self, events=None, zeta: float | None = None, tol: float = 1e-12) -> None:
        """Raise AssertionError when a structural invariant is broken."""
        if np.any(self.weights <= 0.0) or self.remainder < 0.0:
            raise AssertionError("non-positive weight or negative remainder")
        if abs(self.weights.sum() + self.remainder - 1.0) > tol * max(1, self.k_star):
            raise AssertionError("weights and remainder do not sum to one")
        if events is not None and self.alloc.size:
            if np.any(np.asarray(events) > self.atoms[self.alloc]):
                raise AssertionError("event allocated to an atom below it")
        if zeta is not None and self.slices.size:
            cap = np.minimum(self.weights[self.alloc], zeta)
            if np.any(self.slices >= cap):
                raise AssertionError("slice variable above its cap")

    def to_dict(self) -> dict:
        return {"w": self.weights.tolist(), "theta": self.atoms.tolist(),
                "c": self.alloc.tolist(), "u": self.slices.tolist(),
                "r": self.remainder, "T": self.T}

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureState":
        return cls(np.array(d["w"], dtype=float), np.array(d["theta"], dtype=float),
                   d["r"], d.get("T", 8.0), np.array(d["c"], dtype=np.intp),
                   np.array(d["u"], dtype=float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MixtureState":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_prior(A: float, base: BaseMeasure, rng: np.random.Generator,
                 eps: float = PRIOR_TAIL_TOL) -> MixtureState:
    """Truncated stick-breaking draw: sticks stop once the remainder is below ``eps``."""
    if not 0.0 < eps < 1.0:
        raise ValueError("tail tolerance must lie in (0, 1)")
    w, r = break_sticks(1.0, eps, A, rng)
    keep = w > 0.0
    w = w[keep]
    atoms = np.atleast_1d(base.sample(rng, size=w.size))
    return MixtureState(w, atoms, r, base.T)
