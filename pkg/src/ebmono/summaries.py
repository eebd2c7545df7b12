"""Pointwise posterior summaries and grid distances."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mixture import GridFunction

DEFAULT_QUANTILES = (0.1, 0.9)


class Metric(str, Enum):
    L1 = "L1"
    L2 = "L2"          # integral of the squared difference
    L2_NORM = "L2norm"  # its square root
    SUP = "Sup"


@dataclass
class Bands:
    median: GridFunction
    low: GridFunction
    high: GridFunction

    def to_csv(self, path, truth=None) -> None:
        cols = [self.median.grid, self.low.values, self.median.values, self.high.values]
        header = "grid,low,median,high"
        if truth is not None:
            cols.append(np.asarray(truth, dtype=float))
            header += ",truth"
        np.savetxt(path, np.column_stack(cols), fmt="%.10g", delimiter=",",
                   header=header, comments="")


def summarize(draws, grid, quantiles=DEFAULT_QUANTILES) -> Bands:
    """Pointwise median and empirical quantile band across retained draws.

    ``draws`` is an array with one row per draw, or a trace exposing
    ``lambda_grid``.
    """
    draws = np.asarray(getattr(draws, "lambda_grid", draws), dtype=float)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise ValueError("need at least one retained draw")
    lo, hi = quantiles
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError("quantile levels must satisfy 0 <= low <= high <= 1")
    q = np.quantile(draws, [lo, hi], axis=0)
    med = np.median(draws, axis=0)
    return Bands(GridFunction(grid, med), GridFunction(grid, q[0]), GridFunction(grid, q[1]))


def distance(f: GridFunction, g: GridFunction, which: Metric | str = Metric.L1) -> float:
    if f.grid.shape != g.grid.shape or not np.array_equal(f.grid, g.grid):
        raise ValueError("functions live on different grids")
    d = np.abs(f.values - g.values)
    which = Metric(which)
    if which is Metric.SUP:
        return float(d.max())
    if which is Metric.L1:
        return float(np.trapezoid(d, f.grid))
    l2 = float(np.trapezoid(d * d, f.grid))
    return l2 if which is Metric.L2 else float(np.sqrt(l2))


def all_distances(f: GridFunction, g: GridFunction) -> dict:
    return {m.value: distance(f, g, m) for m in Metric}
