"""Batch runner for the simulation study: datasets x calibration strategies.

Layout of ``out_dir``::

    summary.csv                     one row per cell
    table.csv                       distances, rows (truth, strategy, metric), columns n
    <truth>_n<n>/events.txt         dataset shared by the strategies
    <truth>_n<n>/<strategy>/trace.csv
    <truth>_n<n>/<strategy>/lambda_grid.csv
    <truth>_n<n>/<strategy>/bands.csv
"""

from __future__ import annotations

import csv
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .base_measures import BaseMeasure, Family
from .calibration import gamma_fixed, gamma_hat, hierarchical_prior
from .gibbs import ChainConfig, HyperState, Strategy, run_chain
from .intensities import LAMBDA02_DECAY, TruthId, truth
from .mixture import GridFunction
from .point_process import PointProcessSample, save_events, simulate
from .summaries import DEFAULT_QUANTILES, Metric, all_distances, summarize

log = logging.getLogger(__name__)

# perturbation factor and the two hierarchical prior standard deviations
PRESETS = {
    TruthId.LAMBDA01: {"rho": 0.01, "sigma1": 0.005, "sigma2": 0.001},
    TruthId.LAMBDA02: {"rho": 100.0, "sigma1": 0.1, "sigma2": 0.01},
    TruthId.LAMBDA03: {"rho": 30.0, "sigma1": 0.1, "sigma2": 0.01},
}
STRATEGY_NAMES = ("Empir", "Fixed", "Hier1", "Hier2")


@dataclass(frozen=True)
class StrategySpec:
    """One calibration rule. ``rho``/``sigma`` default to the per-truth presets."""

    name: str
    kind: Strategy
    rho: float | None = None
    sigma: float | None = None
    preset: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy(self.kind))
        if self.rho is not None and not self.rho > 0.0:
            raise ValueError("rho must be positive")
        if self.sigma is not None and not self.sigma > 0.0:
            raise ValueError("sigma_gamma must be positive")

    def resolve(self, truth_id: TruthId) -> "StrategySpec":
        p = PRESETS[TruthId(truth_id)]
        if self.kind is Strategy.FIXED_GAMMA and self.rho is None:
            return replace(self, rho=p["rho"])
        if self.kind is Strategy.HIERARCHICAL and self.sigma is None:
            return replace(self, sigma=p[self.preset or "sigma1"])
        return self


def default_strategies() -> tuple[StrategySpec, ...]:
    return (StrategySpec("Empir", Strategy.EMPIRICAL_BAYES),
            StrategySpec("Fixed", Strategy.FIXED_GAMMA),
            StrategySpec("Hier1", Strategy.HIERARCHICAL, preset="sigma1"),
            StrategySpec("Hier2", Strategy.HIERARCHICAL, preset="sigma2"))


def strategy_by_name(name: str, rho: float | None = None,
                     sigma: float | None = None) -> StrategySpec:
    table = {s.name.lower(): s for s in default_strategies()}
    aliases = {"empiricalbayes": "empir", "eb": "empir", "fixedgamma": "fixed",
               "hierarchical": "hier1", "hierarchical2": "hier2"}
    key = aliases.get(name.lower(), name.lower())
    if key not in table:
        raise ValueError(f"unknown strategy {name!r}")
    spec = table[key]
    return replace(spec, rho=rho if rho is not None else spec.rho,
                   sigma=sigma if sigma is not None else spec.sigma)


@dataclass
class ExperimentConfig:
    truths: tuple = tuple(TruthId)
    ns: tuple = (500, 1000, 2000)
    strategies: tuple = field(default_factory=default_strategies)
    n_iter: int = 5000
    burn_in: int = 2500
    thin: int = 10
    zeta: float = 1.0
    out_dir: Path = Path("study_out")
    master_seed: int = 2024
    a: float = 2.0
    T: float = 8.0
    decay: float = LAMBDA02_DECAY
    grid_points: int = 4096
    quantiles: tuple = DEFAULT_QUANTILES
    workers: int = 1

    def __post_init__(self):
        self.truths = tuple(TruthId(t) for t in self.truths)
        self.ns = tuple(int(n) for n in self.ns)
        self.out_dir = Path(self.out_dir)
        if any(n <= 0 for n in self.ns):
            raise ValueError("n values must be positive")
        ChainConfig(self.n_iter, self.burn_in, self.thin, self.zeta)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.grid_points)


@dataclass
class SummaryRecord:
    truth: str
    n: int
    strategy: str
    status: str = "ok"
    n_events: int = 0
    gamma: float = float("nan")
    L1: float = float("nan")
    L2: float = float("nan")
    L2norm: float = float("nan")
    Sup: float = float("nan")
    mean_K: float = float("nan")
    mean_M: float = float("nan")
    ar_accept_rate: float = float("nan")
    wall_time: float = 0.0
    message: str = ""

    @property
    def dataset(self) -> str:
        return f"{self.truth}_n{self.n}"


def _seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1, np.uint64)[0])


def dataset_seed(master: int, truth_id: TruthId, n: int) -> int:
    return _seed(master, list(TruthId).index(TruthId(truth_id)), n)


def chain_seed(master: int, truth_id: TruthId, n: int, strategy_index: int) -> int:
    return _seed(master, list(TruthId).index(TruthId(truth_id)), n, strategy_index, 1)


def make_dataset(cfg: ExperimentConfig, truth_id: TruthId, n: int) -> PointProcessSample:
    lam = truth(truth_id, cfg.T, cfg.decay).normalized()
    return simulate(lam, n, cfg.T, dataset_seed(cfg.master_seed, truth_id, n))


def calibrate(spec: StrategySpec, sample: PointProcessSample, truth_id: TruthId,
              cfg: ExperimentConfig) -> HyperState:
    """Hyperparameters for one strategy on one dataset."""
    spec = spec.resolve(truth_id)
    if spec.kind is Strategy.FIXED_GAMMA:
        lam = truth(truth_id, cfg.T, cfg.decay)
        return HyperState(gamma=gamma_fixed(spec.rho, lam, cfg.a, cfg.T),
                          strategy=Strategy.FIXED_GAMMA)
    g_hat = gamma_hat(sample, cfg.a, cfg.T)
    if spec.kind is Strategy.EMPIRICAL_BAYES:
        return HyperState(gamma=g_hat, strategy=Strategy.EMPIRICAL_BAYES)
    a_g, b_g = hierarchical_prior(g_hat, spec.sigma)
    return HyperState.hierarchical(a_g, b_g)


def run_cell(cfg: ExperimentConfig, truth_id: TruthId, n: int, s_index: int,
             sample: PointProcessSample | None = None) -> SummaryRecord:
    """Fit one strategy on one dataset and write its artifacts."""
    spec = cfg.strategies[s_index]
    rec = SummaryRecord(TruthId(truth_id).value, n, spec.name)
    cell_dir = cfg.out_dir / rec.dataset / spec.name
    t0 = time.perf_counter()
    try:
        if sample is None:
            sample = make_dataset(cfg, truth_id, n)
        rec.n_events = sample.count
        hyper = calibrate(spec, sample, truth_id, cfg)
        rec.gamma = hyper.gamma
        chain = ChainConfig(cfg.n_iter, cfg.burn_in, cfg.thin, cfg.zeta,
                            chain_seed(cfg.master_seed, truth_id, n, s_index), cfg.grid)
        base = BaseMeasure(Family.INV_SHIFTED_GAMMA, hyper.gamma, cfg.a, cfg.T)
        trace = run_chain(sample, n, chain, hyper, base)
        cell_dir.mkdir(parents=True, exist_ok=True)
        trace.to_csv(cell_dir / "trace.csv")
        trace.grid_to_csv(cell_dir / "lambda_grid.csv")
        rec.wall_time = trace.wall_time
        if len(trace) == 0:
            rec.status = "empty trace"
            return rec
        grid = trace.grid
        target = truth(truth_id, cfg.T, cfg.decay).normalized()(grid)
        bands = summarize(trace, grid, cfg.quantiles)
        bands.to_csv(cell_dir / "bands.csv", truth=target)
        for k, v in all_distances(bands.median, GridFunction(grid, target)).items():
            setattr(rec, k, v)
        rec.mean_K = float(np.mean(trace.k_nonempty))
        rec.mean_M = float(np.mean(trace.M))
        rec.ar_accept_rate = float(np.mean(trace.ar_rate))
    except Exception as exc:  # a failed cell must not abort the study
        rec.status = "error"
        rec.message = f"{type(exc).__name__}: {exc}"
        rec.wall_time = time.perf_counter() - t0
        log.error("cell %s/%s failed\n%s", rec.dataset, spec.name, traceback.format_exc())
    return rec


def _cell_job(args):
    cfg, truth_id, n, s_index = args
    return run_cell(cfg, truth_id, n, s_index)


def run_study(cfg: ExperimentConfig) -> list[SummaryRecord]:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for tid in cfg.truths:
        for n in cfg.ns:
            sample = make_dataset(cfg, tid, n)
            d = cfg.out_dir / f"{tid.value}_n{n}"
            d.mkdir(parents=True, exist_ok=True)
            save_events(sample, d / "events.txt")
            jobs += [(cfg, tid, n, i) for i in range(len(cfg.strategies))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_cell_job, jobs))
    else:
        records = [_cell_job(j) for j in jobs]
    write_summary(records, cfg.out_dir / "summary.csv")
    write_table(records, cfg.out_dir / "table.csv")
    return records


def write_summary(records, path) -> None:
    names = list(asdict(records[0]).keys()) if records else list(SummaryRecord.__annotations__)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=names)
        wr.writeheader()
        for r in records:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v)
                         for k, v in asdict(r).items()})


def read_summary(path) -> list[SummaryRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for name, typ in SummaryRecord.__annotations__.items():
                v = row[name]
                kw[name] = int(v) if typ == "int" else float(v) if typ == "float" else v
            out.append(SummaryRecord(**kw))
    return out


def write_table(records, path) -> None:
    """Distances laid out with one row per (truth, strategy, metric) and one column per n."""
    ns = sorted({r.n for r in records})
    keys = []
    for r in records:
        if (r.truth, r.strategy) not in keys:
            keys.append((r.truth, r.strategy))
    cell = {(r.truth, r.strategy, r.n): r for r in records}
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["truth", "strategy", "metric"] + [f"n={n}" for n in ns])
        for tr, st in keys:
            for m in (Metric.L1, Metric.L2, Metric.SUP):
                row = [tr, st, m.value]
                for n in ns:
                    r = cell.get((tr, st, n))
                    row.append("" if r is None else f"{getattr(r, m.value):.4g}")
                wr.writerow(row)
