import numpy as np
import pytest

from ebmono.calibration import gamma_hat, hierarchical_prior
from ebmono.gibbs import ChainConfig, ChainError, HyperState, Strategy, run_chain
from ebmono.base_measures import BaseMeasure, Family
from ebmono.intensities import TruthId, truth
from ebmono.mixture import GridFunction
from ebmono.study import (ExperimentConfig, StrategySpec, calibrate, chain_seed, dataset_seed,
                          default_strategies, make_dataset, read_summary, run_study,
                          strategy_by_name)
from ebmono.summaries import all_distances, summarize


def _cfg(tmp_path, **kw):
    base = dict(truths=("Lambda01",), ns=(500,), strategies=(strategy_by_name("Empir"),),
                n_iter=60, burn_in=30, thin=3, out_dir=tmp_path, grid_points=512)
    base.update(kw)
    return ExperimentConfig(**base)


def test_single_cell(tmp_path):
    recs = run_study(_cfg(tmp_path))
    assert len(recs) == 1 and recs[0].status == "ok"
    cell = tmp_path / "Lambda01_n500"
    files = sorted(p.relative_to(cell).as_posix() for p in cell.rglob("*") if p.is_file())
    assert files == ["Empir/bands.csv", "Empir/lambda_grid.csv", "Empir/trace.csv", "events.txt"]
    assert (tmp_path / "summary.csv").exists() and (tmp_path / "table.csv").exists()
    r = recs[0]
    assert min(r.L1, r.L2, r.L2norm, r.Sup) >= 0.0
    assert r.L2norm == pytest.approx(np.sqrt(r.L2))


def test_rerun_identical(tmp_path):
    run_study(_cfg(tmp_path / "a"))
    run_study(_cfg(tmp_path / "b"))
    assert (tmp_path / "a/table.csv").read_text() == (tmp_path / "b/table.csv").read_text()
    ra, rb = read_summary(tmp_path / "a/summary.csv"), read_summary(tmp_path / "b/summary.csv")
    assert [(r.L1, r.gamma, r.mean_K) for r in ra] == [(r.L1, r.gamma, r.mean_K) for r in rb]


def test_seeds_are_pure_and_distinct():
    assert dataset_seed(7, TruthId.LAMBDA02, 1000) == dataset_seed(7, "Lambda02", 1000)
    seeds = {dataset_seed(7, t, n) for t in TruthId for n in (500, 1000, 2000)}
    assert len(seeds) == 9
    assert dataset_seed(8, TruthId.LAMBDA02, 1000) != dataset_seed(7, TruthId.LAMBDA02, 1000)
    assert len({chain_seed(7, TruthId.LAMBDA01, 500, i) for i in range(4)}) == 4


def test_dataset_independent_of_study_shape(tmp_path):
    a = make_dataset(_cfg(tmp_path), TruthId.LAMBDA01, 500)
    b = make_dataset(_cfg(tmp_path, truths=tuple(TruthId), ns=(500, 1000)), TruthId.LAMBDA01, 500)
    assert np.array_equal(a.events, b.events)


def test_hierarchical_prior_moments():
    a, b = hierarchical_prior(0.67, 0.1)
    assert a / b == pytest.approx(0.67)
    assert np.sqrt(a) / b == pytest.approx(0.1)


def test_calibration_per_strategy(tmp_path):
    cfg = _cfg(tmp_path, truths=("Lambda02",))
    sample = make_dataset(cfg, TruthId.LAMBDA02, 500)
    g_hat = gamma_hat(sample)
    specs = {s.name: s for s in default_strategies()}
    assert calibrate(specs["Empir"], sample, TruthId.LAMBDA02, cfg).gamma == pytest.approx(g_hat)
    fixed = calibrate(specs["Fixed"], sample, TruthId.LAMBDA02, cfg)
    assert fixed.strategy is Strategy.FIXED_GAMMA
    assert fixed.gamma == pytest.approx(100 * 0.666690, rel=1e-3)
    h = calibrate(specs["Hier2"], sample, TruthId.LAMBDA02, cfg)
    assert h.a_gamma / h.b_gamma == pytest.approx(g_hat)
    assert np.sqrt(h.a_gamma) / h.b_gamma == pytest.approx(0.01)


def test_strategy_parsing():
    assert strategy_by_name("eb").kind is Strategy.EMPIRICAL_BAYES
    assert strategy_by_name("Fixed", rho=3.0).resolve(TruthId.LAMBDA02).rho == 3.0
    assert strategy_by_name("Hier1").resolve(TruthId.LAMBDA01).sigma == 0.005
    with pytest.raises(ValueError):
        strategy_by_name("nope")
    with pytest.raises(ValueError):
        StrategySpec("x", Strategy.FIXED_GAMMA, rho=-1.0)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        _cfg(tmp_path, ns=(0,))
    with pytest.raises(ValueError):
        _cfg(tmp_path, truths=("Lambda09",))


def test_failed_cell_is_recorded(tmp_path, monkeypatch):
    import ebmono.study as study

    def broken(*args, **kwargs):
        raise ChainError("sweep 3: slice produced empty support")

    monkeypatch.setattr(study, "run_chain", broken)
    cfg = _cfg(tmp_path, strategies=(strategy_by_name("Empir"), strategy_by_name("Fixed")))
    recs = run_study(cfg)
    assert [r.status for r in recs] == ["error", "error"]
    assert "sweep 3" in recs[0].message
    assert len(read_summary(tmp_path / "summary.csv")) == 2


def test_grid_refinement(tmp_path):
    cfg = _cfg(tmp_path, truths=("Lambda02",))
    sample = make_dataset(cfg, TruthId.LAMBDA02, 500)
    hyper = HyperState(gamma=gamma_hat(sample))
    base = BaseMeasure(Family.INV_SHIFTED_GAMMA, hyper.gamma)
    out = []
    for pts in (4096, 16384):
        grid = np.linspace(0, 8, pts)
        tr = run_chain(sample, 500, ChainConfig(200, 100, 5, seed=4, record_grid=grid), hyper, base)
        target = truth("Lambda02").normalized()(grid)
        out.append(all_distances(summarize(tr, grid).median, GridFunction(grid, target)))
    for k in ("L1", "L2"):
        assert abs(out[0][k] - out[1][k]) < 1e-3
