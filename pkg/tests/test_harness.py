import math

import numpy as np
import pytest

from matreg import harness
from matreg.errors import BandFailure, ContractViolation
from matreg.harness import ExperimentConfig, run_experiment, run_trial, summarize, to_csv, to_json, write_csv


def small(experiment, **kw):
    sizes = {"scaling": (48,), "bernoulli": (48,), "optimality": (300,), "global": (40, 80), "twoplus": (60,)}
    base = dict(n_list=sizes[experiment], trials=2, master_seed=5)
    base.update(kw)
    return ExperimentConfig.default(experiment, **base)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.default("scaling")
        assert cfg.eps_list == (0.02, 0.05, 0.1, 0.2, 0.3)
        assert cfg.n_list == (1024,) and cfg.trials == 30

    @pytest.mark.parametrize("kw", [{"trials": 0}, {"eps_list": (0.7,)}, {"eps_list": ()}, {"n_list": (1,)},
                                    {"master_seed": -1}, {"spec": "nope"}])
    def test_invalid(self, kw):
        with pytest.raises(ContractViolation):
            ExperimentConfig.default("scaling", **kw)

    def test_unknown_experiment(self):
        with pytest.raises(ContractViolation):
            ExperimentConfig.default("bogus")

    def test_spec_normalized(self):
        assert ExperimentConfig.default("global", spec="pareto_sym:alpha=1.5").spec == \
            "pareto_sym:alpha=1.5,moment=2.0"


@pytest.mark.parametrize("experiment", harness.EXPERIMENTS)
def test_rows_sorted_and_complete(experiment):
    cfg = small(experiment)
    rows = run_experiment(cfg, workers=1)
    assert len(rows) == len(cfg.n_list) * len(cfg.eps_list) * cfg.trials
    assert [r.key for r in rows] == sorted(r.key for r in rows)
    for r in rows:
        assert list(r.metrics) == list(harness.METRICS[experiment])


@pytest.mark.parametrize("experiment", harness.EXPERIMENTS)
def test_parallel_matches_serial(experiment):
    cfg = small(experiment)
    serial = to_csv(run_experiment(cfg, workers=1), experiment)
    parallel = to_csv(run_experiment(cfg, workers=3), experiment)
    assert serial == parallel


def test_replay_from_recorded_seed():
    cfg = small("scaling", trials=2, eps_list=(0.1, 0.3))
    rows = run_experiment(cfg, workers=1)
    for r in rows[:10]:
        metrics, _ = run_trial(cfg.experiment, cfg.spec, r.n, r.eps, r.seed, cfg.budgets)
        assert {k: metrics[k] for k in r.metrics} == r.metrics


def test_trial_seed_shared_across_eps():
    rows = run_experiment(small("scaling", trials=1, eps_list=(0.1, 0.2)), workers=1)
    assert rows[0].seed == rows[1].seed
    assert rows[0].metrics["op_before"] == rows[1].metrics["op_before"]


def test_optimality_rows():
    cfg = ExperimentConfig.default("optimality", n_list=(1000,), eps_list=(0.05,), trials=10, master_seed=3)
    rows = run_experiment(cfg, workers=1)
    assert len(rows) == 10
    for r in rows:
        if r.metrics["conclusive"]:
            assert r.metrics["certified_bound"] == pytest.approx(100.0)
    lines = to_csv(rows, "optimality").splitlines()
    assert len(lines) == 1 + 10 + 1
    assert lines[-1].startswith("median,optimality,1000,")


def test_failures_recorded_not_raised(monkeypatch):
    real = harness.run_trial

    def flaky(experiment, spec, n, eps, seed, budgets=None):
        if eps == 0.2:
            raise BandFailure("large", "forced")
        return real(experiment, spec, n, eps, seed, budgets)

    monkeypatch.setattr(harness, "run_trial", flaky)
    rows = run_experiment(small("scaling", eps_list=(0.1, 0.2)), workers=1)
    bad = [r for r in rows if r.eps == 0.2]
    assert bad and all(not r.success and "BandFailure" in r.failures for r in bad)
    assert all(math.isnan(v) for r in bad for v in r.metrics.values())
    assert all(r.success for r in rows if r.eps == 0.1)
    text = to_csv(rows, "scaling")
    assert ",nan," in text


def test_csv_format():
    rows = run_experiment(small("scaling", trials=1, eps_list=(0.1,)), workers=1)
    text = to_csv(rows, "scaling")
    header, first, median = text.splitlines()
    assert header.split(",")[:8] == ["kind", "experiment", "n", "eps", "trial", "seed", "success", "failures"]
    assert "wall_time_ms" not in header
    fields = first.split(",")
    assert fields[3] == "0.10000000000000001"  # 17 significant digits
    assert float(fields[header.split(",").index("op_after")]) == rows[0].metrics["op_after"]
    assert median.startswith("median,")
    assert "wall_time_ms" in to_csv(rows, "scaling", timing=True).splitlines()[0]


def test_summary_fitted_ratio():
    rows = run_experiment(small("scaling", trials=3, eps_list=(0.1, 0.3)), workers=1)
    for cell in summarize(rows):
        eps, n = cell["eps"], cell["n"]
        expected = cell["medians"]["op_after"] / (math.sqrt(n) * math.log(1 / eps) / math.sqrt(eps))
        assert cell["medians"]["fitted_ratio"] == pytest.approx(expected, rel=1e-12)


def test_json_output():
    rows = run_experiment(small("global", trials=1), workers=1)
    data = to_json(rows, "global")
    assert data["experiment"] == "global" and len(data["rows"]) == 2 and len(data["summary"]) == 2


def test_write_csv_bad_path(tmp_path):
    rows = run_experiment(small("optimality", trials=1), workers=1)
    with pytest.raises(OSError, match="missing"):
        write_csv(rows, "optimality", tmp_path / "missing" / "r.csv")


@pytest.mark.parametrize("value, expected", [("", None), ("0", None), ("3", 3)])
def test_worker_count(monkeypatch, value, expected):
    monkeypatch.setenv(harness.THREADS_ENV, value)
    count = harness.worker_count()
    assert count == expected if expected else count >= 1


def test_worker_count_invalid(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "many")
    with pytest.raises(ContractViolation):
        harness.worker_count()


def test_global_metrics_consistent():
    rows = run_experiment(small("global", trials=1), workers=1)
    for r in rows:
        assert r.metrics["min_sub_over_sqrt_n"] == pytest.approx(
            r.metrics["min_submatrix_frobenius_lower"] / np.sqrt(r.n))
