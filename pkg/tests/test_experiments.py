import csv
import json
import math
from collections import defaultdict

import numpy as np
import pytest

from shadowbench.errors import ConfigError, ShadowBenchError
from shadowbench.experiments import (
    ESTIMATORS,
    MSE_COLUMNS,
    RESULT_COLUMNS,
    Cell,
    ExperimentPlan,
    TrialResult,
    canonical_observables,
    compute_cell,
    desk_plan,
    mse,
    full_plan,
    plan_dataset,
    random_observable,
    read_results,
    run_experiment,
)
from shadowbench.simulate import RngStream, save_dataset, simulate_dataset

TINY_CHAIN = {"samples": 32, "thin": 4}


def tiny_plan(**kw):
    base = dict(dims=[8], trials=2, m_grid=[5, 20], estimators=["shadow", "bme_born", "bme_frobenius"],
                chain_overrides=TINY_CHAIN, root_seed=3)
    base.update(kw)
    return ExperimentPlan(**base)


def result(estimate, truth, trial=0):
    return TrialResult(1, 4, trial, "shadow", "canonical:0", 1, estimate, truth, None, 0)


# -- observables -----------------------------------------------------------


@pytest.mark.parametrize("dim", [2, 3, 32])
def test_canonical_observables(dim):
    obs = canonical_observables(dim)
    assert [o.tag for o in obs] == ["canonical:0", "canonical:1", "canonical:2"]
    for o in obs:
        assert abs(np.vdot(o.vector, o.vector).real - 1) <= 1e-12
    assert np.vdot(obs[0].vector, obs[2].vector) == 0
    np.testing.assert_allclose([o.ground_truth() for o in obs], [1, 0.5, 0], atol=1e-12)


def test_canonical_rejects_small_dim():
    with pytest.raises(ShadowBenchError):
        canonical_observables(1)


def test_random_observable_mean_ground_truth():
    rng = RngStream(99, 0)
    truths = np.array([random_observable(32, rng).ground_truth() for _ in range(10_000)])
    assert truths.min() >= 0 and truths.max() <= 1
    se = truths.std(ddof=1) / math.sqrt(truths.size)
    assert abs(truths.mean() - 1 / 32) <= 3 * se


def test_random_observable_reproducible():
    a = random_observable(6, RngStream(1, 2))
    b = random_observable(6, RngStream(1, 2))
    assert np.array_equal(a.vector, b.vector)


# -- mse -----------------------------------------------------------------


def test_mse_examples():
    assert mse([result(0.3, 0.3)]) == 0.0
    assert mse([result(0, 0, 0), result(1, 0, 1)]) == 0.5
    with pytest.raises(ShadowBenchError):
        mse([])


def test_aggregate_csv_recomputes_from_raw_rows(tmp_path):
    run_experiment(tiny_plan(), tmp_path)
    groups = defaultdict(list)
    with open(tmp_path / "results.csv") as fh:
        for row in csv.DictReader(fh):
            key = (row["picture"], row["dim"], row["estimator"], row["observable"], row["m"])
            groups[key].append((float(row["estimate"]) - float(row["ground_truth"])) ** 2)
    with open(tmp_path / "mse.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == MSE_COLUMNS
    assert len(rows) == len(groups)
    for row in rows:
        sq = groups[(row["picture"], row["dim"], row["estimator"], row["observable"], row["m"])]
        assert int(row["n_trials"]) == len(sq)
        assert float(row["mse"]) == pytest.approx(sum(sq) / len(sq), rel=1e-15, abs=1e-300)


# -- plans -----------------------------------------------------------------


def test_plan_validation():
    for bad in (dict(picture=3), dict(dims=[1]), dict(trials=0), dict(estimators=["nope"]),
                dict(m_grid=[20, 5]), dict(m_grid=[5, 5]), dict(m_grid=[0, 5]), dict(shots=10),
                dict(chain_overrides={"bogus": 1}), dict(chain_overrides={"bme_born": {"bogus": 1}})):
        with pytest.raises(ConfigError):
            tiny_plan(**bad)


def test_plan_round_trip(tmp_path):
    plan = tiny_plan(picture=2, K=12.5, shadow_m_grid=[1, 2, 3])
    plan.save(tmp_path / "p.json")
    assert ExperimentPlan.load(tmp_path / "p.json") == plan
    with pytest.raises(ConfigError):
        ExperimentPlan.from_dict({**plan.to_dict(), "extra": 1})


def test_profiles():
    desk = desk_plan()
    assert desk.dims == [32] and desk.trials == 10
    assert desk.m_grid == [1, 50, 100, 200, 400, 600, 800, 1000]
    assert set(desk.estimators) == set(ESTIMATORS)
    full = full_plan()
    assert full.dims == [32, 256] and full.trials == 50
    assert full.shadow_grid == list(range(1, 1001))
    assert full.chain_config("bme_born", 256, 0, 50).thin == 2**12


def test_chain_overrides_per_estimator():
    plan = tiny_plan(chain_overrides={"thin": 3, "bme_born": {"thin": 7}})
    assert plan.chain_config("bme_born", 8, 0, 5).thin == 7
    assert plan.chain_config("bme_frobenius", 8, 0, 5).thin == 3
    assert plan.chain_config("bme_born", 8, 0, 5).stream_id != plan.chain_config("bme_born", 8, 1, 5).stream_id


# -- campaigns -------------------------------------------------------------


def test_shadow_cardinality():
    plan = ExperimentPlan(dims=[32], trials=50, m_grid=list(range(1, 1001)), estimators=["shadow"])
    results = run_experiment(plan)
    assert len(results) == 50 * 3 * 1000
    assert len({r.key for r in results}) == len(results)
    assert all(r.stderr is None for r in results)


def test_results_file_layout(tmp_path):
    results = run_experiment(tiny_plan(), tmp_path)
    with open(tmp_path / "results.csv") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    assert tuple(reader.fieldnames) == RESULT_COLUMNS
    assert len(rows) == len(results) == 2 * 3 * (2 + 2 * 2)
    assert [TrialResult.from_row(r).key for r in rows] == [r.key for r in results]
    for r in results:
        if r.estimator != "shadow":
            assert 0 <= r.estimate <= 1
            assert r.stderr is not None
    diags = [json.loads(line) for line in (tmp_path / "diagnostics.jsonl").read_text().splitlines()]
    assert len(diags) == 2 * 2 * 2
    frob = [d for d in diags if d["estimator"] == "bme_frobenius"]
    assert all(d["K"] == d["m"] * 8 for d in frob)
    assert ExperimentPlan.load(tmp_path / "plan.json") == tiny_plan()


def test_rows_are_lossless(tmp_path):
    results = run_experiment(tiny_plan(), tmp_path)
    again = read_results(tmp_path / "results.csv")
    assert [(r.key, r.estimate, r.stderr) for r in again] == [(r.key, r.estimate, r.stderr) for r in results]


def strip_wall(path):
    with open(path) as fh:
        return [{k: v for k, v in row.items() if k != "wall_time_ms"} for row in csv.DictReader(fh)]


def test_restart_skips_completed_cells(tmp_path):
    plan = tiny_plan()
    run_experiment(plan, tmp_path)
    full = strip_wall(tmp_path / "results.csv")
    # drop the data rows after the first eight to simulate an interrupted run
    lines = (tmp_path / "results.csv").read_text().splitlines(keepends=True)
    (tmp_path / "results.csv").write_text("".join(lines[:9]) + lines[9][:10])
    run_experiment(plan, tmp_path)
    assert strip_wall(tmp_path / "results.csv") == full


def test_conflicting_plan_requires_explicit_mode(tmp_path):
    run_experiment(tiny_plan(), tmp_path)
    other = tiny_plan(m_grid=[5, 10, 20])
    with pytest.raises(ConfigError):
        run_experiment(other, tmp_path)
    resumed = run_experiment(other, tmp_path, mode="resume")
    assert {r.m for r in resumed} == {5, 10, 20}
    fresh = run_experiment(tiny_plan(root_seed=4), tmp_path, mode="overwrite")
    assert all(r.seed == 4 for r in read_results(tmp_path / "results.csv"))
    assert len(fresh) == len(read_results(tmp_path / "results.csv"))
    with pytest.raises(ConfigError):
        run_experiment(tiny_plan(), tmp_path, mode="bogus")


def test_worker_count_does_not_change_results(tmp_path):
    plan = tiny_plan(picture=2)
    run_experiment(plan, tmp_path / "w1", workers=1)
    run_experiment(plan, tmp_path / "w2", workers=2)
    assert strip_wall(tmp_path / "w1" / "results.csv") == strip_wall(tmp_path / "w2" / "results.csv")
    assert (tmp_path / "w1" / "mse.csv").read_text() == (tmp_path / "w2" / "mse.csv").read_text()


def test_cells_reproducible_in_isolation():
    plan = tiny_plan()
    whole = {r.key: r.estimate for r in run_experiment(plan)}
    rows, diag = compute_cell(plan, Cell("bme_born", 8, 1, 20))
    assert diag["m"] == 20
    for r in rows:
        assert whole[r.key] == r.estimate


def test_pictures_share_datasets():
    p1, p2 = tiny_plan(picture=1), tiny_plan(picture=2)
    for trial in range(2):
        assert plan_dataset(p1, 8, trial) == plan_dataset(p2, 8, trial)
    r2 = run_experiment(tiny_plan(picture=2, estimators=["shadow"]))
    assert {r.observable for r in r2} == {"random"}
    assert len({r.ground_truth for r in r2 if r.trial == 0}) == 1


def test_single_observable_estimator_reports_all_observables():
    rows, _ = compute_cell(tiny_plan(estimators=["bme_observable_single"]), Cell("bme_observable_single", 8, 0, 20))
    assert [r.observable for r in rows] == ["canonical:0", "canonical:1", "canonical:2"]


def test_dataset_dir(tmp_path):
    for trial in range(2):
        save_dataset(simulate_dataset(8, 20, 3, trial), tmp_path / f"d8_t{trial}.bin")
    plan = tiny_plan(estimators=["shadow"], dataset_dir=str(tmp_path))
    assert [r.estimate for r in run_experiment(plan)] == [r.estimate for r in run_experiment(tiny_plan(estimators=["shadow"]))]
    with pytest.raises(ConfigError):
        run_experiment(tiny_plan(estimators=["shadow"], dims=[4], dataset_dir=str(tmp_path)))
    with pytest.raises(ConfigError):
        run_experiment(tiny_plan(estimators=["shadow"], m_grid=[5, 30], dataset_dir=str(tmp_path)))
