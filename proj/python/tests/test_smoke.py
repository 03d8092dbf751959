import json
import math

import numpy as np
import pytest

import kinex


def test_closed_run_conserves_money():
    snaps = kinex.simulate(agents=500, total_money=5e4, seed=7, sweeps=50, model="CC", lam=0.5, snapshot_every=10)
    assert [s["sweep"] for s in snaps] == [0, 10, 20, 30, 40, 50]
    final = snaps[-1]["incomes"]
    assert isinstance(final, np.ndarray)
    assert final.shape == (500,)
    assert abs(final.sum() - 5e4) <= 1e-9 * 5e4
    assert (final >= 0).all()


def test_runs_are_deterministic():
    a = kinex.simulate(agents=200, total_money=2e4, seed=3, sweeps=20, model="CCM")
    b = kinex.simulate(agents=200, total_money=2e4, seed=3, sweeps=20, model="CCM")
    assert np.array_equal(a[-1]["incomes"], b[-1]["incomes"])


def test_exchange_pair_conserves():
    xi, xj = kinex.exchange_pair(10.0, 20.0, 0.0, 0.0, 0.25)
    assert xi == pytest.approx(7.5)
    assert xj == pytest.approx(22.5)


def test_scenario_from_dict():
    config = {
        "agents": 300,
        "total_money": 3e4,
        "seed": 5,
        "model": {"type": "CC", "lambda": 0.5},
        "sweeps": 40,
        "snapshot_every": 20,
        "schedule": [{"at_sweep": 20, "op": "inflation", "rate": 0.5}],
    }
    snaps, events = kinex.run_scenario(config)
    assert [e["op"] for e in events] == ["inflation"]
    assert [s["after_event"] for s in snaps] == [False, False, True, False]
    assert snaps[-1]["total_money"] == pytest.approx(4.5e4, rel=1e-9)


def test_analysis_examples():
    x, q = kinex.ccdf([1, 2, 3])
    assert list(x) == [1, 2, 3]
    assert q == pytest.approx([1, 2 / 3, 1 / 3])
    assert kinex.gini([1, 3]) == pytest.approx(0.25)
    assert kinex.gini([100, 0, 0, 0]) == pytest.approx(0.75)
    grid, ratios = kinex.relative_ccdf([0, 2, 3, 4], [1, 2, 3, 4])
    assert ratios == pytest.approx([0.75, 1, 1, 1])
    assert kinex.ks_distance([1], [2]) == 1.0
    assert kinex.count_modes([1, 3, 1, 4, 1], min_prominence=0.1, smoothing_window=1) == 2
    edges, dens, zero = kinex.pdf_histogram([0, 0, 1], bins=4)
    assert zero == pytest.approx(2 / 3)
    assert float(np.sum(dens * np.diff(edges))) == pytest.approx(1.0)


def test_tail_fits():
    e = math.e
    assert kinex.fit_hill([e, e, e], 1.0)["alpha"] == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    sample = (1.0 - rng.random(20000)) ** (-1 / 2.0)
    fit = kinex.fit_tail(sample, xmin="top-fraction", q=0.5)
    assert abs(fit["alpha"] - 2.0) < 0.1
    assert fit["method"] == "hill"


def test_errors_carry_the_kind():
    with pytest.raises(kinex.KinexError, match="insufficient-tail"):
        kinex.fit_tail([5.0])
    with pytest.raises(ValueError):
        kinex.gini([0, 0])


def test_ingest_and_cli(tmp_path):
    table = tmp_path / "incomes.csv"
    table.write_text("period,income\nA,1\nA,2\nB,0\nB,2\n")
    groups, report = kinex.read_income_table(str(table))
    assert [g["label"] for g in groups] == ["A", "B"]
    assert report["rows_kept"] == 4

    code, out, err = kinex.cli(["analyze", "gini", str(table), "--group", "A"])
    assert code == 0
    assert out.startswith("t,G")

    config = tmp_path / "run.json"
    config.write_text(json.dumps({"agents": 50, "total_money": 5000, "seed": 1, "model": {"type": "DY"}, "sweeps": 5}))
    code, _, err = kinex.cli(["simulate", str(config), "-o", str(tmp_path / "out")])
    assert code == 0, err
    assert (tmp_path / "out" / "manifest.json").exists()
    assert kinex.cli([])[0] == 2
