import csv
import math

import numpy as np
import pytest

from casmart.objectives import (FATIGUE_FEATURES, CapacityError, SchemaError, demo_1d, griewank, load_table,
                                make_objective, six_hump, synth_table)


def test_six_hump_values():
    assert six_hump([0.0, 0.0]) == 0.0
    assert six_hump([1.3, -0.4]) == six_hump([-1.3, 0.4])
    with pytest.raises(ValueError):
        six_hump([3.5, 0.0])
    with pytest.raises(ValueError):
        six_hump([0.0, 0.0, 0.0])


def test_six_hump_global_minimum_grid_search():
    x1, x2 = np.meshgrid(np.linspace(-3, 3, 2001), np.linspace(-2, 2, 2001), indexing="ij")
    f = (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2
    i = np.unravel_index(np.argmin(f), f.shape)
    assert f[i] == pytest.approx(-1.0316, abs=1e-3)
    assert abs(abs(x1[i]) - 0.0898) < 5e-3 and abs(abs(x2[i]) - 0.7126) < 5e-3
    assert np.sign(x1[i]) == -np.sign(x2[i])
    assert six_hump([0.0898, -0.7126]) == pytest.approx(-1.0316, abs=1e-4)


def test_griewank_values():
    assert griewank(np.zeros(5)) == 0.0
    x = np.full(5, 600.0)
    expected = 1.0 + 5 * 600.0**2 / 4000.0 - math.prod(math.cos(600.0 / math.sqrt(i)) for i in range(1, 6))
    assert griewank(x) == pytest.approx(expected, abs=1e-10)
    e1, e2 = np.zeros(5), np.zeros(5)
    e1[0], e2[1] = 100.0, 100.0
    assert griewank(e1) != griewank(e2)
    with pytest.raises(ValueError):
        griewank(np.full(5, 601.0))


def test_demo_function():
    assert demo_1d(0.0) == 0.0
    assert demo_1d(math.pi / 10) == pytest.approx(-1.0, abs=1e-12)
    rng = np.random.default_rng(0)
    draws = np.array([demo_1d(0.7, rng) for _ in range(10**4)]) - demo_1d(0.7)
    assert draws.std() == pytest.approx(0.05, rel=0.05)


def test_make_objective():
    sh = make_objective("six-hump")
    assert sh.test_points.shape == (1024, 2)
    X, y = sh.test_set()
    assert y[3] == six_hump(X[3])
    assert make_objective("griewank").test_points.shape == (4096, 5)
    demo = make_objective("demo-1d")
    assert demo.noise_std == 0.05 and demo.test_points.shape == (301, 1)
    assert demo([0.0]) == 0.0
    with pytest.raises(ValueError):
        make_objective("rosenbrock")


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def test_load_table_counts_and_drops(tmp_path, caplog):
    t = synth_table(437, seed=1)
    path = tmp_path / "t.csv"
    t.write_csv(path)
    loaded = load_table(path)
    assert loaded.n == 437
    np.testing.assert_array_equal(loaded.X, t.X)
    np.testing.assert_array_equal(loaded.y, t.y)
    rows = [[*map(str, t.X[i]), str(t.y[i])] for i in range(5)]
    rows[2][2] = ""
    _write(tmp_path / "gap.csv", [*FATIGUE_FEATURES, "FS"], rows)
    with caplog.at_level("WARNING"):
        assert load_table(tmp_path / "gap.csv").n == 4
    assert "dropping" in caplog.text


def test_load_table_schema_error(tmp_path):
    _write(tmp_path / "bad.csv", list(FATIGUE_FEATURES), [["1"] * 6])
    with pytest.raises(SchemaError):
        load_table(tmp_path / "bad.csv")


def test_splits_disjoint_and_deterministic():
    t = synth_table(437)
    s1 = {k: v.copy() for k, v in t.split(25, 350, seed=4).items()}
    s2 = t.split(25, 350, seed=4)
    for k in s1:
        np.testing.assert_array_equal(s1[k], s2[k])
    assert [len(s1[k]) for k in ("initial", "candidate", "test")] == [25, 350, 62]
    all_idx = np.concatenate(list(s1.values()))
    assert len(np.unique(all_idx)) == 437
    with pytest.raises(CapacityError):
        t.split(100, 350, seed=0)


def test_pool_objective_lookup():
    t = synth_table(60)
    t.split(5, 40, seed=0)
    obj = t.objective()
    space = obj.space
    assert len(space.available) == 40 and len(space.init_indices) == 5
    row = t.splits["candidate"][3]
    assert obj(t.X[row]) == t.y[row]
    X, y = obj.test_set()
    assert len(y) == 15
    with pytest.raises(ValueError):
        obj(np.full(6, -1.0))


def test_synthetic_table_properties():
    a, b = synth_table(), synth_table()
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.n == 437
    r = [abs(np.corrcoef(a.X[:, j], a.y)[0, 1]) for j in range(6)]
    assert sum(v > 0.2 for v in r) >= 3
