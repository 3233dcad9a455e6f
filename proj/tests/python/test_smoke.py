import json
import os
from pathlib import Path

import numpy as np
import pytest

import l0qsvm

DATA = Path(os.environ.get("L0QSVM_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_hvec_round_trip():
    a = np.array([[1.0, 2.0], [2.0, 3.0]])
    np.testing.assert_array_equal(l0qsvm.hvec(a), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(l0qsvm.unhvec(l0qsvm.hvec(a), 2), a)
    ld = l0qsvm.elimination_matrix(4) @ l0qsvm.duplication_matrix(4)
    np.testing.assert_array_equal(ld, np.eye(10))


def test_hard_threshold():
    np.testing.assert_array_equal(l0qsvm.hard_threshold(np.array([3.0, -1.0, 2.0]), 2), [3.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        l0qsvm.hard_threshold(np.array([1.0, 2.0]), 3)


def test_ellipse_model():
    x, labels = l0qsvm.make_ellipse(200, 0.1, 7)
    y = np.where(np.array(labels) == "1", 1.0, -1.0)
    model = l0qsvm.train_binary(x, y, C=100.0, k=3)
    assert model.nonzeros() <= 3
    np.testing.assert_array_equal(model.predict(x), y)
    w = model.W
    assert np.sum(np.diag(w) ** 2) / np.sum(w**2) >= 0.95
    back = l0qsvm.QuadraticSurfaceModel.from_json(model.to_json())
    np.testing.assert_array_equal(back.decision_values(x), model.decision_values(x))


def test_penalty_decompose_result():
    x, labels = l0qsvm.make_ellipse(100, 0.1, 3)
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    y = np.where(np.array(labels) == "1", 1.0, -1.0)
    res = l0qsvm.penalty_decompose(x, y, loss="ls", C=10.0, k=3)
    assert res.converged
    assert np.count_nonzero(res.z) <= 3
    assert res.report.is_lu_zhang
    assert res.trace.splitlines()[0] == "outer,inner,rho,q,z_minus_u_inf,safeguard"


def test_iris_ovr_and_errors():
    x, labels, names = l0qsvm.load_csv(str(DATA / "iris.csv"), "species")
    assert x.shape == (150, 4)
    assert names == ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    model = l0qsvm.train_ovr(x, labels, loss="ls", C=10.0, k=4)
    assert model.classes == ["setosa", "versicolor", "virginica"]
    assert l0qsvm.accuracy(model.predict(x), labels) > 0.9
    doc = json.loads(model.to_json())
    assert doc["type"] == "ovr"
    assert l0qsvm.OvRModel.from_json(model.to_json()).predict(x) == model.predict(x)

    with pytest.raises(l0qsvm.L0QSVMError):
        l0qsvm.load_csv(str(DATA / "iris.csv"), "missing")
    with pytest.raises(l0qsvm.ConvergenceError):
        l0qsvm.train_ovr(x, labels, k=2, max_outer=1, eps_outer=1e-14)


def test_cross_validate():
    out = l0qsvm.cross_validate(str(DATA / "iris.csv"), "species", loss="ls", trials=3, seed=1)
    assert len(out["fold_accuracy"]) == 5
    assert out["mean"] == pytest.approx(np.mean(out["fold_accuracy"]), abs=1e-12)
    assert out["std"] == pytest.approx(np.std(out["fold_accuracy"]), abs=1e-12)
