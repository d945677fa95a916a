import os

import numpy as np
import pytest

import menn

DATA = os.environ.get("MENN_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


def test_gaussian_kernel_and_gram():
    spec = menn.KernelSpec("gaussian", width=0.5)
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    k = menn.build_gram(spec, x)
    assert k.shape == (3, 3)
    assert np.allclose(np.diag(k), 1.0)
    assert k[0, 1] == pytest.approx(np.exp(-0.5))
    assert menn.eval_kernel(spec, x[0], x[2]) == pytest.approx(np.exp(-2.0))


def test_bad_kernel_raises():
    with pytest.raises(ValueError):
        menn.KernelSpec("gaussian", width=-1.0)
    with pytest.raises(ValueError):
        menn.KernelSpec("sigmoid")


def test_solve_separates_blobs():
    x, y = menn.make_blobs(8, 2, 8.0, seed=1)
    k = menn.build_gram(menn.KernelSpec("gaussian", width=0.1), x)
    config = menn.SolverConfig()
    config.eta = 1.0 / (len(y) * 0.01)
    model = menn.solve(k, y, config)
    c = model.cbar
    assert np.allclose(c, c.T)
    assert abs(c.sum()) <= 1e-6 * max(1.0, np.trace(c))
    assert np.linalg.eigvalsh(c).min() >= -1e-6 * max(1.0, np.linalg.eigvalsh(c).max())
    assert model.objective == pytest.approx(menn.objective(k, y, c, model.eps, config.eta))
    d = menn.learned_distances(k, c)
    assert menn.loo_error(d, y, model.eps) == 0.0
    assert menn.knn_loo_error(d, y, 3) == 0.0


def test_subgradient_method_is_selectable():
    x, y = menn.make_blobs(5, 2, 4.0, seed=2)
    k = menn.build_gram(menn.KernelSpec("linear"), x)
    config = menn.SolverConfig()
    config.method = menn.SolverMethod.SUBGRADIENT
    config.max_iters = 200
    model = menn.solve(k, y, config)
    assert model.iterations <= 200
    assert model.objective <= menn.objective(k, y, np.zeros_like(k), 1.0, config.eta) + 1e-9


def test_model_round_trip(tmp_path):
    x, y = menn.make_blobs(6, 2, 5.0, seed=3)
    k = menn.build_gram(menn.KernelSpec("gaussian", width=0.3), x)
    model = menn.solve(k, y)
    path = str(tmp_path / "model.txt")
    menn.save_model(path, model)
    back = menn.load_model(path)
    assert np.allclose(back.cbar, model.cbar, rtol=0, atol=1e-15)
    assert back.eps == model.eps


def test_transductive_fixed_point():
    y = [0, 0, 1, 1, 2, 2]
    t = menn.learn_kernel_transductive(y, 1e-6)
    assert abs(t.eps - 1.0) <= 0.05
    d = np.add.outer(np.diag(t.gram), np.diag(t.gram)) - 2 * t.gram
    assert menn.loo_error(d, y, t.eps) == 0.0


def test_mkl_history_is_monotone():
    x, y = menn.make_blobs(4, 2, 3.0, seed=4)
    grams = [menn.build_gram(menn.KernelSpec("gaussian", width=w), x) for w in (0.1, 1.0)]
    m = menn.learn_kernel_combination_qp(grams, y, 0.1, max_iters=500)
    assert (m.beta >= 0).all()
    assert all(b <= a for a, b in zip(m.history, m.history[1:]))


def test_eucl_experiment_on_iris():
    report = menn.run_experiment(os.path.join(DATA, "iris.csv"), algorithms=["eucl-nn"], runs=2)
    lines = report.strip().splitlines()
    assert lines[0] == "dataset,algorithm,run,metric,value"
    test_errors = [float(l.split(",")[-1]) for l in lines if ",test_error," in l]
    assert len(test_errors) == 2
    assert all(0.0 <= e <= 0.2 for e in test_errors)
