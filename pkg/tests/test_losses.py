import numpy as np
import pytest

from gossipgrad.losses import (
    LossError,
    LossModel,
    Sample,
    batch_grad,
    batch_loss,
    finite_difference_check,
    loss,
    prediction_error,
    subgradient,
)


def models():
    return [
        LossModel(kind="logistic", d=4),
        LossModel(kind="hinge_svm", d=4, lam=0.1),
        LossModel(kind="lasso", d=4, lam=0.05),
        LossModel(kind="multinomial", d=4, n_classes=3),
        LossModel(kind="multinomial", d=4, n_classes=3, bias=True),
    ]


def random_sample(model, rng):
    x = rng.normal(size=model.d)
    if model.kind == "multinomial":
        y = float(rng.integers(model.n_classes))
    elif model.kind == "lasso":
        y = float(rng.normal())
    else:
        y = float(rng.integers(2))
    return Sample(x=x, y=y)


def test_hinge_at_zero():
    m = LossModel(kind="hinge_svm", d=3)
    v = Sample(x=np.array([1.0, 2.0, -1.0]), y=1)
    assert loss(m, np.zeros(3), v) == pytest.approx(1.0)


def test_lasso_at_zero():
    m = LossModel(kind="lasso", d=3)
    v = Sample(x=np.array([1.0, 0.0, 0.0]), y=2.0)
    assert loss(m, np.zeros(3), v) == pytest.approx(2.0)


def test_multinomial_uniform_loss():
    m = LossModel(kind="multinomial", d=5, n_classes=10)
    v = Sample(x=np.ones(5), y=3)
    assert loss(m, m.init_params(), v) == pytest.approx(np.log(10))


def test_hinge_subgradient_margin_tie_break():
    # margin is exactly 1 at beta = 0; treated as active
    m = LossModel(kind="hinge_svm", d=2)
    v = Sample(x=np.array([1.0, 2.0]), y=1)
    assert np.allclose(subgradient(m, np.zeros(2), v), [-1.0, -2.0])


def test_lasso_subgradient_at_zero():
    m = LossModel(kind="lasso", d=2)
    v = Sample(x=np.array([1.0, 0.0]), y=3.0)
    assert np.allclose(subgradient(m, np.zeros(2), v), [-3.0, 0.0])


def test_multinomial_subgradient_at_zero():
    m = LossModel(kind="multinomial", d=1, n_classes=2)
    v = Sample(x=np.array([1.0]), y=0)
    g = subgradient(m, m.init_params(), v)
    assert np.allclose(g, [[-0.5, 0.5]])


def test_dimension_mismatch_rejected():
    m = LossModel(kind="lasso", d=3)
    with pytest.raises(LossError):
        loss(m, np.zeros(4), Sample(x=np.zeros(3), y=0.0))
    with pytest.raises(LossError):
        loss(m, np.zeros(3), Sample(x=np.zeros(2), y=0.0))


def test_label_out_of_range_rejected():
    m = LossModel(kind="multinomial", d=2, n_classes=3)
    with pytest.raises(LossError):
        loss(m, m.init_params(), Sample(x=np.zeros(2), y=3))


def test_finite_differences_all_models():
    rng = np.random.default_rng(0)
    for model in models():
        worst = 0.0
        for _ in range(100):
            beta = rng.normal(size=model.param_shape)
            v = random_sample(model, rng)
            worst = max(worst, finite_difference_check(model, beta, v, 1e-6))
        assert worst <= 1e-5, f"{model.kind}: fd error {worst}"


def test_convexity_along_segments():
    rng = np.random.default_rng(1)
    for model in models():
        for _ in range(50):
            b1 = rng.normal(size=model.param_shape)
            b2 = rng.normal(size=model.param_shape)
            t = rng.random()
            v = random_sample(model, rng)
            lhs = loss(model, t * b1 + (1 - t) * b2, v)
            rhs = t * loss(model, b1, v) + (1 - t) * loss(model, b2, v)
            assert lhs <= rhs + 1e-9


def test_subgradient_inequality():
    # validates subgradients globally, including at kinks
    rng = np.random.default_rng(2)
    for model in models():
        for _ in range(50):
            b1 = rng.normal(size=model.param_shape)
            b2 = rng.normal(size=model.param_shape)
            v = random_sample(model, rng)
            g = subgradient(model, b1, v)
            lower = loss(model, b1, v) + float((g * (b2 - b1)).sum())
            assert loss(model, b2, v) >= lower - 1e-9


def test_multinomial_probabilities_and_nonnegativity():
    rng = np.random.default_rng(3)
    m = LossModel(kind="multinomial", d=6, n_classes=4)
    from gossipgrad.losses import _softmax

    for _ in range(20):
        beta = rng.normal(size=m.param_shape)
        x = rng.normal(size=m.d)
        p = _softmax(x @ beta)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert loss(m, beta, Sample(x=x, y=1)) >= 0.0


def test_batch_matches_per_sample():
    rng = np.random.default_rng(4)
    for model in models():
        beta = rng.normal(size=model.param_shape)
        samples = [random_sample(model, rng) for _ in range(30)]
        X = np.array([s.x for s in samples])
        y = np.array([s.y for s in samples])
        mean_loss = np.mean([loss(model, beta, s) for s in samples])
        assert batch_loss(model, beta, X, y) == pytest.approx(mean_loss, rel=1e-12)
        mean_grad = np.mean([subgradient(model, beta, s) for s in samples], axis=0)
        assert np.allclose(batch_grad(model, beta, X, y), mean_grad, atol=1e-12)


def test_prediction_error_bounds():
    rng = np.random.default_rng(5)
    m = LossModel(kind="multinomial", d=3, n_classes=3)
    X = rng.normal(size=(50, 3))
    y = rng.integers(3, size=50)
    err = prediction_error(m, rng.normal(size=m.param_shape), X, y)
    assert 0.0 <= err <= 1.0


def test_invalid_model_construction():
    with pytest.raises(LossError):
        LossModel(kind="nope", d=2)
    with pytest.raises(LossError):
        LossModel(kind="lasso", d=2, lam=-1.0)
    with pytest.raises(LossError):
        LossModel(kind="multinomial", d=2, n_classes=1)
