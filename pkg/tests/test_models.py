import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from obfuskit import _backend, _pykernels
from obfuskit.dataset import Dataset
from obfuskit.errors import ValidationError
from obfuskit.models import (
    Model,
    ModelSpec,
    SignPenalty,
    TrainConfig,
    accuracy,
    flat_loss_and_gradient,
    get_parameters,
    init_model,
    load_model,
    log_proba_input_gradient,
    loss_and_gradient,
    model_from_json,
    model_to_json,
    predict,
    predict_proba,
    save_model,
    scale_features,
    set_parameters,
    train,
)
from oracles import central_difference, naive_forward, naive_loss

SPECS = [
    ModelSpec.softmax(3, 2),
    ModelSpec.softmax(4, 3, reg_weight=0.1),
    ModelSpec.mlp(3, 3, 4, activation="relu", reg_weight=0.05),
    ModelSpec.mlp(2, 2, 5, activation="sigmoid", domain=(0, 255)),
]


def _random_model(spec, rng, scale=1.0):
    return Model(spec, rng.normal(0, scale, spec.num_parameters))


def test_group_shapes_and_count():
    spec = ModelSpec.mlp(5, 3, 4)
    names = [n for n, _ in spec.group_shapes()]
    assert names == ["layer1/weight", "layer1/bias", "layer2/weight", "layer2/bias"]
    assert spec.num_parameters == 5 * 4 + 4 + 4 * 3 + 3
    sm = ModelSpec.softmax(5, 3)
    assert [n for n, _ in sm.group_shapes()] == ["dense/weight", "dense/bias"]
    assert sm.num_parameters == 18


def test_weight_mask_excludes_biases():
    spec = ModelSpec.softmax(2, 3)
    assert spec.weight_mask().tolist() == [True] * 6 + [False] * 3


def test_params_are_views():
    spec = ModelSpec.mlp(2, 2, 3)
    m = init_model(spec, 0)
    m.params["layer1/bias"][:] = 7.0
    assert np.all(m.theta[6:9] == 7.0)


@pytest.mark.parametrize("kw,field", [
    (dict(input_dim=0, num_classes=2), "input_dim"),
    (dict(input_dim=2, num_classes=1), "num_classes"),
    (dict(input_dim=2, num_classes=2, architecture="cnn"), "architecture"),
    (dict(input_dim=2, num_classes=2, architecture="mlp", hidden_width=0), "hidden_width"),
    (dict(input_dim=2, num_classes=2, activation="tanh"), "activation"),
    (dict(input_dim=2, num_classes=2, reg_weight=-1), "reg_weight"),
    (dict(input_dim=2, num_classes=2, domain=(1, 1)), "domain"),
])
def test_spec_validation(kw, field):
    with pytest.raises(ValidationError) as exc:
        ModelSpec(**kw)
    assert exc.value.path == field


def test_init_deterministic_and_bounded():
    spec = ModelSpec.mlp(4, 3, 6)
    a, b = init_model(spec, 3), init_model(spec, 3)
    assert a == b
    assert a != init_model(spec, 4)
    assert np.abs(a.theta).max() <= 0.05


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.architecture}-{s.activation}")
def test_forward_matches_naive_loops(spec):
    rng = np.random.default_rng(0)
    m = _random_model(spec, rng)
    lo, hi = spec.domain
    X = rng.uniform(lo, hi, (5, spec.input_dim))
    got = predict_proba(m, X)
    Z = scale_features(spec, X)
    for row, z in zip(got, Z):
        want = naive_forward(m.theta, spec.input_dim, spec.num_classes, spec.hidden_width, spec.activation, z)
        np.testing.assert_allclose(row, want, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(got.sum(axis=1), 1.0)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.architecture}-{s.activation}")
def test_loss_matches_naive_loss(spec):
    rng = np.random.default_rng(1)
    m = _random_model(spec, rng)
    Z = rng.uniform(0, 1, (6, spec.input_dim))
    y = rng.integers(0, spec.num_classes, 6)
    targets = np.array([1.0, -1.0, -1.0])
    loss, _ = flat_loss_and_gradient(spec, m.theta, Z, y, targets, 2.5)
    want = naive_loss(m.theta, spec.input_dim, spec.num_classes, spec.hidden_width, spec.activation,
                      Z, y, spec.reg_weight, spec.weight_mask(), targets, 2.5)
    assert loss == pytest.approx(want, rel=1e-12)


def _fd_check(spec, seed, with_sign=False):
    rng = np.random.default_rng(seed)
    theta = rng.normal(0, 0.7, spec.num_parameters)
    Z = rng.uniform(0, 1, (int(rng.integers(1, 6)), spec.input_dim))
    y = rng.integers(0, spec.num_classes, Z.shape[0])
    targets, weight = None, 0.0
    if with_sign:
        k = min(spec.num_parameters, 4)
        targets = rng.choice([-1.0, 1.0], k)
        # keep away from the hinge kink
        theta[:k] = np.where(np.abs(theta[:k]) < 1e-3, 0.5, theta[:k])
        weight = 3.0
    _, grad = flat_loss_and_gradient(spec, theta, Z, y, targets, weight)
    fd = central_difference(lambda t: flat_loss_and_gradient(spec, t, Z, y, targets, weight)[0], theta)
    return grad, fd


def _rel_err(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.architecture}-{s.activation}")
def test_gradient_matches_finite_difference(spec, seed):
    grad, fd = _fd_check(spec, seed)
    assert _rel_err(grad, fd).max() <= 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_sign_hinge_gradient(seed):
    grad, fd = _fd_check(ModelSpec.mlp(3, 2, 3), seed, with_sign=True)
    assert _rel_err(grad, fd).max() <= 1e-4


def test_sign_hinge_pushes_zero_for_bit_zero():
    spec = ModelSpec.softmax(1, 2)
    theta = np.zeros(spec.num_parameters)
    Z = np.zeros((1, 1))
    _, g0 = flat_loss_and_gradient(spec, theta, Z, np.array([0]))
    _, g1 = flat_loss_and_gradient(spec, theta, Z, np.array([0]), np.array([-1.0]), 1.0)
    # theta = 0 reads as 1; the hinge must still push a 0-bit negative
    assert g1[0] - g0[0] == 1.0


def test_loss_and_gradient_grouped_and_validated():
    spec = ModelSpec.mlp(3, 2, 4, domain=(0, 10))
    m = init_model(spec, 0)
    loss, grads = loss_and_gradient(m, np.full((2, 3), 5.0), [0, 1])
    assert [g.shape for g in grads] == [s for _, s in spec.group_shapes()]
    assert loss > 0
    with pytest.raises(ValidationError):
        loss_and_gradient(m, np.zeros((2, 4)), [0, 1])
    with pytest.raises(ValidationError):
        loss_and_gradient(m, np.zeros((2, 3)), [0, 2])
    with pytest.raises(ValidationError):
        loss_and_gradient(m, np.zeros((0, 3)), [])


def _separable_2d():
    rng = np.random.default_rng(7)
    a = rng.uniform(0.05, 0.4, (20, 2))
    b = rng.uniform(0.6, 0.95, (20, 2))
    return Dataset(np.vstack([a, b]), np.repeat([0, 1], 20), 2, (0, 1))


def test_softmax_reaches_perfect_accuracy_on_separable_set():
    ds = _separable_2d()
    spec = ModelSpec.softmax(2, 2)
    m = train(init_model(spec, 0), ds, TrainConfig(200, 8, 0.5, 0))
    assert accuracy(m, ds) == 1.0


def test_full_batch_small_lr_loss_is_non_increasing():
    ds = _separable_2d()
    spec = ModelSpec.mlp(2, 2, 4, activation="sigmoid", reg_weight=0.01)
    losses = []
    train(init_model(spec, 1), ds, TrainConfig(60, len(ds), 0.01, 0),
          callback=lambda e, m: losses.append(loss_and_gradient(m, ds.features, ds.labels)[0]))
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_training_is_deterministic_and_does_not_mutate_input():
    ds = _separable_2d()
    spec = ModelSpec.mlp(2, 2, 3)
    m0 = init_model(spec, 2)
    before = m0.theta.copy()
    a = train(m0, ds, TrainConfig(5, 4, 0.1, 11))
    b = train(m0, ds, TrainConfig(5, 4, 0.1, 11))
    c = train(m0, ds, TrainConfig(5, 4, 0.1, 12))
    assert a == b and a != c
    assert np.array_equal(m0.theta, before)


def test_zero_epochs_returns_copy():
    ds = _separable_2d()
    m0 = init_model(ModelSpec.softmax(2, 2), 0)
    assert train(m0, ds, TrainConfig(0)) == m0


def test_train_rejects_domain_mismatch():
    ds = _separable_2d()
    with pytest.raises(ValidationError):
        train(init_model(ModelSpec.softmax(2, 2, domain=(0, 255)), 0), ds, TrainConfig(1))


def test_callback_sees_every_epoch():
    ds = _separable_2d()
    seen = []
    train(init_model(ModelSpec.softmax(2, 2), 0), ds, TrainConfig(4), callback=lambda e, m: seen.append(e))
    assert seen == [1, 2, 3, 4]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.architecture}-{s.activation}")
def test_compiled_and_python_epochs_agree(spec):
    rng = np.random.default_rng(5)
    n = 37
    Z = rng.uniform(0, 1, (n, spec.input_dim))
    y = rng.integers(0, spec.num_classes, n).astype(np.int64)
    order = rng.permutation(n).astype(np.int64)
    theta0 = rng.normal(0, 0.3, spec.num_parameters)
    targets = rng.choice([-1.0, 1.0], 5)
    act = 0 if spec.activation == "relu" else 1
    args = (Z, y, order, spec.input_dim, spec.hidden_width, spec.num_classes, act, 0.2,
            spec.reg_weight, 8, targets, 1.5)
    a, b = theta0.copy(), theta0.copy()
    _backend.sgd_epoch(a, *args)
    _pykernels.sgd_epoch(b, *args)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_backend_reports_name():
    assert _backend.NAME in ("cython", "python")


def test_predict_shapes_and_ties():
    spec = ModelSpec.softmax(2, 3)
    m = Model(spec, np.zeros(spec.num_parameters))
    assert predict(m, [0.5, 0.5]) == 0
    assert predict_proba(m, np.zeros((4, 2))).shape == (4, 3)


def test_input_gradient_matches_finite_difference():
    spec = ModelSpec.mlp(4, 3, 5, activation="sigmoid", domain=(0, 255))
    m = _random_model(spec, np.random.default_rng(3))
    x = np.random.default_rng(4).uniform(0, 255, 4)
    _, g = log_proba_input_gradient(m, x, 2)
    fd = central_difference(lambda v: log_proba_input_gradient(m, v, 2)[0], x, step=1e-3)
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-9)


def test_parameter_roundtrip():
    spec = ModelSpec.mlp(3, 2, 2)
    m = init_model(spec, 0)
    v = get_parameters(m)
    v[0] = 9.0
    assert m.theta[0] != 9.0
    assert set_parameters(m, v).theta[0] == 9.0
    with pytest.raises(ValidationError):
        set_parameters(m, v[:-1])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=True), min_size=8, max_size=8))
@example([0.0, -0.0, 5e-324, -1e6, 0.1, 1 / 3, 0.0, 0.0])
def test_json_roundtrip_is_bit_exact(values):
    spec = ModelSpec.softmax(2, 2, domain=(0, 255))
    m = Model(spec, np.array(values, dtype=np.float64)[:6])
    back = model_from_json(model_to_json(m))
    assert back.spec == spec
    assert np.array_equal(back.theta.view(np.uint64), m.theta.view(np.uint64))


def test_save_load(tmp_path):
    m = init_model(ModelSpec.mlp(3, 2, 4, activation="sigmoid"), 9)
    path = tmp_path / "m.json"
    save_model(m, path)
    assert load_model(path) == m


def test_json_rejects_wrong_groups():
    m = init_model(ModelSpec.softmax(2, 2), 0)
    text = model_to_json(m).replace("dense/bias", "dense/other")
    with pytest.raises(ValidationError):
        model_from_json(text)


def test_sign_penalty_validation():
    with pytest.raises(ValidationError):
        SignPenalty([0, 2], 1.0)
    with pytest.raises(ValidationError):
        SignPenalty([0, 1], 0.0)
    assert SignPenalty([1, 0], 1.0).targets().tolist() == [1.0, -1.0]
