import itertools

import numpy as np
import pytest

from advstyle_lab.core import Tensor, backward, ops
from advstyle_lab.errors import ConfigError, ShapeError
from advstyle_lab.models import INSERTION_POINTS, MethodConfig, ModelSpec
from advstyle_lab.nn import ParameterRegistry
from advstyle_lab.nn.checkpoint import load_checkpoint, save_checkpoint
from advstyle_lab.nn.mininet import build_mininet, parameter_count, point_channels
from advstyle_lab.style import DSU, AdvStyle, MixStyle, PAdaIN

POINT_SUBSETS = [c for r in range(1, len(INSERTION_POINTS) + 1) for c in itertools.combinations(INSERTION_POINTS, r)]


def _images(spec, batch=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(batch, spec.in_channels, spec.height, spec.width))


def test_logits_shape_and_default_spec_counts():
    spec = ModelSpec()
    theta, sigma = parameter_count(spec)
    assert theta == (3 * 9 * 16 + 16) + (16 * 9 * 32 + 32) + (32 * 9 * 64 + 64) + 2 * (64 * 9 * 64 + 64) + 64 * 7 + 7
    assert sigma == 2 * (16 + 16 + 32 + 64 + 64 + 64)


@pytest.mark.parametrize("variant", ["full", "direction_only", "intensity_only"])
def test_registry_matches_closed_form(tiny_spec, variant):
    config = MethodConfig(variant=variant)
    model = build_mininet(tiny_spec, seed=0, method_config=config)
    theta, sigma = parameter_count(tiny_spec, config)
    assert model.registry.count("theta") == theta
    assert model.registry.count("sigma") == sigma
    assert len(model.registry.entries("sigma")) == 2 * len(INSERTION_POINTS)


def test_forward_shape(tiny_spec):
    model = build_mininet(tiny_spec, seed=0)
    logits = model.forward(_images(tiny_spec), "eval")
    assert logits.shape == (4, tiny_spec.num_classes)
    assert model.features(_images(tiny_spec), "eval").shape == (4, tiny_spec.widths[-1])


def test_same_seed_same_weights(tiny_spec):
    a = build_mininet(tiny_spec, seed=11).registry.snapshot()
    b = build_mininet(tiny_spec, seed=11).registry.snapshot()
    c = build_mininet(tiny_spec, seed=12).registry.snapshot()
    assert a.keys() == b.keys()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not all(np.array_equal(a[k], c[k]) for k in a)


def test_theta_identical_across_methods(tiny_spec):
    plain = build_mininet(tiny_spec.model_copy(update={"method": "none"}), seed=5).registry.snapshot("theta")
    adv = build_mininet(tiny_spec, seed=5).registry.snapshot("theta")
    assert all(np.array_equal(plain[k], adv[k]) for k in plain)


def test_zero_sigma_is_identity_in_train_mode(tiny_spec, tight_method):
    model = build_mininet(tiny_spec, seed=1, method_config=tight_method)
    x = _images(tiny_spec)
    train = model.forward(x, "train", np.random.default_rng(0)).data
    evaluated = model.forward(x, "eval").data
    np.testing.assert_allclose(train, evaluated, atol=1e-6)


def test_features_need_an_explicit_mode(tiny_spec):
    model = build_mininet(tiny_spec, seed=0)
    with pytest.raises(TypeError):
        model.features(_images(tiny_spec))


@pytest.mark.parametrize("points", POINT_SUBSETS, ids="+".join)
def test_zero_sigma_train_matches_eval_for_every_point_subset(tiny_spec, tight_method, points):
    spec = ModelSpec.model_validate({**tiny_spec.model_dump(), "insertion_points": list(points)})
    model = build_mininet(spec, seed=1, method_config=tight_method)
    assert list(model.perturbations) == list(points)
    x = _images(spec)
    train = model.forward(x, "train", np.random.default_rng(0)).data
    np.testing.assert_allclose(train, model.forward(x, "eval").data, atol=1e-6)


def test_zero_sigma_leaves_theta_gradients_unchanged(tiny_spec, tight_method):
    x = _images(tiny_spec, batch=6)
    labels = np.arange(6) % 7
    grads = {}
    for method in ("advstyle", "none"):
        model = build_mininet(
            tiny_spec.model_copy(update={"method": method}), seed=3, method_config=tight_method, dtype="float64"
        )
        model.registry.zero_grad()
        logits = model.forward(x, "train", np.random.default_rng(8))
        backward(ops.softmax_cross_entropy(logits, labels))
        grads[method] = {e.name: e.tensor.grad.copy() for e in model.registry.entries("theta")}
    assert grads["advstyle"].keys() == grads["none"].keys()
    for name, grad in grads["none"].items():
        np.testing.assert_allclose(grads["advstyle"][name], grad, rtol=1e-5, atol=1e-5, err_msg=name)


def test_eval_ignores_sigma_and_rng(tiny_spec):
    model = build_mininet(tiny_spec, seed=1)
    x = _images(tiny_spec)
    before = model.forward(x, "eval").data
    for entry in model.registry.entries("sigma"):
        entry.tensor.data = np.full(entry.tensor.shape, 3.0)
    np.testing.assert_array_equal(model.forward(x, "eval").data, before)


def test_train_mode_needs_rng_when_perturbed(tiny_spec):
    model = build_mininet(tiny_spec, seed=0)
    with pytest.raises(ValueError):
        model.forward(_images(tiny_spec), "train")
    plain = build_mininet(tiny_spec.model_copy(update={"method": "none"}), seed=0)
    assert plain.forward(_images(tiny_spec), "train").shape == (4, 7)


def test_bad_mode_rejected(tiny_spec):
    with pytest.raises(ValueError):
        build_mininet(tiny_spec, seed=0).forward(_images(tiny_spec), "test")


def test_wrong_input_shape(tiny_spec):
    model = build_mininet(tiny_spec, seed=0)
    with pytest.raises(ShapeError):
        model.forward(np.zeros((2, 3, 8, 8)), "eval")
    with pytest.raises(ShapeError):
        model.forward(np.zeros((3, 16, 16)), "eval")


def test_too_small_input_is_config_error():
    with pytest.raises(ConfigError) as info:
        build_mininet(ModelSpec(height=4, width=16), seed=0)
    assert info.value.key == "model.height"


def test_unknown_dtype_is_config_error(tiny_spec):
    with pytest.raises(ConfigError):
        build_mininet(tiny_spec, seed=0, dtype="float16")


def test_float32_model_casts_input(tiny_spec):
    model = build_mininet(tiny_spec, seed=0, dtype="float32")
    assert model.forward(_images(tiny_spec), "eval").dtype == np.float32
    assert all(e.tensor.dtype == np.float32 for e in model.registry)


@pytest.mark.parametrize(
    "method, kind", [("advstyle", AdvStyle), ("dsu", DSU), ("mixstyle", MixStyle), ("padain", PAdaIN)]
)
def test_modules_attached_only_at_enabled_points(tiny_spec, method, kind):
    spec = ModelSpec.model_validate(
        {**tiny_spec.model_dump(), "method": method, "insertion_points": ["block2", "conv1"]}
    )
    model = build_mininet(spec, seed=0)
    assert list(model.perturbations) == ["conv1", "block2"]
    assert all(isinstance(m, kind) for m in model.perturbations.values())
    expected_sigma = 2 * (point_channels(spec)["conv1"] + point_channels(spec)["block2"])
    assert model.registry.count("sigma") == (expected_sigma if method == "advstyle" else 0)


def test_none_method_has_no_perturbations(tiny_spec):
    model = build_mininet(tiny_spec.model_copy(update={"method": "none"}), seed=0)
    assert model.perturbations == {}
    assert model.sigma_norms() == {}


def test_sigma_receives_reversed_gradient(tiny_spec):
    spec = tiny_spec.model_copy(update={"insertion_points": ("block3",)})
    model = build_mininet(spec, seed=2, method_config=MethodConfig(lam=2.0), dtype="float64")
    x = _images(spec, batch=6)
    labels = np.arange(6) % 7
    with_grl = model.registry["advstyle.block3.sigma_mu"]
    with_grl.data = np.full(with_grl.shape, 0.2)
    loss = ops.softmax_cross_entropy(model.forward(x, "train", np.random.default_rng(4)), labels)
    backward(loss)
    reversed_grad = with_grl.grad.copy()

    model.registry.zero_grad()
    model.set_reverse_gradients(False)
    loss = ops.softmax_cross_entropy(model.forward(x, "train", np.random.default_rng(4)), labels)
    backward(loss)
    np.testing.assert_allclose(reversed_grad, -2.0 * with_grl.grad, rtol=1e-10, atol=1e-14)


def test_registry_rejects_duplicates():
    registry = ParameterRegistry()
    t = Tensor(np.ones(2))
    registry.register("a", t)
    with pytest.raises(ValueError):
        registry.register("a", Tensor(np.ones(2)))
    with pytest.raises(ValueError):
        registry.register("b", t)
    with pytest.raises(ValueError):
        registry.register("c", Tensor(np.ones(2)), tag="other")


def test_checkpoint_round_trip(tmp_path, tiny_spec):
    config = MethodConfig(lam=3.0, variant="intensity_only")
    model = build_mininet(tiny_spec, seed=9, method_config=config, dtype="float32")
    for entry in model.registry.entries("sigma"):
        entry.tensor.data = np.full(entry.tensor.shape, 0.25, dtype=np.float32)
    path = tmp_path / "model.advt"
    save_checkpoint(model, path)
    restored = load_checkpoint(path)
    assert restored.spec == model.spec
    assert restored.method_config == config
    assert restored.dtype_name == "float32"
    x = _images(tiny_spec)
    np.testing.assert_array_equal(restored.forward(x, "eval").data, model.forward(x, "eval").data)
    assert restored.sigma_norms() == model.sigma_norms()


def test_checkpoint_without_header(tmp_path):
    from advstyle_lab.helper.advt_utils import write_archive

    path = tmp_path / "bad.advt"
    write_archive(path, [("conv1.weight", np.zeros((1,)))])
    with pytest.raises(ConfigError):
        load_checkpoint(path)
