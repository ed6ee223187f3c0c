"""
Tests for networks, kernel ridge and command teachers, and the teacher oracle
"""
import sys

import numpy as np
import pytest

from src.errors import CapabilityError, InvalidArgumentError
from src.models import (CommandPredictor, GeneratorSpec, MlpSpec, RbfNet, RbfStudentSpec, TeacherOracle,
                        build_generator, build_mlp, build_rbf, krr_fit, linear_model)
from src.tensor import GradTape, Tensor2, sum_all


def test_mlp_parameter_count():
    model = build_mlp(MlpSpec(10, [500]), seed=0)
    assert model.num_params == 10 * 500 + 500 + 500 + 1
    assert model.predict(np.zeros((4, 10))).shape == (4, 1)


def test_mlp_biases_start_at_zero():
    model = build_mlp(MlpSpec(3, [4, 2]), seed=0)
    for bias in model.weights[1::2]:
        assert not bias.any()


def test_same_seed_same_weights():
    a = build_mlp(MlpSpec(3, [4]), seed=5)
    b = build_mlp(MlpSpec(3, [4]), seed=5)
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())


def test_flat_round_trip(small_mlp):
    vector = np.arange(small_mlp.num_params, dtype=np.float64)
    small_mlp.set_flat(vector)
    np.testing.assert_array_equal(small_mlp.get_flat(), vector)
    with pytest.raises(InvalidArgumentError):
        small_mlp.set_flat(vector[:-1])


def test_copy_is_independent(small_mlp):
    twin = small_mlp.copy()
    twin.set_flat(np.zeros(twin.num_params))
    assert small_mlp.get_flat().any()


def test_batch_width_checked(small_mlp):
    with pytest.raises(InvalidArgumentError):
        small_mlp.predict(np.zeros((2, 4)))


def test_linear_model():
    np.testing.assert_allclose(linear_model(2.0, 1.0).predict([[1.0], [3.0]]), [[3.0], [7.0]])


def test_invalid_specs():
    with pytest.raises(InvalidArgumentError):
        MlpSpec(0, [5])
    with pytest.raises(InvalidArgumentError):
        MlpSpec(2, [5], activation="sigmoid")
    with pytest.raises(InvalidArgumentError):
        RbfStudentSpec(3, centers=0)


def test_generator_shapes():
    generator = build_generator(GeneratorSpec(output_dim=6), seed=1)
    assert generator.latent_dim == 10
    assert generator.hidden == [128]
    assert generator.predict(np.zeros((5, 10))).shape == (5, 6)


def test_rbf_activations_peak_at_centers():
    centers = np.array([[0.0, 0.0], [3.0, 3.0]])
    model = build_rbf(RbfStudentSpec(2, 2), seed=0, centers=centers)
    responses = model.hidden_activations(centers)
    np.testing.assert_allclose(np.diag(responses), [1.0, 1.0])
    assert responses[0, 1] < 1e-3


def test_rbf_unit_at_its_center_outputs_one():
    model = RbfNet(np.zeros((1, 2)), np.zeros(1), np.ones(1), np.zeros(1))
    assert model.predict([[0.0, 0.0]])[0, 0] == 1.0


def test_rbf_activations_in_unit_interval(rng):
    model = build_rbf(RbfStudentSpec(3, 6), seed=2)
    responses = model.hidden_activations(rng.normal(scale=3.0, size=(200, 3)))
    assert np.all(responses > 0.0) and np.all(responses <= 1.0)
    far = model.hidden_activations(model.weights[0][:1] + np.array([[100.0, 0.0, 0.0]]))
    assert far[0, 0] <= 1e-300


def test_rbf_centers_shape_checked():
    with pytest.raises(InvalidArgumentError):
        build_rbf(RbfStudentSpec(2, 3), seed=0, centers=np.zeros((2, 2)))


def test_krr_without_ridge_interpolates():
    X = np.array([[i, j] for i in range(4) for j in range(4)], dtype=float)
    y = np.sin(X[:, 0]) + X[:, 1]
    model = krr_fit(X, y, sigma=0.5, ridge=0.0)
    np.testing.assert_allclose(model.predict(X)[:, 0], y, rtol=0.0, atol=1e-8)


def test_krr_single_point():
    assert krr_fit([[0.0]], [1.0], sigma=1.0, ridge=0.0).predict([[0.0]])[0, 0] == 1.0
    assert krr_fit([[0.0]], [1.0], sigma=1.0, ridge=1.0).predict([[0.0]])[0, 0] == 0.5


def test_krr_zero_targets(rng):
    model = krr_fit(rng.normal(size=(6, 2)), np.zeros(6), sigma=1.0, ridge=1e-3)
    assert np.all(model.dual_coef == 0.0)
    assert np.all(model.predict(rng.normal(size=(4, 2))) == 0.0)


def test_krr_rejects_bad_arguments(rng):
    with pytest.raises(InvalidArgumentError):
        krr_fit(rng.normal(size=(5, 2)), np.zeros(4))
    with pytest.raises(InvalidArgumentError):
        krr_fit(rng.normal(size=(5, 2)), np.zeros(5), sigma=0.0)


def test_oracle_capabilities(small_mlp, rng):
    X = rng.normal(size=(10, 3))
    krr = TeacherOracle(krr_fit(X, X[:, 0]))
    net = TeacherOracle(small_mlp)
    assert net.gradient_capable and not krr.gradient_capable
    assert net.model is small_mlp
    with pytest.raises(CapabilityError):
        krr.model
    tape = GradTape()
    with pytest.raises(CapabilityError):
        krr.forward(tape.watch(X[:2]))
    np.testing.assert_allclose(krr.forward(Tensor2(X[:2])).data, krr.predict(X[:2]))


def test_oracle_gradient_flows_to_input(doubling_teacher):
    tape = GradTape()
    x = tape.watch([[1.0], [2.0]])
    grad = tape.gradient(sum_all(TeacherOracle(doubling_teacher).forward(x)), x)
    np.testing.assert_allclose(grad, [[2.0], [2.0]])


def test_command_teacher(tmp_path):
    script = tmp_path / "teacher.py"
    script.write_text("import sys\nfor line in sys.stdin:\n    print(sum(float(v) for v in line.split(',')))\n")
    teacher = CommandPredictor([sys.executable, str(script)], input_dim=2)
    np.testing.assert_allclose(teacher.predict([[1.0, 2.0], [0.5, 0.25]]), [[3.0], [0.75]])
    assert not TeacherOracle(teacher).gradient_capable
