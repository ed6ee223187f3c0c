"""
Tests for the generator loss, direct optimization and generator rounds
"""
import numpy as np
import pytest

from src.errors import CapabilityError, InvalidArgumentError
from src.models import GeneratorSpec, Mlp, MlpSpec, build_generator, build_mlp, krr_fit, linear_model
from src.optim import OptimizerState
from src.systems.sampling import SamplerSpec, sample
from src.systems.synthesis import (GenLossSpec, OptimizeSpec, direct_optimize, gen_loss, gen_loss_and_grad,
                                   generator_loss, generator_round)

DISCREPANCY_ONLY = GenLossSpec(epsilon=1.0, beta=0.0, gamma=0.0)


def constant_model(value, d=1):
    return Mlp([d, 1], "tanh", [np.zeros((d, 1)), np.array([[value]])])


def test_pure_discrepancy():
    assert gen_loss(DISCREPANCY_ONLY, [[0.3]], constant_model(1.0), constant_model(0.0)) == -1.0


def test_input_penalty_added():
    spec = GenLossSpec(epsilon=1.0, beta=1e-5, gamma=0.0)
    value = gen_loss(spec, [[2.0, 0.0]], constant_model(1.0, 2), constant_model(0.0, 2))
    assert value == pytest.approx(-1.0 + 4e-5, abs=1e-15)


def test_teacher_to_random_target():
    spec = GenLossSpec(epsilon=0.0, beta=0.0, output_penalty="teacher-to-random", gamma=1.0, y_rand="integer")
    value = gen_loss(spec, [[0.0]], constant_model(3.2), constant_model(0.0), y_rand=3.0)
    assert value == pytest.approx(0.04, abs=1e-12)


def test_random_target_drawn_from_policy(rng):
    spec = GenLossSpec(epsilon=0.0, beta=0.0, output_penalty="teacher-to-random", gamma=1.0, y_rand="integer")
    targets = {spec.draw_target(rng) for _ in range(200)}
    assert targets == set(float(v) for v in range(10))
    real = GenLossSpec(epsilon=0.0, beta=0.0, output_penalty="teacher-to-random", gamma=1.0, y_rand="real")
    assert all(0.0 <= real.draw_target(rng) <= 1.0 for _ in range(50))


def test_student_output_penalty():
    spec = GenLossSpec(epsilon=0.0, beta=0.0, output_penalty="student-squared", gamma=0.5)
    assert gen_loss(spec, [[1.0]], constant_model(0.0), constant_model(2.0)) == pytest.approx(2.0)


def test_input_squared_switch():
    spec = GenLossSpec(epsilon=0.0, beta=0.0, output_penalty="input-squared", gamma=2.0)
    assert gen_loss(spec, [[1.0, 1.0]], constant_model(0.0, 2), constant_model(0.0, 2)) == pytest.approx(4.0)


def test_l1_penalty_and_logcosh():
    spec = GenLossSpec(discrepancy="logcosh", epsilon=1.0, input_penalty="l1", beta=1.0, gamma=0.0)
    value = gen_loss(spec, [[-2.0]], constant_model(1.0), constant_model(0.0))
    assert value == pytest.approx(-np.log(np.cosh(1.0)) + 2.0)


def test_loss_spec_invariants():
    with pytest.raises(InvalidArgumentError):
        GenLossSpec(epsilon=0.0, beta=0.0, gamma=0.0)
    with pytest.raises(InvalidArgumentError):
        GenLossSpec(output_penalty="teacher-to-random", y_rand="none")
    with pytest.raises(InvalidArgumentError):
        GenLossSpec(output_penalty="student-squared", y_rand="integer")
    with pytest.raises(InvalidArgumentError):
        GenLossSpec(beta=-1.0)


def test_optimize_spec_invariants():
    with pytest.raises(InvalidArgumentError):
        OptimizeSpec(steps=-1)
    with pytest.raises(InvalidArgumentError):
        OptimizeSpec(f=2.5)
    with pytest.raises(InvalidArgumentError):
        OptimizeSpec(cr=1.5)
    with pytest.raises(InvalidArgumentError):
        OptimizeSpec(strategy="rand1bin")


def test_gradient_through_gradient_free_teacher(rng):
    X = rng.normal(size=(10, 1))
    krr = krr_fit(X, X[:, 0])
    with pytest.raises(CapabilityError):
        gen_loss_and_grad(DISCREPANCY_ONLY, [[0.5]], krr, linear_model(1.0))
    # value alone is fine
    gen_loss(DISCREPANCY_ONLY, [[0.5]], krr, linear_model(1.0))


def test_no_steps_returns_start_bitwise(small_mlp, rng):
    x0 = rng.normal(size=(4, 3))
    for method in ("gd", "rmsprop", "differential-evolution"):
        opt = OptimizeSpec(method, steps=0, iterations=0)
        x, trace = direct_optimize(x0, small_mlp, small_mlp.copy(), DISCREPANCY_ONLY, opt, rng)
        np.testing.assert_array_equal(x, x0)
        assert len(trace.steps) == 1


def test_gradient_descent_analytic_trace(doubling_teacher, identity_student, rng):
    opt = OptimizeSpec("gd", lr=0.1, steps=2)
    x, trace = direct_optimize([[1.0]], doubling_teacher, identity_student, DISCREPANCY_ONLY, opt, rng)
    points = [p[0, 0] for p in trace.points]
    np.testing.assert_allclose(points, [1.0, 1.2, 1.44], atol=1e-12)
    assert x[0, 0] == pytest.approx(1.44, abs=1e-12)
    np.testing.assert_allclose(trace.losses, [-1.0, -1.44, -1.44 ** 2], atol=1e-12)


def test_pure_penalty_step(rng):
    spec = GenLossSpec(epsilon=0.0, beta=1.0, gamma=0.0)
    same = linear_model(1.0)
    x, _ = direct_optimize([[1.0]], same, same, spec, OptimizeSpec("gd", lr=0.1, steps=1), rng)
    assert x[0, 0] == pytest.approx(0.8, abs=1e-12)


def test_rmsprop_direct_moves_uphill_in_discrepancy(doubling_teacher, identity_student, rng):
    x, trace = direct_optimize([[1.0]], doubling_teacher, identity_student, DISCREPANCY_ONLY,
                               OptimizeSpec("rmsprop", lr=0.1, steps=2), rng)
    assert x[0, 0] > 1.0
    assert trace.losses[-1] < trace.losses[0]


def test_gradient_methods_need_teacher_gradients(rng):
    X = rng.normal(size=(10, 1))
    krr = krr_fit(X, X[:, 0])
    with pytest.raises(CapabilityError):
        direct_optimize([[0.0]], krr, linear_model(1.0), DISCREPANCY_ONLY, OptimizeSpec("gd"), rng)


def test_differential_evolution_with_black_box_teacher(rng):
    X = rng.normal(size=(40, 2))
    krr = krr_fit(X, np.sin(X[:, 0]) * X[:, 1])
    student = build_mlp(MlpSpec(2, [4]), seed=0)
    x0 = rng.normal(size=(6, 2))
    opt = OptimizeSpec("differential-evolution", iterations=10, population=8)
    x, trace = direct_optimize(x0, krr, student, DISCREPANCY_ONLY, opt, rng)
    assert x.shape == x0.shape
    assert np.all(np.diff(trace.losses) <= 1e-12)
    assert trace.losses[-1] <= gen_loss(DISCREPANCY_ONLY, x0, krr, student)


def test_differential_evolution_elitist_with_greedy_mutation(small_mlp, rng):
    teacher = build_mlp(MlpSpec(3, [5]), seed=99)
    opt = OptimizeSpec("differential-evolution", f=0.0, cr=1.0, iterations=5)
    _, trace = direct_optimize(rng.normal(size=(3, 3)), teacher, small_mlp, DISCREPANCY_ONLY, opt, rng)
    assert np.all(np.diff(trace.losses) <= 0.0)


def test_differential_evolution_respects_domain(rng):
    X = rng.dirichlet(np.ones(4), size=30)
    krr = krr_fit(X, X[:, 0])
    student = build_mlp(MlpSpec(4, [3]), seed=1)
    spec = SamplerSpec("domain", 4, mean=0.25, std=0.1, low=0.0, high=1.0, simplex=True)
    x0 = sample(spec, 5, rng)
    loss = GenLossSpec(epsilon=0.05, beta=0.0, output_penalty="teacher-to-random", gamma=0.95, y_rand="real")
    x, _ = direct_optimize(x0, krr, student, loss, OptimizeSpec("differential-evolution", iterations=5), rng,
                           sampler=spec)
    np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-12)
    assert x.min() >= 0.0


def test_direct_optimize_is_reproducible(small_mlp):
    teacher = build_mlp(MlpSpec(3, [5]), seed=4)
    x0 = np.random.default_rng(0).normal(size=(4, 3))
    runs = [direct_optimize(x0, teacher, small_mlp, DISCREPANCY_ONLY, OptimizeSpec("differential-evolution"),
                            np.random.default_rng(21))[0] for _ in range(2)]
    np.testing.assert_array_equal(runs[0], runs[1])


def test_generator_round_with_zero_rate_keeps_weights(small_mlp):
    teacher = build_mlp(MlpSpec(3, [5]), seed=4)
    generator = build_generator(GeneratorSpec(3, latent_dim=2, hidden=[4]), seed=0)
    before = generator.get_flat().copy()
    outputs = []
    for _ in range(2):
        x_g, _ = generator_round(generator, teacher, small_mlp, DISCREPANCY_ONLY, OptimizerState("rmsprop", 0.0),
                                 5, np.random.default_rng(8))
        outputs.append(x_g)
    np.testing.assert_array_equal(generator.get_flat(), before)
    np.testing.assert_array_equal(outputs[0], outputs[1])


def test_generator_gradient_matches_finite_differences(small_mlp):
    teacher = build_mlp(MlpSpec(3, [5]), seed=4)
    generator = build_generator(GeneratorSpec(3, latent_dim=2, hidden=[3], activation="tanh"), seed=0)
    spec = GenLossSpec(epsilon=1.0, beta=1e-2, gamma=1e-2)
    z = np.random.default_rng(5).normal(size=(4, 2))
    _, grads, _ = generator_loss(generator, z, teacher, small_mlp, spec, None)
    analytic = np.concatenate([g.reshape(-1) for g in grads])
    base = generator.get_flat().copy()
    step = 1e-6
    for index in range(base.size):
        shifted = base.copy()
        shifted[index] += step
        generator.set_flat(shifted)
        upper = generator_loss(generator, z, teacher, small_mlp, spec, None)[0]
        shifted[index] -= 2 * step
        generator.set_flat(shifted)
        lower = generator_loss(generator, z, teacher, small_mlp, spec, None)[0]
        numeric = (upper - lower) / (2 * step)
        assert abs(analytic[index] - numeric) <= 1e-5 * max(1.0, abs(analytic[index]))
    generator.set_flat(base)


def test_generator_needs_teacher_gradients(small_mlp, rng):
    X = rng.normal(size=(10, 3))
    generator = build_generator(GeneratorSpec(3, latent_dim=2, hidden=[4]), seed=0)
    with pytest.raises(CapabilityError):
        generator_round(generator, krr_fit(X, X[:, 0]), small_mlp, DISCREPANCY_ONLY, OptimizerState(), 4, rng)


def test_reemit_switch_returns_pre_update_batch(small_mlp):
    teacher = build_mlp(MlpSpec(3, [5]), seed=4)
    first = build_generator(GeneratorSpec(3, latent_dim=2, hidden=[4]), seed=0)
    second = first.copy()
    z = np.random.default_rng(8).standard_normal((5, 2))
    x_post, _ = generator_round(first, teacher, small_mlp, DISCREPANCY_ONLY, OptimizerState("rmsprop", 0.1), 5,
                                np.random.default_rng(8))
    x_pre, _ = generator_round(second, teacher, small_mlp, DISCREPANCY_ONLY, OptimizerState("rmsprop", 0.1), 5,
                               np.random.default_rng(8), reemit=False)
    np.testing.assert_allclose(x_pre, build_generator(GeneratorSpec(3, latent_dim=2, hidden=[4]), seed=0).predict(z))
    np.testing.assert_allclose(x_post, first.predict(z))
    assert not np.allclose(x_pre, x_post)


def student_loss(teacher, student, x):
    return float(np.mean((teacher.predict(x) - student.predict(x)) ** 2))


def test_trained_generator_beats_gaussian_inputs():
    harder = 0
    for seed in range(5):
        teacher = build_mlp(MlpSpec(4, [16]), seed=seed)
        student = build_mlp(MlpSpec(4, [8]), seed=seed + 50)
        generator = build_generator(GeneratorSpec(4), seed=seed + 100)
        state = OptimizerState("rmsprop", 1e-3)
        rng = np.random.default_rng(seed)
        for _ in range(200):
            x_g, _ = generator_round(generator, teacher, student, GenLossSpec(), state, 50, rng)
        harder += student_loss(teacher, student, x_g) > student_loss(teacher, student, rng.standard_normal((50, 4)))
    assert harder >= 4
