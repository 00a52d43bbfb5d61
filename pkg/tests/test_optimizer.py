import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chirpfit.optimizer import NonFiniteObjectiveError, SimplexConfig, minimize
from chirpfit.periodogram import ptf_value
from chirpfit.signal import ChirpModel, synthesize_clean


def test_quadratic_bowl():
    res = minimize(lambda x: (x[0] - 2.0) ** 2, [0.0], SimplexConfig(init_step=0.5))
    assert res.converged
    assert abs(res.argmin[0] - 2.0) < 1e-6


def test_separable_quadratic():
    res = minimize(lambda x: x[0] ** 2 + 10 * x[1] ** 2, [3.0, 3.0])
    assert res.converged
    np.testing.assert_allclose(res.argmin, [0.0, 0.0], atol=1e-5)


def test_rosenbrock_is_reached():
    def rosen(x):
        return 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2

    res = minimize(rosen, [-1.2, 1.0], SimplexConfig(max_iter=5000))
    np.testing.assert_allclose(res.argmin, [1.0, 1.0], atol=1e-6)


def _ptf_oracle(y, beta):
    # independent evaluation: math.fsum over explicit cos/sin terms
    re, im = [], []
    for t, v in enumerate(y, start=1):
        ph = beta * t * t
        c, s = math.cos(ph), math.sin(ph)
        re.append(v.real * c + v.imag * s)
        im.append(v.imag * c - v.real * s)
    return (math.fsum(re) ** 2 + math.fsum(im) ** 2) / len(y)


def test_negated_periodogram_refinement_matches_brute_force():
    n = 101
    y = synthesize_clean(ChirpModel.from_tuples([(5, 0, 0.5)]), n)
    step = 2 * math.pi / n ** 2
    x0 = round(0.5 / step) * step
    res = minimize(lambda x: -ptf_value(y, x[0]), [x0], SimplexConfig(init_step=step))
    fine = 0.5 + 1e-9 * np.arange(-200, 201)
    oracle = fine[int(np.argmax([_ptf_oracle(y, b) for b in fine]))]
    assert abs(oracle - 0.5) <= 1e-9
    assert abs(res.argmin[0] - oracle) < 1e-7


def test_best_value_non_increasing():
    def f(x):
        return (x[0] - 1) ** 2 + 3 * (x[1] + 2) ** 2 + 0.5 * x[0] * x[1]

    values = [minimize(f, [4.0, 4.0], SimplexConfig(max_iter=k)).value for k in range(1, 80)]
    assert all(b <= a for a, b in zip(values, values[1:]))


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 5))
def test_translation_equivariance(c1, c2, w):
    def f(x):
        return (x[0] - 0.3) ** 2 + w * (x[1] + 0.7) ** 2

    base = minimize(f, [1.0, 1.0], SimplexConfig(init_step=0.5))
    shifted = minimize(lambda x: f(x - np.array([c1, c2])), [1.0 + c1, 1.0 + c2],
                       SimplexConfig(init_step=0.5))
    np.testing.assert_allclose(shifted.argmin - [c1, c2], base.argmin, atol=1e-6)


def test_one_dimensional_simplex():
    res = minimize(lambda x: math.cosh(x[0] - 1.5), [0.0])
    assert res.argmin.shape == (1,)
    assert res.argmin[0] == pytest.approx(1.5, abs=1e-6)


def test_iteration_cap_reports_not_converged():
    res = minimize(lambda x: x[0] ** 2 + x[1] ** 2, [5.0, 5.0], SimplexConfig(max_iter=3))
    assert not res.converged and res.iterations == 3


def test_non_finite_objective():
    with pytest.raises(NonFiniteObjectiveError) as info:
        minimize(lambda x: math.nan if x[0] > 0.5 else x[0] ** 2, [0.4], SimplexConfig(init_step=0.5))
    assert info.value.point[0] > 0.5


@pytest.mark.parametrize("kw", [dict(x_tol=0), dict(f_tol=-1), dict(max_iter=0), dict(expansion=1.0),
                                dict(contraction=1.0), dict(shrink=0.0), dict(reflection=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimplexConfig(**kw)


def test_empty_start_rejected():
    with pytest.raises(ValueError):
        minimize(lambda x: 0.0, [])


def test_with_step_keeps_explicit_value():
    assert SimplexConfig(init_step=0.2).with_step(1.0).init_step == 0.2
    assert SimplexConfig().with_step(1.0).init_step == 1.0
