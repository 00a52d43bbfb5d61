import math

import numpy as np
import pytest

from chirpfit.baselines import (CpfConfig, cpf_estimate, cpf_half_width, cpf_value, cpf_values,
                                dechirp_estimate, dechirp_transform, pcpf_estimate,
                                pcpf_log_magnitude, sequential_baseline)
from chirpfit.estimators import lse_one
from chirpfit.experiments import match_components
from chirpfit.periodogram import GridSpec, scan
from chirpfit.signal import ChirpModel, NoiseSpec, add, generate_noise, synthesize_clean, wrap_beta

from conftest import noisy


def chirp(n, beta, amp=5.0):
    return synthesize_clean(ChirpModel.from_tuples([(amp, 0.0, beta)]), n)


# ---------------------------------------------------------------- dechirping


def test_dechirp_transform_identity():
    y = chirp(101, 0.5)
    t = np.arange(1, 101)
    np.testing.assert_allclose(dechirp_transform(y), 25 * np.exp(-0.5j * (2 * t + 1)), atol=1e-10)


def test_dechirp_of_constant():
    c = 2.0 - 1.5j
    np.testing.assert_allclose(dechirp_transform(np.full(10, c)), abs(c) ** 2)


def test_dechirp_cross_terms():
    y = synthesize_clean(ChirpModel.from_tuples([(7, 0, 1.0), (5, 0, 0.5)]), 60)
    z = dechirp_transform(y)
    # a single exponential would have a constant ratio between neighbours
    ratio = z[1:] / z[:-1]
    assert np.ptp(np.angle(ratio)) > 0.1


@pytest.mark.parametrize("beta", [0.3, 0.5, 1.1, 2.9])
def test_dechirp_linear_phase(beta):
    z = dechirp_transform(chirp(80, beta))
    t = np.arange(1, 80)
    phase = np.unwrap(np.angle(z))
    slope, icept = np.polyfit(t, phase, 1)
    assert np.max(np.abs(phase - (slope * t + icept))) < 1e-10
    assert wrap_beta(slope + 2 * beta) == pytest.approx(0.0, abs=1e-10) or \
        wrap_beta(slope + 2 * beta) == pytest.approx(2 * math.pi, abs=1e-10)


def test_dechirp_noiseless():
    fit = dechirp_estimate(chirp(101, 0.5))
    assert abs(fit.beta - 0.5) < 1e-6
    assert abs(abs(complex(fit.b_re, fit.b_im)) - 25) < 1e-4
    assert not fit.alias_ambiguous


def test_dechirp_alias_enumeration():
    """Rates ``b`` and ``b + pi`` give the same dechirped frequency; the report stays in [0, pi)."""
    y0, y1 = chirp(101, 2.0), chirp(101, 2.0 + math.pi)
    # exp(-i pi (2t + 1)) = -1: only the sign of B differs
    np.testing.assert_allclose(dechirp_transform(y0), -dechirp_transform(y1), atol=1e-9)
    low, high = dechirp_estimate(y0), dechirp_estimate(y1)
    for fit in (low, high):
        assert 0 <= fit.beta < math.pi
        assert abs(fit.beta - 2.0) < 1e-6
        assert fit.beta_alias == pytest.approx(fit.beta + math.pi)
    assert not low.alias_ambiguous and abs(low.beta_resolved - 2.0) < 1e-6
    assert high.alias_ambiguous and abs(high.beta_resolved - (2.0 + math.pi)) < 1e-6


def test_dechirp_less_efficient_but_fastest(single):
    n, reps = 201, 500
    e_d, e_l, t_d, t_l = [], [], 0.0, 0.0
    import time

    for s in range(reps):
        y = noisy(single, n, 1.0, s)
        t0 = time.perf_counter()
        e_d.append(dechirp_estimate(y).beta_resolved - 0.5)
        t1 = time.perf_counter()
        e_l.append(lse_one(y).components[0].beta - 0.5)
        t2 = time.perf_counter()
        t_d += t1 - t0
        t_l += t2 - t1
    assert np.mean(np.square(e_d)) > np.mean(np.square(e_l))
    assert t_d < t_l


# ---------------------------------------------------------------- CPF


def test_cpf_peak_at_twice_rate():
    n, beta = 101, 0.7
    y = chirp(n, beta)
    t = (n + 1) // 2
    omegas = 2 * beta + np.linspace(-1e-3, 1e-3, 2001)
    mags = [abs(cpf_value(y, t, w)) for w in omegas]
    assert abs(omegas[int(np.argmax(mags))] - 2 * beta) < 1.5e-6


def test_cpf_phase_identity():
    n, beta = 61, 0.9
    y = chirp(n, beta, amp=1.0)
    for t in (20, 31, 40):
        m_max, _ = cpf_half_width(n, t)
        for m in range(m_max + 1):
            prod = y[t - 1 + m] * y[t - 1 - m]
            d = np.angle(prod) - 2 * beta * (t * t + m * m)
            assert abs(math.remainder(d, 2 * math.pi)) < 1e-9


def test_cpf_zero_signal():
    assert cpf_value(np.zeros(31, complex), 16, 1.3) == 0
    assert not np.any(cpf_values(np.zeros(31, complex), 16, [0.1, 2.0]))


def test_cpf_grid_argmax_brute_force():
    n = 101
    y = chirp(n, 0.5)
    grid = GridSpec("cpf_half", n)
    fast = scan(y, grid, "cpf", t_center=51)
    # oracle: every grid point evaluated directly
    direct = np.abs(cpf_values(y, 51, grid.points())) ** 2
    np.testing.assert_allclose(fast.magnitudes, direct, rtol=1e-8, atol=1e-6)
    assert abs(grid.points()[int(np.argmax(direct))] - 1.0) <= math.pi / n ** 2
    assert abs(fast.argmax() - 1.0) <= math.pi / n ** 2


def test_cpf_noiseless_estimate():
    fit = cpf_estimate(chirp(101, 0.5))
    assert abs(fit.beta - 0.5) < 1e-7 and not fit.clipped and not fit.alias_ambiguous


def test_cpf_alias_flag():
    fit = cpf_estimate(chirp(101, 1.8))
    assert fit.alias_ambiguous
    assert fit.omega_upper == pytest.approx(3.6, abs=1e-3)
    assert 0 < fit.omega < math.pi
    assert abs(fit.beta_resolved - 1.8) < 1e-3


def test_even_length_window_is_clipped():
    fit = cpf_estimate(chirp(100, 0.5))
    assert fit.clipped
    assert abs(fit.beta_resolved - 0.5) < 1e-6


def test_cpf_threshold_exists():
    """Below some SNR in [-6, 2] dB the CPF error departs from its high-SNR trend by >10x."""
    n, reps = 201, 200
    comp_sq = 25.0
    snrs = [10, 2, 0, -2, -4, -6]
    norm = []
    for snr in snrs:
        sigma2 = comp_sq / 10 ** (snr / 10)
        errs = [cpf_estimate(noisy(ChirpModel.from_tuples([(5, 0, 0.5)]), n, sigma2, s)).beta_resolved - 0.5
                for s in range(reps)]
        norm.append(np.mean(np.square(errs)) / sigma2)
    print("normalised CPF MSE by SNR:", dict(zip(snrs, norm)))
    assert any(v > 10 * norm[0] for v in norm[1:])


# ---------------------------------------------------------------- PCPF and sequential


@pytest.mark.parametrize("beta", [0.5, 1.2])
def test_pcpf_agrees_with_cpf(beta):
    y = chirp(101, beta)
    a, b = cpf_estimate(y), pcpf_estimate(y)
    assert abs(a.beta - b.beta) < 1e-7


def test_pcpf_log_magnitude_is_sum():
    y = chirp(51, 0.4) + 0.1
    om = np.array([0.5, 0.8, 1.0])
    want = np.log(np.abs(cpf_values(y, 20, om))) + np.log(np.abs(cpf_values(y, 26, om)))
    np.testing.assert_allclose(pcpf_log_magnitude(y, [20, 26], om), want, rtol=1e-12)


def test_pcpf_two_component_dominant(two_comp):
    fit = pcpf_estimate(noisy(two_comp, 201, 1.0, 2))
    assert abs(fit.beta_resolved - 1.0) < 1e-4


def test_pcpf_custom_times():
    fit = pcpf_estimate(chirp(101, 0.5), CpfConfig(times=(41, 51, 61)))
    assert abs(fit.beta - 0.5) < 1e-7


@pytest.mark.parametrize("beta", [0.4, 0.5, 1.3, 2.2, 2.9])
def test_baselines_match_lse_on_noiseless(beta):
    y = chirp(101, beta)
    ref = lse_one(y).components[0].beta
    assert abs(dechirp_estimate(y).beta_resolved - ref) < 1e-6
    assert abs(cpf_estimate(y).beta_resolved - ref) < 1e-6
    assert abs(pcpf_estimate(y).beta_resolved - ref) < 1e-6


def test_sequential_pcpf_noiseless(two_comp):
    fit = sequential_baseline(synthesize_clean(two_comp, 200), 2, "pcpf")
    m = match_components([1.0, 0.5], fit.betas)
    assert abs(fit.betas[m[0]] - 1.0) < 1e-4 and abs(fit.betas[m[1]] - 0.5) < 1e-4


@pytest.mark.parametrize("n", [101, 201, 301, 401, 501])
def test_dechirp_cross_term_bias_exceeds_pcpf(two_comp, n):
    y = synthesize_clean(two_comp, n)
    errs = {}
    for flavor in ("dechirp", "pcpf"):
        fit = sequential_baseline(y, 2, flavor)
        m = match_components([1.0, 0.5], fit.betas)
        errs[flavor] = abs(fit.betas[m[0]] - 1.0)
    assert errs["dechirp"] > errs["pcpf"]


@pytest.mark.xfail(strict=True, reason="at N=200 the PCPF stage-1 bias happens to exceed the "
                                       "dechirp bias; see decisions ledger")
def test_dechirp_cross_term_bias_exceeds_pcpf_at_200(two_comp):
    test_dechirp_cross_term_bias_exceeds_pcpf(two_comp, 200)


def test_runtime_ordering_n401(two_comp):
    import time

    y = add(synthesize_clean(two_comp, 401), generate_noise(NoiseSpec(sigma2=1.0, seed=4), 401))
    from chirpfit.estimators import sequential_fit

    runs = {"dechirp": lambda: sequential_baseline(y, 2, "dechirp"),
            "seq_lse": lambda: sequential_fit(y, 2, "lse"),
            "seq_alse": lambda: sequential_fit(y, 2, "alse"),
            "pcpf": lambda: sequential_baseline(y, 2, "pcpf")}
    times = {}
    for name, fn in runs.items():
        fn()
        t0 = time.perf_counter()
        for _ in range(5):
            fn()
        times[name] = (time.perf_counter() - t0) / 5
    print(times)
    assert times["dechirp"] < min(times["seq_lse"], times["seq_alse"])
    assert max(times["seq_lse"], times["seq_alse"]) < times["pcpf"]
    assert times["seq_lse"] == pytest.approx(times["seq_alse"], rel=0.5)


def test_short_inputs_rejected():
    for fn in (dechirp_estimate, cpf_estimate, pcpf_estimate):
        with pytest.raises(ValueError):
            fn(np.ones(5, complex))
    with pytest.raises(ValueError):
        sequential_baseline(np.ones(40, complex), 1, "bogus")
