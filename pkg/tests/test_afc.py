import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from smafc import afc, presets
from smafc.afc import (AnalyzerConfig, CombConfig, Pulse, StarkControl, TimeBinState, afc_efficiency,
                       analyzer_project, echo_amplitude_factor, echo_intensity_factor, emission_time,
                       fidelity_from_visibility, fit_gamma_tilde, phase_sigma_for_visibility,
                       stark_frequency, suppression_pulse_duration, visibility)

# frozen values, each recomputed from plain arithmetic below
DTILDE_8P7 = 1.2969368282725287
ETA0_8P7 = 0.45981712079088705


def plain_dtilde(d, f):
    return d / f * math.sqrt(math.pi / (4 * math.log(2)))


# ---------------------------------------------------------------------------
# comb efficiency

def test_effective_depth_against_arithmetic():
    comb = CombConfig(2e6, 8.7, 10.6)
    assert comb.effective_depth == pytest.approx(plain_dtilde(10.6, 8.7), abs=1e-12)
    assert comb.effective_depth == pytest.approx(DTILDE_8P7, abs=1e-12)
    dt = plain_dtilde(10.6, 8.7)
    assert afc_efficiency(comb, 0.0) == pytest.approx(dt**2 * math.exp(-dt), abs=1e-12)
    assert afc_efficiency(comb, 0.0) == pytest.approx(ETA0_8P7, abs=1e-12)


def test_zero_depth_gives_zero_efficiency():
    assert afc_efficiency(CombConfig(1e6, 5.0, 0.0), 0.0) == 0.0


def test_efficiency_maximal_at_depth_two():
    f = 10.0
    depths = np.linspace(1, 40, 3901)
    eff = [afc_efficiency(CombConfig(1e6, f, d), 0.0) for d in depths]
    best = depths[int(np.argmax(eff))]
    assert plain_dtilde(best, f) == pytest.approx(2.0, abs=1e-2)
    assert max(eff) == pytest.approx(4 * math.exp(-2), abs=1e-6)


@settings(deadline=None, max_examples=50)
@given(st.floats(0, 5e-6), st.floats(0, 5e-6), st.floats(0, 1e6))
def test_efficiency_non_increasing_in_time(t1, t2, g):
    comb = CombConfig(1e6, 8.7, 10.6, g)
    lo, hi = sorted((t1, t2))
    assert afc_efficiency(comb, hi) <= afc_efficiency(comb, lo) + 1e-15


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        afc_efficiency(CombConfig(1e6, 8.7, 10.6), -1e-9)


@pytest.mark.parametrize("kw", [dict(delta=0), dict(finesse=1.0), dict(peak_depth=-1), dict(gamma_tilde=-1)])
def test_comb_validation(kw):
    base = dict(delta=1e6, finesse=8.7, peak_depth=10.6, gamma_tilde=0.0)
    base.update(kw)
    with pytest.raises(ValueError):
        CombConfig(**base)


def test_fit_recovers_known_decay():
    truth = CombConfig(2e6, 8.7, 10.6, 3.0e5)
    times = [0.5e-6, 1.0e-6, 1.5e-6]
    fitted = fit_gamma_tilde(CombConfig(2e6, 8.7, 10.6), times, [afc_efficiency(truth, t) for t in times])
    assert fitted.gamma_tilde == pytest.approx(3.0e5, rel=1e-6)


def test_fitted_preset_decay_is_frozen():
    # least squares of the two measured echo efficiencies against the pinned zero-time value
    assert presets.COMB_2MHZ.gamma_tilde == pytest.approx(640277.34, rel=1e-6)


# ---------------------------------------------------------------------------
# Stark control

def test_stark_frequency_examples():
    ctrl = StarkControl(28.0e3, 176.8)
    assert stark_frequency(ctrl) == pytest.approx(4.9504e6, rel=1e-12)
    scaled = ctrl.scaled_field(4.0 / 1.56)
    assert stark_frequency(scaled) == pytest.approx(12.69e6, rel=1e-3)
    assert stark_frequency(StarkControl(28.0e3, 0.0)) == 0.0


def test_suppression_duration_examples():
    ctrl = StarkControl(28.0e3, 176.8)
    assert 49e-9 <= suppression_pulse_duration(ctrl) <= 52e-9
    assert suppression_pulse_duration(StarkControl(1.0, 12.7e6)) == pytest.approx(19.685e-9, rel=1e-4)
    with pytest.raises(ValueError):
        suppression_pulse_duration(StarkControl(28.0e3, 0.0))


@settings(deadline=None, max_examples=50)
@given(st.floats(1e3, 1e9), st.floats(1e3, 1e9))
def test_suppression_duration_decreases_with_field(e1, e2):
    lo, hi = sorted((e1, e2))
    assert suppression_pulse_duration(StarkControl(1.0, hi)) <= suppression_pulse_duration(StarkControl(1.0, lo))


def test_echo_zero_at_quarter_period():
    ctrl = StarkControl(1.0, 12.7e6)
    tau0 = 1 / (4 * 12.7e6)
    assert echo_intensity_factor(ctrl, 0.0) == 1.0
    assert echo_intensity_factor(ctrl, tau0) < 1e-20
    assert echo_intensity_factor(ctrl, 1.05 * tau0) > 1e-4
    # numeric root of the intensity agrees with the closed form
    res = minimize_scalar(lambda t: echo_intensity_factor(ctrl, t), bounds=(0.5 * tau0, 1.5 * tau0),
                          method="bounded", options={"xatol": 1e-18})
    assert res.x == pytest.approx(tau0, rel=1e-6)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_echo_revivals_follow_inhomogeneous_envelope(k):
    ctrl = StarkControl(28.0e3, 176.8, presets.TAU_INH)
    tau = k / (2 * stark_frequency(ctrl))
    assert echo_intensity_factor(ctrl, tau) == pytest.approx(math.exp(-tau**2 / presets.TAU_INH**2), rel=1e-9)


def test_pulse_validation():
    with pytest.raises(ValueError):
        Pulse(0.0, -1e-9, 1)
    with pytest.raises(ValueError):
        Pulse(0.0, 50e-9, 0)
    with pytest.raises(ValueError):
        StarkControl(28e3, 176.8, pulses=(Pulse(200e-9, 50e-9, 1), Pulse(100e-9, 50e-9, -1)))


def test_stark_control_round_trip():
    ctrl = presets.STARK_1V56.with_pulses([Pulse(1e-7, 5e-8, 1), Pulse(7e-7, 5e-8, -1)])
    assert StarkControl.from_dict(ctrl.to_dict()) == ctrl


# ---------------------------------------------------------------------------
# emission timing

def two_pulses(comb, ctrl, n, offset=0.25):
    dur = suppression_pulse_duration(ctrl)
    p = comb.period
    return ctrl.with_pulses([Pulse(offset * p, dur, 1), Pulse((n - 1 + offset) * p, dur, -1)])


def test_no_pulse_gives_first_echo():
    comb = presets.COMB_2MHZ
    em = emission_time(comb, presets.STARK_1V56)
    assert em.order == 1 and em.time == pytest.approx(0.5e-6)
    assert em.efficiency == pytest.approx(afc_efficiency(comb, 0.5e-6))


def test_single_pulse_suppresses():
    comb = presets.COMB_2MHZ
    ctrl = presets.STARK_1V56
    em = emission_time(comb, ctrl.with_pulses([Pulse(100e-9, suppression_pulse_duration(ctrl), 1)]))
    assert em.suppressed and em.efficiency == 0.0 and em.leakage == 0.0


def test_second_echo_recall():
    comb = presets.COMB_2MHZ
    ctrl = presets.STARK_1V56
    dur = suppression_pulse_duration(ctrl)
    em = emission_time(comb, ctrl.with_pulses([Pulse(100e-9, dur, 1), Pulse(700e-9, dur, -1)]))
    assert em.order == 2
    assert em.time == pytest.approx(1.0e-6, abs=1e-15)
    assert em.efficiency == pytest.approx(afc_efficiency(comb, 1.0e-6))


def test_fifth_echo_on_slow_comb():
    comb = presets.COMB_200KHZ
    em = emission_time(comb, two_pulses(comb, presets.STARK_1V56, 5))
    assert em.order == 5 and em.time == pytest.approx(25e-6, abs=1e-15)


@settings(deadline=None, max_examples=40)
@given(st.integers(2, 10), st.floats(0.05, 0.85))
def test_emission_on_echo_grid(n, offset):
    comb = presets.COMB_200KHZ
    em = emission_time(comb, two_pulses(comb, presets.STARK_1V56, n, offset))
    assert em.order == n
    k = em.time * comb.delta
    assert abs(k - round(k)) < 1e-9


def test_emission_errors():
    comb = presets.COMB_2MHZ
    ctrl = presets.STARK_1V56
    dur = suppression_pulse_duration(ctrl)
    with pytest.raises(ValueError):  # outside [0, 1/delta]
        emission_time(comb, ctrl.with_pulses([Pulse(480e-9, dur, 1)]))
    with pytest.raises(ValueError):  # same polarity
        emission_time(comb, ctrl.with_pulses([Pulse(100e-9, dur, 1), Pulse(700e-9, dur, 1)]))
    with pytest.raises(ValueError):  # straddles the echo at 1 us
        emission_time(comb, ctrl.with_pulses([Pulse(100e-9, dur, 1), Pulse(980e-9, dur, -1)]))
    with pytest.raises(ValueError):  # three pulses
        emission_time(comb, ctrl.with_pulses([Pulse(100e-9, dur, 1), Pulse(700e-9, dur, -1),
                                              Pulse(1.2e-6, dur, 1)]))


def test_imperfect_suppression_leaks():
    comb = presets.COMB_2MHZ
    ctrl = presets.STARK_1V56
    dur = 0.8 * suppression_pulse_duration(ctrl)
    em = emission_time(comb, ctrl.with_pulses([Pulse(100e-9, dur, 1), Pulse(700e-9, dur, -1)]))
    amp = abs(echo_amplitude_factor(ctrl, dur))
    assert em.leakage == pytest.approx(amp)
    assert em.leakage_efficiency == pytest.approx(amp**2 * afc_efficiency(comb, 0.5e-6))
    assert em.efficiency == pytest.approx((1 - amp**2) * afc_efficiency(comb, 1e-6))


# ---------------------------------------------------------------------------
# analyzer

def test_analyzer_equal_superposition_fringe():
    q = TimeBinState.from_phase(0.0)
    at0 = analyzer_project(q, presets.ANALYZER.at_phase(0.0))
    atpi = analyzer_project(q, presets.ANALYZER.at_phase(math.pi))
    assert at0[1] == pytest.approx(0.5, abs=1e-12)
    assert atpi[1] == pytest.approx(0.0, abs=1e-12)
    assert at0[0] == pytest.approx(0.125) and at0[2] == pytest.approx(0.125)


def test_analyzer_quadrature_states():
    q = TimeBinState(1 / math.sqrt(2), -1j / math.sqrt(2))
    hi = analyzer_project(q, presets.ANALYZER.at_phase(-math.pi / 2))[1]
    lo = analyzer_project(q, presets.ANALYZER.at_phase(math.pi / 2))[1]
    assert visibility(hi, lo) == pytest.approx(1.0, abs=1e-12)


def test_detuning_sets_phase():
    cfg = AnalyzerConfig(storage_time=200e-9, detuning=1.25e6)
    assert cfg.theta == pytest.approx(math.pi / 2)


@settings(deadline=None, max_examples=30)
@given(st.floats(-math.pi, math.pi))
def test_fringe_maximum_recovers_phase(phi):
    q = TimeBinState.from_phase(phi)
    res = minimize_scalar(lambda th: -analyzer_project(q, presets.ANALYZER.at_phase(th))[1],
                          bounds=(phi - 2.0, phi + 2.0), method="bounded", options={"xatol": 1e-10})
    assert math.remainder(res.x - phi, 2 * math.pi) == pytest.approx(0.0, abs=1e-5)


@settings(deadline=None, max_examples=30)
@given(st.floats(0, 2 * math.pi), st.floats(0.0, 1.0))
def test_analyzer_probabilities_valid(theta, coherence):
    p = analyzer_project(TimeBinState.from_phase(1.0), presets.ANALYZER.at_phase(theta), coherence)
    assert np.all(p >= 0) and p.sum() <= 1 + 1e-12


def test_analyzer_validation():
    with pytest.raises(ValueError):
        AnalyzerConfig(p0=0.6, p1=0.5)
    with pytest.raises(ValueError):
        AnalyzerConfig(p0=0.4, p1=0.4)  # sum fine but interference could exceed one
    with pytest.raises(ValueError):
        analyzer_project(TimeBinState.from_phase(0, 100e-9), AnalyzerConfig(storage_time=200e-9))


def test_time_bin_normalization():
    with pytest.raises(ValueError):
        TimeBinState(1.0, 1.0)


def test_visibility_and_fidelity():
    assert fidelity_from_visibility(0.985) == pytest.approx(0.9925)
    sigma = phase_sigma_for_visibility(0.985)
    assert math.exp(-sigma**2 / 2) == pytest.approx(0.985, abs=1e-14)
    assert visibility(0, 0) == 0.0
    with pytest.raises(ValueError):
        phase_sigma_for_visibility(0.0)


def test_module_exports_tolerances():
    assert afc.DURATION_RTOL > 0 and afc.WINDOW_ATOL > 0
