"""Tests for the paced single-cell ventricular membrane model
(Beeler & Reuter 1977, J. Physiol. 268) against independent table-driven
oracles and published qualitative behavior."""

import numpy as np
import pytest

from ionstep.beeler_reuter import (
    GATE_BOUND_HI,
    GATE_BOUND_LO,
    IDX_CA,
    IDX_V,
    N_GATES,
    N_STATE,
    V_REST,
    StimulusProfile,
    beeler_reuter_system,
    br_resting_state,
    gate_rates,
    ionic_currents,
)
from ionstep.postprocess import extract_biomarkers
from ionstep.schemes import SchemeSpec, integrate

from oracles import RATE_NAMES, currents_oracle, rate_oracle


@pytest.fixture(scope="module")
def paced_run():
    sys_ = beeler_reuter_system()
    traj, report = integrate(sys_, SchemeSpec.parse("rl_3"), 7920)
    assert report.stable
    return traj


def test_rates_match_published_table():
    rng = np.random.default_rng(3)
    vs = list(rng.uniform(-95.0, 60.0, 200)) + [-47.0, -85.0, 20.0]
    for v in vs:
        ours = gate_rates(float(v))
        for name, val in zip(RATE_NAMES, ours):
            ref = rate_oracle(name, float(v))
            assert val == pytest.approx(ref, rel=1e-12), f"{name} at V={v}"


def test_sodium_activation_rate_is_smooth_at_singularity():
    # alpha_m has a removable singularity at V = -47; the limiting value is
    # 10 and the filled-in formula must join it continuously.
    assert gate_rates(-47.0)[0] == 10.0
    for dv in (1e-6, -1e-6, 1e-9, -1e-9):
        assert gate_rates(-47.0 + dv)[0] == pytest.approx(10.0, rel=1e-6)


def test_currents_match_independent_transcription():
    rng = np.random.default_rng(5)
    for _ in range(100):
        y = np.empty(N_STATE)
        y[:N_GATES] = rng.uniform(0.0, 1.0, N_GATES)
        y[IDX_CA] = 10.0 ** rng.uniform(-8.0, -5.0)
        y[IDX_V] = rng.uniform(-90.0, 40.0)
        if abs(y[IDX_V] + 23.0) < 1e-3:  # oracle's formulation is singular there
            continue
        ours = ionic_currents(y)
        ref = currents_oracle(y)
        for val, key in zip(ours, ("i_k1", "i_x1", "i_na", "i_s")):
            assert val == pytest.approx(ref[key], rel=1e-11, abs=1e-14), key


def test_potassium_current_smooth_across_its_singularity():
    # i_K1 contains (V + 23)/(1 - exp(-0.04 (V + 23))); the implementation
    # must be continuous through V = -23.
    y = br_resting_state()
    vals = []
    for v in (-23.0 - 1e-7, -23.0, -23.0 + 1e-7):
        y2 = y.copy()
        y2[IDX_V] = v
        vals.append(ionic_currents(y2)[0])
    assert vals[0] == pytest.approx(vals[1], rel=1e-6)
    assert vals[2] == pytest.approx(vals[1], rel=1e-6)


def test_resting_state_gates_at_steady_state():
    y0 = br_resting_state()
    for i, (a_name, b_name) in enumerate(
        [("am", "bm"), ("ah", "bh"), ("aj", "bj"), ("ad", "bd"), ("af", "bf"), ("ax1", "bx1")]
    ):
        a = rate_oracle(a_name, V_REST)
        b = rate_oracle(b_name, V_REST)
        assert y0[i] == pytest.approx(a / (a + b), rel=1e-12)
    assert y0[IDX_V] == V_REST


def test_resting_state_is_near_equilibrium():
    sys_ = beeler_reuter_system()
    f = sys_.full_rhs(0.0, sys_.y0)
    assert np.max(np.abs(f)) < 2e-3


def test_gate_derivatives_vanish_at_rest():
    # dW/dt = alpha (1 - W) - beta W is zero at W = alpha/(alpha+beta).
    sys_ = beeler_reuter_system()
    f = sys_.full_rhs(0.0, sys_.y0)
    assert np.max(np.abs(f[:N_GATES])) < 1e-12


def test_split_halves_assemble_consistently():
    sys_ = beeler_reuter_system()
    rng = np.random.default_rng(9)
    for _ in range(25):
        y = np.empty(N_STATE)
        y[:N_GATES] = rng.uniform(0.05, 0.95, N_GATES)
        y[IDX_CA] = 10.0 ** rng.uniform(-7.5, -5.5)
        y[IDX_V] = rng.uniform(-90.0, 30.0)
        t = rng.uniform(0.0, 30.0)
        a, b = sys_.ab(t, y)
        assert a.shape == (N_GATES,)
        assert b.shape == (N_STATE,)
        # Gate split: a_i = -(alpha+beta), b_i = alpha from the rate table.
        for i, (an, bn) in enumerate(
            [("am", "bm"), ("ah", "bh"), ("aj", "bj"), ("ad", "bd"), ("af", "bf"), ("ax1", "bx1")]
        ):
            alpha = rate_oracle(an, float(y[IDX_V]))
            beta = rate_oracle(bn, float(y[IDX_V]))
            assert a[i] == pytest.approx(-(alpha + beta), rel=1e-11)
            assert b[i] == pytest.approx(alpha, rel=1e-11)
        f = sys_.full_rhs(t, y)
        assert np.allclose(f[:N_GATES], a * y[:N_GATES] + b[:N_GATES], rtol=1e-12)


def test_membrane_equation_balances_currents_and_stimulus():
    sys_ = beeler_reuter_system()
    y = br_resting_state()
    y[IDX_V] = -40.0
    i_total = sum(ionic_currents(y))
    stim = StimulusProfile()
    for t in (0.0, 20.0, 20.3):
        f = sys_.full_rhs(t, y)
        assert f[IDX_V] == pytest.approx(stim.current(t) - i_total, rel=1e-12)


def test_stimulus_profile_charge_and_support():
    stim = StimulusProfile()
    assert stim.normalization == pytest.approx(693.0 / 512.0, rel=1e-15)
    assert stim.amplitude == pytest.approx(50.0 * 693.0 / 512.0, rel=1e-15)
    assert stim.current(19.0) == 0.0
    assert stim.current(21.0) == 0.0
    assert stim.current(18.9) == 0.0
    assert stim.current(21.1) == 0.0
    assert stim.current(20.0) == stim.amplitude
    # Exact Gauss-Legendre quadrature: the pulse is a degree-10 polynomial
    # inside its support.
    xs, ws = np.polynomial.legendre.leggauss(12)
    t = 20.0 + xs * stim.width
    integral = stim.width * float(np.sum(ws * stim.waveform(t)))
    assert integral == pytest.approx(50.0, rel=1e-14)


def test_stimulus_waveform_matches_scalar_current():
    stim = StimulusProfile()
    ts = np.linspace(18.5, 21.5, 301)
    vec = stim.waveform(ts)
    scal = np.array([stim.current(float(t)) for t in ts])
    # The vectorized power may differ from scalar libm by an ulp.
    assert np.allclose(vec, scal, rtol=5e-15, atol=0.0)
    assert np.array_equal(vec == 0.0, scal == 0.0)


def test_stimulus_validation():
    with pytest.raises(ValueError):
        StimulusProfile(width=0.0)
    with pytest.raises(ValueError):
        StimulusProfile(exponent=0)


def test_unstimulated_cell_stays_near_rest():
    sys_ = beeler_reuter_system(
        stimulus=StimulusProfile(t_start=1e6), t_end=50.0
    )
    traj, report = integrate(sys_, SchemeSpec.parse("rl_2"), 1500)
    assert report.stable
    assert np.max(np.abs(traj.v - V_REST)) < 0.2


def test_paced_cell_fires_one_action_potential(paced_run):
    v = paced_run.v
    assert v[0] == pytest.approx(V_REST)
    assert v.max() > 0.0  # depolarizes past zero
    assert abs(v[-1] - V_REST) < 3.0  # repolarized by the end of the run
    bm = extract_biomarkers(paced_run)
    assert 19.0 < bm.t_activate < 21.0
    assert 280.0 < bm.t_recover < 310.0
    assert bm.duration == pytest.approx(bm.t_recover - bm.t_activate)
    assert bm.v_rest < bm.v_threshold < bm.v_peak


def test_gates_stay_in_validity_band(paced_run):
    gates = paced_run.states[:, :N_GATES]
    assert gates.min() > GATE_BOUND_LO
    assert gates.max() < GATE_BOUND_HI
    # and in fact stay essentially probabilities on a stable run
    assert gates.min() > -1e-9
    assert gates.max() < 1.25


def test_calcium_stays_positive(paced_run):
    ca = paced_run.states[:, IDX_CA]
    assert ca.min() > 0.0


def test_validity_box_wired_into_system():
    sys_ = beeler_reuter_system()
    box = sys_.component_bounds
    assert box is not None
    assert np.all(box[:N_GATES, 0] == GATE_BOUND_LO)
    assert np.all(box[:N_GATES, 1] == GATE_BOUND_HI)
    assert np.all(np.isinf(box[N_GATES:, 0]))
    assert np.all(np.isinf(box[N_GATES:, 1]))
