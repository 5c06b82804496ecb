"""Tests of the phi-function evaluator against an extended-precision oracle
and against the defining recurrence."""

import math

import mpmath as mp
import numpy as np
import pytest

from ionstep.phi import ORDER_MAX, OVERFLOW_ARG, phi_eval, phi_eval_batch, phi_table

from oracles import phi_oracle

# Smallest normal double: the comparison floor.  Below it a correctly
# rounded double result can be 0.0 while the true value is subnormal or
# smaller (phi_0(z) = e^z for very negative z), so plain relative error is
# meaningless there.
DBL_MIN = 2.2250738585072014e-308


def rel_err_vs_oracle(j: int, z: float) -> float:
    ours = phi_eval(j, z)
    with mp.workdps(50):
        ref = phi_oracle(j, z)
        return float(abs(mp.mpf(repr(ours)) - ref) / max(abs(ref), mp.mpf(repr(DBL_MIN))))


def test_values_at_zero_are_inverse_factorials():
    for j in range(ORDER_MAX + 1):
        assert phi_eval(j, 0.0) == 1.0 / math.factorial(j)


def test_phi0_is_exp():
    for z in (-30.0, -2.0, -0.5, 0.25, 3.0, 100.0):
        assert phi_eval(0, z) == pytest.approx(math.exp(z), rel=1e-15)


def test_phi1_matches_expm1_identity():
    # phi_1(z) = (e^z - 1)/z; expm1 is an independent stdlib path.
    rng = np.random.default_rng(11)
    for z in rng.uniform(-100.0, 50.0, 500):
        z = float(z)
        if z == 0.0:
            continue
        assert phi_eval(1, z) == pytest.approx(math.expm1(z) / z, rel=1e-13)


def test_small_arguments_match_taylor_oracle():
    zs = np.linspace(-1.0, 1.0, 401)
    worst = max(rel_err_vs_oracle(j, float(z)) for z in zs for j in range(6))
    assert worst < 5e-15


def test_large_arguments_match_recurrence_oracle():
    mags = np.geomspace(1.0, 1e6, 60)
    zs = [-float(v) for v in mags] + [float(v) for v in np.geomspace(1.0, 50.0, 25)]
    worst = max(rel_err_vs_oracle(j, z) for z in zs for j in range(6))
    assert worst < 1e-12


def test_recurrence_identity_holds():
    # phi_{j+1}(z) * z = phi_j(z) - 1/j! directly on the returned table.
    for z in (-200.0, -7.3, -1.5, 1.2, 8.0, 300.0):
        tab = phi_table(z, ORDER_MAX)
        for j in range(ORDER_MAX):
            lhs = tab[j + 1] * z
            rhs = tab[j] - 1.0 / math.factorial(j)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(tab[j]))


def test_table_agrees_with_scalar_eval():
    for z in (-50.0, -0.3, 0.0, 0.7, 20.0):
        tab = phi_table(z, ORDER_MAX)
        assert tab == [phi_eval(j, z) for j in range(ORDER_MAX + 1)]


def test_batch_agrees_with_scalar_eval():
    zs = np.array([-1e5, -2.0, -0.1, 0.0, 0.4, 30.0])
    out = phi_eval_batch(ORDER_MAX, zs)
    assert out.shape == (zs.size, ORDER_MAX + 1)
    for i, z in enumerate(zs):
        for j in range(ORDER_MAX + 1):
            assert out[i, j] == phi_eval(j, float(z))


def test_overflow_argument_raises():
    with pytest.raises(OverflowError):
        phi_eval(1, OVERFLOW_ARG + 1.0)
    # Just below the guard the value is huge but finite.
    assert math.isfinite(phi_eval(1, OVERFLOW_ARG - 1.0))


def test_order_above_cap_rejected():
    with pytest.raises(ValueError):
        phi_eval(ORDER_MAX + 1, 0.5)
    with pytest.raises(ValueError):
        phi_eval(-1, 0.5)


def test_deep_negative_arguments_finite_and_positive():
    # For z << 0, phi_j(z) -> (j-1 terms) ~ 1/((j-1)! |z|); must stay
    # finite and positive even where e^z underflows to zero in doubles.
    for z in (-1e3, -1e4, -1e6):
        for j in range(1, ORDER_MAX + 1):
            val = phi_eval(j, z)
            assert math.isfinite(val) and val > 0.0
