"""Mechanism algebra: oracle-checked evaluation, derivation, inversion, validation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from crtprune.catalog import MECHANISMS, MARKINGS, valid_pairs
from crtprune.mechanism import (
    BranchingMechanism, ConstantMarks, Diagnostics, FiniteAtoms, IntegrabilityError,
    MarkingSpec, StableTail, Tabulated, ThresholdMarks, ZeroMeasure, derive_pruned,
    phi1_eval, psi_eval, psi_inverse, psi_prime, solve_joint_v, validate,
)

QUADRATIC = MECHANISMS["quadratic"]
STABLE = MECHANISMS["stable_1p5"]
LAM_GRID = np.geomspace(1e-3, 1e3, 60)


# ---------------------------------------------------------------------------
# psi_eval
# ---------------------------------------------------------------------------

def test_psi_quadratic_case():
    assert psi_eval(QUADRATIC, 2.0) == pytest.approx(4.0, abs=0)
    assert psi_eval(QUADRATIC, 0.0) == 0.0


def test_psi_zero_at_zero_for_all_catalog():
    for mech in MECHANISMS.values():
        assert psi_eval(mech, 0.0) == 0.0


def test_psi_stable_is_power_law():
    # normalization pins the jump part to lam**c
    assert psi_eval(STABLE, 1.0) == pytest.approx(1.0, abs=1e-8)
    for lam in (0.01, 0.3, 7.0, 250.0):
        assert psi_eval(STABLE, lam) == pytest.approx(lam ** 1.5, rel=1e-10)


def test_psi_stable_against_mpmath_quad():
    # 50-digit oracle: body by tanh-sinh on [0, b], tail of (lam*l - 1) analytic,
    # tail of exp(-lam*l) quadratured (it decays exponentially).
    import mpmath as mp
    mp.mp.dps = 50
    c = mp.mpf("1.5")
    C = mp.mpf(STABLE.levy.scale)
    for lam in (0.25, 1.0, 4.0):
        lamm = mp.mpf(lam)
        s, b = mp.mpf("1e-8") / lamm, 10 / lamm
        # series on (0, s): sum_{k>=2} (-1)^k (lam l)^k / k! against C l^(-1-c)
        head = sum((-1) ** k * lamm ** k / mp.factorial(k) * C * s ** (k - c) / (k - c)
                   for k in range(2, 8))
        body = mp.quad(lambda l: (mp.expm1(-lamm * l) + lamm * l) * C * l ** (-1 - c),
                       [s, 1 / lamm, b])
        tail = C * (lamm * b ** (1 - c) / (c - 1) - b ** (-c) / c)
        tail += mp.quad(lambda l: mp.e ** (-lamm * l) * C * l ** (-1 - c), [b, b + 40 / lamm])
        assert psi_eval(STABLE, lam) == pytest.approx(float(head + body + tail), rel=1e-10)


def test_psi_finite_atoms_exact():
    mech = MECHANISMS["atoms_mixed"]
    lam = 1.7
    jump = sum(w * (math.exp(-lam * l) - 1 + lam * l) for l, w in mech.levy.atoms)
    assert psi_eval(mech, lam) == pytest.approx(
        mech.alpha * lam + mech.beta * lam ** 2 + jump, rel=1e-15)


def test_psi_tabulated_against_scipy_quad():
    mech = MECHANISMS["tabulated"]
    segs = mech.levy._segments()
    for lam in (0.5, 2.0):
        want = 0.0
        for (a, b, A, s) in segs:
            hi = b if b != math.inf else np.inf
            v, _ = quad(lambda l: (math.exp(-lam * l) - 1 + lam * l) * A * l ** s,
                        a, hi, limit=400)
            want += v
        got = psi_eval(mech, lam) - mech.alpha * lam - mech.beta * lam ** 2
        assert got == pytest.approx(want, rel=1e-8)


# ---------------------------------------------------------------------------
# psi_prime
# ---------------------------------------------------------------------------

def test_psi_prime_quadratic_and_at_zero():
    assert psi_prime(QUADRATIC, 3.0) == pytest.approx(6.0)
    for mech in MECHANISMS.values():
        assert psi_prime(mech, 0.0) == mech.alpha


def test_psi_prime_matches_finite_differences():
    h = 1e-6
    for name in ("quadratic", "stable_1p5", "atoms_mixed", "tabulated"):
        mech = MECHANISMS[name]
        for lam in (0.5, 1.0, 5.0):
            fd = (psi_eval(mech, lam + h) - psi_eval(mech, lam - h)) / (2 * h)
            assert psi_prime(mech, lam) == pytest.approx(fd, rel=1e-5)


def test_psi_prime_stable_value():
    # d/dlam lam^1.5 = 1.5 lam^0.5
    assert psi_prime(STABLE, 1.0) == pytest.approx(1.5, rel=1e-8)


# ---------------------------------------------------------------------------
# phi1
# ---------------------------------------------------------------------------

def test_phi1_pure_drift():
    marking = MarkingSpec(p=ConstantMarks(0.0), alpha1=2.0)
    assert phi1_eval(marking, QUADRATIC, 3.0) == pytest.approx(6.0, abs=0)


def test_phi1_atom_saturates_at_measure_mass():
    mech = MECHANISMS["atom_unit"]
    marking = MarkingSpec(p=ConstantMarks(1.0), alpha1=0.0)
    assert phi1_eval(marking, mech, 50.0) == pytest.approx(1.0, rel=1e-12)


def test_phi1_threshold_on_stable_against_quad():
    marking = MarkingSpec(p=ThresholdMarks(0.7), alpha1=0.0)
    C, c = STABLE.levy.scale, 1.5
    for lam in (0.5, 2.0):
        want, _ = quad(lambda l: (1 - math.exp(-lam * l)) * C * l ** (-1 - c),
                       0.7, np.inf, limit=400)
        assert phi1_eval(marking, STABLE, lam) == pytest.approx(want, rel=1e-9)


def test_phi1_constant_marking_on_stable_diverges():
    # integral l p(l) pi(dl) = q * integral l pi(dl) diverges at 0+ for the
    # stable tail, so the mark integrability condition fails.
    marking = MarkingSpec(p=ConstantMarks(1.0), alpha1=0.0)
    with pytest.raises(IntegrabilityError):
        phi1_eval(marking, STABLE, 1.0)


# ---------------------------------------------------------------------------
# derive_pruned
# ---------------------------------------------------------------------------

def test_derive_pruned_degenerate_is_identity():
    for name in ("quadratic", "atoms_mixed", "stable_1p5"):
        mech = MECHANISMS[name]
        out = derive_pruned(mech, MARKINGS["none"])
        assert out.alpha == mech.alpha and out.beta == mech.beta
        assert out.levy == mech.levy  # bit-identical parameters


def test_derive_pruned_quadratic_skeleton():
    out = derive_pruned(QUADRATIC, MarkingSpec(p=ConstantMarks(0.0), alpha1=2.5))
    for lam in (0.3, 1.0, 4.0):
        assert psi_eval(out, lam) == pytest.approx(lam ** 2 + 2.5 * lam, rel=1e-14)


def test_derive_pruned_all_marked_atom():
    mech = MECHANISMS["atom_unit"]  # alpha=0, beta=1, atom (1,1)
    out = derive_pruned(mech, MARKINGS["nodes_all"])
    assert out.alpha == pytest.approx(1.0)
    assert isinstance(out.levy, ZeroMeasure)
    for lam in (0.5, 1.0, 3.0):
        assert psi_eval(out, lam) == pytest.approx(lam + lam ** 2, rel=1e-14)


def test_derive_pruned_finite_variation_still_derives():
    mech = MECHANISMS["atom_finite_var"]
    assert not mech.is_infinite_variation
    out = derive_pruned(BranchingMechanism(0.0, 1.0, mech.levy), MARKINGS["nodes_all"])
    grid = np.geomspace(1e-2, 1e2, 20)
    for lam in grid:
        lhs = psi_eval(out, float(lam))
        rhs = psi_eval(BranchingMechanism(0.0, 1.0, mech.levy), float(lam)) + \
            phi1_eval(MARKINGS["nodes_all"], BranchingMechanism(0.0, 1.0, mech.levy), float(lam))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_pruned_identity_on_catalog_grid():
    # psi0 = psi + phi1, relative error <= 1e-9 on the 60-point geometric grid
    for name, mech, marking in valid_pairs():
        mech0 = derive_pruned(mech, marking)
        for lam in LAM_GRID:
            lam = float(lam)
            lhs = psi_eval(mech0, lam)
            rhs = psi_eval(mech, lam) + phi1_eval(marking, mech, lam)
            assert lhs == pytest.approx(rhs, rel=1e-9), (name, lam)


def test_pruned_monotone_in_marking():
    mech = MECHANISMS["atoms_mixed"]
    small = derive_pruned(mech, MarkingSpec(p=ConstantMarks(0.2), alpha1=0.1))
    large = derive_pruned(mech, MarkingSpec(p=ConstantMarks(0.6), alpha1=0.7))
    for lam in LAM_GRID[::6]:
        assert psi_eval(large, float(lam)) >= psi_eval(small, float(lam)) - 1e-12


# ---------------------------------------------------------------------------
# psi_inverse / solve_joint_v
# ---------------------------------------------------------------------------

def test_psi_inverse_trivial_cases():
    assert psi_inverse(QUADRATIC, 4.0) == pytest.approx(2.0, abs=1e-10)
    for mech in MECHANISMS.values():
        assert psi_inverse(mech, 0.0) == 0.0


def test_psi_inverse_roundtrip():
    for name in ("quadratic", "stable_1p5", "atoms_mixed", "tabulated", "quadratic_drift"):
        mech = MECHANISMS[name]
        for x in (0.1, 1.0, 10.0):
            v = psi_eval(mech, x)
            assert psi_inverse(mech, v) == pytest.approx(x, rel=1e-8)


def test_psi_inverse_residual_bound():
    for name, mech in MECHANISMS.items():
        for v in (1e-6, 0.3, 2.0, 50.0, 1e4):
            x = psi_inverse(mech, v)
            assert abs(psi_eval(mech, x) - v) <= 1e-10 * (1.0 + v), name


def test_psi_inverse_stable_identity():
    for lam in (0.25, 1.0, 5.0, 40.0):
        assert psi_inverse(STABLE, lam) == pytest.approx(lam ** (1 / 1.5), abs=1e-6)


def test_solve_joint_v():
    mech0 = derive_pruned(QUADRATIC, MARKINGS["none"])  # psi0 = lam^2
    assert solve_joint_v(mech0, gamma=1.0, kappa=0.0) == 1.0
    assert solve_joint_v(mech0, gamma=1.0, kappa=3.0) == pytest.approx(2.0, abs=1e-9)
    mech0b = derive_pruned(QUADRATIC, MARKINGS["skeleton"])  # psi0 = lam^2 + lam
    assert solve_joint_v(mech0b, gamma=1.0, kappa=4.0) == pytest.approx(2.0, abs=1e-9)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.sampled_from(list(MECHANISMS)), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_psi_convexity(name, x, y):
    mech = MECHANISMS[name]
    mid = psi_eval(mech, 0.5 * (x + y))
    assert mid <= 0.5 * (psi_eval(mech, x) + psi_eval(mech, y)) + 1e-9 * (1 + mid)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-2, 1e2))
def test_inverse_roundtrip_property(v):
    x = psi_inverse(MECHANISMS["atoms_mixed"], v)
    assert psi_eval(MECHANISMS["atoms_mixed"], x) == pytest.approx(v, rel=1e-9, abs=1e-10)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def test_validate_quadratic_all_pass():
    d = validate(QUADRATIC, MARKINGS["skeleton"])
    assert d.ok
    assert d.find("height_continuity").severity == "info"
    assert d.find("infinite_variation").severity == "ok"


def test_validate_stable_beta0_skeleton_ineligible():
    d = validate(STABLE, MarkingSpec(p=ConstantMarks(0.0), alpha1=1.0))
    assert not d.ok
    assert d.find("continuum_skeleton_eligible").severity == "error"
    # but the mechanism itself is infinite variation
    assert d.find("infinite_variation").severity == "ok"


def test_validate_finite_variation_flagged():
    d = validate(MECHANISMS["atom_finite_var"], MARKINGS["none"])
    assert d.find("infinite_variation").severity == "warning"
    assert d.ok  # warning, not error


def test_validate_negative_alpha_rejected_at_construction():
    with pytest.raises(ValueError):
        BranchingMechanism(-0.1, 1.0, ZeroMeasure())


def test_validate_mark_integrability_error():
    d = validate(STABLE, MarkingSpec(p=ConstantMarks(0.5), alpha1=0.0))
    assert not d.ok
    assert any(f.name == "mark_integrability" and f.severity == "error" for f in d.findings)
