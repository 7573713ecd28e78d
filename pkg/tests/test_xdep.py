import numpy as np
import pytest

from sklab.kernel import ModelSpec
from sklab.xdep import (
    ReductionError,
    XDepFamily,
    reduced_values,
    reduction_check,
    symmetry_defect,
    xdep_eval,
)

MODEL = ModelSpec(q=1.0, gamma=0.1, p="lambda", F="1")


def random_family(rng):
    a1, a2, b1, v1 = rng.uniform(-0.5, 0.5, 4)
    c = float(rng.uniform(-0.1, 0.1))
    return XDepFamily(a=f"{a1:.5f}*lambda + {a2:.5f}*lambda^2", b=f"{b1:.5f}*sin(lambda)",
                      v=f"1 + {v1:.5f}*lambda", c=c)


def test_empty_sets():
    fam = XDepFamily(a="lambda^2", c=0.1)
    assert xdep_eval(fam, [], [], 3.0) == 1


def test_trivial_family_is_one():
    fam = XDepFamily()
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        lams, zs = rng.normal(size=n), rng.normal(size=n)
        assert xdep_eval(fam, lams, zs, 2.5) == pytest.approx(1)


def test_two_variable_collision_reduces():
    fam = XDepFamily(a="lambda^2", b="0.5*lambda", v="1", c=0.1)
    l1, l2, z2 = 0.3 + 0.1j, -0.4, 0.2 - 0.05j
    full = xdep_eval(fam, [l1, l2], [l1, z2], 4.0)
    assert full == pytest.approx(xdep_eval(fam, [l2], [z2], 4.0), rel=1e-13)


def test_unequal_sets_rejected():
    with pytest.raises(ValueError):
        xdep_eval(XDepFamily(), [0.1, 0.2], [0.3], 1.0)


def test_vanishing_omega():
    fam = XDepFamily(c=-1.0)
    with pytest.raises(ReductionError):
        xdep_eval(fam, [1.0], [0.0], 1.0)


def test_omega_properties():
    fam = XDepFamily(c=0.07)
    u, w = 0.3 + 0.2j, -0.5
    assert fam.omega(u, w) == fam.omega(w, u)
    assert fam.omega(u, u) == 1


def test_reduction_ten_random_families():
    rng = np.random.default_rng(7)
    for _ in range(10):
        fam = random_family(rng)
        for n in (1, 2, 3):
            assert reduction_check(fam, n, samples=50) <= 1e-12


def test_broken_family_flagged():
    fam = XDepFamily(a="lambda^2", c=0.05, omega_offset=0.1)
    assert reduction_check(fam, 2) > 0.01


def test_reduction_n1_leaves_constant():
    fam = XDepFamily(a="lambda^2", b="lambda", v="2 + lambda", c=0.1)
    assert reduction_check(fam, 1) <= 1e-15
    with pytest.raises(ValueError):
        reduction_check(fam, 0)


def test_symmetry_within_sets():
    rng = np.random.default_rng(11)
    fam = random_family(rng)
    lams = rng.normal(size=3) * 0.5 + 0.1j
    zs = rng.normal(size=3) * 0.5
    assert symmetry_defect(fam, lams, zs, 3.0) <= 1e-13


def test_reduced_values_quadratic():
    fam = XDepFamily(a="lambda^2")
    red = reduced_values(fam, MODEL, 0)
    assert red.G == 0 and red.H == 0 and red.W == 1
    for lam in (0.3, -0.7):
        assert red.dG_at(lam) == pytest.approx(-2 * lam)


def test_reduced_derivative_matches_finite_difference():
    fam = XDepFamily(a="0.3*lambda + sin(lambda)")
    red = reduced_values(fam, MODEL, 0)
    eps = 1e-6
    for lam in (0.2, -0.5):
        fd = (fam.G([lam], [lam + eps]) - fam.G([lam], [lam])) / eps
        assert abs(red.dG_at(lam) - fd) <= 1e-5


def test_almost_reduced_values():
    fam = XDepFamily(a="lambda", b="lambda^2", c=0.2)
    red = reduced_values(fam, MODEL, 1)
    assert red.G == pytest.approx(-2.0)
    assert red.H == 0
    assert red.W == pytest.approx(1 + 0.2 * 4)
    assert reduced_values(XDepFamily(a="lambda"), MODEL, -1).W == 1
    with pytest.raises(ValueError):
        reduced_values(fam, MODEL, 2)
