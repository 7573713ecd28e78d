import math

import numpy as np
import pytest

from sklab.cyclic import (
    build_contour,
    constant_fn,
    cyclic_integral,
    finite_difference_moment,
    link_check,
    pure_product,
    xdep_fn,
)
from sklab.kernel import ConvergenceError, ModelSpec, PreconditionError
from sklab.xdep import XDepFamily


def smoke(gamma=0.1):
    return ModelSpec(q=1.0, gamma=gamma, p="lambda", F="1 + 0.2*lambda^2", g="0.3*sin(lambda)")


def sine(gamma=0.1):
    return ModelSpec(q=1.0, gamma=gamma, p="lambda", F="1")


@pytest.mark.parametrize("c", [-0.5, 0.0, 0.5])
def test_contour_winding(c):
    r = build_contour(1.0, 0.5, 64)
    assert r.integrate(lambda z: 1 / (z - c)) / (2j * math.pi) == pytest.approx(1, abs=1e-10)


def test_contour_residue_oracles():
    r = build_contour(1.0, 0.5, 64)
    assert abs(r.integrate(lambda z: 1 / z) / (2j * math.pi) - 1) <= 1e-10
    assert abs(r.integrate(lambda z: z)) <= 1e-10


def test_contour_margin_and_validation():
    r = build_contour(1.0, 0.4, 32)
    dist = np.where(np.abs(r.nodes.real) <= 1.0, np.abs(r.nodes.imag),
                    np.abs(r.nodes - np.clip(r.nodes.real, -1, 1)))
    assert dist.min() >= 0.2
    with pytest.raises(ValueError):
        build_contour(1.0, 0.0, 32)


def test_contour_injectivity_check():
    with pytest.raises(PreconditionError):
        build_contour(1.0, 0.5, 16, model=ModelSpec(q=1.0, gamma=0.1, p="lambda^2", F="1"))


def test_pure_product_values():
    f = pure_product("1", "0", 2)
    assert f((0.3, 0.1), (0.2j, 1.0)) == 1
    f1 = pure_product("lambda", "0", 1)
    assert f1((0.5,), (7.0 + 1j,)) == 0.5


def test_pure_product_permutation_invariance():
    f = pure_product("1 + lambda", "0.3*lambda", 2)
    rng = np.random.default_rng(3)
    for _ in range(10):
        lams = tuple(rng.normal(size=2) + 0j)
        zs = tuple(rng.normal(size=2) + 1j * rng.normal(size=2))
        assert f.permuted((1, 0), (1, 0))(lams, zs) == pytest.approx(f(lams, zs), rel=1e-14)


def test_cyclic_constant_at_zero_frequency():
    res = cyclic_integral(constant_fn(1, 1), sine(), 0.0, 1)
    assert abs(res.value) <= 1e-12


def test_cyclic_closed_form_pure_sine():
    res = cyclic_integral(constant_fn(1, 1), sine(), 10.0, 1)
    assert res.value == pytest.approx(10 / math.pi, rel=1e-10)


def test_link_n1_gamma_independent():
    a = link_check(sine(0.1), 10.0, 1)
    b = link_check(sine(0.3), 10.0, 1)
    assert a.lhs == b.lhs and a.rhs == b.rhs
    assert a.rel_err <= 1e-8
    assert a.rhs == pytest.approx(2 * 10.0 / (2 * math.pi), rel=1e-12)


def test_link_n1_smoke_model():
    assert link_check(smoke(), 10.0, 1).rel_err <= 1e-8


@pytest.mark.slow
def test_link_n2_smoke_model():
    rep = link_check(smoke(), 10.0, 2)
    assert rep.rel_err <= 1e-6
    assert rep.cyclic.rel_change <= 1e-6


def test_link_phi_declared_model():
    m = ModelSpec.from_phi(0.8, 0.05, "lambda + 0.1*lambda^3", "1 + 0.3*cos(lambda)", "0.2*lambda")
    assert link_check(m, 8.0, 1).rel_err <= 1e-8


def test_contour_independence():
    fn = pure_product(smoke().phi_or_derived, smoke().g, 1)
    for x in (5.0, 20.0):
        a = cyclic_integral(fn, smoke(), x, 1, delta=0.3).value
        b = cyclic_integral(fn, smoke(), x, 1, delta=0.5).value
        assert abs(a - b) <= 1e-7 * abs(b)


def test_permuted_evaluator_same_integral():
    fn = pure_product("1 + 0.1*lambda", "0.2*lambda", 1)
    a = cyclic_integral(fn, smoke(), 10.0, 1).value
    b = cyclic_integral(fn.permuted((0,), (0,)), smoke(), 10.0, 1).value
    assert a == b


def test_cyclic_rejects_bad_arguments():
    with pytest.raises(ValueError, match="n = 1, 2"):
        cyclic_integral(constant_fn(1, 3), sine(), 1.0, 3)
    with pytest.raises(ValueError):
        cyclic_integral(constant_fn(1, 2), sine(), 1.0, 1)
    with pytest.raises(PreconditionError):
        cyclic_integral(constant_fn(1, 1), sine(), 200.0, 1)


def test_cyclic_nonconvergence_reports():
    with pytest.raises(ConvergenceError):
        cyclic_integral(constant_fn(1, 1), sine(), 60.0, 1, delta=0.5, nodes_per_side=4,
                        segment_order=4, tol=1e-14, max_doublings=1)


def test_cyclic_thread_count_reproducible(monkeypatch):
    fn = pure_product("1", "0.3*sin(lambda)", 2)
    kw = dict(nodes_per_side=16, segment_order=16, tol=1.0, max_doublings=1)
    monkeypatch.setenv("SKL_THREADS", "1")
    a = cyclic_integral(fn, smoke(), 4.0, 2, **kw).value
    b = cyclic_integral(fn, smoke(), 4.0, 2, **kw).value
    monkeypatch.setenv("SKL_THREADS", "3")
    c = cyclic_integral(fn, smoke(), 4.0, 2, **kw).value
    assert a == b
    assert c == pytest.approx(a, rel=1e-14)


def test_xdep_function_integrates():
    fam = XDepFamily(a="0.1*lambda^2", v="1", c=0.05)
    res = cyclic_integral(xdep_fn(fam, 5.0, 1), sine(), 5.0, 1)
    assert np.isfinite(res.value)


def test_finite_difference_moment_oracles():
    m = smoke()
    assert finite_difference_moment("3", 0.4, 2, m) == 0
    assert finite_difference_moment("lambda", 0.4 + 0.2j, 1, m) == pytest.approx(2.0, rel=1e-14)
    z = 0.4 + 0.2j
    assert finite_difference_moment("lambda", z, 2, m) == pytest.approx(2 * z, rel=1e-13)


def test_finite_difference_moment_power_identity():
    m = smoke()
    v, z, t = "1 + 0.2*lambda^2", 0.3 + 0.4j, 3
    direct = finite_difference_moment(v, z, t, m)
    assert direct == pytest.approx(finite_difference_moment(f"({v})^{t}", z, 1, m), rel=1e-10)
