import math

import numpy as np
import pytest

from sklab.kernel import (
    ConvergenceError,
    ModelSpec,
    PreconditionError,
    assemble,
    kappa,
    kernel_value,
    lndet,
    log_fredholm_det,
    log_kappa,
    nu,
    reduced_kernel,
    trace_power,
    trace_powers,
)
from sklab.numerics import gauss_legendre

SMOKE = dict(q=1.0, p="lambda", F="1 + 0.2*lambda^2", g="0.3*sin(lambda)")


def smoke(gamma=0.1, **kw):
    return ModelSpec(gamma=gamma, **SMOKE, **kw)


def sine(gamma=0.1, q=1.0):
    return ModelSpec(q=q, gamma=gamma, p="lambda", F="1")


def random_model(rng):
    a, b, c, d = rng.uniform(-0.3, 0.3, 4)
    return ModelSpec(q=float(rng.uniform(0.5, 1.5)), gamma=float(rng.uniform(0.01, 0.1)),
                     p=f"lambda + {a:.6f}*lambda^3", F=f"1 + {b:.6f}*cos(lambda)",
                     g=f"{c:.6f}*sin(lambda) + {d:.6f}*lambda", quad_order=64)


def test_nu_values():
    assert nu(sine(0.0), 0.3) == 0
    assert nu(sine(0.1), 0.3) == pytest.approx(1j * math.log(1.1) / (2 * math.pi), rel=1e-15)
    assert abs(nu(sine(0.1), 0.3)) == pytest.approx(0.01517, abs=1e-5)
    with pytest.raises(PreconditionError):
        nu(sine(2.0), 0.0)


def test_kernel_value_symmetry_and_zero_coupling():
    m = smoke()
    rng = np.random.default_rng(1)
    lam, mu = rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20)
    np.testing.assert_allclose(kernel_value(m, 7.0, lam, mu), kernel_value(m, 7.0, mu, lam),
                               rtol=1e-14)
    assert np.all(kernel_value(smoke(0.0), 7.0, lam, mu) == 0)


def test_diagonal_limit_pure_sine():
    assert kernel_value(sine(0.1), 10.0, 0.2, 0.2) == pytest.approx(0.1 * 10 / (2 * math.pi))


def test_near_diagonal_branch_matches_closed_form():
    x, lam = 10.0, 0.2
    for d in (3e-7, 1e-9, 5e-6):
        exact = math.sin(x * d / 2) / (math.pi * d)
        assert reduced_kernel(sine(), x, lam + d, lam) == pytest.approx(exact, rel=1e-13)


def test_near_diagonal_continuity_smoke_model():
    m = smoke()
    lam = 0.37
    diag = reduced_kernel(m, 15.0, lam, lam)
    for d in (1e-7, 5e-7, 2e-6):
        assert reduced_kernel(m, 15.0, lam + d, lam) == pytest.approx(diag, rel=5e-5)


def test_assembled_matrix_is_symmetric():
    K = assemble(smoke(), 20.0).K
    assert np.max(np.abs(K - K.T)) <= 1e-14
    assert not K.flags.writeable


def test_reparameterization_ten_random_models():
    rng = np.random.default_rng(42)
    for _ in range(10):
        m = random_model(rng)
        for x in (5.0, 20.0):
            a = assemble(m, x)
            b = assemble(m.reparameterized(x), x)
            assert np.max(np.abs(a.K - b.K)) <= 1e-13
            assert abs(log_fredholm_det(a, m.gamma) - log_fredholm_det(b, m.gamma)) <= 1e-12


def test_lndet_zero_coupling():
    assert log_fredholm_det(assemble(smoke(), 20.0), 0.0) == 0


def test_spectral_radius_guard():
    with pytest.raises(PreconditionError, match="smaller"):
        log_fredholm_det(assemble(sine(0.1), 40.0), 1.5)


def test_small_gamma_series_is_third_order():
    sysm = assemble(smoke(), 20.0)
    t1, t2 = trace_powers(sysm, 2)
    errs = [abs(log_fredholm_det(sysm, g) - g * t1 + g * g * t2 / 2) for g in (1e-2, 5e-3)]
    slope = math.log(errs[0] / errs[1]) / math.log(2)
    assert slope == pytest.approx(3, abs=0.05)


def test_trace_closed_form_pure_sine():
    assert trace_power(assemble(sine(), 10.0), 1) == pytest.approx(20 / (2 * math.pi), rel=1e-13)


def test_trace_square_pure_sine_reference():
    # int_{-2}^{2} (2 - |u|) sin(5u)^2 / (pi u)^2 du, mpmath at 30 digits
    ref = 2.71990516277522391073258705399
    assert trace_power(assemble(sine(), 10.0), 2) == pytest.approx(ref, rel=1e-12)


def test_trace_gamma_independent():
    a = trace_power(assemble(sine(0.1), 10.0), 3)
    b = trace_power(assemble(sine(0.3), 10.0), 3)
    assert a == b


def test_trace_power_cap():
    with pytest.raises(ValueError):
        trace_power(assemble(sine(), 5.0), 7)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trace_matches_gamma_derivatives_of_lndet(n):
    sysm = assemble(smoke(), 12.0)
    # Cauchy integral of lndet over |gamma| = r gives its Taylor coefficients
    r, M = 0.02, 64
    g = r * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.array([log_fredholm_det(sysm, gi) for gi in g])
    coeff = np.mean(vals * g ** (-n))
    deriv = coeff * math.factorial(n)
    ref = (-1) ** (n - 1) / math.factorial(n - 1) * deriv
    assert trace_power(sysm, n) == pytest.approx(ref, rel=1e-8)


def test_trace_square_independent_tensor_quadrature():
    m = smoke()
    x = 12.0
    rule = gauss_legendre(150, -1, 1)
    t, w = rule.nodes, rule.weights
    Kf = reduced_kernel(m, x, t[:, None], t[None, :])
    direct = np.sum(w[:, None] * w[None, :] * Kf * Kf.T)
    assert trace_power(assemble(m, x), 2) == pytest.approx(direct, rel=1e-8)


def test_quadrature_convergence_invariant():
    for gamma in (0.1, -0.3, 0.2j):
        for x in (10.0, 50.0):
            m = smoke(gamma)
            a = log_fredholm_det(assemble(m, x, 128), gamma)
            b = log_fredholm_det(assemble(m, x, 256), gamma)
            assert abs(a - b) <= 1e-9


def test_lndet_order_escalation():
    val, order = lndet(smoke(), 20.0)
    assert order == 256
    assert val == pytest.approx(log_fredholm_det(assemble(smoke(), 20.0, 256), 0.1))
    with pytest.raises(ConvergenceError):
        lndet(smoke(), 20.0, order=16, tol=1e-30, cap=64)


def test_model_preconditions():
    with pytest.raises(PreconditionError):
        assemble(sine(1.5), 5.0)
    with pytest.raises(PreconditionError):
        assemble(ModelSpec(q=1, gamma=0.1, p="lambda^2", F="1"), 5.0)
    with pytest.raises(ValueError):
        ModelSpec(q=0, gamma=0.1, p="lambda", F="1")


def test_kappa_oracles():
    m = smoke()
    assert kappa(sine(0.2), 0.4) == 1
    assert kappa(smoke(0.0), 0.4) == 1
    c = 0.07
    assert log_kappa(m, 0.25, nu_fn=lambda z: c * z, dnu_fn=lambda z: c + 0 * z) == \
        pytest.approx(2 * m.q * c, abs=1e-12)


def test_kappa_removable_point_on_node():
    m = smoke(0.2)
    node = gauss_legendre(m.quad_order, -1, 1).nodes[40]
    on = log_kappa(m, node)
    off = log_kappa(m, node + 1e-6)
    assert on == pytest.approx(off, rel=1e-5)
