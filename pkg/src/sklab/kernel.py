"""The generalized sine kernel on [-q, q] and its Fredholm determinant.

    V(l, m) = gamma sqrt(F(l) F(m)) (e(l)/e(m) - e(m)/e(l)) / (2 i pi (l - m)),
    e(l)    = exp(i x p(l) / 2 + g(l) / 2).

V is linear in gamma, so everything numerical is done on the reduced kernel
K = V / gamma, discretised with symmetrised Gauss-Legendre weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from sklab.expr import ZERO, AnalyticExpr, Const, as_expr, differentiate, func, is_zero
from sklab.numerics import QuadratureRule, gauss_legendre

log = logging.getLogger(__name__)

DEFAULT_ORDER = 128
MAX_ORDER = 1024
TRACE_POWER_CAP = 6
NEAR_DIAGONAL = 1e-6
KAPPA_COINCIDENCE = 1e-8


class PreconditionError(ArithmeticError):
    """A numerical precondition of the model or operation does not hold."""


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """The data (p, F, g) on [-q, q] with coupling gamma and discretisation settings.

    ``phi`` is set when F was declared as phi * exp(g); F always holds the
    full function.
    """

    q: float
    gamma: complex
    p: AnalyticExpr
    F: AnalyticExpr
    g: AnalyticExpr = ZERO
    phi: AnalyticExpr | None = None
    quad_order: int = DEFAULT_ORDER
    delta: float | None = None
    nodes_per_side: int = 64
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("q must be positive")
        for name in ("p", "F", "g"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        if self.phi is not None:
            object.__setattr__(self, "phi", as_expr(self.phi))
        object.__setattr__(self, "gamma", complex(self.gamma))

    @classmethod
    def from_phi(cls, q, gamma, p, phi, g=ZERO, **kw):
        """Model with F = phi * exp(g)."""
        phi = as_expr(phi)
        g = as_expr(g)
        F = phi if is_zero(g) else phi * func("exp", g)
        return cls(q=q, gamma=gamma, p=p, F=F, g=g, phi=phi, **kw)

    @cached_property
    def dp(self):
        return differentiate(self.p)

    @cached_property
    def dg(self):
        return differentiate(self.g)

    @cached_property
    def dF(self):
        return differentiate(self.F)

    @property
    def contour_delta(self):
        return self.q / 2 if self.delta is None else self.delta

    @property
    def phi_or_derived(self):
        """phi if declared, otherwise F * exp(-g)."""
        if self.phi is not None:
            return self.phi
        if is_zero(self.g):
            return self.F
        return self.F * func("exp", -self.g)

    def with_gamma(self, gamma):
        return replace(self, gamma=complex(gamma))

    def reparameterized(self, x):
        """The same operator written as (p - i g / x, F, 0)."""
        p_new = self.p - Const(1j / x) * self.g
        return replace(self, p=p_new, g=ZERO, phi=None)

    def boundary(self, expr, sigma):
        return complex(as_expr(expr)(sigma * self.q))


@dataclass(frozen=True)
class NystromSystem:
    rule: QuadratureRule
    K: np.ndarray
    x: float

    @property
    def order(self):
        return len(self.rule)


# ------------------------------------------------------------ pointwise

def nu(model: ModelSpec, lam, F=None):
    """(i / 2 pi) log(1 + gamma F(lam)), principal branch.

    ``F`` overrides the model's F (used for the almost-reduced variants).
    """
    Fv = (model.F if F is None else as_expr(F))(lam)
    arg = model.gamma * np.asarray(Fv)
    if np.any(np.abs(arg) >= 1):
        raise PreconditionError("|gamma F| >= 1: nu outside the small-coupling regime")
    w = 1 + arg
    if np.any((np.imag(w) == 0) & (np.real(w) <= 0)):
        raise PreconditionError("1 + gamma F on the branch cut of the log")
    out = 1j / (2 * np.pi) * np.log(w)
    return complex(out) if np.ndim(lam) == 0 else out


def nu_prime(model: ModelSpec, lam, F=None):
    Fe = model.F if F is None else as_expr(F)
    dF = model.dF if F is None else differentiate(Fe)
    Fv = Fe(lam)
    out = 1j / (2 * np.pi) * model.gamma * dF(lam) / (1 + model.gamma * Fv)
    return out


def _sinhc(d):
    """sinh(d) / d, series form; only used for |d| well below 1."""
    d2 = d * d
    return 1 + d2 / 6 * (1 + d2 / 20 * (1 + d2 / 42 * (1 + d2 / 72)))


def reduced_kernel(model: ModelSpec, x: float, lam, mu):
    """K(lam, mu) = V(lam, mu) / gamma, vectorised with broadcasting."""
    lam, mu = np.broadcast_arrays(np.asarray(lam, dtype=complex), np.asarray(mu, dtype=complex))
    shape = lam.shape
    lam, mu = lam.ravel(), mu.ravel()
    Pl, Pm = model.p(lam), model.p(mu)
    Gl, Gm = model.g(lam), model.g(mu)
    sF = np.sqrt(model.F(lam)) * np.sqrt(model.F(mu))
    D = lam - mu
    delta = 0.5j * x * (Pl - Pm) + 0.5 * (Gl - Gm)
    out = np.empty(lam.shape, dtype=complex)

    diag = D == 0
    near = (np.abs(D) < NEAR_DIAGONAL) & ~diag
    far = ~(diag | near)
    out[far] = sF[far] * np.sinh(delta[far]) / (1j * np.pi * D[far])
    if np.any(near):
        mid = 0.5 * (lam[near] + mu[near])
        ratio = 0.5j * x * model.dp(mid) + 0.5 * model.dg(mid)
        out[near] = sF[near] * ratio * _sinhc(delta[near]) / (1j * np.pi)
    if np.any(diag):
        ld = lam[diag]
        out[diag] = model.F(ld) * (x * model.dp(ld) - 1j * model.dg(ld)) / (2 * np.pi)
    out = out.reshape(shape)
    return complex(out) if out.ndim == 0 else out


def kernel_value(model: ModelSpec, x: float, lam, mu):
    """V(lam, mu) including the coupling gamma."""
    return model.gamma * reduced_kernel(model, x, lam, mu)


# ----------------------------------------------------------- discretised

def check_model(model: ModelSpec, nodes):
    Fv = model.F(nodes)
    if np.max(np.abs(model.gamma * Fv)) >= 1:
        raise PreconditionError("sup |gamma F| >= 1 on the quadrature nodes")
    P = model.p(nodes)
    dP = np.abs(P[:, None] - P[None, :])
    np.fill_diagonal(dP, np.inf)
    if dP.min() <= 0:
        raise PreconditionError("p is not injective on the quadrature nodes")


def assemble(model: ModelSpec, x: float, order: int | None = None) -> NystromSystem:
    """Nystrom matrix K[i, j] = sqrt(w_i w_j) V(l_i, l_j) / gamma."""
    order = model.quad_order if order is None else order
    rule = gauss_legendre(order, -model.q, model.q)
    t = rule.nodes
    check_model(model, t)
    K = reduced_kernel(model, x, t[:, None], t[None, :])
    sw = np.sqrt(rule.weights)
    K = sw[:, None] * K * sw[None, :]
    K = 0.5 * (K + K.T)
    K.setflags(write=False)
    return NystromSystem(rule=rule, K=K, x=float(x))


def log_fredholm_det(system: NystromSystem, gamma: complex) -> complex:
    """sum_i log(1 + gamma mu_i) over the eigenvalues mu_i of K."""
    gamma = complex(gamma)
    if gamma == 0:
        return 0j
    mu = np.linalg.eigvals(system.K)
    radius = np.max(np.abs(gamma * mu))
    if radius >= 1:
        raise PreconditionError(
            f"spectral radius of gamma K is {radius:.3g} >= 1; use a smaller |gamma|")
    return complex(np.sum(np.log1p(gamma * mu)))


def lndet(model: ModelSpec, x: float, order: int | None = None, tol: float = 1e-9,
          cap: int = MAX_ORDER):
    """ln det(I + V) with automatic order doubling.

    Returns (value, order_used): the value at the finest order once two
    successive orders agree within ``tol``.
    """
    order = model.quad_order if order is None else order
    prev = log_fredholm_det(assemble(model, x, order), model.gamma)
    while True:
        nxt = 2 * order
        if nxt > cap:
            raise ConvergenceError(
                f"ln det not converged to {tol:g} below order {cap} at x={x}")
        cur = log_fredholm_det(assemble(model, x, nxt), model.gamma)
        if abs(cur - prev) <= tol:
            if order != model.quad_order:
                log.info("x=%g: quadrature order escalated to %d", x, nxt)
            return cur, nxt
        order, prev = nxt, cur


def trace_power(system: NystromSystem, n: int, cap: int = TRACE_POWER_CAP) -> complex:
    """tr(K^n) by repeated multiplication; independent of gamma."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > cap:
        raise ValueError(f"n={n} exceeds the trace-power cap {cap}")
    M = system.K
    for _ in range(n - 1):
        M = M @ system.K
    return complex(np.trace(M))


def trace_powers(system: NystromSystem, nmax: int):
    """[tr K, tr K^2, ..., tr K^nmax]; the shared-product version of trace_power."""
    out = []
    M = system.K
    for k in range(1, nmax + 1):
        if k > 1:
            M = M @ system.K
        out.append(complex(np.trace(M)))
    return out


# ------------------------------------------------------------------ kappa

def log_kappa(model: ModelSpec, lam, nu_fn=None, dnu_fn=None, order: int | None = None):
    """int_{-q}^{q} (nu(lam) - nu(mu)) / (lam - mu) dmu.

    ``nu_fn``/``dnu_fn`` inject a synthetic nu and its derivative; by default
    they come from the model. Where |lam - mu| < 1e-8 the integrand is
    replaced by nu'(mu).
    """
    if nu_fn is None:
        nu_fn = lambda z: nu(model, z)  # noqa: E731
        dnu_fn = lambda z: nu_prime(model, z)  # noqa: E731
    order = model.quad_order if order is None else order
    rule = gauss_legendre(order, -model.q, model.q)
    mu = rule.nodes
    lam_arr = np.asarray(lam, dtype=complex)
    L = lam_arr[..., None]
    num = np.asarray(nu_fn(L)) - np.asarray(nu_fn(mu))
    D = L - mu
    close = np.abs(D) < KAPPA_COINCIDENCE
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(close, 0, num / np.where(close, 1, D))
    if np.any(close):
        if dnu_fn is None:
            raise ValueError("dnu_fn required when lam hits a quadrature node")
        dn = np.broadcast_to(np.asarray(dnu_fn(mu)), integrand.shape)
        integrand = np.where(close, dn, integrand)
    out = integrand @ rule.weights
    return complex(out) if np.ndim(lam) == 0 else out


def kappa(model: ModelSpec, lam, nu_fn=None, dnu_fn=None, order: int | None = None):
    return np.exp(log_kappa(model, lam, nu_fn, dnu_fn, order))
