"""Cyclic integrals I_n[F_n] for n = 1, 2 by direct tensor quadrature.

    I_n[F_n] = oint d^n z / (2 i pi)^n  int_{-q}^{q} d^n l / (2 i pi)^n  F_n({l}|{z})
               prod_k exp(i x (p(z_k) - p(l_k))) / ((l_k - z_k)(l_k - z_{k+1})),

with z_{n+1} = z_1 and the z-contour a rectangle around [-q, q].
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sklab.expr import as_expr, func, is_zero
from sklab.kernel import ConvergenceError, ModelSpec, PreconditionError, assemble, trace_power
from sklab.numerics import gauss_legendre, segment_rule

log = logging.getLogger(__name__)

MAX_N = 2
# exp(i x p) grows like exp(x delta |p'|) on the contour
GROWTH_CAP = 40.0


@dataclass(frozen=True)
class ContourRule:
    """Counter-clockwise rectangle with corners (+-(q+delta), +-delta)."""

    q: float
    delta: float
    nodes_per_side: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        return np.sum(self.weights * f(self.nodes))


def build_contour(q: float, delta: float, nodes_per_side: int, model: ModelSpec | None = None,
                  segment_order: int | None = None) -> ContourRule:
    if not delta > 0:
        raise ValueError("contour margin delta must be positive")
    if nodes_per_side < 1:
        raise ValueError("nodes_per_side must be positive")
    a = q + delta
    corners = [complex(-a, -delta), complex(a, -delta), complex(a, delta), complex(-a, delta)]
    nodes, weights = [], []
    for k in range(4):
        r = segment_rule(nodes_per_side, corners[k], corners[(k + 1) % 4])
        nodes.append(r.nodes)
        weights.append(r.weights)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    if model is not None:
        seg = gauss_legendre(segment_order or model.quad_order, -q, q).nodes
        pts = np.concatenate([nodes, seg])
        vals = [model.p(pts), model.F(pts), model.g(pts)]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise PreconditionError("p, F or g not finite on the contour rectangle")
        P = vals[0]
        scale = max(1.0, float(np.max(np.abs(P))))
        dP = np.abs(P[:, None] - P[None, :])
        np.fill_diagonal(dP, np.inf)
        if dP.min() < 1e-12 * scale:
            raise PreconditionError("p is not injective on the contour and segment nodes")
    return ContourRule(q=q, delta=delta, nodes_per_side=nodes_per_side,
                       nodes=nodes, weights=weights)


# ------------------------------------------------------ symmetric functions

class SymmetricFn:
    """F_n({l}|{z}), symmetric in each set separately.

    Called with two tuples of n broadcast-compatible arrays, one per
    variable, and returns their broadcast product shape.
    """

    def __init__(self, n, evaluator, label=""):
        self.n = n
        self._evaluator = evaluator
        self.label = label

    def __call__(self, lams, zs):
        if len(lams) != self.n or len(zs) != self.n:
            raise ValueError(f"expected {self.n} variables per set")
        return self._evaluator(tuple(lams), tuple(zs))

    def permuted(self, perm_l, perm_z):
        """Same function with its arguments relabelled (for symmetry checks)."""
        def ev(lams, zs):
            return self._evaluator(tuple(lams[i] for i in perm_l), tuple(zs[i] for i in perm_z))
        return SymmetricFn(self.n, ev, label=self.label + " (permuted)")


def pure_product(phi, g, n: int) -> SymmetricFn:
    """prod_k phi(l_k) exp(g(z_k))."""
    phi = as_expr(phi)
    g = as_expr(g)
    eg = None if is_zero(g) else func("exp", g)

    def ev(lams, zs):
        out = 1
        for lam in lams:
            out = out * phi(lam)
        if eg is not None:
            for z in zs:
                out = out * eg(z)
        return out

    return SymmetricFn(n, ev, label=f"pure_product({phi}, {g})")


def constant_fn(value, n: int) -> SymmetricFn:
    value = complex(value)
    return SymmetricFn(n, lambda lams, zs: value, label=f"constant({value})")


def xdep_fn(family, x: float, n: int) -> SymmetricFn:
    """The x-dependent family as a SymmetricFn."""
    from sklab.xdep import xdep_eval

    def ev(lams, zs):
        L = np.stack(np.broadcast_arrays(*lams, *zs), axis=-1)
        return xdep_eval(family, L[..., :n], L[..., n:], x)

    return SymmetricFn(n, ev, label="xdep")


# ---------------------------------------------------------- integration

def _threads():
    try:
        return max(1, int(os.environ.get("SKL_THREADS", "1")))
    except ValueError:
        return 1


def _tensor_value(fn, model, x, n, contour, seg):
    z, wz = contour.nodes, contour.weights
    lam, wl = seg.nodes + 0j, seg.weights
    Az = wz * np.exp(1j * x * model.p(z))
    Bl = wl * np.exp(-1j * x * model.p(lam))
    R = 1.0 / (lam[:, None] - z[None, :])        # R[l, z] = 1/(l - z)
    norm = (2j * np.pi) ** (2 * n)
    if n == 1:
        Fv = np.broadcast_to(fn((lam[:, None],), (z[None, :],)), R.shape)
        return complex(np.sum(Fv * (Bl[:, None] * R * R) * Az[None, :]) / norm)

    # n == 2, axes (z1, l1, z2, l2); chunks over z1 reduced in fixed order
    nz = z.size
    chunk = max(1, 2_000_000 // (lam.size ** 2 * nz))

    def block(start):
        sl = slice(start, min(start + chunk, nz))
        z1 = z[sl][:, None, None, None]
        l1 = lam[None, :, None, None]
        z2 = z[None, None, :, None]
        l2 = lam[None, None, None, :]
        Fv = fn((l1, l2), (z1, z2))
        # 1/((l1 - z1)(l1 - z2)(l2 - z2)(l2 - z1))
        r11 = R.T[sl][:, :, None, None]
        r12 = R[None, :, :, None]
        r22 = R.T[None, None, :, :]
        r21 = R.T[sl][:, None, None, :]
        w = (Az[sl][:, None, None, None] * Bl[None, :, None, None]
             * Az[None, None, :, None] * Bl[None, None, None, :])
        return complex(np.sum(Fv * w * r11 * r12 * r22 * r21))

    starts = range(0, nz, chunk)
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return complex(np.sum(np.array(parts))) / norm


@dataclass
class CyclicResult:
    value: complex
    nodes_per_side: int
    segment_order: int
    trail: list = field(default_factory=list)

    @property
    def rel_change(self):
        if len(self.trail) < 2:
            return float("nan")
        a, b = self.trail[-2][2], self.trail[-1][2]
        return abs(b - a) / max(abs(b), 1e-300)


DEFAULTS = {1: (64, 64, 1e-10), 2: (32, 32, 1e-6)}


def cyclic_integral(fn: SymmetricFn, model: ModelSpec, x: float, n: int,
                    delta: float | None = None, nodes_per_side: int | None = None,
                    segment_order: int | None = None, tol: float | None = None,
                    max_doublings: int = 2) -> CyclicResult:
    """Tensor quadrature of I_n with node doubling until two levels agree."""
    if n not in (1, 2):
        raise ValueError(f"cyclic integrals are implemented for n = 1, 2 only (got n={n})")
    if fn.n != n:
        raise ValueError("function arity does not match n")
    d_nps, d_seg, d_tol = DEFAULTS[n]
    delta = model.contour_delta if delta is None else delta
    nps = nodes_per_side or (model.nodes_per_side if n == 1 else d_nps)
    seg = segment_order or d_seg
    tol = d_tol if tol is None else tol

    probe = build_contour(model.q, delta, 8)
    growth = abs(x) * delta * float(np.max(np.abs(model.dp(probe.nodes))))
    if growth > GROWTH_CAP:
        raise PreconditionError(
            f"x * delta * max|p'| = {growth:.1f} exceeds {GROWTH_CAP}; reduce x or delta")

    trail = []
    for level in range(max_doublings + 1):
        contour = build_contour(model.q, delta, nps, model=model if level == 0 else None,
                                segment_order=seg)
        rule = gauss_legendre(seg, -model.q, model.q)
        val = _tensor_value(fn, model, x, n, contour, rule)
        trail.append((nps, seg, val))
        log.info("cyclic n=%d nodes/side=%d seg=%d -> %r", n, nps, seg, val)
        if len(trail) >= 2:
            prev = trail[-2][2]
            if abs(val - prev) <= tol * max(abs(val), 1e-300):
                return CyclicResult(val, nps, seg, trail)
        nps, seg = 2 * nps, 2 * seg
    raise ConvergenceError(
        f"cyclic integral not converged to {tol:g}; last values {trail[-2][2]!r}, {trail[-1][2]!r}")


@dataclass(frozen=True)
class LinkReport:
    lhs: complex
    rhs: complex
    rel_err: float
    cyclic: CyclicResult


def link_check(model: ModelSpec, x: float, n: int, **kw) -> LinkReport:
    """Cyclic integral of the pure product (phi, g) against tr K^n."""
    fn = pure_product(model.phi_or_derived, model.g, n)
    res = cyclic_integral(fn, model, x, n, **kw)
    rhs = trace_power(assemble(model, x), n)
    return LinkReport(res.value, rhs, abs(res.value - rhs) / max(abs(rhs), 1e-30), res)


def finite_difference_moment(v, z, t: int, model: ModelSpec, order: int | None = None):
    """int_{-q}^{q} (v(z)^t - v(mu)^t) / (z - mu) dmu."""
    v = as_expr(v)
    order = model.quad_order if order is None else order
    rule = gauss_legendre(order, -model.q, model.q)
    mu = rule.nodes
    Z = np.asarray(z, dtype=complex)[..., None]
    num = v(Z) ** t - v(mu) ** t
    D = Z - mu
    close = np.abs(D) < 1e-8
    if np.any(close):
        from sklab.expr import differentiate
        dv = t * v(mu) ** (t - 1) * differentiate(v)(mu)
        integrand = np.where(close, np.broadcast_to(dv, D.shape), num / np.where(close, 1, D))
    else:
        integrand = num / D
    out = integrand @ rule.weights
    return complex(out) if np.ndim(z) == 0 else out


__all__ = [
    "ContourRule", "CyclicResult", "LinkReport", "SymmetricFn", "build_contour",
    "constant_fn", "cyclic_integral", "finite_difference_moment", "link_check",
    "pure_product", "xdep_fn",
]
