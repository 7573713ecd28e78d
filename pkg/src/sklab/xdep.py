"""x-dependent symmetric functions with the reduction property.

    F_n({l}|{z}) = exp(x G_n + ln x H_n) W_n prod_i V_n(l_i),

    G_n = sum a(l_i) - sum a(z_i)     H_n = sum b(l_i) - sum b(z_i)
    W_n = prod_{i,j} w(l_i, z_j) / (prod_{i<j} w(l_i, l_j) prod_{i<j} w(z_i, z_j))
    V_n(u | . | .) = v(u),            w(u, u') = 1 + c (u - u')^2

Setting z_s = l_k cancels every factor carrying l_k or z_s in G_n, H_n and
W_n, which is the reduction property the leading-order formulas rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from sklab.expr import ZERO, AnalyticExpr, as_expr, differentiate

OMEGA_FLOOR = 1e-12


class ReductionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class XDepFamily:
    a: AnalyticExpr = ZERO
    b: AnalyticExpr = ZERO
    v: AnalyticExpr = as_expr(1)
    c: complex = 0.0
    # nonzero only for the deliberately broken family, w(u, u) = 1 + offset
    omega_offset: complex = 0.0

    def __post_init__(self):
        for name in ("a", "b", "v"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        object.__setattr__(self, "c", complex(self.c))

    @classmethod
    def from_mapping(cls, d):
        return cls(a=d.get("a", "0"), b=d.get("b", "0"), v=d.get("v", "1"), c=d.get("c", 0.0))

    def omega(self, u, u2):
        u = np.asarray(u, dtype=complex)
        u2 = np.asarray(u2, dtype=complex)
        return 1 + self.c * (u - u2) ** 2 + self.omega_offset

    def G(self, lams, zs):
        return _additive(self.a, lams, zs)

    def H(self, lams, zs):
        return _additive(self.b, lams, zs)

    def W(self, lams, zs):
        lams = np.asarray(lams, dtype=complex)
        zs = np.asarray(zs, dtype=complex)
        n = lams.shape[-1]
        num = np.prod(self.omega(lams[..., :, None], zs[..., None, :]), axis=(-2, -1))
        den = 1
        iu, ju = np.triu_indices(n, 1)
        if iu.size:
            den = np.prod(self.omega(lams[..., iu], lams[..., ju]), axis=-1)
            den = den * np.prod(self.omega(zs[..., iu], zs[..., ju]), axis=-1)
        if np.any(np.abs(num) < OMEGA_FLOOR) or np.any(np.abs(den) < OMEGA_FLOOR):
            raise ReductionError("w vanishes at the evaluation point")
        return num / den

    def V(self, u, lams=None, zs=None):
        # set-independent generator
        return self.v(u)

    @property
    def da(self):
        return differentiate(self.a)


def _additive(f, lams, zs):
    lams = np.asarray(lams, dtype=complex)
    zs = np.asarray(zs, dtype=complex)
    if lams.shape[-1] == 0:
        return np.zeros(lams.shape[:-1], dtype=complex)
    return np.sum(f(lams), axis=-1) - np.sum(f(zs), axis=-1)


def xdep_eval(family: XDepFamily, lams, zs, x: float) -> complex:
    """Evaluate F_n at one pair of variable sets."""
    lams = np.asarray(lams, dtype=complex)
    zs = np.asarray(zs, dtype=complex)
    if lams.shape != zs.shape:
        raise ValueError("the two variable sets must have equal size")
    if lams.shape[-1] == 0:
        return 1 + 0j
    expo = x * family.G(lams, zs) + np.log(x) * family.H(lams, zs)
    out = np.exp(expo) * family.W(lams, zs) * np.prod(family.V(lams, lams, zs), axis=-1)
    return complex(out) if np.ndim(out) == 0 else out


def _structural(family, lams, zs, x):
    """The part that reduces: exp(x G + ln x H) W (the V product loses one factor)."""
    if len(lams) == 0:
        return 1 + 0j
    lams = np.asarray(lams, dtype=complex)
    zs = np.asarray(zs, dtype=complex)
    return complex(np.exp(x * family.G(lams, zs) + np.log(x) * family.H(lams, zs))
                   * family.W(lams, zs))


def reduction_check(family: XDepFamily, n: int, samples: int = 50, x: float = 3.0,
                    radius: float = 0.5, seed: int = 0) -> float:
    """Largest relative reduction defect over random collisions z_s = l_k.

    Compares exp(x G_n + ln x H_n) W_n at the collision with its (n-1)-variable
    counterpart, and V_n at the collision with V_{n-1} on the remaining sets.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        lams = radius * (rng.uniform(-1, 1, n) + 0.3j * rng.uniform(-1, 1, n))
        zs = radius * (rng.uniform(-1, 1, n) + 0.3j * rng.uniform(-1, 1, n))
        k, s = rng.integers(n), rng.integers(n)
        zs[s] = lams[k]
        full = _structural(family, lams, zs, x)
        rl = np.delete(lams, k)
        rz = np.delete(zs, s)
        red = _structural(family, rl, rz, x)
        worst = max(worst, abs(full - red) / max(abs(red), 1e-300))
        u = radius * rng.uniform(-1, 1)
        vf = family.V(u, lams, zs)
        vr = family.V(u, rl, rz)
        worst = max(worst, abs(vf - vr) / max(abs(vr), 1e-300))
    return float(worst)


def symmetry_defect(family: XDepFamily, lams, zs, x: float) -> float:
    """Max relative change of xdep_eval over all permutations of each set."""
    base = xdep_eval(family, lams, zs, x)
    worst = 0.0
    for pl in permutations(range(len(lams))):
        for pz in permutations(range(len(zs))):
            val = xdep_eval(family, np.asarray(lams)[list(pl)], np.asarray(zs)[list(pz)], x)
            worst = max(worst, abs(val - base) / max(abs(base), 1e-300))
    return worst


@dataclass(frozen=True)
class ReducedSet:
    """Reduced quantities entering the leading-order actions.

    m = 0: fully reduced G, H, W and G'(l) = d/de G_1(l | l + e).
    m = +-1: almost reduced values at (-m q | m q) and
    (G^(m))'(z) = d/de G_2(-m q, z | m q, z + e).
    """

    m: int
    G: complex
    H: complex
    W: complex
    V: AnalyticExpr
    dG: AnalyticExpr

    def V_at(self, z):
        return complex(self.V(z))

    def dG_at(self, z):
        return complex(self.dG(z))


def reduced_values(family: XDepFamily, model, m: int) -> ReducedSet:
    if m not in (0, 1, -1):
        raise ValueError("m must be 0, +1 or -1")
    # for the additive exponent both printed derivative definitions give -a'
    dG = -family.da
    if m == 0:
        z = 0.0
        G = complex(family.G([z], [z]))
        return ReducedSet(m=0, G=G, H=0j, W=1 + 0j, V=family.v, dG=dG)
    q = model.q
    lo, hi = [-m * q], [m * q]
    return ReducedSet(
        m=m,
        G=complex(family.G(lo, hi)),
        H=complex(family.H(lo, hi)),
        W=complex(family.W(lo, hi)),
        V=family.v,
        dG=dG,
    )
