"""Shared numerical kernels: quadrature, Gamma, Pochhammer, jets, least squares."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.special


class PoleError(ArithmeticError):
    pass


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, columns):
        super().__init__(f"rank-deficient design; offending basis columns: {list(columns)}")
        self.columns = list(columns)


# ------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        return np.sum(self.weights * f(self.nodes))

    def __len__(self):
        return len(self.nodes)


@lru_cache(maxsize=64)
def _legendre_reference(order):
    """Nodes/weights on [-1, 1], nodes ascending."""
    t, w = scipy.special.roots_legendre(order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """Gauss-Legendre rule with ``order`` nodes on the real segment [a, b]."""
    if order < 1:
        raise ValueError("order must be >= 1")
    t, w = _legendre_reference(int(order))
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=half * t + 0.5 * (a + b), weights=half * w)


def segment_rule(order: int, z0: complex, z1: complex) -> QuadratureRule:
    """Gauss-Legendre rule on the straight complex segment z0 -> z1 (weights carry dz/dt)."""
    t, w = _legendre_reference(int(order))
    half = 0.5 * (z1 - z0)
    return QuadratureRule(nodes=half * t + 0.5 * (z0 + z1), weights=half * w + 0j)


# ------------------------------------------------------------------ Gamma

_LANCZOS_G = 7
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _is_nonpositive_integer(z, tol=0.0):
    z = complex(z)
    return z.imag == 0 and z.real <= 0 and abs(z.real - round(z.real)) <= tol


def complex_gamma(z: complex) -> complex:
    """Gamma function of a complex argument (Lanczos + reflection)."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma has a pole at {z}")
    if z.real < 0.5:
        return np.pi / (np.sin(np.pi * z) * complex_gamma(1 - z))
    z -= 1
    x = _LANCZOS_COEF[0]
    for i in range(1, _LANCZOS_G + 2):
        x += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return complex(np.sqrt(2 * np.pi) * t ** (z + 0.5) * np.exp(-t) * x)


def rgamma(z: complex) -> complex:
    """1/Gamma(z); entire, zero at the non-positive integers."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        return 0j
    return 1.0 / complex_gamma(z)


def pochhammer(alpha, k: int):
    """Rising factorial alpha (alpha+1) ... (alpha+k-1); works for jets too."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = 1
    for j in range(k):
        out = out * (alpha + j)
    return out


_BERNOULLI = scipy.special.bernoulli(40)


def polygamma(k: int, z: complex) -> complex:
    """psi^(k)(z) for complex z: upward recurrence then the asymptotic series."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"polygamma has a pole at {z}")
    shift = 0j
    fk = math.factorial(k)
    sign = (-1) ** k
    # psi^(k)(z) = psi^(k)(z+1) - (-1)^k k! / z^(k+1)
    while abs(z) < 20 or z.real < 10:
        if k == 0:
            shift -= 1 / z
        else:
            shift -= sign * fk / z ** (k + 1)
        z += 1
    if k == 0:
        s = np.log(z) - 1 / (2 * z)
        for j in range(1, 15):
            s -= _BERNOULLI[2 * j] / (2 * j * z ** (2 * j))
    else:
        s = math.factorial(k - 1) / z ** k + fk / (2 * z ** (k + 1))
        for j in range(1, 15):
            s += _BERNOULLI[2 * j] * math.factorial(2 * j + k - 1) / (
                math.factorial(2 * j) * z ** (2 * j + k))
        s *= (-1) ** (k + 1)
    return complex(s + shift)


# ------------------------------------------------------------------- jets

class Jet:
    """Truncated Taylor series c_0 + c_1 t + ... + c_K t^K in one variable.

    Arithmetic with scalars and other jets of the same order is closed;
    transcendental functions compose through their Taylor coefficients at
    the base point c_0.
    """

    __slots__ = ("coeffs",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("jet needs a nonempty 1-d coefficient list")
        c.setflags(write=False)
        self.coeffs = c

    @classmethod
    def constant(cls, value, order):
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, order, base=0.0):
        c = np.zeros(order + 1, dtype=complex)
        c[0] = base
        if order >= 1:
            c[1] = 1
        return cls(c)

    @property
    def order(self):
        return self.coeffs.size - 1

    @property
    def value(self):
        return complex(self.coeffs[0])

    def derivative(self, n):
        """n-th derivative at the base point: n! c_n (0 beyond the order)."""
        if n > self.order:
            raise ValueError(f"jet of order {self.order} cannot give derivative {n}")
        return complex(math.factorial(n) * self.coeffs[n])

    def __repr__(self):
        return f"Jet({self.coeffs.tolist()})"

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jet orders differ")
            return other.coeffs
        c = np.zeros_like(self.coeffs)
        c[0] = complex(other)
        return c

    def __add__(self, other):
        return Jet(self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.coeffs - self._coerce(other))

    def __rsub__(self, other):
        return Jet(self._coerce(other) - self.coeffs)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * complex(other))
        return Jet(np.convolve(self.coeffs, self._coerce(other))[: self.order + 1])

    __rmul__ = __mul__

    def reciprocal(self):
        a = self.coeffs
        if a[0] == 0:
            raise ZeroDivisionError("reciprocal of a jet with zero base value")
        b = np.zeros_like(a)
        b[0] = 1 / a[0]
        for n in range(1, a.size):
            b[n] = -np.dot(a[1:n + 1], b[n - 1::-1][:n]) / a[0]
        return Jet(b)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs / complex(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)):
            raise TypeError("jets only take integer powers; use jexp/jlog")
        if k < 0:
            return self.reciprocal() ** (-k)
        out = Jet.constant(1, self.order)
        for _ in range(k):
            out = out * self
        return out

    def compose(self, taylor):
        """f(self) where ``taylor`` are f's Taylor coefficients at self.value."""
        taylor = np.asarray(taylor, dtype=complex)
        h = Jet(np.concatenate([[0], self.coeffs[1:]]))
        out = Jet.constant(taylor[0], self.order)
        hp = Jet.constant(1, self.order)
        for k in range(1, self.order + 1):
            hp = hp * h
            if k < taylor.size:
                out = out + hp * taylor[k]
        return out


def _lift(a, order=None):
    if isinstance(a, Jet):
        return a
    return Jet.constant(a, 0 if order is None else order)


def jexp(a):
    if not isinstance(a, Jet):
        return complex(np.exp(complex(a)))
    e0 = np.exp(a.value)
    return a.compose([e0 / math.factorial(k) for k in range(a.order + 1)])


def jlog(a):
    """Principal log; the base value must be off the closed negative real axis."""
    if not isinstance(a, Jet):
        a0 = complex(a)
        if a0.imag == 0 and a0.real <= 0:
            raise ArithmeticError(f"log argument {a0} on the branch cut")
        return complex(np.log(a0))
    a0 = a.value
    if a0.imag == 0 and a0.real <= 0:
        raise ArithmeticError(f"log argument {a0} on the branch cut")
    taylor = [np.log(a0)] + [(-1) ** (k + 1) / (k * a0 ** k) for k in range(1, a.order + 1)]
    return a.compose(taylor)


def jpow(base, exponent):
    """base**exponent = exp(exponent * log(base)); base is a scalar off the cut."""
    return jexp(exponent * jlog(base))


def jgamma(a):
    """Gamma composed with a jet (polygamma expansion at the base point)."""
    if not isinstance(a, Jet):
        return complex_gamma(a)
    a0 = a.value
    taylor = [0j] + [polygamma(k - 1, a0) / math.factorial(k) for k in range(1, a.order + 1)]
    return jexp(a.compose(taylor)) * complex_gamma(a0)


def jrgamma(a):
    """1/Gamma composed with a jet; regular at the poles of Gamma.

    Shifts upward with 1/Gamma(a) = (a)_m / Gamma(a+m) so the expansion
    point of Gamma has real part >= 1.
    """
    if not isinstance(a, Jet):
        return rgamma(a)
    a0 = a.value
    m = max(0, math.ceil(1 - a0.real))
    b = a + m
    b0 = b.value
    taylor = [0j] + [-polygamma(k - 1, b0) / math.factorial(k) for k in range(1, a.order + 1)]
    inv = Jet(jexp(b.compose(taylor)).coeffs / complex_gamma(b0))
    return pochhammer(a, m) * inv


def jet_from_function(kind: str, order: int, **params) -> Jet:
    """Build a jet in gamma about gamma = 0.

    kinds:
      ``log1p_scaled``  (i/2pi) ln(1 + s gamma); ``scale`` s (default 1),
                        ``prefactor`` replaces i/2pi when given.
      ``polynomial``    ``coeffs`` taken as Taylor coefficients.
      ``composition``   ``outer`` Taylor coefficients applied to ``inner`` jet.
    """
    if order < 1:
        raise ValueError("truncation order must be >= 1")
    if kind == "log1p_scaled":
        s = complex(params.get("scale", 1.0))
        pref = complex(params.get("prefactor", 1j / (2 * np.pi)))
        c = np.zeros(order + 1, dtype=complex)
        n = np.arange(1, order + 1)
        c[1:] = pref * (-1.0) ** (n + 1) * s ** n / n
        return Jet(c)
    if kind == "polynomial":
        c = np.zeros(order + 1, dtype=complex)
        given = np.asarray(params["coeffs"], dtype=complex)[: order + 1]
        c[: given.size] = given
        return Jet(c)
    if kind == "composition":
        inner = params["inner"]
        if inner.order != order:
            raise ValueError("inner jet order mismatch")
        return inner.compose(params["outer"])
    raise ValueError(f"unknown jet kind {kind!r}")


# ---------------------------------------------------------- least squares

def least_squares_complex(design, rhs, rank_tol=1e-10):
    """Complex linear least squares via column-pivoted QR.

    Columns are normalised before factorisation; a column whose pivot falls
    below ``rank_tol`` relative to the largest raises RankDeficiencyError
    naming the offending column indices. Returns (coefficients, residual
    2-norm, 2-norm condition estimate of the unscaled design).
    """
    A = np.asarray(design, dtype=complex)
    b = np.asarray(rhs, dtype=complex)
    m, n = A.shape
    if m < n:
        raise ValueError("need rows >= columns")
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        raise RankDeficiencyError(np.flatnonzero(scale == 0))
    As = A / scale
    Q, R, piv = scipy.linalg.qr(As, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    bad = d < rank_tol * d[0]
    if np.any(bad):
        raise RankDeficiencyError(sorted(piv[bad].tolist()))
    y = scipy.linalg.solve_triangular(R, Q.conj().T @ b)
    c = np.empty(n, dtype=complex)
    c[piv] = y
    c = c / scale
    residual = float(np.linalg.norm(A @ c - b))
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    return c, residual, cond
