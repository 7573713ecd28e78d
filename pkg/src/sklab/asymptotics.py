"""Closed-form terms of the large-x expansion of ln det(I + V) and its functionals.

Everything here is an evaluator of an explicit formula. Quantities that
need gamma-derivatives at gamma = 0 are computed by pushing a jet in gamma
through nu, kappa, Gamma and the non-integer powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from sklab.cyclic import finite_difference_moment
from sklab.expr import as_expr, is_zero
from sklab.kernel import (
    ModelSpec,
    PreconditionError,
    assemble,
    log_kappa,
    nu,
    trace_power,
)
from sklab.numerics import (
    Jet,
    PoleError,
    gauss_legendre,
    jet_from_function,
    jexp,
    jgamma,
    jlog,
    jrgamma,
    pochhammer,
)

TWO_PI = 2 * np.pi
SIGNS = (1j, -1j, 1, -1)
INDEX_CONVENTIONS = ("as_printed", "shifted")


class AmbiguityError(ArithmeticError):
    pass


# ------------------------------------------------------------ containers

@dataclass(frozen=True)
class ConventionChoice:
    """Phase factors multiplying x int p' nu (s_p) and int g' nu (s_g)."""

    s_p: complex = 1
    s_g: complex = -1j
    calibrated: bool = False
    separation_p: float = float("nan")
    separation_g: float = float("nan")
    note: str = "as printed"

    def as_dict(self):
        return {
            "s_p": _cjson(self.s_p),
            "s_g": _cjson(self.s_g),
            "calibrated": self.calibrated,
            "separation_p": self.separation_p,
            "separation_g": self.separation_g,
            "note": self.note,
        }


AS_PRINTED = ConventionChoice()


@dataclass(frozen=True)
class Term:
    """amplitude * x**x_power * (ln x)**lnx_power * exp(i m x omega)."""

    label: str
    x_power: complex
    lnx_power: int
    m: int
    amplitude: complex
    source: str = ""

    def value(self, x, omega=0.0):
        return (self.amplitude * complex(x) ** self.x_power * np.log(x) ** self.lnx_power
                * np.exp(1j * self.m * x * omega))


@dataclass
class AsymptoticPrediction:
    terms: list
    omega: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, label):
        for t in self.terms:
            if t.label == label:
                return t
        raise KeyError(label)

    def labels(self):
        return [t.label for t in self.terms]

    def evaluate(self, x):
        return sum(t.value(x, self.omega) for t in self.terms)

    def as_dict(self):
        return {
            "terms": [
                {"label": t.label, "x_power": _cjson(t.x_power), "lnx_power": t.lnx_power,
                 "m": t.m, "amplitude": _cjson(t.amplitude), "source": t.source}
                for t in self.terms
            ],
            "omega": self.omega,
            "metadata": {k: (_cjson(v) if isinstance(v, complex) else v)
                         for k, v in self.metadata.items()},
        }


def _cjson(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


# ------------------------------------------------------- boundary data

def _segment_integral(model, f, order=None):
    rule = gauss_legendre(order or model.quad_order, -model.q, model.q)
    return complex(np.sum(rule.weights * f(rule.nodes)))


def boundary_values(model: ModelSpec):
    """p, p', g, g', F and nu at +-q, keyed '+' / '-'."""
    out = {}
    for s, key in ((1, "+"), (-1, "-")):
        z = s * model.q
        out[key] = {
            "p": complex(model.p(z)), "dp": complex(model.dp(z)),
            "g": complex(model.g(z)), "dg": complex(model.dg(z)),
            "F": complex(model.F(z)), "nu": nu(model, z),
        }
    return out


def _require_dp(dp):
    if dp == 0:
        raise PreconditionError("p' vanishes at an endpoint")


# ----------------------------------------------------------- convention

def calibrate_convention(model: ModelSpec, gamma: float = 1e-3, xs=(20.0, 40.0),
                         min_separation: float = 1e3) -> ConventionChoice:
    """Fix the phase factors of the two leading terms from gamma * tr K.

    tr K is exactly affine in x, so its x-linear and x-constant parts are
    separated from the two sample points and each phase is chosen
    independently among {+i, -i, +1, -1}.
    """
    if model.gamma == 0:
        return ConventionChoice(note="gamma = 0: calibration skipped")
    m = model.with_gamma(gamma)
    x1, x2 = xs
    t1 = gamma * trace_power(assemble(m, x1), 1)
    t2 = gamma * trace_power(assemble(m, x2), 1)
    slope = (t2 - t1) / (x2 - x1)
    const = t1 - slope * x1
    P = _segment_integral(m, lambda t: m.dp(t) * nu(m, t))
    s_p, sep_p = _pick(slope, P, min_separation, "x-linear")
    if is_zero(model.g):
        return ConventionChoice(s_p=s_p, s_g=-1j * s_p, calibrated=True, separation_p=sep_p,
                                note="s_g derived from s_p via p -> p - i g/x (g = 0)")
    Gi = _segment_integral(m, lambda t: m.dg(t) * nu(m, t))
    s_g, sep_g = _pick(const, Gi, min_separation, "g-term")
    return ConventionChoice(s_p=s_p, s_g=s_g, calibrated=True, separation_p=sep_p,
                            separation_g=sep_g, note=f"calibrated at gamma={gamma}, x={list(xs)}")


def _pick(target, base, min_separation, what):
    res = sorted(((abs(target - s * base), s) for s in SIGNS), key=lambda r: r[0])
    best, runner = res[0][0], res[1][0]
    sep = runner / best if best > 0 else float("inf")
    if sep < min_separation:
        raise AmbiguityError(f"{what} phase ambiguous: separation {sep:.3g} < {min_separation:g}")
    return res[0][1], float(sep)


def leading_terms(model: ModelSpec, x: float = None, conv: ConventionChoice = AS_PRINTED
                  ) -> AsymptoticPrediction:
    """s_p x int p' nu  and  s_g int g' nu."""
    P = _segment_integral(model, lambda t: model.dp(t) * nu(model, t))
    Gi = _segment_integral(model, lambda t: model.dg(t) * nu(model, t))
    terms = [
        Term("leading", 1, 0, 0, conv.s_p * P, "x int p' nu"),
        Term("g", 0, 0, 0, conv.s_g * Gi, "int g' nu"),
    ]
    return AsymptoticPrediction(terms, omega=_omega(model),
                                metadata={"convention": conv.as_dict()})


def _omega(model):
    return float(np.real(model.p(model.q) - model.p(-model.q)))


# ------------------------------------------------- boundary log series

def lemma1_term(model: ModelSpec, N: int) -> complex:
    """sum_sigma (1/N) (i g'_s / p'_s)^N nu_s^2."""
    if N < 1:
        raise ValueError("N must be positive")
    bv = boundary_values(model)
    total = 0j
    for key in "+-":
        b = bv[key]
        _require_dp(b["dp"])
        total += (1j * b["dg"] / b["dp"]) ** N * b["nu"] ** 2 / N
    return total


def lemma1_series_coefficients(model: ModelSpec, Nmax: int):
    """Coefficients of t^N, N = 0..Nmax, of -sum_s nu_s^2 log(p'_s - i g'_s t)."""
    bv = boundary_values(model)
    acc = Jet.constant(0, Nmax)
    for key in "+-":
        b = bv[key]
        _require_dp(b["dp"])
        arg = jet_from_function("polynomial", Nmax, coeffs=[b["dp"], -1j * b["dg"]])
        acc = acc - b["nu"] ** 2 * jlog(arg)
    return acc.coeffs.copy()


# ------------------------------------------------------ O-tilde functional

@dataclass(frozen=True)
class _Boundary:
    """nu_+-, ln kappa_+- (scalars or jets) and p'_+-, for one sign sigma."""

    nu_p: object
    nu_m: object
    lk_p: object
    lk_m: object
    dp_p: complex
    dp_m: complex


def _o_tilde_core(b: _Boundary, q, x, n, k, sigma):
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    _require_dp(b.dp_p)
    _require_dp(b.dp_m)
    a_p = sigma * b.nu_p
    a_m = sigma * b.nu_m
    try:
        power_x = jexp(2 * (a_p + a_m) * math.log(2 * q * x))
        power_p = jexp((2 * a_p - 1) * jlog(b.dp_p))
        power_m = jexp((2 * a_m - 1) * jlog(b.dp_m))
    except ArithmeticError as exc:
        raise PreconditionError(f"p' endpoint value on the branch cut: {exc}") from exc
    gam = jgamma(1 - a_m) * jgamma(1 - a_p) * jrgamma(a_m) * jrgamma(a_p)
    # kappa of sigma*nu is kappa(nu)**sigma
    kap = jexp(2 * sigma * (b.lk_m - b.lk_p))
    poch = pochhammer(2 * a_p - 1, k) * pochhammer(2 * a_m - 1, n - k)
    weight = 1 / (math.factorial(k) * math.factorial(n - k))
    return power_x / (2 * q) ** 2 * power_p * power_m * gam * kap * poch * weight


def _scalar_boundary(model: ModelSpec, source=None) -> _Boundary:
    src = model.F if source is None else as_expr(source)
    q = model.q
    nu_p, nu_m = nu(model, q, F=src), nu(model, -q, F=src)
    if source is None:
        lk_p, lk_m = log_kappa(model, q), log_kappa(model, -q)
    else:
        m2 = _with_F(model, src)
        lk_p, lk_m = log_kappa(m2, q), log_kappa(m2, -q)
    return _Boundary(nu_p, nu_m, lk_p, lk_m, complex(model.dp(q)), complex(model.dp(-q)))


def _with_F(model, src):
    from dataclasses import replace
    return replace(model, F=src, phi=None)


def _jet_boundary(model: ModelSpec, order: int, source=None) -> _Boundary:
    """Jets in gamma about gamma = 0 of nu_+- and ln kappa_+-."""
    src = model.F if source is None else as_expr(source)
    q = model.q
    out = {}
    for s in (1, -1):
        Fs = complex(src(s * q))
        nu_j = jet_from_function("log1p_scaled", order, scale=Fs)
        # ln kappa is linear in nu; nu's t-th gamma coefficient is (i/2pi)(-1)^(t+1) F^t / t
        lk = np.zeros(order + 1, dtype=complex)
        for t in range(1, order + 1):
            lk[t] = (1j / TWO_PI) * (-1) ** (t + 1) / t * finite_difference_moment(
                src, s * q, t, model)
        out[s] = (nu_j, Jet(lk))
    return _Boundary(out[1][0], out[-1][0], out[1][1], out[-1][1],
                     complex(model.dp(q)), complex(model.dp(-q)))


def O_tilde(model: ModelSpec, x: float, n: int, k: int, sigma: int) -> complex:
    """The oscillating amplitude functional O~_{n,k}[sigma nu] at the model's gamma."""
    try:
        return complex(_o_tilde_core(_scalar_boundary(model), model.q, x, n, k, sigma))
    except PoleError as exc:
        raise PreconditionError(str(exc)) from exc


def O_tilde_gamma_jet(model: ModelSpec, x: float, n: int, k: int, sigma: int, order: int,
                      source=None) -> Jet:
    """Jet in gamma about 0 of O~_{n,k}[sigma nu]; ``source`` replaces F in nu."""
    return _o_tilde_core(_jet_boundary(model, order, source), model.q, x, n, k, sigma)


def first_oscillating_term(model: ModelSpec, x: float) -> complex:
    """x^-2 sum_sigma O~_{0,0}[sigma nu] exp(i sigma x (p_+ - p_-))."""
    if model.gamma == 0:
        return 0j
    dpp = complex(model.p(model.q) - model.p(-model.q))
    return sum(O_tilde(model, x, 0, 0, s) * np.exp(1j * s * x * dpp) for s in (1, -1)) / x ** 2


def oscillating_terms(model: ModelSpec, x_ref: float = 1.0) -> list:
    """The m = +-1 first oscillating terms in Term form.

    O~ carries x^{2 sigma (nu_+ + nu_-)}; it is moved into x_power so the
    amplitude is x-independent.
    """
    bv = boundary_values(model)
    S = bv["+"]["nu"] + bv["-"]["nu"]
    terms = []
    for s in (1, -1):
        amp = O_tilde(model, x_ref, 0, 0, s) / complex(x_ref) ** (2 * s * S)
        terms.append(Term(f"osc{'+' if s > 0 else '-'}", -2 + 2 * s * S, 0, s, amp,
                          "x^-2 O~_{0,0}[sigma nu]"))
    return terms


def pochhammer_expansion_residual(alpha, beta, eps1, eps2, x: float, M: int) -> float:
    """|(1 - e1/x)^-alpha (1 - e2/x)^-beta - truncated double Pochhammer series|."""
    lhs = np.exp(-alpha * np.log(1 - eps1 / x) - beta * np.log(1 - eps2 / x))
    return abs(lhs - pochhammer_series(alpha, beta, eps1, eps2, x, M))


def pochhammer_series(alpha, beta, eps1, eps2, x, M):
    total = 0j
    for n in range(M + 1):
        c = sum(eps2 ** (n - k) * eps1 ** k * pochhammer(alpha, k) * pochhammer(beta, n - k)
                / (math.factorial(k) * math.factorial(n - k)) for k in range(n + 1))
        total += c / x ** n
    return total


# ------------------------------------------------ highest g-degree terms

def nu0_derivative(n: int, squared: bool = True) -> complex:
    """d^n/dgamma^n of nu_0^2 (or nu_0) at gamma = 0, nu_0 = (i/2pi) ln(1+gamma)."""
    order = max(n, 1)
    j = jet_from_function("log1p_scaled", order)
    if squared:
        j = j * j
    return j.derivative(n)


def _prefactor(n):
    return (-1) ** (n - 1) / math.factorial(n - 1)


def corollary_nonosc(model: ModelSpec, n: int, N: int, nu0_squared: bool = True) -> complex:
    """Highest-g-degree non-oscillating x^-N coefficient of J_n."""
    if n < 1 or N < 1:
        raise ValueError("n and N must be positive")
    bv = boundary_values(model)
    d = nu0_derivative(n, nu0_squared)
    total = 0j
    for key in "+-":
        b = bv[key]
        _require_dp(b["dp"])
        total += (1j * b["dg"] / b["dp"]) ** N / N * b["F"] ** n
    return _prefactor(n) * total * d


def sumrule_rhs_nonosc(model: ModelSpec, n: int, N: int, nu0_squared: bool = True) -> complex:
    """Right-hand side of the non-oscillating sum-rule (its left side is not computable here)."""
    bv = boundary_values(model)
    coef = _prefactor(n) * nu0_derivative(n, nu0_squared)
    out = 0j
    for key in "+-":
        b = bv[key]
        _require_dp(b["dp"])
        out += (1j * b["dg"] / b["dp"]) ** N / N * coef * b["F"] ** n
    return out


def _effective_order(N, index_convention):
    if index_convention not in INDEX_CONVENTIONS:
        raise ValueError(f"index_convention must be one of {INDEX_CONVENTIONS}")
    if index_convention == "shifted":
        if N < 2:
            raise ValueError("shifted index convention needs N >= 2")
        return N - 2
    return N


def _osc_k_sum(model, x, n, N, sigma, ratio_p, ratio_m, source, index_convention):
    M = _effective_order(N, index_convention)
    total = 0j
    for k in range(M + 1):
        weight = ratio_p ** k * ratio_m ** (M - k)
        if weight == 0:
            continue
        jet = O_tilde_gamma_jet(model, x, M, k, sigma, max(n, 1), source)
        total += weight * jet.derivative(n)
    return total


def corollary_osc(model: ModelSpec, x: float, n: int, N: int, sigma: int,
                  index_convention: str = "as_printed") -> complex:
    """Highest-g-degree oscillating coefficient of J_n at frequency sigma."""
    if n < 1 or N < 0:
        raise ValueError("need n >= 1 and N >= 0")
    bv = boundary_values(model)
    for key in "+-":
        _require_dp(bv[key]["dp"])
    rp = 1j * bv["+"]["dg"] / bv["+"]["dp"]
    rm = 1j * bv["-"]["dg"] / bv["-"]["dp"]
    pref = _prefactor(n) * np.exp(sigma * (bv["+"]["g"] - bv["-"]["g"]))
    return complex(pref * _osc_k_sum(model, x, n, N, sigma, rp, rm, None, index_convention))


# ------------------------------------------------- x-dependent functions

def prop_nonosc_action(family, model: ModelSpec, x: float, n: int, N: int,
                       nu0_squared: bool = True, v_exponent: str = "N") -> complex:
    """Leading value of x^-N I_n^(N,0)[F_n] on the x-dependent family.

    ``v_exponent`` picks the power of V(sigma q): "N" as in the
    proposition, "n" as in the sum-rule it is derived from.
    """
    from sklab.xdep import reduced_values

    if n < 1 or N < 1:
        raise ValueError("n and N must be positive")
    red = reduced_values(family, model, 0)
    power = {"N": N, "n": n}[v_exponent]
    coef = _prefactor(n) * nu0_derivative(n, nu0_squared)
    total = 0j
    for s in (1, -1):
        z = s * model.q
        dp = complex(model.dp(z))
        _require_dp(dp)
        total += (1j * red.dG_at(z) / dp) ** N / N * red.V_at(z) ** power
    return complex(np.exp(x * red.G + math.log(x) * red.H) * red.W * coef * total)


def prop_osc_action(family, model: ModelSpec, x: float, n: int, N: int, m: int,
                    index_convention: str = "as_printed") -> complex:
    """Leading value of x^-N I_n^(N,m)[F_n], m = +-1, with sigma taken equal to m."""
    from sklab.xdep import reduced_values

    if m not in (1, -1):
        raise ValueError("m must be +1 or -1")
    red = reduced_values(family, model, m)
    q = model.q
    dpp, dpm = complex(model.dp(q)), complex(model.dp(-q))
    _require_dp(dpp)
    _require_dp(dpm)
    rp = 1j * red.dG_at(q) / dpp
    rm = 1j * red.dG_at(-q) / dpm
    ksum = _osc_k_sum(model, x, n, N, m, rp, rm, family.v, index_convention)
    return complex(x ** -2 * red.W * np.exp(x * red.G + math.log(x) * red.H) * ksum)


def o_tilde_gamma2_leading(model: ModelSpec, n: int, k: int, source=None) -> complex:
    """d^2/dgamma^2 O~_{n,k}[sigma nu] at gamma = 0 from the hand expansion.

    Only 1/(Gamma(s nu_-) Gamma(s nu_+)) ~ nu_+ nu_- vanishes at gamma = 0;
    every other factor is taken at gamma = 0, where (-1)_k is 1, -1, 0.
    """
    src = model.F if source is None else as_expr(source)
    q = model.q
    Fp, Fm = complex(src(q)), complex(src(-q))
    dpp, dpm = complex(model.dp(q)), complex(model.dp(-q))
    poch = pochhammer(-1, k) * pochhammer(-1, n - k) / (math.factorial(k) * math.factorial(n - k))
    return 2 * (1j / TWO_PI) ** 2 * Fp * Fm / ((2 * q) ** 2 * dpp * dpm) * poch


__all__ = [
    "AS_PRINTED", "AmbiguityError", "AsymptoticPrediction", "ConventionChoice", "O_tilde",
    "O_tilde_gamma_jet", "Term", "boundary_values", "calibrate_convention", "corollary_nonosc",
    "corollary_osc", "first_oscillating_term", "leading_terms", "lemma1_series_coefficients",
    "lemma1_term", "nu0_derivative", "o_tilde_gamma2_leading", "oscillating_terms",
    "pochhammer_expansion_residual", "pochhammer_series", "prop_nonosc_action",
    "prop_osc_action", "sumrule_rhs_nonosc",
]

