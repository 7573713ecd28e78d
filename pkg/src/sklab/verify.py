"""Invariant suites run by ``sklab verify`` on the shipped fixture models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sklab import asymptotics as ae
from sklab.cyclic import cyclic_integral, link_check, pure_product
from sklab.kernel import ModelSpec, assemble, log_fredholm_det, log_kappa, trace_powers
from sklab.modelfile import fixture_names, fixture_path, load_model
from sklab.xdep import XDepFamily, reduction_check, symmetry_defect

SUITES = ("kernel", "asymptotics", "cyclic", "xdep")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}: {self.name} ({self.detail})"


def _check(suite, name, value, bound):
    ok = bool(np.isfinite(value) and value <= bound)
    return Check(suite, name, ok, f"{value:.3g} <= {bound:g}")


def stencil_derivative(f, x0, n, h):
    """n-th derivative by n-fold composition of the 5-point central stencil."""
    base = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12
    c = np.array([1.0])
    for _ in range(n):
        c = np.convolve(c, base)
    k = np.arange(c.size) - (c.size - 1) // 2
    return sum(ci * f(x0 + ki * h) for ci, ki in zip(c, k) if ci != 0) / h ** n


# ------------------------------------------------------------------ suites

def kernel_suite(model: ModelSpec, tag: str):
    s = "kernel"
    out = []
    sysm = assemble(model, 20.0)
    out.append(_check(s, f"{tag} K symmetric", float(np.max(np.abs(sysm.K - sysm.K.T))), 0.0))
    for x in (5.0, 20.0):
        a = assemble(model, x)
        b = assemble(model.reparameterized(x), x)
        out.append(_check(s, f"{tag} reparameterised matrix x={x:g}",
                          float(np.max(np.abs(a.K - b.K))), 1e-13))
        out.append(_check(s, f"{tag} reparameterised lndet x={x:g}",
                          abs(log_fredholm_det(a, model.gamma) - log_fredholm_det(b, model.gamma)),
                          1e-12))
    gam = 1e-2
    tr = trace_powers(sysm, 6)
    series = sum((-1) ** k * gam ** (k + 1) * tr[k] / (k + 1) for k in range(6))
    out.append(_check(s, f"{tag} trace series vs lndet", abs(log_fredholm_det(sysm, gam) - series),
                      1e-10))
    out.append(_check(s, f"{tag} lndet at gamma=0", abs(log_fredholm_det(sysm, 0)), 0.0))
    return out


def asymptotics_suite(model: ModelSpec, tag: str):
    s = "asymptotics"
    out = []
    coeffs = ae.lemma1_series_coefficients(model, 5)
    err = max(abs(ae.lemma1_term(model, N) - coeffs[N]) for N in range(1, 6))
    out.append(_check(s, f"{tag} boundary log term vs 1/x series", err, 1e-12))
    base = {x: ae.O_tilde(model, x, 0, 0, 1) for x in (30.0, 60.0)}
    worst = 0.0
    for n in range(5):
        for k in range(n + 1):
            r1 = ae.O_tilde(model, 30.0, n, k, 1) / base[30.0]
            r2 = ae.O_tilde(model, 60.0, n, k, 1) / base[60.0]
            worst = max(worst, abs(r1 - r2) / max(abs(r1), 1e-300))
    out.append(_check(s, f"{tag} O~ ratio x-independence", worst, 1e-12))
    out.append(_check(s, f"{tag} first oscillating term at gamma=0",
                      abs(ae.first_oscillating_term(model.with_gamma(0), 30.0)), 0.0))
    out.append(_check(s, f"{tag} highest g-degree term n=1", abs(ae.corollary_nonosc(model, 1, 2)), 0.0))
    jet2 = ae.O_tilde_gamma_jet(model, 30.0, 2, 1, 1, 2).derivative(2)
    hand = ae.o_tilde_gamma2_leading(model, 2, 1)
    out.append(_check(s, f"{tag} O~ gamma^2 jet vs hand expansion",
                      abs(jet2 - hand) / max(abs(hand), 1e-300), 1e-10))
    return out


def generic_asymptotics_suite():
    s = "asymptotics"
    out = []
    f = lambda g: (1j / (2 * np.pi) * np.log1p(g)) ** 2  # noqa: E731
    worst = max(abs(stencil_derivative(f, 0.0, n, 0.01) / ae.nu0_derivative(n) - 1)
                for n in range(2, 6))
    out.append(_check(s, "nu0^2 jet vs finite differences", worst, 1e-4))
    slopes = []
    for M in (1, 2, 3):
        r1 = ae.pochhammer_expansion_residual(0.3 + 0.1j, -0.2, 1, -1, 100.0, M)
        r2 = ae.pochhammer_expansion_residual(0.3 + 0.1j, -0.2, 1, -1, 200.0, M)
        slope = math.log(r2 / r1) / math.log(2)
        slopes.append(abs(slope + (M + 1)) / (M + 1))
    out.append(_check(s, "Pochhammer residual slope", max(slopes), 0.05))
    m = ModelSpec(q=1.0, gamma=0.1, p="lambda", F="1")
    c = 0.05
    lk = log_kappa(m, 0.3, nu_fn=lambda z: c * z, dnu_fn=lambda z: c + 0 * z)
    out.append(_check(s, "ln kappa for linear nu", abs(lk - 2 * m.q * c), 1e-10))
    lk0 = log_kappa(m, 0.3, nu_fn=lambda z: 0.2 + 0 * z, dnu_fn=lambda z: 0 * z)
    out.append(_check(s, "kappa for constant nu", abs(np.exp(lk0) - 1), 0.0))
    return out


def cyclic_suite(model: ModelSpec, tag: str):
    s = "cyclic"
    rep = link_check(model, 10.0, 1)
    out = [_check(s, f"{tag} link n=1 x=10", rep.rel_err, 1e-8)]
    fn = pure_product(model.phi_or_derived, model.g, 1)
    v3 = cyclic_integral(fn, model, 20.0, 1, delta=0.3).value
    v5 = cyclic_integral(fn, model, 20.0, 1, delta=0.5).value
    out.append(_check(s, f"{tag} contour delta 0.3 vs 0.5", abs(v3 - v5) / abs(v5), 1e-7))
    return out


def xdep_suite(family: XDepFamily, model: ModelSpec, tag: str):
    s = "xdep"
    out = []
    worst = max(reduction_check(family, n) for n in (1, 2, 3))
    out.append(_check(s, f"{tag} reduction n<=3", worst, 1e-12))
    broken = XDepFamily(family.a, family.b, family.v, family.c, omega_offset=0.1)
    d = reduction_check(broken, 2)
    out.append(Check(s, f"{tag} broken family flagged", d > 1e-6, f"defect {d:.3g} > 1e-6"))
    lams = np.array([0.1 + 0.05j, -0.3, 0.4])
    zs = np.array([0.2, -0.1 - 0.1j, 0.6])
    out.append(_check(s, f"{tag} symmetric in each set", symmetry_defect(family, lams, zs, 3.0),
                      1e-12))
    return out


def run(suite: str = "all"):
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    wanted = SUITES if suite == "all" else (suite,)
    checks = []
    if "asymptotics" in wanted:
        checks += generic_asymptotics_suite()
    for name in fixture_names():
        lm = load_model(fixture_path(name))
        if "kernel" in wanted:
            checks += kernel_suite(lm.model, name)
        if "asymptotics" in wanted and lm.model.gamma != 0:
            checks += asymptotics_suite(lm.model, name)
        if "cyclic" in wanted:
            checks += cyclic_suite(lm.model, name)
        if "xdep" in wanted and lm.family is not None:
            checks += xdep_suite(lm.family, lm.model, name)
    return checks


__all__ = ["Check", "SUITES", "run", "stencil_derivative"]
