"""Sample ln det(I + V) on an x-grid and fit the asymptotic-series structure.

The fit is linear in complex amplitudes: smooth columns x^a (ln x)^b and, for
m = +-1, oscillating columns x^{r (m S) - 2} exp(i m omega x) with
S = nu_+ + nu_- and omega = p_+ - p_- fixed from the model.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from sklab.asymptotics import AsymptoticPrediction
from sklab.cyclic import _threads
from sklab.kernel import ModelSpec, lndet, nu
from sklab.numerics import least_squares_complex

log = logging.getLogger(__name__)

DEFAULT_SMOOTH = ((1, 0), (0, 0), (0, 1), (-1, 0), (-1, 1), (-1, 2))
COND_WARNING = 1e12
# Prediction labels and the fit columns they are compared with.
DEFAULT_MATCH = {"leading": "x^1", "osc+": "osc+", "osc-": "osc-"}


class FitWarning(UserWarning):
    pass


def smooth_label(x_power, lnx_power):
    s = f"x^{x_power}"
    if lnx_power:
        s += " ln^%d x" % lnx_power if lnx_power > 1 else " ln x"
    return s


@dataclass(frozen=True)
class FitSpec:
    """Grid and basis of the fit.

    ``profile_multiplier`` r sets the oscillating x-power to r m S - 2; r = 2
    is what the O~ amplitude formula carries, r = 1 is the alternative
    written in the general expansion.
    """

    xmin: float = 30.0
    xmax: float = 120.0
    count: int = 180
    smooth: tuple = DEFAULT_SMOOTH
    oscillating: tuple = (1, -1)
    profile_multiplier: int = 2
    rank_tol: float = 1e-10

    @property
    def grid(self):
        return np.linspace(self.xmin, self.xmax, self.count)

    def check_nyquist(self, omega):
        if not self.oscillating or omega == 0:
            return
        dx = (self.xmax - self.xmin) / max(self.count - 1, 1)
        if not dx < math.pi / abs(omega):
            raise ValueError(f"grid spacing {dx:.4g} does not resolve frequency {omega:.4g}")

    def without_oscillation(self):
        from dataclasses import replace
        return replace(self, oscillating=())


@dataclass(frozen=True)
class BasisColumn:
    label: str
    x_power: complex
    lnx_power: int
    m: int

    def __call__(self, x, omega):
        x = np.asarray(x, dtype=float)
        out = x.astype(complex) ** self.x_power * np.log(x) ** self.lnx_power
        if self.m:
            out = out * np.exp(1j * self.m * omega * x)
        return out


def basis_columns(spec: FitSpec, S: complex = 0j):
    cols = [BasisColumn(smooth_label(a, b), a, b, 0) for a, b in spec.smooth]
    for m in spec.oscillating:
        cols.append(BasisColumn("osc+" if m > 0 else "osc-",
                                spec.profile_multiplier * m * S - 2, 0, m))
    return cols


@dataclass(frozen=True)
class Samples:
    x: np.ndarray
    values: np.ndarray
    orders: tuple = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "re_lndet", "im_lndet"])
        for x, v in zip(self.x, self.values):
            w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


def sample_lndet(model: ModelSpec, grid, tol: float = 1e-9) -> Samples:
    """ln det(I + V) at each grid point; order escalation is logged by lndet."""
    grid = np.asarray(grid, dtype=float)

    def one(x):
        return lndet(model, float(x), tol=tol)

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, grid))
    else:
        out = [one(x) for x in grid]
    vals = np.array([v for v, _ in out], dtype=complex)
    return Samples(grid, vals, tuple(o for _, o in out))


@dataclass
class FitResult:
    amplitudes: dict
    columns: list
    residual: float
    condition: float
    omega: float
    S: complex
    profile_multiplier: int = 2
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "amplitudes": {k: {"re": v.real, "im": v.imag} for k, v in self.amplitudes.items()},
            "residual": self.residual,
            "condition": self.condition,
            "omega": self.omega,
            "S": {"re": self.S.real, "im": self.S.imag},
            "profile_multiplier": self.profile_multiplier,
            "warnings": list(self.warnings),
        }


def model_oscillation(model: ModelSpec):
    """(omega, S) = (p_+ - p_-, nu_+ + nu_-) for the model."""
    q = model.q
    omega = float(np.real(model.p(q) - model.p(-q)))
    S = nu(model, q) + nu(model, -q)
    return omega, complex(S)


def fit_expansion(samples: Samples, spec: FitSpec, omega: float = 0.0, S: complex = 0j
                  ) -> FitResult:
    x = np.asarray(samples.x, dtype=float)
    y = np.asarray(samples.values, dtype=complex)
    spec.check_nyquist(omega)
    cols = basis_columns(spec, S)
    if len(x) < len(cols):
        raise ValueError(f"{len(x)} samples for {len(cols)} basis columns")
    A = np.column_stack([c(x, omega) for c in cols])
    coef, _, cond = least_squares_complex(A, y, rank_tol=spec.rank_tol)
    residual = float(np.max(np.abs(A @ coef - y)))
    notes = []
    if cond > COND_WARNING:
        msg = f"design condition estimate {cond:.3g} exceeds {COND_WARNING:g}"
        notes.append(msg)
        warnings.warn(msg, FitWarning, stacklevel=2)
    amps = {c.label: complex(a) for c, a in zip(cols, coef)}
    return FitResult(amps, cols, residual, cond, omega, complex(S), spec.profile_multiplier, notes)


def compare_to_prediction(fit: FitResult, pred: AsymptoticPrediction, match: dict = None):
    """Per-term fitted vs predicted amplitudes and relative deviations.

    ``match`` maps prediction labels to fit column labels. A term whose
    x-power differs from its column's is still compared but flagged.
    """
    match = DEFAULT_MATCH if match is None else match
    cols = {c.label: c for c in fit.columns}
    rows = {}
    for plabel, flabel in match.items():
        try:
            term = pred[plabel]
        except KeyError:
            raise KeyError(f"prediction has no term {plabel!r}") from None
        if flabel not in fit.amplitudes:
            raise KeyError(f"fit has no column {flabel!r}")
        a_fit = fit.amplitudes[flabel]
        a_pred = complex(term.amplitude)
        dev = abs(a_fit - a_pred) / abs(a_pred) if a_pred != 0 else abs(a_fit)
        rows[plabel] = {
            "column": flabel,
            "fitted": {"re": a_fit.real, "im": a_fit.imag},
            "predicted": {"re": a_pred.real, "im": a_pred.imag},
            "deviation": float(dev),
            "profile_matches": bool(np.isclose(complex(cols[flabel].x_power),
                                               complex(term.x_power), atol=1e-12)),
        }
    meta = dict(pred.metadata)
    meta["profile_multiplier"] = fit.profile_multiplier
    return {"terms": rows, "metadata": meta}


def residual_reduction(samples: Samples, spec: FitSpec, omega: float, S: complex):
    """(smooth-only residual, full residual, ratio)."""
    full = fit_expansion(samples, spec, omega, S)
    smooth = fit_expansion(samples, spec.without_oscillation(), omega, S)
    return smooth.residual, full.residual, smooth.residual / full.residual


def fit_report_json(fit: FitResult, comparison=None) -> str:
    doc = {label: {"re": a.real, "im": a.imag} for label, a in fit.amplitudes.items()}
    if comparison:
        for plabel, row in comparison["terms"].items():
            doc[row["column"]]["deviation"] = row["deviation"]
    return json.dumps({"terms": doc, "fit": fit.as_dict(),
                       "comparison": comparison}, indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not serialisable: {type(v)}")


__all__ = [
    "BasisColumn", "DEFAULT_SMOOTH", "FitResult", "FitSpec", "FitWarning", "Samples",
    "basis_columns", "compare_to_prediction", "fit_expansion", "fit_report_json",
    "model_oscillation", "residual_reduction", "sample_lndet",
]
