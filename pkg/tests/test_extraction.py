import csv
import io
import json

import numpy as np
import pytest

from sklab import asymptotics as ae
from sklab.extraction import (
    FitSpec,
    FitWarning,
    Samples,
    compare_to_prediction,
    fit_expansion,
    fit_report_json,
    model_oscillation,
    residual_reduction,
)
from sklab.numerics import RankDeficiencyError


def test_smooth_synthetic_exact_recovery():
    spec = FitSpec(xmin=10, xmax=60, count=80, smooth=((1, 0), (0, 0), (-1, 0)), oscillating=())
    x = spec.grid
    y = 3 * x + 2 + (0.1 + 0.2j) / x
    fit = fit_expansion(Samples(x, y), spec)
    assert abs(fit.amplitudes["x^1"] - 3) <= 1e-10
    assert abs(fit.amplitudes["x^0"] - 2) <= 1e-10
    assert abs(fit.amplitudes["x^-1"] - (0.1 + 0.2j)) <= 1e-10
    assert fit.residual <= 1e-10


def test_planted_oscillating_amplitude():
    spec = FitSpec()
    x = spec.grid
    S = 0.06j - 0.01
    omega = 2.0
    A = 0.3 - 0.1j
    y = 0.5 * x + 0.2 - 0.05 * np.log(x) + A * x ** (2 * S - 2) * np.exp(1j * omega * x)
    y = y + np.conj(A) * x ** (-2 * S - 2) * np.exp(-1j * omega * x)
    fit = fit_expansion(Samples(x, y), spec, omega, S)
    assert abs(fit.amplitudes["osc+"] - A) <= 1e-6 * abs(A)
    assert abs(fit.amplitudes["osc-"] - np.conj(A)) <= 1e-6 * abs(A)


def test_duplicated_basis_rank_deficient():
    spec = FitSpec(smooth=((1, 0), (0, 0), (1, 0)), oscillating=())
    x = spec.grid
    with pytest.raises(RankDeficiencyError):
        fit_expansion(Samples(x, x + 1.0), spec)


def test_nyquist_guard():
    spec = FitSpec(xmin=30, xmax=120, count=20)
    with pytest.raises(ValueError, match="resolve"):
        fit_expansion(Samples(spec.grid, spec.grid + 0j), spec, omega=2.0)


def test_too_few_samples():
    spec = FitSpec(xmin=30, xmax=31, count=5)
    with pytest.raises(ValueError):
        fit_expansion(Samples(spec.grid, spec.grid + 0j), spec, omega=2.0)


def test_condition_warning():
    # columns of very different scale: well posed after normalisation, badly conditioned raw
    spec = FitSpec(xmin=1e5, xmax=1e5 + 1, count=40, smooth=((2, 0), (0, 0)), oscillating=())
    x = spec.grid
    with pytest.warns(FitWarning):
        fit = fit_expansion(Samples(x, x + 0j), spec)
    assert fit.warnings


def test_csv_output():
    s = Samples(np.array([1.0, 2.5]), np.array([0.1 + 0.2j, -3.0 + 0j]))
    rows = list(csv.reader(io.StringIO(s.to_csv())))
    assert rows[0] == ["x", "re_lndet", "im_lndet"]
    assert [float(v) for v in rows[1]] == [1.0, 0.1, 0.2]
    assert [float(v) for v in rows[2]] == [2.5, -3.0, 0.0]


def test_pure_sine_fit(sine_model, sine_samples):
    omega, S = model_oscillation(sine_model)
    assert omega == 2.0
    spec = FitSpec()
    smooth, full, ratio = residual_reduction(sine_samples, spec, omega, S)
    assert ratio >= 10
    fit = fit_expansion(sine_samples, spec, omega, S)
    conv = ae.calibrate_convention(sine_model)
    pred = ae.leading_terms(sine_model, conv=conv)
    pred.terms.extend(ae.oscillating_terms(sine_model))
    report = compare_to_prediction(fit, pred)
    assert report["terms"]["leading"]["deviation"] <= 1e-3
    assert report["terms"]["osc+"]["profile_matches"]
    assert report["metadata"]["convention"]["calibrated"]
    doc = json.loads(fit_report_json(fit, report))
    assert set(doc["terms"]) >= {"x^1", "osc+", "osc-"}
    assert "deviation" in doc["terms"]["osc+"]


def test_fit_reproducible(sine_model, sine_samples):
    omega, S = model_oscillation(sine_model)
    a = fit_expansion(sine_samples, FitSpec(), omega, S)
    b = fit_expansion(sine_samples, FitSpec(), omega, S)
    assert a.amplitudes == b.amplitudes


def test_compare_missing_label(sine_model, sine_samples):
    omega, S = model_oscillation(sine_model)
    fit = fit_expansion(sine_samples, FitSpec(), omega, S)
    pred = ae.leading_terms(sine_model)
    with pytest.raises(KeyError):
        compare_to_prediction(fit, pred)
    with pytest.raises(KeyError):
        compare_to_prediction(fit, pred, {"leading": "x^7"})
