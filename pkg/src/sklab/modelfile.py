"""Strict JSON model files.

    {"q": 1, "gamma": {"re": 0.1, "im": 0}, "p": "lambda", "F": "1 + 0.2*lambda^2",
     "g": "0.3*sin(lambda)", "contour": {"delta": 0.5, "nodes_per_side": 64},
     "quad_order": 128, "xdep_family": {"a": "lambda^2", "b": "0", "v": "1", "c": 0.1},
     "conventions": {"nu0_squared": true, "index_convention": "as_printed"}}

With ``"F_is_phi_times_exp_g": true`` the key ``phi`` replaces ``F`` and
F = phi * exp(g).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from sklab.asymptotics import INDEX_CONVENTIONS
from sklab.expr import ExprError, parse
from sklab.kernel import ModelSpec
from sklab.xdep import XDepFamily

TOP_KEYS = {"q", "gamma", "p", "F", "g", "phi", "F_is_phi_times_exp_g", "contour",
            "quad_order", "xdep_family", "conventions"}
CONTOUR_KEYS = {"delta", "nodes_per_side"}
FAMILY_KEYS = {"a", "b", "v", "c"}
CONVENTION_KEYS = {"nu0_squared", "index_convention"}


class ModelFileError(ValueError):
    pass


@dataclass(frozen=True)
class Conventions:
    nu0_squared: bool = True
    index_convention: str = "as_printed"


@dataclass(frozen=True)
class LoadedModel:
    model: ModelSpec
    family: XDepFamily | None = None
    conventions: Conventions = field(default_factory=Conventions)


def parse_complex(v, what="value"):
    if isinstance(v, bool):
        raise ModelFileError(f"{what}: boolean is not a number")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict):
        _strict(v, {"re", "im"}, what)
        re, im = v.get("re", 0.0), v.get("im", 0.0)
        if not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in (re, im)):
            raise ModelFileError(f"{what}: re/im must be numbers")
        return complex(re, im)
    raise ModelFileError(f"{what}: expected a number or {{re, im}}")


def _strict(d, allowed, what):
    extra = set(d) - allowed
    if extra:
        raise ModelFileError(f"{what}: unknown keys {sorted(extra)}")


def _expr(d, key, default=None):
    if key not in d:
        if default is None:
            raise ModelFileError(f"missing key {key!r}")
        return parse(default)
    if not isinstance(d[key], str):
        raise ModelFileError(f"{key}: expression must be a string")
    try:
        return parse(d[key])
    except ExprError as exc:
        raise ModelFileError(f"{key}: {exc}") from exc


def _number(d, key, kind, what=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and v != int(v)):
        raise ModelFileError(f"{what or key}: expected {'an integer' if kind is int else 'a number'}")
    return kind(v)


def model_from_dict(d: dict) -> LoadedModel:
    if not isinstance(d, dict):
        raise ModelFileError("model file must hold a JSON object")
    _strict(d, TOP_KEYS, "model")
    if "q" not in d:
        raise ModelFileError("missing key 'q'")
    q = _number(d, "q", float)
    gamma = parse_complex(d.get("gamma", 0.0), "gamma")
    p = _expr(d, "p")
    g = _expr(d, "g", "0")
    kw = {}
    if "quad_order" in d:
        kw["quad_order"] = _number(d, "quad_order", int)
    if "contour" in d:
        c = d["contour"]
        if not isinstance(c, dict):
            raise ModelFileError("contour must be an object")
        _strict(c, CONTOUR_KEYS, "contour")
        if "delta" in c:
            kw["delta"] = _number(c, "delta", float, "contour.delta")
        if "nodes_per_side" in c:
            kw["nodes_per_side"] = _number(c, "nodes_per_side", int, "contour.nodes_per_side")
    phi_mode = d.get("F_is_phi_times_exp_g", False)
    if not isinstance(phi_mode, bool):
        raise ModelFileError("F_is_phi_times_exp_g must be a boolean")
    try:
        if phi_mode:
            if "F" in d:
                raise ModelFileError("give either F or phi with F_is_phi_times_exp_g, not both")
            model = ModelSpec.from_phi(q, gamma, p, _expr(d, "phi"), g, **kw)
        else:
            if "phi" in d:
                raise ModelFileError("phi requires F_is_phi_times_exp_g = true")
            model = ModelSpec(q=q, gamma=gamma, p=p, F=_expr(d, "F"), g=g, **kw)
    except ModelFileError:
        raise
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc

    family = None
    if "xdep_family" in d:
        f = d["xdep_family"]
        if not isinstance(f, dict):
            raise ModelFileError("xdep_family must be an object")
        _strict(f, FAMILY_KEYS, "xdep_family")
        family = XDepFamily(a=_expr(f, "a", "0"), b=_expr(f, "b", "0"), v=_expr(f, "v", "1"),
                            c=parse_complex(f.get("c", 0.0), "xdep_family.c"))
    conv = Conventions()
    if "conventions" in d:
        c = d["conventions"]
        if not isinstance(c, dict):
            raise ModelFileError("conventions must be an object")
        _strict(c, CONVENTION_KEYS, "conventions")
        sq = c.get("nu0_squared", True)
        ic = c.get("index_convention", "as_printed")
        if not isinstance(sq, bool):
            raise ModelFileError("conventions.nu0_squared must be a boolean")
        if ic not in INDEX_CONVENTIONS:
            raise ModelFileError(f"conventions.index_convention must be one of {INDEX_CONVENTIONS}")
        conv = Conventions(sq, ic)
    return LoadedModel(model, family, conv)


def load_model(path) -> LoadedModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(doc)


def fixture_path(name: str) -> Path:
    return Path(__file__).with_name("fixtures") / f"{name}.json"


def fixture_names():
    return sorted(p.stem for p in Path(__file__).with_name("fixtures").glob("*.json"))


__all__ = ["Conventions", "LoadedModel", "ModelFileError", "fixture_names", "fixture_path",
           "load_model", "model_from_dict", "parse_complex"]
