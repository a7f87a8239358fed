"""Certified bounds on specifications of small stochastic networks."""

import json as _json

from ._funlag import (
    ConfigError,
    EmptyInput,
    FunlagError,
    Network,
    ParseError,
    SchemaError,
    ShapeError,
    UnsupportedCombination,
    adversarial_auc,
    final_softmax_exact,
    guaranteed_auc,
    load_model,
    parse_model,
    propagate_bounds,
    softmax_range,
)
from ._funlag import verify as _verify


def verify(model, spec, **options):
    """Optimize multipliers for every subproblem of `spec`; returns the certificate as a dict."""
    return _json.loads(_verify(str(model), str(spec), **options))


def real(value):
    """Certificate reals are hex-float strings; this turns one back into a float."""
    return float.fromhex(value) if isinstance(value, str) else float(value)


__all__ = [
    "ConfigError",
    "EmptyInput",
    "FunlagError",
    "Network",
    "ParseError",
    "SchemaError",
    "ShapeError",
    "UnsupportedCombination",
    "adversarial_auc",
    "final_softmax_exact",
    "guaranteed_auc",
    "load_model",
    "parse_model",
    "propagate_bounds",
    "real",
    "softmax_range",
    "verify",
]
