"""Exact structure analysis for shift-plus-finite-rank operators."""

from .analysis import classify, decompose_prop21
from .dsl import emit, emit_operator, load_operator, parse_dsl
from .models import ModelSpec, build_model, fixture
from .opcore import FinSupportVector, SpaceShape, StructuredOperator

__all__ = [
    "classify",
    "decompose_prop21",
    "emit",
    "emit_operator",
    "load_operator",
    "parse_dsl",
    "ModelSpec",
    "build_model",
    "fixture",
    "FinSupportVector",
    "SpaceShape",
    "StructuredOperator",
]
