"""Null curve flows in Minkowski 4-space: synthesis, evolution, verification."""

from ._core import (
    CausalClass,
    CurveGrid,
    EvolutionMode,
    Expression,
    Frame4,
    FrameKind,
    FramedCurve,
    GaugePolicy,
    Scenario,
    Vec4,
    canonical_frame,
    classify,
    curve_csv,
    dot,
    frame_residuals,
    grid_csv,
    integrate_curve,
    load_scenario,
    max_frame_residual,
    norm,
    parse_expression,
    parse_scenario,
    sign_audit,
    simulate,
    synth,
    verify_report,
)

__all__ = [
    "CausalClass",
    "CurveGrid",
    "EvolutionMode",
    "Expression",
    "Frame4",
    "FrameKind",
    "FramedCurve",
    "GaugePolicy",
    "Scenario",
    "Vec4",
    "canonical_frame",
    "classify",
    "curve_csv",
    "dot",
    "frame_residuals",
    "grid_csv",
    "integrate_curve",
    "load_scenario",
    "max_frame_residual",
    "norm",
    "parse_expression",
    "parse_scenario",
    "sign_audit",
    "simulate",
    "synth",
    "verify_report",
]
