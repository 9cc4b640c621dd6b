"""Mean-field variational bias diagnostics.

Thin layer over the compiled core: structured results that the core emits as
JSON are returned here as plain dicts.
"""

import json

from ._core import (
    BiasReport,
    BlockStructure,
    BoxTail,
    CaviConfig,
    FunctionalSpec,
    GaussianMeasure,
    GridMeasure,
    LanExperiment,
    LanSweepResult,
    MeanFieldFit,
    Polynomial,
    ScalingResult,
    TangentAudit,
    VibiasError,
    bias_report,
    correlated_pair,
    discretize,
    discretize_sd,
    expect,
    fit_meanfield,
    kl_divergence,
    normalize,
    rho_rem,
    run_sweep,
    scaling_study,
    tangent_functional_audit,
)
from ._core import run_suite as _run_suite
from . import _core

__all__ = [
    "BiasReport",
    "BlockStructure",
    "BoxTail",
    "CaviConfig",
    "FunctionalSpec",
    "GaussianMeasure",
    "GridMeasure",
    "LanExperiment",
    "LanSweepResult",
    "MeanFieldFit",
    "Polynomial",
    "ScalingResult",
    "TangentAudit",
    "VibiasError",
    "anova_decompose",
    "bias_report",
    "correlated_pair",
    "discretize",
    "discretize_sd",
    "expect",
    "fit_meanfield",
    "functional",
    "kl_divergence",
    "normalize",
    "orthogonality_report",
    "rho_rem",
    "run_suite",
    "run_sweep",
    "scaling_study",
    "tangent_functional_audit",
]


def functional(spec, dim):
    """Functional from its JSON form (a dict or its text)."""
    if not isinstance(spec, str):
        spec = json.dumps(spec)
    return FunctionalSpec.from_json(spec, dim)


def anova_decompose(h, qstar, blocks):
    return json.loads(_core.anova_decompose_json(h, qstar, blocks))


def orthogonality_report(fit, posterior, probes=10, seed=None):
    if seed is None:
        return json.loads(_core.orthogonality_json(fit, posterior, probes))
    return json.loads(_core.orthogonality_json(fit, posterior, probes, seed))


def run_suite(out_dir, seed=None):
    """Run the acceptance battery; returns [(id, name, passed, measured)]."""
    if seed is None:
        return _run_suite(str(out_dir))
    return _run_suite(str(out_dir), seed)
