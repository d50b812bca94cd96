"""Hole-vortex degrees for Ginzburg-Landau and London models on perforated domains.

Every driver takes a config: a path to an INI/JSON file or a dict in the JSON
layout, and returns the same payload the CLI writes under "result".
"""

from ._glpin import (
    REPORT_SCHEMA,
    GlpinError,
    bessel_i0,
    bessel_i1,
    bessel_k0,
    bessel_k1,
    config,
    gl,
    london,
    merge_reports,
    predict,
    sweep_delta,
    sweep_sigma,
)

__all__ = [
    "REPORT_SCHEMA",
    "GlpinError",
    "bessel_i0",
    "bessel_i1",
    "bessel_k0",
    "bessel_k1",
    "config",
    "gl",
    "london",
    "merge_reports",
    "predict",
    "sweep_delta",
    "sweep_sigma",
]
