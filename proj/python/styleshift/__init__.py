"""Corruptions, low-pass filtering, moment-matching stylization and robustness metrics."""

from ._styleshift import (
    StyleshiftError,
    __version__,
    all_specs,
    apply_corruption,
    category_of,
    combined_mean,
    corruption_names,
    gram_distance,
    lowpass_filter,
    mean_corruption_accuracy,
    radial_spectrum,
    severity_table_version,
    stylize,
)

__all__ = [
    "StyleshiftError",
    "__version__",
    "all_specs",
    "apply_corruption",
    "category_of",
    "combined_mean",
    "corruption_names",
    "gram_distance",
    "lowpass_filter",
    "mean_corruption_accuracy",
    "radial_spectrum",
    "severity_table_version",
    "stylize",
]
