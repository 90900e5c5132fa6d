"""riskrank: rank machine-labeled entity-resolution pairs by mislabel risk.

The pipeline mines interpretable one-sided rules from labeled training
pairs, represents each rule's equivalence probability as a distribution,
aggregates the fired rules per pair portfolio-style, scores mislabel
risk with a truncated-normal Value-at-Risk, and fits the model's weights
and dispersions by pairwise learning-to-rank.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
