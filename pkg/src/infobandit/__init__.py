"""Bernoulli bandits driven by posterior entropy, with baselines and fast simulation."""
from infobandit.core import (
    ArmStats,
    beta_cdf,
    beta_log_cdf,
    beta_log_pdf,
    binary_entropy,
    kl_bernoulli,
    record,
    record_batch,
)

__version__ = "0.1.0"
