"""skyfit: Bayesian sky cataloging on synthetic imagery."""

__version__ = "0.1.0"
