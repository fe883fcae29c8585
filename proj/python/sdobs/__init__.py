"""Sampled-data observers with cascaded delay predictors."""

from ._sdobs import (
    ConfigError,
    Error,
    GainConditionViolated,
    IntegrationDiverged,
    WindowUnderflow,
    beta_gas,
    cascade_beta,
    config_hash,
    run,
    saturation_q,
    small_gain_product,
    validate,
    validate_cascade,
)

__all__ = [
    "ConfigError",
    "Error",
    "GainConditionViolated",
    "IntegrationDiverged",
    "WindowUnderflow",
    "beta_gas",
    "cascade_beta",
    "config_hash",
    "run",
    "saturation_q",
    "small_gain_product",
    "validate",
    "validate_cascade",
]
