"""Photon-resolved Floquet theory: photon counting statistics of driven two-level systems."""

from ._prft import (
    AliasingError,
    DegeneracyError,
    DrivenSystem,
    Error,
    NegativeProbabilityError,
    ValidationError,
    bundled_scenarios,
    cumulants,
    jc,
    mgf,
    multimode_rabi,
    propagate,
    purity_prediction,
    quasienergy_derivatives,
    quasiprobabilities,
    rabi,
    run_scenario,
    standard_fcs_cumulants,
    transfer_rate,
    two_mode_jc,
    validate_scenario,
)

__version__ = "1.0.0"
