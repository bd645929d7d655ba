"""Metropolis-Hastings and simulated tempering kernels."""

from .ensemble import EnsembleState, init_ensemble, run_ensemble
from .metropolis import acceptance_probability, rwmh_step
from .tempering import (
    STConfig,
    STState,
    TemperingKernel,
    run_chain,
    run_chain_traced,
    st_step,
)
from .variates import VariateStream, initial_point

__all__ = [
    "EnsembleState",
    "STConfig",
    "STState",
    "TemperingKernel",
    "VariateStream",
    "acceptance_probability",
    "init_ensemble",
    "initial_point",
    "run_chain",
    "run_chain_traced",
    "run_ensemble",
    "rwmh_step",
    "st_step",
]
