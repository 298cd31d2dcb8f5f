"""Pilot design and evaluation for anti-eavesdropping channel estimation.

Multiple full-duplex multi-antenna users transmit simultaneous pilots whose
stacked matrix is deliberately rank deficient: every user can still estimate
its own channels consistently, while an eavesdropper with any number of
antennas is left with an irreducible estimation error floor.  This package
constructs such pilots (closed-form DFT solutions, log-barrier optimizers
for sum/worst-case MSE and mutual-information criteria, fast two-user
solvers), evaluates them, and reproduces the standard comparison tables.
"""

from .model import (
    NetworkConfig,
    PilotFactor,
    StackedPilot,
    assemble_pilot,
    exp_correlation,
    factor_from_pilot,
    make_config,
    validate_anece,
)

__all__ = [
    "NetworkConfig",
    "PilotFactor",
    "StackedPilot",
    "assemble_pilot",
    "exp_correlation",
    "factor_from_pilot",
    "make_config",
    "validate_anece",
]

__version__ = "0.1.0"
