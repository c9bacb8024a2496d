"""Desk-scale model of a metropolitan trapped-ion entanglement link.

Subpackages cover the photonic link budget (:mod:`ionlink.linkmodel`), the
heralded two-qubit state and its error budget (:mod:`ionlink.herald`),
storage decay (:mod:`ionlink.memory`), event-level simulation
(:mod:`ionlink.netsim`), DI-QKD estimation and key rates
(:mod:`ionlink.diqkd`), the exact state algebra underneath
(:mod:`ionlink.qstate`), and the calibration solvers that produced every
shipped constant (:mod:`ionlink.calibrate`).  The CLI lives in
:mod:`ionlink.cli`.
"""

__version__ = "0.1.0"

from . import calibrate, diqkd, herald, linkmodel, memory, netsim, qstate  # noqa: F401
