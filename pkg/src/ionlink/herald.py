"""Heralded two-node state with the five-source error model.

The error sources and the order in which they are composed:

    1. protocol admixture  -- the alpha-weighted |dn dn> term of the ideal
       heralded state (irreducible for this single-photon scheme),
    2. ion errors          -- a two-qubit depolarizing channel,
    3. spurious heralds    -- mixing with the no-photon product state at the
       false-herald weight,
    4. phase noise         -- dephasing by the interferometric contrast,
    5. motional recoil     -- dephasing by the spin-motion visibility.

Sources 4 and 5 both act by reducing single-photon interference contrast,
so they combine multiplicatively into one dephasing factor.  The composed
order is dephase, then depolarize, then mix in the spurious-herald state;
order effects are second order in the small error parameters, but fixing it
keeps every number in this package reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import linkmodel, qstate
from .qstate import BellKind, TwoQubitDensity

__all__ = [
    "ProtocolParams",
    "ErrorBudget",
    "ideal_heralded_state",
    "false_herald_state",
    "noisy_heralded_state",
    "error_budget",
    "false_herald_weight_from_link",
    "params_for_link",
]


@dataclass(frozen=True)
class ProtocolParams:
    """Knobs of the heralded-state error model."""

    alpha: float
    dphi: float = 0.0
    sign: BellKind = BellKind.PLUS
    phase_contrast: float = 0.986        # measured interference contrast of the stabilised link
    motional_visibility: float = 1.0
    ion_depolarizing: float = 0.0
    false_herald_weight: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError(f"alpha must be in [0, 0.5], got {self.alpha}")
        for name in ("phase_contrast", "motional_visibility", "ion_depolarizing",
                     "false_herald_weight"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class ErrorBudget:
    """Per-source infidelity attribution for one parameter set.

    Each contribution is the knock-out effect of its source: the fidelity
    with that source disabled minus the fidelity of the fully composed
    state.  Interaction terms between sources do not cancel exactly, so the
    sum of contributions differs from the total by ``residual``, reported
    rather than hidden.
    """

    protocol: float
    ion: float
    noise_herald: float
    phase: float
    motion: float
    total_infidelity: float

    @property
    def residual(self) -> float:
        parts = self.protocol + self.ion + self.noise_herald + self.phase + self.motion
        return self.total_infidelity - parts


def ideal_heralded_state(alpha: float, dphi: float, sign: BellKind) -> TwoQubitDensity:
    """(1 - alpha) |psi+-><psi+-| + alpha |dn dn><dn dn|."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return qstate.mix(qstate.down_down(), qstate.bell_state(sign, dphi), alpha)


def false_herald_state(alpha: float, dphi: float = 0.0) -> TwoQubitDensity:
    """State of the ion pair when the herald was a noise click.

    No photon was actually consumed, so each ion independently holds
    population (1 - alpha) in |up> and alpha in |dn> with no cross-node
    coherence; dphi is accepted for signature symmetry but cannot enter a
    diagonal state.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    single = np.array([alpha, 1.0 - alpha])
    return TwoQubitDensity(np.diag(np.kron(single, single)).astype(complex))


def noisy_heralded_state(params: ProtocolParams) -> TwoQubitDensity:
    """Fully composed heralded state for one parameter set."""
    state = ideal_heralded_state(params.alpha, params.dphi, params.sign)
    lam = params.phase_contrast * params.motional_visibility
    state = qstate.apply_dephasing(state, lam)
    state = qstate.apply_depolarizing(state, params.ion_depolarizing)
    spurious = false_herald_state(params.alpha, params.dphi)
    return qstate.mix(spurious, state, params.false_herald_weight)


def _fidelity_vs_target(params: ProtocolParams) -> float:
    target = qstate.bell_state(params.sign, params.dphi)
    return qstate.fidelity(noisy_heralded_state(params), target)


_DISABLED = {
    "protocol": dict(alpha=0.0),
    "ion": dict(ion_depolarizing=0.0),
    "noise_herald": dict(false_herald_weight=0.0),
    "phase": dict(phase_contrast=1.0),
    "motion": dict(motional_visibility=1.0),
}


def error_budget(params: ProtocolParams) -> ErrorBudget:
    """One-factor-at-a-time infidelity attribution (knock-out analysis)."""
    full = _fidelity_vs_target(params)
    contributions = {
        source: _fidelity_vs_target(replace(params, **overrides)) - full
        for source, overrides in _DISABLED.items()
    }
    return ErrorBudget(total_infidelity=1.0 - full, **contributions)


def false_herald_weight_from_link(budget: linkmodel.LinkBudget, alpha: float) -> float:
    """Probability that a given herald was spurious, from the link budget."""
    p_true = linkmodel.herald_prob(budget, alpha)
    p_false = linkmodel.false_herald_prob(budget)
    if p_true == 0.0:
        return 1.0 if p_false > 0.0 else 0.0
    return min(1.0, p_false / p_true)


def params_for_link(
    budget: linkmodel.LinkBudget,
    alpha: float,
    sign: BellKind = BellKind.PLUS,
    dphi: float = 0.0,
    phase_contrast: float = 0.986,
    motional_visibility: float = 1.0,
    ion_depolarizing: float = 0.0,
) -> ProtocolParams:
    """ProtocolParams with the spurious-herald weight derived from the link."""
    return ProtocolParams(
        alpha=alpha,
        dphi=dphi,
        sign=sign,
        phase_contrast=phase_contrast,
        motional_visibility=motional_visibility,
        ion_depolarizing=ion_depolarizing,
        false_herald_weight=false_herald_weight_from_link(budget, alpha),
    )
