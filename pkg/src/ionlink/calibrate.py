"""Calibration routines behind every frozen default in the shipped configs.

Nothing in the package is hand-tuned: each constant that is not itself a
measured quantity is solved here from the published operating anchors, and
the tests re-run these solvers against the shipped values.

Anchors used (all measured on the deployed link):
  * per-arm link efficiency 9.1% at 10 km,
  * event rate 2.226 cps at alpha = 0.17,
  * heralded-state fidelity 0.923 and key-round QBER 0.036 at alpha = 0.025,
  * stored-pair fidelity 0.554 at 450 ms, the 0.5 crossing at 547 ms, and
    the interval-weighted averages 0.668 (450 ms window) / 0.578 (infinite),
  * 1,917 secret bits from 405,145 rounds with reported uncertainties
    +/- 0.0059 on S and +/- 0.0006 on Q.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.optimize import least_squares, minimize

from . import diqkd, herald, linkmodel, memory, netsim
from .linkmodel import LinkBudget
from .memory import MemoryModel
from .qstate import BellKind

__all__ = [
    "calibrate_link_residuals",
    "calibrate_attempt_rate",
    "calibrate_herald_model",
    "fit_memory_decay",
    "calibrate_key_params",
]

ARM_EFFICIENCY_ANCHOR = 0.091
RATE_ANCHOR_ALPHA = 0.17
RATE_ANCHOR_CPS = 2.226
FIDELITY_ANCHOR_ALPHA = 0.025
FIDELITY_ANCHOR = 0.923
QBER_ANCHOR = 0.036
MEMORY_ANCHORS = {
    "fidelity_450ms": (0.554, 0.010),
    "survival_half": (0.547, 0.020),
    "weighted_450ms": (0.668, 0.020),
    "weighted_infinite": (0.578, 0.020),
}
SECRET_BITS_ANCHOR = 1917
SECRET_BITS_TOLERANCE = 0.10
CHSH_ANCHOR = 2.5758
CHSH_ANCHOR_ERR = 0.0059
QBER_ANCHOR_ERR = 0.0006
ROUNDS_ANCHOR = 405145


def calibrate_link_residuals(budget: LinkBudget, target: float = ARM_EFFICIENCY_ANCHOR):
    """Per-arm residual factors putting each arm efficiency at the anchor.

    The product of the individually characterised sub-efficiencies falls far
    short of the measured per-arm value, so the residuals come out above 1;
    they compensate whatever the published sub-efficiencies do not cover
    (most plausibly the anchor excludes the collection stage) rather than
    inventing unpublished loss terms.
    """
    unit = replace(budget, residual_a=1.0, residual_b=1.0)
    return (
        target / linkmodel.arm_efficiency(unit, "A"),
        target / linkmodel.arm_efficiency(unit, "B"),
    )


def calibrate_attempt_rate(
    budget: LinkBudget,
    alpha: float = RATE_ANCHOR_ALPHA,
    target_rate: float = RATE_ANCHOR_CPS,
) -> float:
    """Attempt rate solving expected_rate(alpha) = target (duty cycle 1)."""
    p = linkmodel.herald_prob(budget, alpha)
    if p == 0.0:
        raise ValueError("herald probability is zero at the anchor alpha")
    return target_rate / p


def calibrate_herald_model(
    budget: LinkBudget,
    alpha: float = FIDELITY_ANCHOR_ALPHA,
    target_fidelity: float = FIDELITY_ANCHOR,
    target_qber: float = QBER_ANCHOR,
    phase_contrast: float = 0.986,
):
    """Solve (ion_depolarizing, motional_visibility) from two state anchors.

    The fidelity anchor alone leaves the split between the two ion-related
    knobs free; the measured key-round QBER of the same state pins the ZZ
    parity and so the depolarizing share, and the visibility absorbs the
    rest.  The channel composition inverts in closed form; the result is
    verified against the actual composed state before being returned.
    """
    w = herald.false_herald_weight_from_link(budget, alpha)
    # ZZ parity: ideal -(1-2a), untouched by dephasing, scaled by the
    # depolarizing survival, then mixed with the spurious-herald parity.
    zz_target = -(1.0 - 2.0 * target_qber)
    zz_spurious = (1.0 - 2.0 * alpha) ** 2
    survival = (zz_target - w * zz_spurious) / (-(1.0 - 2.0 * alpha) * (1.0 - w))
    p = 1.0 - survival
    # Bell fidelity: (1-a)(1+lam)/2 through the depolarizing survival plus
    # the maximally mixed floor, mixed with the spurious-herald overlap.
    f_spurious = alpha * (1.0 - alpha)
    half_one_plus_lam = (
        (target_fidelity - w * f_spurious) / (1.0 - w) - p / 4.0
    ) / ((1.0 - p) * (1.0 - alpha))
    lam = 2.0 * half_one_plus_lam - 1.0
    vis = lam / phase_contrast
    if not 0.0 <= p <= 1.0 or not 0.0 <= vis <= 1.0:
        raise ValueError(
            f"anchors are not reachable: ion_depolarizing={p}, motional_visibility={vis}"
        )
    params = herald.ProtocolParams(
        alpha=alpha,
        sign=BellKind.PLUS,
        phase_contrast=phase_contrast,
        motional_visibility=vis,
        ion_depolarizing=p,
        false_herald_weight=w,
    )
    state = herald.noisy_heralded_state(params)
    fid = herald._fidelity_vs_target(params)
    qber = diqkd.analytic_qber(state, BellKind.PLUS)
    if abs(fid - target_fidelity) > 1e-9 or abs(qber - target_qber) > 1e-9:
        raise RuntimeError(
            f"closed-form calibration disagrees with the composed model: "
            f"F={fid}, Q={qber}"
        )
    return float(p), float(vis)


def fit_memory_decay(
    tau_xx: float = 0.550,
    mean_interval: float = 0.45,
    anchors: dict = None,
    base: MemoryModel = None,
) -> MemoryModel:
    """Fit (xx0, zz0, zz_slope) against the stored-pair anchors.

    Stage one is a tolerance-weighted least-squares fit; stage two polishes
    it to the minimax point of the scaled residuals, which lands every
    anchor inside its acceptance window whenever that is feasible (the four
    anchors are not exactly consistent with the two decay laws, so a plain
    least-squares solution can park single anchors just outside).
    The ZZ parity is fitted as anti-correlated (zz0 <= 0), the frame of the
    plus-sign heralded states.
    """
    anchors = dict(MEMORY_ANCHORS if anchors is None else anchors)
    base = base if base is not None else MemoryModel(tau_xx=tau_xx)
    dist = netsim.IntervalDistribution(mean_interval)

    def model_for(x):
        xx0, z0, slope = x
        return replace(base, tau_xx=tau_xx, xx0=xx0, zz0=-z0, zz_slope=slope)

    def scaled_residuals(x):
        m = model_for(np.clip(x, [0.0, 0.0, 0.0], [1.0, 1.0, 10.0]))
        f45_t, f45_tol = anchors["fidelity_450ms"]
        sv_t, sv_tol = anchors["survival_half"]
        w45_t, w45_tol = anchors["weighted_450ms"]
        winf_t, winf_tol = anchors["weighted_infinite"]
        try:
            survival = memory.survival_time(m, 0.5)
        except (ValueError, memory.ThresholdNotCrossedError):
            survival = 0.0
        return np.array([
            (memory.fidelity_at(m, 0.45) - f45_t) / f45_tol,
            (survival - sv_t) / sv_tol,
            (netsim.weighted_average_fidelity(m, dist, 0.45) - w45_t) / w45_tol,
            (netsim.weighted_average_fidelity(m, dist, math.inf) - winf_t) / winf_tol,
        ])

    stage1 = least_squares(
        scaled_residuals, x0=[0.6, 1.0, 0.75], bounds=([0.0, 0.0, 0.0], [1.0, 1.0, 10.0])
    )
    stage2 = minimize(
        lambda x: np.abs(scaled_residuals(x)).max(),
        stage1.x,
        method="Nelder-Mead",
        options=dict(xatol=1e-10, fatol=1e-10, maxiter=4000),
    )
    best = np.clip(stage2.x, [0.0, 0.0, 0.0], [1.0, 1.0, 10.0])
    return model_for(best)


def calibrate_key_params(
    n: int = ROUNDS_ANCHOR,
    s_measured: float = CHSH_ANCHOR,
    q_measured: float = QBER_ANCHOR,
    s_err: float = CHSH_ANCHOR_ERR,
    q_err: float = QBER_ANCHOR_ERR,
    f: float = 1.122,
    epsilon: float = 1e-5,
    ell_anchor: int = SECRET_BITS_ANCHOR,
    model_s: float = None,
    model_q: float = None,
    model_margin_bits: int = 60,
):
    """Solve the input distribution and finite-size coefficient.

    Bob draws his three inputs uniformly.  Alice's marginal is set so the
    key-round count reproduces the measured QBER uncertainty:
    p_key = Q (1 - Q) / (N sigma_Q^2).  Matching the S uncertainty as well
    is infeasible at this N under product sampling, so it is checked rather
    than enforced.

    nu is solved from the secret-bit anchor.  When the calibrated model
    state's own (S, Q) are supplied, the anchor target is placed inside its
    tolerance band such that the model state keeps ``model_margin_bits`` of
    positive key at the same N; the model CHSH sits slightly below the
    measured one (its X and Y parities are equal by construction), and a
    dead-centre nu would push it just under break-even.

    Returns (alice_x_probs, bob_y_probs, nu).
    """
    p_key = q_measured * (1.0 - q_measured) / (n * q_err**2)
    alice = (3.0 * p_key, 1.0 - 3.0 * p_key)
    bob = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    if not 0.0 < alice[0] < 1.0:
        raise ValueError(f"implied Alice marginal {alice[0]} is not a probability")

    unit = math.sqrt(n * math.log2(1.0 / epsilon))
    r_meas = diqkd.asymptotic_rate(s_measured, q_measured, f)
    nu_exact = (n * p_key * r_meas - ell_anchor) / unit

    if model_s is None or model_q is None:
        return alice, bob, nu_exact

    r_model = diqkd.asymptotic_rate(model_s, model_q, f)
    nu_model = (n * p_key * r_model - model_margin_bits) / unit
    lo = (n * p_key * r_meas - ell_anchor * (1.0 + SECRET_BITS_TOLERANCE)) / unit
    hi = nu_exact
    nu = min(max(nu_model, lo), hi)

    ell_check = math.floor(n * p_key * r_meas - nu * unit)
    if not ell_anchor * (1 - SECRET_BITS_TOLERANCE) <= ell_check <= ell_anchor * (1 + SECRET_BITS_TOLERANCE):
        raise RuntimeError(f"anchor check failed: {ell_check} bits vs {ell_anchor}")
    return alice, bob, nu
