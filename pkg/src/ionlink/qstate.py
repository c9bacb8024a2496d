"""Exact two-qubit density-matrix algebra for the remote ion pair.

Every state lives in the fixed product basis

    index 0: |dn dn>    index 1: |dn up>
    index 2: |up dn>    index 3: |up up>

where |dn> is the ground qubit level and |up> the metastable one; qubit A
owns the left slot, qubit B the right slot.  All other modules share this
ordering.

Measurement observables are restricted to the X-Z plane: a setting with
angle theta measures cos(theta) Z + sin(theta) X, and outcome bit 0 maps to
the +1 eigenvalue.  Correlators returned by :func:`chsh_value` and
:func:`pauli_expectation` are raw Born-rule expectations with that bit
convention; any protocol-level sign remapping lives in the estimator layer,
not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "StateInvariantError",
    "BellKind",
    "MeasurementSetting",
    "TwoQubitDensity",
    "bell_state",
    "down_down",
    "maximally_mixed",
    "fidelity",
    "pauli_expectation",
    "apply_dephasing",
    "apply_depolarizing",
    "mix",
    "measure_pair",
    "chsh_value",
]

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Y2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_Z2 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_PAULI_BY_NAME = {"I": _I2, "X": _X2, "Y": _Y2, "Z": _Z2}


class StateInvariantError(ValueError):
    """A matrix failed the Hermiticity / trace / positivity checks.

    Channels in this package are exactly completely positive, so a violation
    indicates a bug upstream; no silent repair is attempted.
    """


class BellKind(Enum):
    """Which detector clicked: selects the + or - superposition sign."""

    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def from_string(cls, name: str) -> "BellKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"herald sign must be 'plus' or 'minus', got {name!r}") from None


@dataclass(frozen=True)
class MeasurementSetting:
    """Single-qubit observable cos(theta) Z + sin(theta) X.

    The angle is normalised into [-pi, pi) on construction.
    """

    theta: float

    def __post_init__(self):
        wrapped = math.remainder(self.theta, 2.0 * math.pi)
        if wrapped >= math.pi:  # remainder returns (-pi, pi]; fold pi to -pi
            wrapped -= 2.0 * math.pi
        object.__setattr__(self, "theta", wrapped)

    def observable(self) -> np.ndarray:
        return math.cos(self.theta) * _Z2 + math.sin(self.theta) * _X2


@lru_cache(maxsize=512)
def _observable_for_angle(theta: float) -> np.ndarray:
    m = math.cos(theta) * _Z2 + math.sin(theta) * _X2
    m.flags.writeable = False
    return m


def _as_observable(obs) -> np.ndarray:
    """Accept a MeasurementSetting, a plain angle, or an axis name."""
    if isinstance(obs, MeasurementSetting):
        return _observable_for_angle(obs.theta)
    if isinstance(obs, str):
        try:
            return _PAULI_BY_NAME[obs.upper()]
        except KeyError:
            raise ValueError(f"unknown observable axis {obs!r}") from None
    return _observable_for_angle(MeasurementSetting(float(obs)).theta)


class TwoQubitDensity:
    """Validated 4x4 density matrix of the two remote memory qubits."""

    __slots__ = ("matrix", "_meas_cache")

    def __init__(self, matrix, *, validate: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.shape != (4, 4):
            raise StateInvariantError(f"expected a 4x4 matrix, got shape {m.shape}")
        if validate:
            if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
                raise StateInvariantError("matrix is not Hermitian to 1e-12")
            tr = m.trace()
            if abs(tr - 1.0) > 1e-9:
                raise StateInvariantError(f"trace is {tr}, expected 1")
            # renormalise roundoff in the last few ulps before the eigencheck
            m = 0.5 * (m + m.conj().T)
            eigs = np.linalg.eigvalsh(m)
            if eigs.min() < PSD_TOL:
                raise StateInvariantError(f"negative eigenvalue {eigs.min():.3e}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_meas_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("TwoQubitDensity is immutable")

    def _measurement_tensors(self):
        """Precontracted tensors for fast repeated expectation values.

        With r = matrix.reshape(2,2,2,2) indexed [i,j,k,l] (row pair, column
        pair), Tr(rho (A x B)) = vec(A) . C . vec(B) with C[ki, lj], and the
        single-qubit means reduce through the partial traces.
        """
        cached = self._meas_cache
        if cached is None:
            r = self.matrix.reshape(2, 2, 2, 2)
            corr = np.ascontiguousarray(r.transpose(2, 0, 3, 1)).reshape(4, 4)
            red_a = np.einsum("ijkj->ki", r).ravel()
            red_b = np.einsum("ijil->lj", r).ravel()
            cached = (corr, red_a, red_b)
            object.__setattr__(self, "_meas_cache", cached)
        return cached

    def __repr__(self):
        diag = ", ".join(f"{p.real:.4f}" for p in np.diag(self.matrix))
        return f"TwoQubitDensity(diag=[{diag}])"

    def __eq__(self, other):
        if not isinstance(other, TwoQubitDensity):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def trace(self) -> float:
        return float(self.matrix.trace().real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def bell_state(kind: BellKind, dphi: float = 0.0) -> TwoQubitDensity:
    """Projector onto (|dn up> +/- e^{i dphi} |up dn>) / sqrt(2)."""
    sign = 1.0 if kind is BellKind.PLUS else -1.0
    vec = np.zeros(4, dtype=complex)
    vec[1] = 1.0 / math.sqrt(2.0)
    vec[2] = sign * np.exp(1.0j * dphi) / math.sqrt(2.0)
    return TwoQubitDensity(np.outer(vec, vec.conj()))


def down_down() -> TwoQubitDensity:
    """Projector onto |dn dn>, the doubly scattered protocol leak state."""
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    return TwoQubitDensity(m)


def maximally_mixed() -> TwoQubitDensity:
    return TwoQubitDensity(np.eye(4, dtype=complex) / 4.0)


def fidelity(rho: TwoQubitDensity, pure: TwoQubitDensity) -> float:
    """Overlap Tr(rho * pure) with a rank-1 target state.

    Raises ValueError if the second argument is not rank-1 (largest
    eigenvalue below 1 - 1e-9); for mixed targets this formula would not be
    the Uhlmann fidelity, so it is rejected rather than silently misused.
    """
    if pure.eigenvalues().max() < 1.0 - 1e-9:
        raise ValueError("fidelity target must be a pure (rank-1) state")
    val = float(np.einsum("ij,ji->", rho.matrix, pure.matrix).real)
    return min(1.0, max(0.0, val))


def pauli_expectation(rho: TwoQubitDensity, obs_a, obs_b) -> float:
    """Tr(rho (A x B)) for X-Z plane settings or named Pauli axes."""
    joint = np.kron(_as_observable(obs_a), _as_observable(obs_b))
    return float(np.einsum("ij,ji->", rho.matrix, joint).real)


def _conjugate(rho_m: np.ndarray, op: np.ndarray) -> np.ndarray:
    return op @ rho_m @ op.conj().T


_ZA = np.kron(_Z2, _I2)
_ZB = np.kron(_I2, _Z2)
_XA = np.kron(_X2, _I2)
_XB = np.kron(_I2, _X2)
_YA = np.kron(_Y2, _I2)
_YB = np.kron(_I2, _Y2)


def apply_dephasing(rho: TwoQubitDensity, lam: float) -> TwoQubitDensity:
    """Differential-phase noise between the node optical fields.

    Implemented as a phase flip on one node, chosen at random, with total
    probability (1 - lam) / 2.  The |dn up><up dn| coherence is scaled by
    exactly lam while all populations stay put, so the Bell-state fidelity of
    a pure input degrades to (1 + lam) / 2.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"dephasing survival factor must be in [0, 1], got {lam}")
    m = rho.matrix
    out = 0.5 * (1.0 + lam) * m + 0.25 * (1.0 - lam) * (
        _conjugate(m, _ZA) + _conjugate(m, _ZB)
    )
    return TwoQubitDensity(out)


def apply_depolarizing(rho: TwoQubitDensity, p: float) -> TwoQubitDensity:
    """(1 - p) rho + p I/4."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p}")
    out = (1.0 - p) * rho.matrix + p * np.eye(4, dtype=complex) / 4.0
    return TwoQubitDensity(out)


def mix(rho1: TwoQubitDensity, rho2: TwoQubitDensity, w: float) -> TwoQubitDensity:
    """Convex combination w * rho1 + (1 - w) * rho2."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"mixture weight must be in [0, 1], got {w}")
    return TwoQubitDensity(w * rho1.matrix + (1.0 - w) * rho2.matrix)


def joint_outcome_probabilities(rho: TwoQubitDensity, setting_a, setting_b) -> np.ndarray:
    """Born probabilities for outcome pairs (0,0), (0,1), (1,0), (1,1)."""
    a_vec = _as_observable(setting_a).ravel()
    b_vec = _as_observable(setting_b).ravel()
    corr, red_a, red_b = rho._measurement_tensors()
    ea = (a_vec @ red_a).real
    eb = (b_vec @ red_b).real
    eab = (a_vec @ corr @ b_vec).real
    probs = 0.25 * np.array([
        1.0 + ea + eb + eab,
        1.0 + ea - eb - eab,
        1.0 - ea + eb - eab,
        1.0 - ea - eb + eab,
    ])
    # Born probabilities of commuting projectors; clip only float roundoff
    np.clip(probs, 0.0, None, out=probs)
    return probs / probs.sum()


def measure_pair(rho: TwoQubitDensity, setting_a, setting_b, rng: np.random.Generator):
    """Sample one joint outcome (bit_a, bit_b) from the Born distribution.

    Bit 0 corresponds to the +1 eigenvalue of the measured observable.  The
    supplied generator is the only mutable state touched.
    """
    probs = joint_outcome_probabilities(rho, setting_a, setting_b)
    u = rng.random()
    acc = 0.0
    for k in range(4):
        acc += probs[k]
        if u < acc:
            return k >> 1, k & 1
    return 1, 1


@dataclass(frozen=True)
class ChshSettings:
    """The four analyser angles of a CHSH evaluation."""

    a0: MeasurementSetting
    a1: MeasurementSetting
    b0: MeasurementSetting
    b1: MeasurementSetting

    @classmethod
    def from_angles(cls, a0: float, a1: float, b0: float, b1: float) -> "ChshSettings":
        return cls(
            MeasurementSetting(a0),
            MeasurementSetting(a1),
            MeasurementSetting(b0),
            MeasurementSetting(b1),
        )


def chsh_value(rho: TwoQubitDensity, settings: ChshSettings) -> float:
    """S = E(a0,b0) + E(a0,b1) + E(a1,b0) - E(a1,b1) from raw correlators."""
    e = lambda sa, sb: pauli_expectation(rho, sa, sb)
    s = (
        e(settings.a0, settings.b0)
        + e(settings.a0, settings.b1)
        + e(settings.a1, settings.b0)
        - e(settings.a1, settings.b1)
    )
    bound = 2.0 * math.sqrt(2.0) + 1e-9
    if abs(s) > bound:
        raise StateInvariantError(f"CHSH value {s} exceeds the quantum bound")
    return s


def random_density(rng: np.random.Generator) -> TwoQubitDensity:
    """Haar-ish random full-rank test state (Ginibre construction)."""
    g = rng.normal(size=(4, 4)) + 1.0j * rng.normal(size=(4, 4))
    m = g @ g.conj().T
    return TwoQubitDensity(m / m.trace())
