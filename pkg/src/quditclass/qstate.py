"""Pure qudit states: evolution, expectation values and Bloch coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    ContractViolation,
    GeneratorBasis,
    InvalidDimensionError,
    l_operators,
)

__all__ = [
    "QuditState",
    "ground_state",
    "apply",
    "expectation",
    "basis_probabilities",
    "bloch_vector",
    "su2_projection",
]

NORM_TOL = 1e-10


@dataclass(frozen=True)
class QuditState:
    """Amplitudes ``c_k`` of a normalized pure state over ``|0> .. |d-1>``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size < 2:
            raise InvalidDimensionError("a qudit needs d >= 2 amplitudes")
        if abs(np.vdot(amp, amp).real - 1.0) > NORM_TOL:
            raise ContractViolation("state is not normalized")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def d(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


def _amps(psi) -> np.ndarray:
    if isinstance(psi, QuditState):
        return psi.amplitudes
    return np.asarray(psi, dtype=complex)


def ground_state(d: int) -> QuditState:
    if d < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {d}")
    amp = np.zeros(d, dtype=complex)
    amp[0] = 1.0
    return QuditState(amp)


def apply(u: np.ndarray, psi: QuditState) -> QuditState:
    u = np.asarray(u, dtype=complex)
    c = _amps(psi)
    if u.shape != (c.size, c.size):
        raise ValueError(f"operator shape {u.shape} does not match d={c.size}")
    if np.max(np.abs(u.conj().T @ u - np.eye(c.size))) > NORM_TOL:
        raise ContractViolation("operator is not unitary")
    return QuditState(u @ c)


def expectation(psi: QuditState, o: np.ndarray) -> float:
    """``<psi|O|psi>`` with the imaginary round-off dropped."""
    c = _amps(psi)
    o = np.asarray(o, dtype=complex)
    if o.shape != (c.size, c.size):
        raise ValueError(f"observable shape {o.shape} does not match d={c.size}")
    return float(np.vdot(c, o @ c).real)


def basis_probabilities(psi: QuditState) -> np.ndarray:
    return np.abs(_amps(psi)) ** 2


def bloch_vector(psi: QuditState, basis: GeneratorBasis) -> np.ndarray:
    """Unnormalized coordinates ``b_m = <psi|g_m|psi>``.

    For a pure state ``sum(b**2) == G * (1 - 1/d)``, which is 1 only for a
    qubit.
    """
    c = _amps(psi)
    if basis.d != c.size:
        raise ValueError(f"basis dimension {basis.d} does not match d={c.size}")
    return np.einsum("i,mij,j->m", c.conj(), basis.generators, c).real


def su2_projection(psi: QuditState) -> tuple[float, float, float]:
    """``(<L_x>, <L_y>, <L_z>)`` of a qutrit state."""
    c = _amps(psi)
    if c.size != 3:
        raise ValueError("su2_projection is defined for qutrits only")
    return tuple(expectation(c, op) for op in l_operators())
