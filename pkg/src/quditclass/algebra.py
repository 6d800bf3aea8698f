"""Generator bases of su(d) and Hermitian matrix exponentials.

Generators are indexed from 0 throughout the package: the physics label
``g_i`` (1-based) is stored at index ``i - 1``.  For the Pauli basis this
means ``(sigma_x, sigma_y, sigma_z)`` at ``(0, 1, 2)``; for the Gell-Mann
basis ``lambda_1 .. lambda_8`` sit at ``0 .. 7``.

Ordering of :func:`generalized_gell_mann_basis`
-----------------------------------------------
For ``d = 2`` and ``d = 3`` the generalized construction returns exactly the
Pauli and Gell-Mann orderings.  For general ``d`` the generators are grouped
by "level": for each ``k = 1 .. d-1`` the symmetric and antisymmetric pairs
``(j, k)`` with ``j < k`` are emitted (symmetric first, then antisymmetric,
for each ``j`` in increasing order), followed by the diagonal generator that
first involves level ``k``.  This reproduces ``lambda_1 .. lambda_8`` for
``d = 3``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "GeneratorBasis",
    "GeneratorCombo",
    "InvalidDimensionError",
    "InvalidComboError",
    "ContractViolation",
    "pauli_basis",
    "gell_mann_basis",
    "generalized_gell_mann_basis",
    "get_basis",
    "combo_matrix",
    "expi",
    "expi_directional_derivative",
    "l_operators",
]

HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-12


class InvalidDimensionError(ValueError):
    pass


class InvalidComboError(ValueError):
    pass


class ContractViolation(ValueError):
    """An input breaks a documented precondition (e.g. non-Hermitian)."""


@dataclass(frozen=True)
class GeneratorBasis:
    """Hermitian, traceless, Hilbert-Schmidt orthogonal generators of su(d).

    Attributes
    ----------
    d : int
        Hilbert space dimension.
    generators : ndarray, shape (d*d - 1, d, d)
        The generators, ``Tr(g_i^dag g_j) = hs_constant * delta_ij``.
    hs_constant : float
        The constant ``G``.
    """

    d: int
    generators: np.ndarray
    hs_constant: float = 2.0
    name: str = field(default="generalized", compare=False)

    def __post_init__(self):
        gens = np.asarray(self.generators, dtype=complex)
        gens.setflags(write=False)
        object.__setattr__(self, "generators", gens)

    def __len__(self):
        return len(self.generators)

    @property
    def identity_element(self) -> np.ndarray:
        """``g_0 = sqrt(G/d) * 1``."""
        return np.sqrt(self.hs_constant / self.d) * np.eye(self.d, dtype=complex)


@dataclass(frozen=True)
class GeneratorCombo:
    """Real linear combination of generators, as ``(index, coefficient)`` pairs."""

    terms: tuple = ()

    def __init__(self, terms: Sequence = ()):
        object.__setattr__(
            self, "terms", tuple((int(i), float(c)) for i, c in terms)
        )

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def indices(self):
        return [i for i, _ in self.terms]

    def check(self, basis: GeneratorBasis):
        idx = self.indices()
        if len(set(idx)) != len(idx):
            raise InvalidComboError(f"duplicate generator index in combo {self.terms}")
        n = len(basis)
        for i in idx:
            if not 0 <= i < n:
                raise InvalidComboError(
                    f"generator index {i} out of range [0, {n}) for d={basis.d}"
                )


def pauli_basis() -> GeneratorBasis:
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return GeneratorBasis(2, np.stack([sx, sy, sz]), 2.0, name="pauli")


def gell_mann_basis() -> GeneratorBasis:
    """The eight Gell-Mann matrices ``lambda_1 .. lambda_8``.

    ``lambda_7`` is the standard one (``-i`` at (1, 2), ``+i`` at (2, 1),
    0-based), which is what makes the set orthogonal.
    """
    lam = np.zeros((8, 3, 3), dtype=complex)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1], lam[1][1, 0] = -1j, 1j
    lam[2] = np.diag([1, -1, 0])
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2], lam[4][2, 0] = -1j, 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2], lam[6][2, 1] = -1j, 1j
    lam[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return GeneratorBasis(3, lam, 2.0, name="gell_mann")


def generalized_gell_mann_basis(d: int) -> GeneratorBasis:
    """Generalized Gell-Mann matrices normalized to ``Tr(g_i g_j) = 2 delta_ij``."""
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {d}")
    d = int(d)
    gens = []
    for k in range(1, d):
        for j in range(k):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k], anti[k, j] = -1j, 1j
            gens.extend([sym, anti])
        # diagonal generator on levels 0..k
        diag = np.zeros(d)
        diag[:k] = 1
        diag[k] = -k
        gens.append(np.diag(diag * np.sqrt(2.0 / (k * (k + 1)))).astype(complex))
    return GeneratorBasis(d, np.stack(gens), 2.0)


def get_basis(kind: str, d: int | None = None) -> GeneratorBasis:
    """Resolve a basis by name: ``pauli``, ``gell_mann`` or ``generalized``."""
    if kind == "pauli":
        return pauli_basis()
    if kind == "gell_mann":
        return gell_mann_basis()
    if kind == "generalized":
        if d is None:
            raise InvalidDimensionError("generalized basis needs a dimension")
        return generalized_gell_mann_basis(d)
    raise ValueError(f"unknown basis kind {kind!r}")


def combo_matrix(basis: GeneratorBasis, combo) -> np.ndarray:
    if not isinstance(combo, GeneratorCombo):
        combo = GeneratorCombo(combo)
    combo.check(basis)
    out = np.zeros((basis.d, basis.d), dtype=complex)
    for i, c in combo:
        out += c * basis.generators[i]
    return out


def l_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The embedded su(2) triple ``(L_x, L_y, L_z)`` of a qutrit."""
    lam = gell_mann_basis().generators
    return lam[0] + lam[5], lam[1] + lam[6], lam[2] + np.sqrt(3) * lam[7]


def _check_hermitian(h: np.ndarray, name: str = "H"):
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolation(f"{name} must be a square matrix, got shape {h.shape}")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ContractViolation(f"{name} is not Hermitian")


def _eig_phases(lam):
    """Matrix of divided differences of ``exp(i x)`` over eigenvalue pairs.

    Uses ``(e^{ia} - e^{ib}) / (a - b) = i e^{i(a+b)/2} sinc((a-b)/2)``, which
    equals ``i e^{ia}`` on the diagonal and stays accurate for close pairs.
    """
    a = lam[..., :, None]
    b = lam[..., None, :]
    half = 0.5 * (a - b)
    f = 1j * np.exp(0.5j * (a + b)) * np.sinc(half / np.pi)
    # exact i e^{ia} where the pair is degenerate
    degenerate = np.abs(a - b) <= DEGENERACY_TOL
    return np.where(degenerate, 1j * np.exp(1j * a) + 0 * b, f)


def _expi_eigh(h):
    """Batched ``exp(iH)`` plus the eigensystem; no input checks."""
    lam, v = np.linalg.eigh(h)
    u = (v * np.exp(1j * lam)[..., None, :]) @ np.swapaxes(v, -1, -2).conj()
    return u, lam, v


def expi(h: np.ndarray) -> np.ndarray:
    """``exp(iH)`` for Hermitian ``H`` via its spectral decomposition."""
    h = np.asarray(h, dtype=complex)
    _check_hermitian(h)
    return _expi_eigh(h)[0]


def expi_directional_derivative(h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    """Derivative of ``exp(i(H + t dH))`` at ``t = 0``.

    Computed in the eigenbasis of ``H`` with the divided-difference rule.
    """
    h = np.asarray(h, dtype=complex)
    dh = np.asarray(dh, dtype=complex)
    _check_hermitian(h)
    _check_hermitian(dh, "dH")
    if h.shape != dh.shape:
        raise ContractViolation(f"shape mismatch {h.shape} vs {dh.shape}")
    lam, v = np.linalg.eigh(h)
    vh = v.conj().T
    return v @ (_eig_phases(lam) * (vh @ dh @ v)) @ vh
