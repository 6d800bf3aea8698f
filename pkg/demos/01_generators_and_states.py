"""
Generators, states and Bloch coordinates
========================================

"""

import numpy as np

from quditclass import (
    QuditState,
    bloch_vector,
    expi,
    gell_mann_basis,
    generalized_gell_mann_basis,
    ground_state,
    l_operators,
    su2_projection,
)
from quditclass.qstate import apply

# the eight Gell-Mann matrices are orthogonal with Tr(g_i g_j) = 2 delta_ij
basis = gell_mann_basis()
gram = np.einsum("iab,jab->ij", basis.generators.conj(), basis.generators).real
print("Gram matrix of the Gell-Mann basis:\n", np.round(gram, 12))

# the L operators span an su(2) inside su(3); Lz has spectrum {-2, 0, 2}
lx, ly, lz = l_operators()
print("spectrum of Lz:", np.linalg.eigvalsh(lz))
print("[Lx, Ly] == i Lz:", np.allclose(lx @ ly - ly @ lx, 1j * lz))

# rotate |0> of a qutrit and look at it two ways
rng = np.random.default_rng(0)
h = sum(c * g for c, g in zip(rng.normal(size=8), basis.generators))
psi = apply(expi(h), ground_state(3))
b = bloch_vector(psi, basis)
print("Bloch vector norm:", np.linalg.norm(b), "expected", np.sqrt(2 * (1 - 1 / 3)))
print("(<Lx>, <Ly>, <Lz>):", np.round(su2_projection(psi), 4))

# the same construction works for any d
for d in (2, 4, 5):
    gb = generalized_gell_mann_basis(d)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    norm = np.linalg.norm(bloch_vector(QuditState(v / np.linalg.norm(v)), gb))
    print(f"d={d}: {len(gb.generators)} generators, pure-state Bloch norm {norm:.6f}")
