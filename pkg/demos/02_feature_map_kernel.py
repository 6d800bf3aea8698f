"""
The feature-map kernel of the two-parameter qubit model
=======================================================

"""

import numpy as np

from quditclass import builtin_model, kernel, kernel_qubit_model_a_closed_form
from quditclass.model import kernel_matrix

spec = builtin_model("qubit-A")

# the kernel ignores the trainable rotation, so only s matters
x, y = np.array([0.3, -0.2]), np.array([-0.1, 0.4])
for s in (0.5, 1.0, 2.0):
    numeric = kernel(spec, [s, 0.0], x, y)
    closed = kernel_qubit_model_a_closed_form(s, x, y)
    print(f"s={s}: numeric {numeric:.12f}  closed form {closed:.12f}")

# orthogonal unit inputs at s = pi/4 sit halfway
print("K at s=pi/4 for (1,0), (0,1):", kernel(spec, [np.pi / 4, 0.0], [1, 0], [0, 1]))

# a Gram matrix is positive semidefinite
pts = np.random.default_rng(1).uniform(-1, 1, (20, 2))
gram = kernel_matrix(spec, [1.3, 0.0], pts)
print("smallest Gram eigenvalue:", np.linalg.eigvalsh(gram).min())
