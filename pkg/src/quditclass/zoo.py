"""Built-in model catalog.

Generator indices in the table below are the usual 1-based labels; ``ModelSpec``
objects store them 0-based.

============== === === === ==================================================
name            d   k   P  structure
============== === === === ==================================================
qubit-A         2   2   2  enc s1(x1 g1 + x2 g2); rot w1 g1
qubit-B         2   2   4  enc s1(x1 g1 + x2 g2); rot w1 g1 + w2 g2 + w3 g3
qubit-C         2   2   3  enc (x1 g1 + x2 g2); rot w1 g1 + w2 g2 + w3 g3
qubit-D         2   2   5  enc s1 x1 g1 + s2 x2 g2; rot w1 g1 + w2 g2 + w3 g3
qubit-E         2   2   4  [enc s1(x1 g1 + x2 g2); rot w1 g1] x
                           [enc s2(x1 g2 + x2 g3); rot w2 g2]
qubit-F         2   2   6  qubit-E + [enc s3(x1 g1 + x2 g2); rot w3 g1]
qubit-G         2   3   3  enc s1(x1 g1 + x2 g2 + x3 g3); rot w1 g1 + w2 g2
qutrit-A        3   2   4  enc x1 s1 g6 + x2 s2 g7; rot w1 g1 + w2 g4
qutrit-B        3   2   8  enc x1(s1 g1 + s2 g2) + x2(s3 g3 + s4 g4); rot sum_1^4 wj gj
qutrit-C        3   2   8  enc x1(s1 g5 + s2 g6) + x2(s3 g7 + s4 g8); rot sum_1^4 wj gj
qutrit-D1       3   8   8  enc s1 sum_1^8 xj gj; rot sum_1^7 wj gj
qutrit-D2       3   8   8  enc sum_1^8 xj s_{(j-1) mod 4 + 1} gj; rot sum_1^4 wj (gj + g_{j+4})
qutrit-D3       3   8   9  enc sum_1^8 sj xj gj; rot w1 g1
qutrit-3class   3   2   9  enc x1(s1 g3 + s2 g5 + s3 g7) + x2(s4 g4 + s5 g6 + s6 g8);
                           rot w1 Lx + w2 Ly + w3 Lz; three L_z segments
qutrit-uci      3   4   5  enc s sum_1^4 xj gj; rot sum_5^8 w_{j-4} gj; basis probabilities
============== === === === ==================================================

Qubit models read out ``sigma_z`` with threshold 0; qutrit models read out
``L_z = g3 + sqrt(3) g8`` (spectrum -2, 0, 2) with threshold 0, except
``qutrit-3class`` (thresholds -2/3, 2/3) and ``qutrit-uci``.

Qubit labels are resolved through two maps instead of ``g1, g2, g3 =
sigma_x, sigma_y, sigma_z``.  Encoding layers use ``g1 -> sigma_x, g2 ->
sigma_z, g3 -> sigma_y`` and rotation layers use ``g1 -> sigma_y, g2 ->
sigma_x, g3 -> sigma_z``.  With the literal labels the combined encoding
``s (x1 sigma_x + x2 sigma_y)`` followed by a ``sigma_x`` rotation gives the
same ``<sigma_z>`` for ``(x1, x2)`` and ``(x1, -x2)``, so qubit-A could not
separate XOR, and its feature-map kernel is not
:func:`quditclass.model.kernel_qubit_model_a_closed_form`.  The price is that
qubit-B no longer sees ``|x|`` directly: every point on the ``x2`` axis is
encoded as the ground state, which caps its accuracy on centred circles.
The remapped encoding plane ``(sigma_x, sigma_z)`` reproduces that kernel
exactly.  :func:`qubit_models` rebuilds the rows under any other pair of maps
(``LITERAL_LABELS`` gives the literal reading).

``qutrit-A`` is kept as listed even though ``g6`` and ``g7`` act only on
levels 1 and 2: its encoding leaves the ground state unchanged, so every
input gives the same readout.
"""
from __future__ import annotations

import numpy as np

from .model import (
    BasisProbabilities,
    CoefficientExpr,
    Layer,
    LayerTerm,
    ModelSpec,
    Observable,
    Segments,
)

__all__ = ["builtin_model", "builtin_names", "CATALOG"]

SQRT3 = float(np.sqrt(3.0))
# label -> 0-based Pauli index; encoding and rotation layers use different maps
QUBIT_ENCODE_LABELS = {1: 0, 2: 2, 3: 1}  # g1 -> sigma_x, g2 -> sigma_z, g3 -> sigma_y
QUBIT_ROTATE_LABELS = {1: 1, 2: 0, 3: 2}  # g1 -> sigma_y, g2 -> sigma_x, g3 -> sigma_z
LITERAL_LABELS = {1: 0, 2: 1, 3: 2}


def _t(combo, weight=None, inp=None, constant=1.0):
    return LayerTerm(CoefficientExpr(constant, weight, inp), combo)


def _g(*labels):
    """1-based generator labels -> unit-coefficient combo."""
    return [(j - 1, 1.0) for j in labels]


_SIGMA_Z = _g(3)
_LZ = [(2, 1.0), (7, SQRT3)]
_LX = [(0, 1.0), (5, 1.0)]
_LY = [(1, 1.0), (6, 1.0)]


def _rot(pairs):
    """Rotation layer from ``[(w index, combo), ...]``."""
    return Layer("rotate", [_t(combo, ("W", j)) for j, combo in pairs])


def _rot_all(n):
    return _rot([(j, _g(j + 1)) for j in range(n)])


def _qutrit(name, k, s, w, layers, readout=None):
    readout = Segments([0.0]) if readout is None else readout
    return ModelSpec(3, k, s, w, layers, Observable(_LZ, readout), "gell_mann", name)


def qubit_models(encode_labels=None, rotate_labels=None) -> dict:
    """The qubit rows with printed labels resolved through the two maps."""
    enc_map = QUBIT_ENCODE_LABELS if encode_labels is None else encode_labels
    rot_map = QUBIT_ROTATE_LABELS if rotate_labels is None else rotate_labels

    def enc(s_index, pairs):
        # pairs: (feature, label); shared weight s_index (None: no weight)
        w = None if s_index is None else ("S", s_index)
        return Layer("encode", [_t([(enc_map[g], 1.0)], w, i) for i, g in pairs])

    def rot(pairs):
        return Layer("rotate", [_t([(rot_map[g], 1.0)], ("W", j)) for j, g in pairs])

    def qubit(name, k, s, w, layers):
        return ModelSpec(2, k, s, w, layers, Observable(_SIGMA_Z, Segments([0.0])), "pauli", name)

    rot3 = rot([(0, 1), (1, 2), (2, 3)])
    block1 = [enc(0, [(0, 1), (1, 2)]), rot([(0, 1)])]
    block2 = [enc(1, [(0, 2), (1, 3)]), rot([(1, 2)])]
    block3 = [enc(2, [(0, 1), (1, 2)]), rot([(2, 1)])]
    d_enc = Layer("encode", [_t([(enc_map[1], 1.0)], ("S", 0), 0),
                             _t([(enc_map[2], 1.0)], ("S", 1), 1)])
    return {
        "qubit-A": qubit("qubit-A", 2, 1, 1, block1),
        "qubit-B": qubit("qubit-B", 2, 1, 3, [block1[0], rot3]),
        "qubit-C": qubit("qubit-C", 2, 0, 3, [enc(None, [(0, 1), (1, 2)]), rot3]),
        "qubit-D": qubit("qubit-D", 2, 2, 3, [d_enc, rot3]),
        "qubit-E": qubit("qubit-E", 2, 2, 2, block1 + block2),
        "qubit-F": qubit("qubit-F", 2, 3, 3, block1 + block2 + block3),
        "qubit-G": qubit("qubit-G", 3, 1, 2,
                         [enc(0, [(0, 1), (1, 2), (2, 3)]), rot([(0, 1), (1, 2)])]),
    }


def _build():
    cat = qubit_models()
    cat["qutrit-A"] = _qutrit(
        "qutrit-A", 2, 2, 2,
        [Layer("encode", [_t(_g(6), ("S", 0), 0), _t(_g(7), ("S", 1), 1)]),
         _rot([(0, _g(1)), (1, _g(4))])],
    )
    cat["qutrit-B"] = _qutrit(
        "qutrit-B", 2, 4, 4,
        [Layer("encode", [_t(_g(1), ("S", 0), 0), _t(_g(2), ("S", 1), 0),
                          _t(_g(3), ("S", 2), 1), _t(_g(4), ("S", 3), 1)]),
         _rot_all(4)],
    )
    cat["qutrit-C"] = _qutrit(
        "qutrit-C", 2, 4, 4,
        [Layer("encode", [_t(_g(5), ("S", 0), 0), _t(_g(6), ("S", 1), 0),
                          _t(_g(7), ("S", 2), 1), _t(_g(8), ("S", 3), 1)]),
         _rot_all(4)],
    )
    cat["qutrit-D1"] = _qutrit(
        "qutrit-D1", 8, 1, 7,
        [Layer("encode", [_t(_g(j), ("S", 0), j - 1) for j in range(1, 9)]), _rot_all(7)],
    )
    cat["qutrit-D2"] = _qutrit(
        "qutrit-D2", 8, 4, 4,
        [Layer("encode", [_t(_g(j), ("S", (j - 1) % 4), j - 1) for j in range(1, 9)]),
         _rot([(j - 1, _g(j, j + 4)) for j in range(1, 5)])],
    )
    cat["qutrit-D3"] = _qutrit(
        "qutrit-D3", 8, 8, 1,
        [Layer("encode", [_t(_g(j), ("S", j - 1), j - 1) for j in range(1, 9)]),
         _rot([(0, _g(1))])],
    )
    cat["qutrit-3class"] = _qutrit(
        "qutrit-3class", 2, 6, 3,
        [Layer("encode", [_t(_g(3), ("S", 0), 0), _t(_g(5), ("S", 1), 0), _t(_g(7), ("S", 2), 0),
                          _t(_g(4), ("S", 3), 1), _t(_g(6), ("S", 4), 1), _t(_g(8), ("S", 5), 1)]),
         _rot([(0, _LX), (1, _LY), (2, _LZ)])],
        readout=Segments([-2.0 / 3.0, 2.0 / 3.0]),
    )
    cat["qutrit-uci"] = _qutrit(
        "qutrit-uci", 4, 1, 4,
        [Layer("encode", [_t(_g(j), ("S", 0), j - 1) for j in range(1, 5)]),
         _rot([(j - 5, _g(j)) for j in range(5, 9)])],
        readout=BasisProbabilities(3),
    )
    return cat


CATALOG = _build()


def builtin_names() -> list[str]:
    return list(CATALOG)


def builtin_model(name: str) -> ModelSpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(
            f"unknown model {name!r}; valid names: {', '.join(CATALOG)}"
        ) from None
