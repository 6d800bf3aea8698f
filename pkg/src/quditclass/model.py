"""Encode-rotate-measure model specifications and their evaluation.

A :class:`ModelSpec` is a declarative list of layers.  Each layer is turned
into one unitary ``exp(i * sum_t c_t * A_t)`` where ``A_t`` is a generator
combination and ``c_t`` a coefficient built from a constant, at most one
trainable weight and (encode layers only) at most one input feature.  The
layers act in order on the ground state and the final state is read out
either by comparing an expectation value against fixed thresholds or by the
computational-basis probabilities.

Weights live in two banks, ``S`` (encoding) and ``W`` (rotation).  The flat
parameter vector used by the optimizers is ``concat(s, w)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np

from .algebra import (
    GeneratorBasis,
    GeneratorCombo,
    _expi_eigh,
    combo_matrix,
    get_basis,
)
from .qstate import QuditState

__all__ = [
    "CoefficientExpr",
    "LayerTerm",
    "Layer",
    "Segments",
    "BasisProbabilities",
    "Observable",
    "ModelSpec",
    "ParameterVector",
    "SpecError",
    "validate_spec",
    "layer_hamiltonian",
    "forward",
    "expectation_value",
    "readout",
    "predict",
    "kernel",
    "kernel_qubit_model_a_closed_form",
    "spec_to_dict",
    "spec_from_dict",
    "load_spec",
    "save_spec",
]


class SpecError(ValueError):
    """A model specification (or its bound inputs) is inconsistent."""


@dataclass(frozen=True)
class CoefficientExpr:
    """``constant * weight * input`` where the last two factors are optional.

    ``weight`` is ``("S", i)`` or ``("W", i)``; ``input`` is a feature index.
    """

    constant: float = 1.0
    weight: tuple | None = None
    input: int | None = None

    def __post_init__(self):
        if self.weight is not None:
            bank, idx = self.weight
            object.__setattr__(self, "weight", (str(bank).upper(), int(idx)))
        if self.input is not None:
            object.__setattr__(self, "input", int(self.input))


@dataclass(frozen=True)
class LayerTerm:
    coeff: CoefficientExpr
    combo: GeneratorCombo

    def __post_init__(self):
        if not isinstance(self.combo, GeneratorCombo):
            object.__setattr__(self, "combo", GeneratorCombo(self.combo))


@dataclass(frozen=True)
class Layer:
    kind: str  # "encode" | "rotate"
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class Segments:
    """Classify by the interval of ``<O>`` delimited by ``thresholds``.

    Class ``m`` (0-based) covers ``[y_m, y_{m+1})``; the last interval is
    closed, so a value exactly on a threshold goes to the upper class.
    """

    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    @property
    def classes(self) -> int:
        return len(self.thresholds) + 1


@dataclass(frozen=True)
class BasisProbabilities:
    """Classify by the most probable computational-basis outcome."""

    classes: int


@dataclass(frozen=True)
class Observable:
    combo: GeneratorCombo
    readout: Union[Segments, BasisProbabilities]

    def __post_init__(self):
        if not isinstance(self.combo, GeneratorCombo):
            object.__setattr__(self, "combo", GeneratorCombo(self.combo))


@dataclass(frozen=True)
class ModelSpec:
    d: int
    k: int
    num_s: int
    num_w: int
    layers: tuple
    observable: Observable
    basis_kind: str = "generalized"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def num_params(self) -> int:
        return self.num_s + self.num_w

    @property
    def classes(self) -> int:
        return self.observable.readout.classes

    @cached_property
    def basis(self) -> GeneratorBasis:
        return get_basis(self.basis_kind, self.d)

    @cached_property
    def compiled(self) -> "_Compiled":
        errors = validate_spec(self)
        if errors:
            raise SpecError("; ".join(errors))
        return _Compiled(self)

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class ParameterVector:
    s: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float).reshape(-1))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(-1))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.s, self.w])

    @classmethod
    def from_flat(cls, spec: ModelSpec, theta) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != spec.num_params:
            raise SpecError(
                f"expected {spec.num_params} parameters, got {theta.size}"
            )
        return cls(theta[: spec.num_s], theta[spec.num_s:])


def _as_flat(spec: ModelSpec, theta) -> np.ndarray:
    if isinstance(theta, ParameterVector):
        if theta.s.size != spec.num_s or theta.w.size != spec.num_w:
            raise SpecError(
                f"parameter lengths (S={theta.s.size}, W={theta.w.size}) do not match "
                f"the model (S={spec.num_s}, W={spec.num_w})"
            )
        return theta.flat()
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != spec.num_params:
        raise SpecError(f"expected {spec.num_params} parameters, got {theta.shape[-1]}")
    return theta


def validate_spec(spec: ModelSpec) -> list[str]:
    """Return every invariant violation of ``spec`` (empty list when valid)."""
    errors = []
    d = spec.d
    if d < 2:
        errors.append(f"d: dimension must be >= 2, got {d}")
        return errors
    n_gen = d * d - 1
    if spec.basis_kind in ("pauli", "gell_mann"):
        expected = {"pauli": 2, "gell_mann": 3}[spec.basis_kind]
        if d != expected:
            errors.append(f"basis_kind: {spec.basis_kind} basis requires d={expected}, got d={d}")
    elif spec.basis_kind != "generalized":
        errors.append(f"basis_kind: unknown basis {spec.basis_kind!r}")
    if spec.k > n_gen:
        errors.append(f"k: input dimension {spec.k} exceeds d^2-1={n_gen} (requirement k <= d^2-1)")
    if spec.k < 1:
        errors.append("k: input dimension must be >= 1")
    for bank, size in (("S", spec.num_s), ("W", spec.num_w)):
        if size < 0 or size > n_gen:
            errors.append(f"num_{bank.lower()}: bank size {size} outside [0, d^2-1={n_gen}]")
    if not spec.layers:
        errors.append("layers: at least one layer is required")

    for li, layer in enumerate(spec.layers):
        path = f"layers[{li}]"
        if layer.kind not in ("encode", "rotate"):
            errors.append(f"{path}.kind: must be 'encode' or 'rotate', got {layer.kind!r}")
        if not layer.terms:
            errors.append(f"{path}.terms: layer has no terms")
        for ti, term in enumerate(layer.terms):
            tpath = f"{path}.terms[{ti}]"
            c = term.coeff
            if c.weight is not None:
                bank, idx = c.weight
                size = {"S": spec.num_s, "W": spec.num_w}.get(bank)
                if size is None:
                    errors.append(f"{tpath}.weight: unknown bank {bank!r}")
                elif not 0 <= idx < size:
                    errors.append(f"{tpath}.weight: index {idx} outside bank {bank} of size {size}")
            if c.input is not None:
                if layer.kind == "rotate":
                    errors.append(f"{tpath}.input: input in rotation layer")
                elif not 0 <= c.input < spec.k:
                    errors.append(f"{tpath}.input: feature index {c.input} outside [0, {spec.k})")
            if len(term.combo) == 0:
                errors.append(f"{tpath}.combo: combination is empty")
            errors.extend(_combo_errors(term.combo, n_gen, f"{tpath}.combo"))
        # overlapping generator groups across features are allowed, only flagged
        groups: dict[int, set] = {}
        for term in layer.terms:
            if term.coeff.input is not None:
                groups.setdefault(term.coeff.input, set()).update(term.combo.indices())
        feats = sorted(groups)
        for a in range(len(feats)):
            for b in range(a + 1, len(feats)):
                if groups[feats[a]] & groups[feats[b]]:
                    warnings.warn(
                        f"{path}: generator groups of inputs {feats[a]} and {feats[b]} overlap",
                        stacklevel=2,
                    )

    obs = spec.observable
    errors.extend(_combo_errors(obs.combo, n_gen, "observable.combo"))
    ro = obs.readout
    if isinstance(ro, Segments):
        if not obs.combo.terms:
            errors.append("observable.combo: segment readout needs a non-empty observable")
        elif not errors:
            o = combo_matrix(spec.basis, obs.combo)
            ev = np.linalg.eigvalsh(o)
            y = np.asarray(ro.thresholds)
            if np.any(np.diff(y) <= 0):
                errors.append("observable.readout.thresholds: must be strictly increasing")
            if y.size and (y[0] <= ev[0] or y[-1] >= ev[-1]):
                errors.append(
                    f"observable.readout.thresholds: must lie inside the spectrum ({ev[0]:g}, {ev[-1]:g})"
                )
    elif isinstance(ro, BasisProbabilities):
        if ro.classes != d:
            errors.append(f"observable.readout.classes: basis readout needs M=d={d}, got {ro.classes}")
    else:
        errors.append("observable.readout: unknown readout type")
    return errors


def _combo_errors(combo: GeneratorCombo, n_gen: int, path: str) -> list[str]:
    out = []
    idx = combo.indices()
    if len(set(idx)) != len(idx):
        out.append(f"{path}: duplicate generator index")
    for i in idx:
        if not 0 <= i < n_gen:
            out.append(f"{path}: generator index {i} outside [0, {n_gen})")
    return out


class _Compiled:
    """Array form of a spec for batched evaluation.

    Per layer: term matrices ``A_t``, constants, flat parameter index (or -1)
    and input index (or -1).
    """

    def __init__(self, spec: ModelSpec):
        basis = spec.basis
        self.d = spec.d
        self.k = spec.k
        self.num_params = spec.num_params
        self.layers = []
        for layer in spec.layers:
            mats = np.stack([combo_matrix(basis, t.combo) for t in layer.terms])
            const = np.array([t.coeff.constant for t in layer.terms], dtype=float)
            pidx = np.array(
                [_flat_index(spec, t.coeff.weight) for t in layer.terms], dtype=int
            )
            xidx = np.array(
                [-1 if t.coeff.input is None else t.coeff.input for t in layer.terms],
                dtype=int,
            )
            # (T, P) map from term to parameter, used to scatter term gradients
            onehot = np.zeros((len(layer.terms), self.num_params))
            for t, p in enumerate(pidx):
                if p >= 0:
                    onehot[t, p] = 1.0
            self.layers.append((layer.kind, mats, const, pidx, xidx, onehot))
        self.obs = combo_matrix(basis, spec.observable.combo) if spec.observable.combo.terms else None
        self.readout = spec.observable.readout
        self.psi0 = np.zeros(self.d, dtype=complex)
        self.psi0[0] = 1.0
        if isinstance(self.readout, Segments):
            ev = np.linalg.eigvalsh(self.obs)
            self.spectrum = (float(ev[0]), float(ev[-1]))
            self.thresholds = np.asarray(self.readout.thresholds, dtype=float)

    def coefficients(self, layer, theta, x):
        """Coefficients ``(R, N, T)`` for parameters ``(R, P)`` and inputs ``(N, k)``."""
        _, _, const, pidx, xidx, _ = layer
        r, n = theta.shape[0], x.shape[0]
        c = np.broadcast_to(const, (r, n, const.size)).copy()
        if np.any(pidx >= 0):
            wv = np.where(pidx >= 0, theta[:, np.maximum(pidx, 0)], 1.0)
            c *= wv[:, None, :]
        if np.any(xidx >= 0):
            xv = np.where(xidx >= 0, x[:, np.maximum(xidx, 0)], 1.0)
            c *= xv[None, :, :]
        return c

    def run(self, theta, x, upto=None, keep=False, extra=None):
        """Propagate the ground state; returns final states ``(R, N, d)``.

        With ``keep`` the per-layer eigensystems and input states are also
        returned for the backward pass.  ``extra = (layer, dH)`` adds ``dH``
        (shape ``(N, d, d)``) to one layer's Hamiltonian.
        """
        r, n = theta.shape[0], x.shape[0]
        psi = np.broadcast_to(self.psi0, (r, n, self.d)).copy()
        tape = []
        layers = self.layers if upto is None else self.layers[:upto]
        for li, layer in enumerate(layers):
            c = self.coefficients(layer, theta, x)
            h = np.einsum("rnt,tij->rnij", c, layer[1])
            if extra is not None and extra[0] == li:
                h = h + extra[1]
            u, lam, v = _expi_eigh(h)
            if keep:
                tape.append((psi, lam, v, u))
            psi = np.einsum("rnij,rnj->rni", u, psi)
        return (psi, tape) if keep else psi

    def expectations(self, psi):
        return np.einsum("rni,ij,rnj->rn", psi.conj(), self.obs, psi).real

    def backward(self, theta, x, psi, tape, a_ops):
        """Gradient ``(R, P)`` of ``sum_n <psi_n|A_n|psi_n>`` (A held fixed).

        ``a_ops`` has shape ``(R, N, d, d)`` or ``(R, N, d)`` for diagonal
        operators.
        """
        from .algebra import _eig_phases

        if a_ops.ndim == 3:
            chi = a_ops * psi
        else:
            chi = np.einsum("rnij,rnj->rni", a_ops, psi)
        grad = np.zeros((theta.shape[0], self.num_params))
        for layer, (psi_in, lam, v, u) in zip(reversed(self.layers[: len(tape)]), reversed(tape)):
            _, mats, const, pidx, xidx, onehot = layer
            if np.any(pidx >= 0):
                vh = np.swapaxes(v, -1, -2).conj()
                a = np.einsum("rnij,rnj->rni", vh, chi)
                b = np.einsum("rnij,rnj->rni", vh, psi_in)
                q = a.conj()[..., :, None] * _eig_phases(lam) * b[..., None, :]
                z = v.conj() @ q @ np.swapaxes(v, -1, -2)
                # d<A>/dc_t = 2 Re sum_cd (A_t)_cd Z_cd
                g_terms = 2.0 * np.einsum("tcd,rncd->rnt", mats, z).real
                dc = np.broadcast_to(const, g_terms.shape).copy()
                if np.any(xidx >= 0):
                    xv = np.where(xidx >= 0, x[:, np.maximum(xidx, 0)], 1.0)
                    dc *= xv[None, :, :]
                grad += np.einsum("rnt,tp->rp", g_terms * dc, onehot)
            chi = np.einsum("rnji,rnj->rni", u.conj(), chi)
        return grad


def _flat_index(spec: ModelSpec, weight) -> int:
    if weight is None:
        return -1
    bank, idx = weight
    return idx if bank == "S" else spec.num_s + idx


def _prepare(spec: ModelSpec, theta, x):
    comp = spec.compiled
    theta = np.atleast_2d(_as_flat(spec, theta)).astype(float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != spec.k:
        raise SpecError(f"input has {x.shape[-1]} features, model expects k={spec.k}")
    return comp, theta, x


def layer_hamiltonian(layer: Layer, x, theta: ParameterVector, basis: GeneratorBasis) -> np.ndarray:
    """``sum_t c_t(theta, x) * A_t`` for one layer."""
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.zeros((basis.d, basis.d), dtype=complex)
    for term in layer.terms:
        c = term.coeff
        val = c.constant
        if c.weight is not None:
            bank, idx = c.weight
            arr = theta.s if bank == "S" else theta.w
            if not 0 <= idx < arr.size:
                raise SpecError(f"weight {bank}[{idx}] is not bound")
            val *= arr[idx]
        if c.input is not None:
            if layer.kind == "rotate":
                raise SpecError("input in rotation layer")
            if not 0 <= c.input < x.size:
                raise SpecError(f"input x[{c.input}] is not bound")
            val *= x[c.input]
        h += val * combo_matrix(basis, term.combo)
    return h


def forward(spec: ModelSpec, theta, x) -> QuditState:
    """Final state for one input vector."""
    comp, th, xx = _prepare(spec, theta, x)
    if xx.shape[0] != 1 or th.shape[0] != 1:
        raise SpecError("forward takes a single parameter vector and input")
    return QuditState(comp.run(th, xx)[0, 0])


def expectation_value(spec: ModelSpec, theta, x) -> np.ndarray:
    """``<O>`` for each row of ``x`` (shape ``(N,)``)."""
    comp, th, xx = _prepare(spec, theta, x)
    if comp.obs is None:
        raise SpecError("model has no observable combination")
    return comp.expectations(comp.run(th[:1], xx))[0]


def readout(spec: ModelSpec, theta, x) -> np.ndarray:
    """Raw readout per input: ``<O>`` (segments) or basis probabilities."""
    comp, th, xx = _prepare(spec, theta, x)
    psi = comp.run(th[:1], xx)
    if isinstance(comp.readout, Segments):
        return comp.expectations(psi)[0]
    return (np.abs(psi) ** 2)[0]


def classify_values(readout_, values: np.ndarray) -> np.ndarray:
    if isinstance(readout_, Segments):
        return np.searchsorted(np.asarray(readout_.thresholds), values, side="right")
    return np.argmax(values, axis=-1)


def predict(spec: ModelSpec, theta, x) -> np.ndarray | int:
    """0-based class label(s); a scalar for a single 1-D input."""
    single = np.ndim(x) == 1
    labels = classify_values(spec.observable.readout, readout(spec, theta, x))
    return int(labels[0]) if single else labels


def _encoded_states(spec: ModelSpec, theta, x):
    comp, th, xx = _prepare(spec, theta, x)
    last = max(
        (i for i, layer in enumerate(spec.layers) if layer.kind == "encode"), default=-1
    )
    return comp.run(th[:1], xx, upto=last + 1)[0]


def kernel(spec: ModelSpec, theta, x, y) -> float:
    """Feature-map kernel ``|<psi_y|psi_x>|^2``.

    The feature map runs the layers up to and including the last encode
    layer; trailing rotations cancel in the overlap and are skipped.
    """
    states = _encoded_states(spec, theta, np.vstack([np.ravel(x), np.ravel(y)]))
    return float(abs(np.vdot(states[1], states[0])) ** 2)


def kernel_matrix(spec: ModelSpec, theta, xs, ys=None) -> np.ndarray:
    sx = _encoded_states(spec, theta, xs)
    sy = sx if ys is None else _encoded_states(spec, theta, ys)
    return np.abs(sy.conj() @ sx.T).T ** 2


def kernel_qubit_model_a_closed_form(s: float, x, y) -> float:
    """Closed-form kernel of the one-weight combined qubit encoding.

    Written term by term as published; ``x`` and ``y`` below are also used
    for the norms of the two inputs.
    """
    x1, x2 = map(float, x)
    y1, y2 = map(float, y)
    xn = np.hypot(x1, x2)
    yn = np.hypot(y1, y2)
    if xn == 0.0 or yn == 0.0:
        raise ValueError("closed-form kernel is undefined for a zero-norm input")
    x, y = xn, yn
    cos = np.cos
    dot = x1 * y1 + x2 * y2
    total = (
        2 * x**2 * y**2 * cos(2 * s * y)
        + x**2 * y**2 * cos(2 * s * (x + y))
        + (x**2 * (y**2 - y2**2) - x2**2 * y**2 + 2 * x1 * x * y * y1 + dot**2) * cos(2 * s * (x - y))
        + 2 * (x**2 * (y**2 + y2**2) - x2**2 * y**2 - dot**2) * cos(2 * s * x)
        - 2 * x**2 * y2**2 * cos(2 * s * y)
        - x**2 * y2**2 * cos(2 * s * (x + y))
        + 2 * x2**2 * y**2 * cos(2 * s * y)
        - x2**2 * y**2 * cos(2 * s * (x + y))
        - 2 * x * x1 * y1 * y * cos(2 * s * (x + y))
        - 2 * x1**2 * y1**2 * cos(2 * s * y)
        + x1**2 * y1**2 * cos(2 * s * (x + y))
        - 2 * x2**2 * y2**2 * cos(2 * s * y)
        + x2**2 * y2**2 * cos(2 * s * (x + y))
        - 4 * x1 * x2 * y1 * y2 * cos(2 * s * y)
        + 2 * x1 * x2 * y1 * y2 * cos(2 * s * (x + y))
        + 2 * x**2 * y**2
        + 2 * x**2 * y2**2
        + 2 * x2**2 * y**2
        + 2 * x1**2 * y1**2
        + 2 * x2**2 * y2**2
        + 4 * x1 * x2 * y1 * y2
    )
    return float(total / (8 * x**2 * y**2))


# --- JSON -----------------------------------------------------------------

def spec_to_dict(spec: ModelSpec) -> dict:
    def coeff(c: CoefficientExpr):
        out = {"constant": c.constant}
        if c.weight is not None:
            out["weight"] = {"bank": c.weight[0], "index": c.weight[1]}
        if c.input is not None:
            out["input"] = c.input
        return out

    ro = spec.observable.readout
    if isinstance(ro, Segments):
        ro_d = {"type": "segments", "thresholds": list(ro.thresholds)}
    else:
        ro_d = {"type": "basis_probabilities", "classes": ro.classes}
    return {
        "name": spec.name,
        "dimension": spec.d,
        "input_dim": spec.k,
        "num_s": spec.num_s,
        "num_w": spec.num_w,
        "basis": spec.basis_kind,
        "layers": [
            {
                "kind": layer.kind,
                "terms": [
                    {**coeff(t.coeff), "combo": [[i, c] for i, c in t.combo]}
                    for t in layer.terms
                ],
            }
            for layer in spec.layers
        ],
        "observable": {
            "combo": [[i, c] for i, c in spec.observable.combo],
            "readout": ro_d,
        },
    }


def spec_from_dict(data: dict) -> ModelSpec:
    try:
        layers = []
        for layer in data["layers"]:
            terms = []
            for t in layer["terms"]:
                w = t.get("weight")
                terms.append(
                    LayerTerm(
                        CoefficientExpr(
                            float(t.get("constant", 1.0)),
                            None if w is None else (w["bank"], w["index"]),
                            t.get("input"),
                        ),
                        GeneratorCombo(t["combo"]),
                    )
                )
            layers.append(Layer(layer["kind"], terms))
        obs = data["observable"]
        ro = obs["readout"]
        if ro["type"] == "segments":
            readout_ = Segments(ro["thresholds"])
        elif ro["type"] == "basis_probabilities":
            readout_ = BasisProbabilities(int(ro["classes"]))
        else:
            raise SpecError(f"unknown readout type {ro['type']!r}")
        return ModelSpec(
            d=int(data["dimension"]),
            k=int(data["input_dim"]),
            num_s=int(data["num_s"]),
            num_w=int(data["num_w"]),
            layers=layers,
            observable=Observable(GeneratorCombo(obs["combo"]), readout_),
            basis_kind=data.get("basis", "generalized"),
            name=data.get("name", ""),
        )
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed model spec: {exc!r}") from exc


def load_spec(path: Union[str, Path]) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def save_spec(spec: ModelSpec, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")
