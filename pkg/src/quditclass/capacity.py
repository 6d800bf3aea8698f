"""Empirical lossless-memory (LM) dimension of a binary classifier.

For growing ``n`` we draw random patterns of ``n`` points with coordinates
uniform on ``[-0.5, 0.5]`` and ask whether multi-start training realizes every
binary labeling of some pattern with zero training error.  The estimate is the
last ``n`` for which such a pattern was found; it can only under-report the
true LM dimension.

Random streams are keyed by ``(seed, n, pattern)`` for the points,
``(seed, n, pattern, 1)`` for sampled labelings and
``(seed, n, pattern, 2, labeling)`` for the training starts, so every claim
in a report can be re-checked in isolation.
"""
from __future__ import annotations

import itertools
import math
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .model import ModelSpec, Segments, SpecError
from .training import FIT_MARGIN, SegmentLoss, TrainConfig, any_restart_fits, restart_rng

__all__ = [
    "LMConfig",
    "LMReport",
    "random_pattern",
    "labelings",
    "shatters",
    "check_pattern",
    "estimate_lm_dimension",
    "pattern_rng",
]

logger = logging.getLogger(__name__)


@dataclass
class LMConfig:
    """Protocol knobs.  The default training starts are drawn from
    ``[-2 pi, 2 pi]`` and fits use the segment loss with ``FIT_MARGIN``.
    """

    k: int
    n_start: Optional[int] = None
    n_max: int = 12
    labeling_budget: int = 50
    exhaustive_threshold: int = 6
    pattern_budget: int = 10
    train: TrainConfig = field(default_factory=lambda: TrainConfig(init_low=-2 * math.pi,
                                                                   init_high=2 * math.pi))
    seed: int = 0
    margin: float = FIT_MARGIN
    threads: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        for name in ("labeling_budget", "pattern_budget", "n_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_start is not None and self.n_start < 1:
            raise ValueError("n_start must be >= 1")

    def start_for(self, spec: ModelSpec) -> int:
        return self.n_start if self.n_start is not None else max(1, min(spec.num_params, 2))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LMReport:
    model: str
    k: int
    num_params: int
    d_lm: int
    per_n: list
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def summary_row(self) -> str:
        return f"{self.model:<14} k={self.k:<3} P={self.num_params:<3} D_LM~={self.d_lm}"


def pattern_rng(seed: int, n: int, pattern: int) -> np.random.Generator:
    return restart_rng(seed, n, pattern)


def random_pattern(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points in ``[-0.5, 0.5]^k`` (shape ``(n, k)``)."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    return rng.uniform(-0.5, 0.5, size=(n, k))


def labelings(n: int, cfg: LMConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """All ``2**n`` labelings for small ``n``; otherwise a distinct random sample."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n <= cfg.exhaustive_threshold:
        return [np.array(bits, dtype=int) for bits in itertools.product((0, 1), repeat=n)]
    budget = min(cfg.labeling_budget, 2**n)
    seen, out = set(), []
    while len(out) < budget:
        lab = rng.integers(0, 2, size=n)
        key = lab.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(lab)
    return out


def _binary_check(spec: ModelSpec):
    ro = spec.observable.readout
    if not isinstance(ro, Segments) or ro.classes != 2:
        raise SpecError("LM dimension needs a binary segment readout")


def _labeling_train_config(cfg: LMConfig, n: int, pattern: int, index: int) -> TrainConfig:
    seed = int(np.random.SeedSequence(cfg.seed, spawn_key=(n, pattern, 2, index)).generate_state(1)[0])
    return replace(cfg.train, seed=seed)


def shatters(spec: ModelSpec, pattern: np.ndarray, cfg: LMConfig,
             rng: np.random.Generator, *, n_key: int | None = None, pattern_key: int = 0) -> bool:
    """True when every labeling from :func:`labelings` is fitted perfectly."""
    _binary_check(spec)
    pattern = np.atleast_2d(pattern)
    n = pattern.shape[0]
    n_key = n if n_key is None else n_key
    loss = SegmentLoss(cfg.margin)
    for i, lab in enumerate(labelings(n, cfg, rng)):
        tc = _labeling_train_config(cfg, n_key, pattern_key, i)
        if not any_restart_fits(spec, (pattern, lab), tc, loss):
            logger.debug("n=%d pattern=%d: labeling %s not realized", n, pattern_key, lab)
            return False
    return True


def check_pattern(spec: ModelSpec, cfg: LMConfig, n: int, pattern_index: int) -> bool:
    """Regenerate pattern ``pattern_index`` at size ``n`` and test it."""
    prng = pattern_rng(cfg.seed, n, pattern_index)
    pts = random_pattern(cfg.k, n, prng)
    lrng = restart_rng(cfg.seed, n, pattern_index, 1)
    return shatters(spec, pts, cfg, lrng, n_key=n, pattern_key=pattern_index)


def _check_job(args):
    spec, cfg, n, p = args
    return check_pattern(spec, cfg, n, p)


def estimate_lm_dimension(spec: ModelSpec, cfg: LMConfig) -> LMReport:
    """Raise ``n`` until no tested pattern is shattered (or ``n_max``)."""
    _binary_check(spec)
    if cfg.k != spec.k:
        raise SpecError(f"config k={cfg.k} does not match the model's k={spec.k}")
    threads = cfg.threads or int(os.environ.get("QUDITCLASS_THREADS", "1"))
    per_n = []
    d_lm = 0
    n = cfg.start_for(spec)
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        while n <= cfg.n_max:
            witness, tried = None, 0
            if pool is None:
                for p in range(cfg.pattern_budget):
                    tried += 1
                    if check_pattern(spec, cfg, n, p):
                        witness = p
                        break
            else:
                # patterns in order; the first success (lowest index) is the witness
                results = list(pool.map(_check_job, [(spec, cfg, n, p) for p in range(cfg.pattern_budget)]))
                hits = [p for p, ok in enumerate(results) if ok]
                witness = hits[0] if hits else None
                tried = cfg.pattern_budget if witness is None else witness + 1
            ok = witness is not None
            per_n.append({"n": n, "patterns_tried": tried, "shattered": ok,
                          "witness_pattern_seed": witness})
            logger.info("%s: n=%d shattered=%s (patterns tried %d)", spec.name, n, ok, tried)
            if not ok:
                break
            d_lm = n
            n += 1
    finally:
        if pool is not None:
            pool.shutdown()
    return LMReport(spec.name, spec.k, spec.num_params, d_lm, per_n, cfg.to_dict())
