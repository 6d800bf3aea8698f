"""``quditclass`` command line.

Every command that writes a file also writes ``<out>.manifest.json`` next to
it.  Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import LMConfig, estimate_lm_dimension
from .datasets import (
    DataError,
    Dataset,
    gen_circles,
    gen_moons,
    gen_three_class,
    gen_xor,
    load_csv,
    pca_fit,
    pca_transform,
    save_csv,
    standardize,
    stratified_split,
)
from .model import (
    ModelSpec,
    ParameterVector,
    Segments,
    SpecError,
    classify_values,
    kernel,
    kernel_qubit_model_a_closed_form,
    load_spec,
    readout,
    save_spec,
    spec_to_dict,
)
from .qstate import QuditState, bloch_vector, su2_projection
from .training import (
    CrossEntropy,
    SegmentLoss,
    TrainConfig,
    accuracy,
    default_loss,
    fit_multistart,
    fit_sgd,
)
from .zoo import builtin_model, builtin_names

logger = logging.getLogger("quditclass")


class UsageError(Exception):
    """Bad flags, missing inputs or inconsistent configuration (exit 2)."""


def fmt(v: float) -> str:
    return f"{float(v):#.6g}"


def _dump(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, args, outputs, started: float, seed=None) -> None:
    config = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "config": config,
        "seed": seed if seed is not None else getattr(args, "seed", None),
        "version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_time_s": time.perf_counter() - started,
    }
    _dump(manifest, out.with_name(out.name + ".manifest.json"))


def _model(name: str) -> ModelSpec:
    if name.endswith(".json") or os.path.sep in name:
        path = Path(name)
        if not path.is_file():
            raise UsageError(f"model file not found: {name}")
        try:
            return load_spec(path)
        except (SpecError, json.JSONDecodeError) as exc:
            raise UsageError(f"{name}: {exc}") from exc
    try:
        return builtin_model(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


def _data(path: Path, label_column: str) -> Dataset:
    if not path.is_file():
        raise UsageError(f"data file not found: {path}")
    try:
        return load_csv(path, label_column=label_column)
    except DataError as exc:
        raise UsageError(str(exc)) from exc


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return a, b


def _check_k(spec: ModelSpec, data: Dataset) -> None:
    if spec.k != data.k:
        raise UsageError(f"model {spec.name or '<spec>'} expects k={spec.k} features, data has k={data.k}")


def _load_config(path: Path | None):
    """``TrainConfig`` plus optional loss from a JSON file."""
    if path is None:
        return TrainConfig(), None
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        loss_d = raw.pop("loss", None)
        cfg = TrainConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    loss = None
    if loss_d is not None:
        kind = loss_d.get("type")
        if kind == "segment":
            loss = SegmentLoss(float(loss_d.get("margin", 0.0)))
        elif kind == "cross_entropy":
            loss = CrossEntropy(float(loss_d.get("epsilon", 1e-12)), bool(loss_d.get("use_softmax", False)))
        else:
            raise UsageError(f"{path}: unknown loss type {kind!r}")
    return cfg, loss


def _params_from_file(spec: ModelSpec, path: Path) -> tuple[ParameterVector, dict]:
    if not path.is_file():
        raise UsageError(f"params file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        s = np.asarray(raw["params"]["s"], dtype=float)
        w = np.asarray(raw["params"]["w"], dtype=float)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"schema error in {path}: {exc!r}") from exc
    if s.size != spec.num_s or w.size != spec.num_w:
        raise UsageError(
            f"parameter length mismatch: file has S={s.size}, W={w.size}; "
            f"model expects S={spec.num_s}, W={spec.num_w}"
        )
    return ParameterVector(s, w), raw


# --- commands -----------------------------------------------------------------

def cmd_gen(args) -> int:
    started = time.perf_counter()
    if args.n < 1:
        raise UsageError("--n must be positive")
    try:
        if args.kind == "xor":
            data = gen_xor(args.n, 0.1 if args.noise is None else args.noise, args.seed)
        elif args.kind == "circles":
            data = gen_circles(args.n, seed=args.seed)
        elif args.kind == "moons":
            data = gen_moons(args.n, 0.1 if args.noise is None else args.noise, args.seed)
        else:
            data = gen_three_class(args.n, 0.05 if args.margin is None else args.margin, args.seed)
    except DataError as exc:
        raise UsageError(str(exc)) from exc
    save_csv(data, args.out)
    print(f"wrote {len(data)} rows to {args.out}")
    _write_manifest(args.out, args, [args.out], started)
    return 0


def _split(data: Dataset, fraction: float, seed: int):
    if not 0 < fraction < 1:
        raise UsageError("--train-fraction must lie in (0, 1)")
    return stratified_split(data, fraction, seed)


def cmd_train(args) -> int:
    started = time.perf_counter()
    spec = _model(args.model)
    data = _data(args.data, args.label_column)
    _check_k(spec, data)
    cfg, loss = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    train, test = _split(data, args.train_fraction, args.split_seed)
    stats = None
    if args.standardize:
        stats, train, test = standardize(train, test)
    loss = default_loss(spec) if loss is None else loss
    fit = fit_sgd if cfg.sgd is not None else fit_multistart
    res = fit(spec, train, cfg, loss)
    test_acc = accuracy(spec, res.best_params, test) if len(test) else float("nan")
    out = res.to_dict()
    out.update(
        model=spec.name,
        model_spec=spec_to_dict(spec),
        data=str(args.data),
        label_column=args.label_column,
        train_fraction=args.train_fraction,
        split_seed=args.split_seed,
        test_accuracy=test_acc,
        train_config=cfg.to_dict(),
        loss=asdict(loss) | {"type": "segment" if isinstance(loss, SegmentLoss) else "cross_entropy"},
        standardize=None if stats is None else {"mean": stats[0].tolist(), "scale": stats[1].tolist()},
    )
    _dump(out, args.out)
    print(f"train accuracy {fmt(res.train_accuracy)}  test accuracy {fmt(test_acc)}  loss {fmt(res.best_loss)}")
    _write_manifest(args.out, args, [args.out], started, cfg.seed)
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    spec = _model(args.model)
    params, raw = _params_from_file(spec, args.params)
    data = _data(args.data, args.label_column)
    _check_k(spec, data)
    if args.split != "all":
        try:
            fraction, seed = raw["train_fraction"], raw["split_seed"]
        except KeyError as exc:
            raise UsageError(f"schema error in {args.params}: no split recorded ({exc!r})") from None
        train, test = _split(data, fraction, seed)
        data = train if args.split == "train" else test
    if len(data) == 0:
        raise UsageError("empty dataset")
    stats = raw.get("standardize")
    if stats is not None:
        try:
            _, data = standardize(data, stats=(stats["mean"], stats["scale"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"schema error in {args.params}: bad standardize block ({exc!r})") from None
    acc = accuracy(spec, params, data)
    print(f"accuracy {fmt(acc)} on {len(data)} rows ({args.split})")
    if args.out is not None:
        _dump({"accuracy": acc, "rows": len(data), "split": args.split}, args.out)
        _write_manifest(args.out, args, [args.out], started)
    return 0


def cmd_lmdim(args) -> int:
    started = time.perf_counter()
    spec = _model(args.model)
    if not (isinstance(spec.observable.readout, Segments) and spec.observable.readout.classes == 2):
        raise UsageError(f"model {spec.name} has no binary segment readout")
    if args.k is not None and args.k != spec.k:
        raise UsageError(f"--k {args.k} does not match the model's k={spec.k}")
    base = LMConfig(spec.k)
    train = base.train
    if args.restarts is not None:
        train.restarts = args.restarts
    cfg = LMConfig(
        k=spec.k,
        n_start=args.n_start,
        n_max=args.n_max,
        labeling_budget=args.labeling_budget,
        pattern_budget=args.pattern_budget,
        exhaustive_threshold=args.exhaustive_threshold,
        train=train,
        seed=args.seed,
        threads=args.threads,
    )
    report = estimate_lm_dimension(spec, cfg)
    print(report.summary_row())
    if args.out is not None:
        _dump(report.to_dict(), args.out)
        _write_manifest(args.out, args, [args.out], started)
    return 0


def _kernel_theta(spec: ModelSpec, s: float) -> ParameterVector:
    return ParameterVector(np.full(spec.num_s, s), np.zeros(spec.num_w))


def cmd_kernel(args) -> int:
    started = time.perf_counter()
    spec = _model(args.model)
    closed = spec.name == "qubit-A"
    result = {}
    if args.sweep:
        if not closed:
            raise UsageError("--sweep compares against the closed form and needs qubit-A")
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        done = 0
        while done < args.sweep:
            s = rng.uniform(-2, 2)
            x, y = rng.uniform(-1, 1, size=(2, 2))
            if min(np.hypot(*x), np.hypot(*y)) <= 1e-3:
                continue
            th = _kernel_theta(spec, s)
            worst = max(worst, abs(kernel(spec, th, x, y) - kernel_qubit_model_a_closed_form(s, x, y)))
            done += 1
        print(f"sweep {args.sweep}  max |numeric - closed form| {fmt(worst)}")
        result = {"sweep": args.sweep, "max_abs_diff": worst}
    else:
        if args.x is None or args.y is None:
            raise UsageError("--x and --y are required without --sweep")
        if len(args.x) != spec.k or len(args.y) != spec.k:
            raise UsageError(f"model {spec.name} expects k={spec.k} features per point")
        th = _kernel_theta(spec, args.s)
        num = kernel(spec, th, args.x, args.y)
        print(f"numeric     {fmt(num)}")
        result = {"numeric": num}
        if closed:
            try:
                cf = kernel_qubit_model_a_closed_form(args.s, args.x, args.y)
            except ValueError as exc:
                print(f"domain error: {exc}", file=sys.stderr)
                return 1
            print(f"closed form {fmt(cf)}")
            print(f"|diff|      {fmt(abs(num - cf))}")
            result.update(closed_form=cf, abs_diff=abs(num - cf))
    if args.out is not None:
        _dump(result, args.out)
        _write_manifest(args.out, args, [args.out], started)
    return 0


def cmd_grid(args) -> int:
    started = time.perf_counter()
    spec = _model(args.model)
    params, _ = _params_from_file(spec, args.params)
    rows = []
    if args.bloch:
        if args.data is None:
            raise UsageError("--bloch needs --data")
        data = _data(args.data, args.label_column)
        _check_k(spec, data)
        if spec.d == 2:
            header = ["b1", "b2", "b3", "label"]
        elif spec.d == 3:
            header = ["Lx", "Ly", "Lz", "label"]
        else:
            raise UsageError("--bloch supports d = 2 and d = 3 only")
        states = spec.compiled.run(np.atleast_2d(params.flat()), data.x)[0]
        for amp, lab in zip(states, data.labels):
            psi = QuditState(amp)
            coords = bloch_vector(psi, spec.basis) if spec.d == 2 else su2_projection(psi)
            rows.append([*map(float, coords), int(lab)])
    else:
        if spec.k != 2:
            raise UsageError(f"grid mode needs a k = 2 model, {spec.name} has k={spec.k}")
        if args.resolution < 2:
            raise UsageError("--resolution must be >= 2")
        header = ["x1", "x2", "expectation" if isinstance(spec.observable.readout, Segments) else "p_max", "class"]
        g1 = np.linspace(*args.xrange, args.resolution)
        g2 = np.linspace(*args.yrange, args.resolution)
        pts = np.array([(a, b) for a in g1 for b in g2])
        vals = readout(spec, params, pts)
        labels = classify_values(spec.observable.readout, vals)
        shown = vals if vals.ndim == 1 else vals.max(axis=-1)
        rows = [[float(a), float(b), float(v), int(c)] for (a, b), v, c in zip(pts, shown, labels)]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in r) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    _write_manifest(args.out, args, [args.out], started)
    return 0


def cmd_pca(args) -> int:
    started = time.perf_counter()
    data = _data(args.inp, args.label_column)
    if not 1 <= args.components <= data.k:
        raise UsageError(f"--components {args.components} must lie in [1, k={data.k}]")
    model = pca_fit(data, args.components)
    reduced = pca_transform(model, data)
    save_csv(reduced, args.out)
    model_path = args.out.with_name(args.out.stem + ".pca.json")
    _dump(model.to_dict() | {"label_names": list(data.label_names)}, model_path)
    print(f"wrote {len(reduced)} rows with {reduced.k} components to {args.out}")
    _write_manifest(args.out, args, [args.out, model_path], started)
    return 0


def cmd_zoo(args) -> int:
    started = time.perf_counter()
    for name in builtin_names():
        spec = builtin_model(name)
        print(f"{name:<14} d={spec.d}  k={spec.k:<2} P={spec.num_params}")
    if args.export is not None:
        args.export.mkdir(parents=True, exist_ok=True)
        outs = []
        for name in builtin_names():
            path = args.export / f"{name}.json"
            save_spec(builtin_model(name), path)
            outs.append(path)
        _write_manifest(args.export / "zoo", args, outs, started)
    return 0


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quditclass", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap for LM estimation (default: QUDITCLASS_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp, required=True):
        sp.add_argument("--data", type=Path, required=required)
        sp.add_argument("--label-column", default="label")

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("kind", choices=["xor", "circles", "moons", "three-class"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--noise", type=float)
    g.add_argument("--margin", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="fit a model on a stratified split")
    t.add_argument("--model", required=True)
    data_flags(t)
    t.add_argument("--train-fraction", type=float, required=True)
    t.add_argument("--split-seed", type=int, default=0)
    t.add_argument("--config", type=Path)
    t.add_argument("--seed", type=int, help="overrides the config seed")
    t.add_argument("--standardize", action="store_true",
                   help="z-score features with train-split statistics (stored for eval)")
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="accuracy of stored parameters")
    e.add_argument("--model", required=True)
    e.add_argument("--params", type=Path, required=True)
    data_flags(e)
    e.add_argument("--split", choices=["all", "train", "test"], default="all")
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_eval)

    lm = sub.add_parser("lmdim", help="estimate the LM dimension")
    lm.add_argument("--model", required=True)
    lm.add_argument("--k", type=int)
    lm.add_argument("--n-start", type=int)
    lm.add_argument("--n-max", type=int, default=12)
    lm.add_argument("--labeling-budget", type=int, default=50)
    lm.add_argument("--pattern-budget", type=int, default=10)
    lm.add_argument("--exhaustive-threshold", type=int, default=6)
    lm.add_argument("--restarts", type=int)
    lm.add_argument("--seed", type=int, default=0)
    lm.add_argument("--out", type=Path)
    lm.set_defaults(func=cmd_lmdim)

    k = sub.add_parser("kernel", help="feature-map kernel, numeric and closed form")
    k.add_argument("--model", default="qubit-A")
    k.add_argument("--s", type=float, default=1.0, help="value for every encoding weight")
    k.add_argument("--x", type=lambda v: [float(t) for t in v.split(",")])
    k.add_argument("--y", type=lambda v: [float(t) for t in v.split(",")])
    k.add_argument("--sweep", type=int, default=0, help="random comparisons against the closed form")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out", type=Path)
    k.set_defaults(func=cmd_kernel)

    gr = sub.add_parser("grid", help="plot-ready readout grid or Bloch coordinates")
    gr.add_argument("--model", required=True)
    gr.add_argument("--params", type=Path, required=True)
    gr.add_argument("--xrange", type=_pair, default=(-1.0, 1.0))
    gr.add_argument("--yrange", type=_pair, default=(-1.0, 1.0))
    gr.add_argument("--resolution", type=int, default=100)
    gr.add_argument("--bloch", action="store_true")
    data_flags(gr, required=False)
    gr.add_argument("--out", type=Path, required=True)
    gr.set_defaults(func=cmd_grid)

    pc = sub.add_parser("pca", help="standardize and project onto principal axes")
    pc.add_argument("--in", dest="inp", type=Path, required=True)
    pc.add_argument("--label-column", default="label")
    pc.add_argument("--components", type=int, required=True)
    pc.add_argument("--out", type=Path, required=True)
    pc.set_defaults(func=cmd_pca)

    z = sub.add_parser("zoo", help="list built-in models, optionally export them as JSON")
    z.add_argument("--export", type=Path)
    z.set_defaults(func=cmd_zoo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("quditclass: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"quditclass: error: {exc}", file=sys.stderr)
        return 2
    except (SpecError, DataError) as exc:
        print(f"quditclass: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError, ValueError, OSError) as exc:
        print(f"quditclass: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
