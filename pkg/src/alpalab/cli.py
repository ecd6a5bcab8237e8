"""Command-line entry point: ``alpalab <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import gradcheck
from .config import ConfigError, load_config
from .datagen import LongTailProfile, generate, save_csv, stratified_split
from .losses import LossSpec, Variant
from .pade import ALPA_COEFFICIENTS, pade_from_taylor, taylor_neg_bce, taylor_pos_bce
from .trainer import cross_validate, evaluate_model, save_checkpoint, train

TARGETS = {"bce-pos": taylor_pos_bce, "bce-neg": taylor_neg_bce}
GRAD_TOL = 1e-6


def _dump(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _out_dir(args, cfg, default: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.out_dir is not None:
        return cfg.out_dir
    return Path(default)


# --- pade derive ------------------------------------------------------------------


def cmd_pade_derive(args) -> int:
    order = args.order if args.order is not None else args.m + args.n
    series = TARGETS[args.target](order)
    approx = pade_from_taylor(series, args.m, args.n)
    out = {"target": args.target, "m": args.m, "n": args.n,
           "series": list(series.coeffs), **approx.to_dict()}
    if args.m == 1 and args.n == 1:
        c = ALPA_COEFFICIENTS.as_dict()
        if args.target == "bce-pos":
            canonical = {k: c[k] for k in ("a0", "a1", "b1")}
            solved = {"a0": approx.num_coeffs[0], "a1": approx.num_coeffs[1],
                      "b1": approx.den_coeffs[1]}
        else:
            canonical = {k: c[k] for k in ("c0", "c1", "d1")}
            solved = {"c0": approx.num_coeffs[0], "c1": approx.num_coeffs[1],
                      "d1": approx.den_coeffs[1]}
        out["canonical"] = canonical
        out["matches_canonical"] = solved == canonical
        if solved != canonical:
            out["note"] = ("order matching of the second-order series does not reproduce the "
                           "published constants; the loss uses the published constants")
    print(json.dumps(out, indent=2))
    return 0


# --- grad-curve / gradcheck -------------------------------------------------------------


def cmd_grad_curve(args) -> int:
    out = Path(args.out or "grad_curves.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    curves = gradcheck.emit_grad_curves(out, args.grid, gradcheck.default_curve_specs(args.gamma_neg))
    alpa = next(c for c in curves if c.label == "alpa")
    print(f"wrote {args.grid} rows to {out}; alpa peak at p={alpa.argmax():.4f}")
    return 0


def gradient_presets() -> list[LossSpec]:
    return [
        LossSpec.bce(),
        LossSpec.ce(),
        LossSpec.focal(gamma=0.5),
        LossSpec.focal(gamma=2.0),
        LossSpec.asl(gamma_pos=0.0, gamma_neg=4.0, margin=0.0),
        LossSpec.asl(gamma_pos=0.0, gamma_neg=4.0, margin=0.01),
        LossSpec.cb(cb_beta=0.99),
        LossSpec.alpa(Variant.V1),
        LossSpec.alpa(Variant.V2),
        LossSpec.alpa(Variant.V3),
    ]


def cmd_gradcheck(args) -> int:
    worst_all = 0.0
    rows = []
    for spec in gradient_presets():
        worst = gradcheck.check_term_gradient(spec, h=args.h)
        worst_all = max(worst_all, worst)
        rows.append({"loss": spec.to_dict(), "max_relative_error": worst})
        print(f"{spec.label:<10} {json.dumps(spec.to_dict())}  max rel err {worst:.3e}")
    ok = worst_all <= GRAD_TOL
    print(f"{'PASS' if ok else 'FAIL'}: worst relative error {worst_all:.3e} (tolerance {GRAD_TOL:g})")
    if args.out:
        _dump({"h": args.h, "tolerance": GRAD_TOL, "results": rows}, Path(args.out))
    return 0 if ok else 1


# --- gen-data --------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if cfg.profile is None:
            raise ConfigError("gen-data needs a [dataset.generate] section")
        profile = cfg.profile
    else:
        profile = LongTailProfile(num_classes=args.classes, n_max=args.n_max,
                                  imbalance_ratio=args.ratio, decay=args.decay, dims=args.dims,
                                  cluster_separation=args.separation,
                                  noise_sigma=args.sigma, seed=0)
    if args.seed is not None:
        profile = replace(profile, seed=args.seed)
    ds = generate(profile)
    out = Path(args.out or "dataset.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out)
    print(f"wrote {len(ds)} samples, counts {ds.class_counts.tolist()} to {out}")
    return 0


# --- train ---------------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if cfg.loss is None:
        raise ConfigError(f"{cfg.path}: missing key 'loss'")
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    out = _out_dir(args, cfg, "runs/train")
    ds = cfg.load_dataset()
    train_ds, test_ds = stratified_split(ds, cfg.train_fraction, seed)
    tc = cfg.train_config(cfg.loss, seed)
    hist = train(train_ds, tc, val=test_ds)
    rep = evaluate_model(hist.model, test_ds)

    save_checkpoint(hist.model, tc, out / "checkpoint.json")
    _dump(hist.to_dict(), out / "history.json")
    _dump(rep.to_dict(cfg.loss.to_dict(), seed), out / "metrics.json")
    print(f"balanced accuracy {rep.balanced_accuracy:.4f}, overall {rep.overall_accuracy:.4f}")

    if args.cv:
        cv = cross_validate(train_ds, tc, k=args.cv, seed=seed)
        folds = [f.to_dict(cfg.loss.to_dict(), seed) for f in cv.folds]
        _dump({"k": args.cv, "folds": folds,
               "mean_balanced_accuracy": cv.mean_balanced_accuracy,
               "mean_overall_accuracy": cv.mean_overall_accuracy}, out / "cv.json")
        print(f"{args.cv}-fold CV mean balanced accuracy {cv.mean_balanced_accuracy:.4f}")
    print(f"artifacts in {out}")
    return 0


# --- bench ---------------------------------------------------------------------------------


def run_benchmark(cfg) -> dict:
    """Train every loss on identical per-seed splits; returns the JSON-ready result."""
    if len(cfg.losses) < 2:
        raise ConfigError(f"{cfg.path}: benchmark needs >= 2 losses")
    ds = cfg.load_dataset()
    entries = [{"label": s.label, "loss_spec": s.to_dict(), "reports": []} for s in cfg.losses]
    train_counts = None
    for seed in cfg.seeds:
        train_ds, test_ds = stratified_split(ds, cfg.train_fraction, seed)
        train_counts = train_ds.class_counts.tolist()
        for spec, entry in zip(cfg.losses, entries):
            hist = train(train_ds, cfg.train_config(spec, seed))
            entry["reports"].append(evaluate_model(hist.model, test_ds))
    for entry in entries:
        reps = entry["reports"]
        entry["median_balanced_accuracy"] = statistics.median(r.balanced_accuracy for r in reps)
        entry["median_worst3_recall"] = statistics.median(r.worst_k_recall(3) for r in reps)
        entry["mean_per_class_recall"] = np.mean([r.per_class_recall for r in reps], axis=0).tolist()
        entry["mean_per_class_f1"] = np.mean([r.per_class_f1 for r in reps], axis=0).tolist()
        entry["reports"] = [r.to_dict(entry["loss_spec"], s) for r, s in zip(reps, cfg.seeds)]
    return {
        "schema_version": 1,
        "dataset": cfg.dataset_summary(),
        "dataset_counts": ds.class_counts.tolist(),
        "train_counts": train_counts,
        "training": cfg.training,
        "seeds": cfg.seeds,
        "losses": entries,
    }


def format_table(result: dict) -> str:
    """Per-class recall (%) and F1 per loss, averaged over seeds, plus median balanced accuracy."""
    entries = result["losses"]
    head = f"{'class':<9}{'n_train':>8} | " + " | ".join(f"{e['label']:^15}" for e in entries)
    sub = f"{'':<9}{'':>8} | " + " | ".join(f"{'Acc':>7} {'F1':>7}" for _ in entries)
    lines = [head, sub, "-" * len(head)]
    for k, n in enumerate(result["train_counts"]):
        cells = " | ".join(
            f"{100 * e['mean_per_class_recall'][k]:>7.2f} {e['mean_per_class_f1'][k]:>7.2f}"
            for e in entries)
        lines.append(f"{k:<9}{n:>8} | {cells}")
    lines.append("-" * len(head))
    lines.append(f"{'Balanced Accuracy':<17} | " + " | ".join(
        f"{'':>7} {e['median_balanced_accuracy']:>7.4f}" for e in entries))
    lines.append(f"{'Worst-3 recall':<17} | " + " | ".join(
        f"{'':>7} {e['median_worst3_recall']:>7.4f}" for e in entries))
    return "\n".join(lines)


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    result = run_benchmark(cfg)
    out = _out_dir(args, cfg, "runs/bench")
    _dump(result, out / "bench.json")
    print(format_table(result))
    print(f"wrote {out / 'bench.json'}")
    return 0


# --- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed(s)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None, help="TOML run configuration")

    parser = argparse.ArgumentParser(prog="alpalab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    pade = sub.add_parser("pade", help="Padé utilities")
    pade_sub = pade.add_subparsers(dest="pade_command", required=True)
    derive = pade_sub.add_parser("derive", parents=[common],
                                 help="solve an [m/n] approximant of a BCE branch")
    derive.add_argument("--target", choices=sorted(TARGETS), required=True)
    derive.add_argument("--m", type=int, default=1)
    derive.add_argument("--n", type=int, default=1)
    derive.add_argument("--order", type=int, default=None,
                        help="Taylor order (default m + n)")
    derive.set_defaults(func=cmd_pade_derive)

    curve = sub.add_parser("grad-curve", parents=[common], help="negative-branch gradient CSV")
    curve.add_argument("--grid", type=int, default=gradcheck.DEFAULT_GRID[2])
    curve.add_argument("--gamma-neg", type=float, default=4.0)
    curve.set_defaults(func=cmd_grad_curve)

    gen = sub.add_parser("gen-data", parents=[common], help="write a synthetic long-tailed CSV")
    gen.add_argument("--classes", type=int, default=10)
    gen.add_argument("--n-max", type=int, default=2000)
    gen.add_argument("--ratio", type=float, default=50.0)
    gen.add_argument("--decay", choices=["exponential", "step"], default="exponential")
    gen.add_argument("--dims", type=int, default=16)
    gen.add_argument("--separation", type=float, default=3.0)
    gen.add_argument("--sigma", type=float, default=1.0)
    gen.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser("train", parents=[common], help="train one loss and evaluate")
    tr.add_argument("config_path", nargs="?", help="same as --config")
    tr.add_argument("--cv", type=int, default=0, help="also run k-fold CV on the training split")
    tr.set_defaults(func=cmd_train)

    bench = sub.add_parser("bench", parents=[common], help="compare losses on identical splits")
    bench.add_argument("config_path", nargs="?", help="same as --config")
    bench.set_defaults(func=cmd_bench)

    gc = sub.add_parser("gradcheck", parents=[common],
                        help="finite-difference check of every loss preset")
    gc.add_argument("--h", type=float, default=1e-5)
    gc.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config_path", None):
        args.config = args.config_path
    if args.command in ("train", "bench") and not args.config:
        parser.error(f"{args.command} needs a config file")
    if args.command == "train" and args.cv == 1:
        parser.error("--cv needs k >= 2")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError, ZeroDivisionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
