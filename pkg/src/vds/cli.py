"""Command-line entry point: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numerical failure. Diagnostics and wall-clock timings go to stderr;
stdout and artifact files are byte-identical across reruns with the same
flags and inputs.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .basis import (DEFAULT_RCOND, check_penrose_lowmem, head_bases,
                    save_bases)
from .bundle import SynthSpec, gen_synthetic, read_bundle, write_bundle
from .cluster import (FULL_VOCABULARY, LABEL_TOKENS_ONLY, TrainConfig,
                      load_module, save_module, train, transform_all)
from .errors import DataError, NumericalError, UsageError
from .knn import knn_predict, sibling_rate
from .logits import (PREDICTABLE_MODES, LogitsMode, class_scores,
                     estimate_flops, predict_all, to_probs)
from .metrics import accuracy, ari, macro_f1
from .report import (format_value, manifest_text, pca_2d, write_metrics_csv,
                     write_scatter_svg)

MODE_CHOICES = [m.value for m in LogitsMode]
SUPPORT_CHOICES = [FULL_VOCABULARY, LABEL_TOKENS_ONLY]


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; remap to the usage code 1."""

    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="vds", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"vds {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="write a synthetic fixture bundle")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--vocab", type=int, default=200)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--train", type=int, default=1000)
    p.add_argument("--test", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--mix", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bases", help="compute semantic bases from a bundle")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rcond", type=float, default=DEFAULT_RCOND)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="zero-shot accuracy / macro-F1 / ARI")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--mode", choices=MODE_CHOICES, default="sim-all")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--use-module", default=None,
                   help="apply a trained module file before scoring")

    p = sub.add_parser("train", help="train the clustering module")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--mode", choices=MODE_CHOICES, default="sim-all")
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--loss-support", choices=SUPPORT_CHOICES,
                   default=FULL_VOCABULARY)
    p.add_argument("--out", required=True)

    p = sub.add_parser("knn", help="exact cosine KNN over the test split")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--k", type=int, action="append", default=None,
                   help="repeatable; defaults to 1 and 16")
    p.add_argument("--use-module", default=None)

    p = sub.add_parser("report", help="aggregate CSV + PCA scatter SVG")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--module", action="append", default=None,
                   help="repeatable trained-module files")
    p.add_argument("--k", type=int, action="append", default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("flops", help="logit-computation FLOPs for one query")
    p.add_argument("--mode", choices=MODE_CHOICES, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--vocab", type=int, required=True)
    return parser


def _bundle_and_bases(path):
    bundle = read_bundle(path)
    bases = head_bases(bundle.lm_head)
    return bundle, bases


def _apply_module(bundle, module_path):
    """Transformed train/test representations from a saved module."""
    params, header = load_module(module_path)
    if header["d"] != bundle.d:
        raise UsageError(f"module d={header['d']} does not match bundle "
                         f"d={bundle.d}")
    return (transform_all(params, bundle.train_reps),
            transform_all(params, bundle.test_reps),
            header)


def _eval_stats(bundle, bases, mode, test_reps, tau):
    mode = LogitsMode(mode)
    if mode not in PREDICTABLE_MODES:
        raise UsageError(f"mode {mode.value} has no prediction rule")
    scores = class_scores(test_reps, bundle, bases, mode)
    pred = scores.argmax(axis=1).astype(np.int64)
    conf = float(np.mean([to_probs(row, tau=tau).probs.max()
                          for row in scores]))
    return {
        "accuracy": accuracy(pred, bundle.test_labels),
        "macro_f1": macro_f1(pred, bundle.test_labels, bundle.n_classes),
        "ari": ari(pred, bundle.test_labels),
        "mean_confidence": conf,
    }


def _cmd_synth(args, out):
    spec = SynthSpec(seed=args.seed, d=args.dim, v=args.vocab,
                     n_classes=args.classes, n_train=args.train,
                     n_test=args.test, noise_sigma=args.noise, mix=args.mix)
    bundle = gen_synthetic(spec)
    write_bundle(bundle, args.out)
    out(f"wrote {args.out}")
    out(f"d={bundle.d} v={bundle.v} classes={bundle.n_classes} "
        f"train={bundle.n_train} test={bundle.n_test}")
    return 0


def _cmd_bases(args, out):
    bundle = read_bundle(args.inp)
    bases = head_bases(bundle.lm_head, rcond=args.rcond)
    residuals, ok = check_penrose_lowmem(bundle.lm_head.astype(np.float64),
                                         bases.bases)
    checked = [r for r in residuals if r is not None]
    if not ok:
        raise NumericalError(
            f"pseudoinverse check failed, max residual {max(checked):.3e}")
    save_bases(bases, args.out)
    out(f"wrote {args.out}")
    out(f"v={bases.v} d={bases.d} rcond={format_value(bases.rcond)} "
        f"max_residual={format_value(max(checked))}")
    return 0


def _cmd_eval(args, out):
    bundle, bases = _bundle_and_bases(args.inp)
    test_reps = bundle.test_reps
    if args.use_module:
        _, test_reps, _ = _apply_module(bundle, args.use_module)
    stats = _eval_stats(bundle, bases, args.mode, test_reps, args.tau)
    for name in ("accuracy", "macro_f1", "ari", "mean_confidence"):
        out(f"{name}={format_value(stats[name])}")
    return 0


def _cmd_train(args, out):
    bundle, bases = _bundle_and_bases(args.inp)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch,
                         seed=args.seed, learning_rate=args.lr,
                         mode=LogitsMode(args.mode), tau=args.tau,
                         loss_support=args.loss_support)
    params, rep = train(bundle, bases, config)
    save_module(params, args.out, config.mode, config.tau, config.seed,
                config.epochs)
    out(f"wrote {args.out}")
    out(f"mode={rep.mode}")
    out(f"first_epoch_loss={format_value(rep.epoch_losses[0])}")
    out(f"final_epoch_loss={format_value(rep.epoch_losses[-1])}")
    out(f"train_accuracy={format_value(rep.final_train_accuracy)}")
    out(f"test_accuracy={format_value(rep.final_test_accuracy)}")
    out(f"param_count={rep.param_count}")
    print(f"wall_time_s={rep.wall_time_s:.3f}", file=sys.stderr)
    return 0


def _cmd_knn(args, out):
    bundle, _ = _bundle_and_bases(args.inp)
    train_reps, test_reps = bundle.train_reps, bundle.test_reps
    if args.use_module:
        train_reps, test_reps, _ = _apply_module(bundle, args.use_module)
    ks = args.k or [1, 16]
    for k in ks:
        pred = knn_predict(train_reps, bundle.train_labels, test_reps, k=k)
        acc = accuracy(pred, bundle.test_labels)
        f1 = macro_f1(pred, bundle.test_labels, bundle.n_classes)
        sib = sibling_rate(test_reps, bundle.test_labels, k=k)
        out(f"k={k} accuracy={format_value(acc)} "
            f"macro_f1={format_value(f1)} "
            f"sibling_rate={format_value(sib)}")
    return 0


def _report_rows(bundle, bases, ks, modules):
    rows = []
    for mode in PREDICTABLE_MODES:
        stats = _eval_stats(bundle, bases, mode, bundle.test_reps, 1.0)
        rows.append(("baseline", mode.value, None, "accuracy",
                     stats["accuracy"]))
    base = _eval_stats(bundle, bases, LogitsMode.SIM_ALL, bundle.test_reps, 1.0)
    rows.append(("baseline", "sim-all", None, "macro_f1", base["macro_f1"]))
    rows.append(("baseline", "sim-all", None, "ari", base["ari"]))
    for k in ks:
        pred = knn_predict(bundle.train_reps, bundle.train_labels,
                           bundle.test_reps, k=k)
        rows.append(("knn-pre", "", k, "accuracy",
                     accuracy(pred, bundle.test_labels)))
        rows.append(("knn-pre", "", k, "sibling_rate",
                     sibling_rate(bundle.test_reps, bundle.test_labels, k=k)))
    panels = [("before", *_pca_panel(bundle.test_reps, bundle.test_labels))]
    for path in modules:
        tr, te, header = _apply_module(bundle, path)
        mode = LogitsMode(header["mode"])
        eval_mode = LogitsMode.SIM_ALL if mode is LogitsMode.SIM_GT else mode
        stats = _eval_stats(bundle, bases, eval_mode, te, 1.0)
        rows.append(("post", mode.value, None, "accuracy", stats["accuracy"]))
        rows.append(("post", mode.value, None, "macro_f1", stats["macro_f1"]))
        rows.append(("post", mode.value, None, "ari", stats["ari"]))
        for k in ks:
            pred = knn_predict(tr, bundle.train_labels, te, k=k)
            rows.append(("knn-post", mode.value, k, "accuracy",
                         accuracy(pred, bundle.test_labels)))
            rows.append(("knn-post", mode.value, k, "sibling_rate",
                         sibling_rate(te, bundle.test_labels, k=k)))
        panels.append((f"after {mode.value}",
                       *_pca_panel(te, bundle.test_labels)))
    return rows, panels


def _pca_panel(reps, labels):
    points, _ = pca_2d(reps, seed=0)
    return points, labels


def _cmd_report(args, out):
    bundle, bases = _bundle_and_bases(args.inp)
    modules = args.module or []
    ks = args.k or [1, 16]
    os.makedirs(args.out_dir, exist_ok=True)
    rows, panels = _report_rows(bundle, bases, ks, modules)

    flags = [("in", args.inp), ("k", ",".join(str(k) for k in ks)),
             ("module", ",".join(modules))]
    inputs = [("bundle", args.inp)] + [(f"module{i}", m)
                                       for i, m in enumerate(modules)]
    manifest = manifest_text("report", flags, inputs, __version__)
    # the manifest rides inside both artifacts so no report is orphaned
    manifest_rows = [("manifest", "", None, line.split("=", 1)[0],
                      line.split("=", 1)[1])
                     for line in manifest.strip().split("\n")]

    csv_path = os.path.join(args.out_dir, "metrics.csv")
    svg_path = os.path.join(args.out_dir, "scatter.svg")
    man_path = os.path.join(args.out_dir, "manifest.txt")
    write_metrics_csv(csv_path, rows + manifest_rows)
    svg = write_scatter_svg(svg_path, panels)
    with open(svg_path, "wb") as f:
        comment = "<!--\n" + manifest + "-->\n"
        f.write(comment.encode("utf-8") + svg)
    with open(man_path, "wb") as f:
        f.write(manifest.encode("utf-8"))
    out(f"wrote {csv_path}")
    out(f"wrote {svg_path}")
    out(f"wrote {man_path}")
    return 0


def _cmd_flops(args, out):
    out(str(estimate_flops(LogitsMode(args.mode), args.dim, args.vocab)))
    return 0


_DISPATCH = {
    "synth": _cmd_synth,
    "bases": _cmd_bases,
    "eval": _cmd_eval,
    "train": _cmd_train,
    "knn": _cmd_knn,
    "report": _cmd_report,
    "flops": _cmd_flops,
}


def main(argv=None):
    t0 = time.perf_counter()
    try:
        args = _build_parser().parse_args(argv)
        code = _DISPATCH[args.subcommand](args, print)
    except UsageError as exc:
        print(f"vds: usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"vds: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"vds: numerical error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    except np.linalg.LinAlgError as exc:
        print(f"vds: numerical error: {exc}", file=sys.stderr)
        return 3
    except MemoryError as exc:
        print(f"vds: numerical error: out of memory: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"vds: data error: {exc}", file=sys.stderr)
        return 2
    print(f"elapsed_s={time.perf_counter() - t0:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
