"""`audit` command line: corpus generation, fingerprinting, comparison,
degradation, detector training, adversarial evaluation and t-SNE embedding.

Every command writes a `run.json` with its fully resolved configuration;
re-running with `--config run.json` reproduces the CSV/SVG artifacts
byte-identically. Exit codes: 0 ok, 1 usage, 2 I/O, 3 data, 4 numeric.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import rng
from .attack import AttackConfig, attack_report_csv, evaluate_attack
from .corpus import (SynthSpec, generate_multi_corpus, load_samples,
                     read_manifest, write_manifest, ManifestEntry)
from .embed import (EmbedConfig, embedding_to_csv, kl_history_to_csv, tsne_fit)
from .errors import AuditError, UsageError
from .fingerprint import (fingerprint_dataset, load_fingerprint,
                          pairwise_spread, save_fingerprint, similarity_matrix,
                          similarity_to_csv)
from .learn import (Metrics, Sample, TrainConfig, accuracy, forward_batch,
                    history_to_csv, load_checkpoint, roc_auc, save_checkpoint,
                    train)
from .raster import (CentralCrop, Resize, jpeg_like_compress, load_image,
                     pipeline_from_descriptor, save_image, to_grayscale)
from .svgplot import render_heatmap, render_line_chart, render_scatter


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="audit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--config", default=None,
                       help="JSON file of defaults (a prior run.json); flags override")

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--preset", choices=["six", "pair"], default="six",
                   help="six: 5 real + 1 upsampled-fake datasets; pair: real vs fake")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--count", type=int, default=120, help="images per dataset")
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--factor", type=int, default=2)

    p = sub.add_parser("fingerprint", help="per-dataset spectral fingerprints")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--pipeline", choices=["crop", "resize"], default="crop")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--padding", type=float, default=0.0)
    p.add_argument("--no-normalize", action="store_true")

    p = sub.add_parser("compare", help="similarity matrix from fingerprint CSVs")
    common(p)
    p.add_argument("fingerprints", nargs="*", help="fingerprint CSV paths (>= 2)")

    p = sub.add_parser("degrade", help="JPEG-like compression of a corpus")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--quality", type=int, default=30)

    p = sub.add_parser("train", help="train the binary detector")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", choices=["profile", "pixels"], default="profile")
    p.add_argument("--pipeline", choices=["crop", "resize"], default="crop")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--padding", type=float, default=0.0)
    p.add_argument("--arch", choices=["logistic", "mlp"], default="logistic")
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=192)
    p.add_argument("--lr-max", type=float, default=2e-3)
    p.add_argument("--val-frac", type=float, default=0.3)

    p = sub.add_parser("attack", help="PGD attack against a trained detector")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--epsilon", type=float, default=1.0 / 255.0)
    p.add_argument("--alpha", type=float, default=1.0 / 255.0)
    p.add_argument("--steps", type=int, default=1)

    p = sub.add_parser("embed", help="t-SNE embedding of dataset profiles")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--per-dataset", type=int, default=200)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--learning-rate", type=float, default=200.0)
    p.add_argument("--pipeline", choices=["crop", "resize"], default="crop")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--padding", type=float, default=0.0)
    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Use a prior run.json as defaults; explicitly passed flags win."""
    if not args.config:
        return args
    with open(args.config) as f:
        doc = json.load(f)
    if doc.get("command") != args.command:
        raise UsageError(
            f"config is for command {doc.get('command')!r}, not {args.command!r}")
    explicit = {a.split("=")[0].lstrip("-").replace("-", "_")
                for a in argv if a.startswith("--")}
    for key, value in doc.get("args", {}).items():
        if key not in explicit and hasattr(args, key):
            setattr(args, key, value)
    return args


def _write_run_json(args: argparse.Namespace) -> None:
    doc = {
        "command": args.command,
        "args": {k: v for k, v in vars(args).items()
                 if k not in ("command", "config")},
    }
    with open(os.path.join(args.out_dir, "run.json"), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _pipeline_of(args):
    if args.pipeline == "crop":
        return CentralCrop(args.size)
    return Resize(args.size, args.size)


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.preset == "six":
        specs = {}
        for k, name in enumerate(["real_a", "real_b", "real_c", "real_d", "real_e"]):
            specs[name] = SynthSpec("real1f", args.size, args.count,
                                    rng.derive_seed(args.seed, k), args.slope)
        specs["fake_up"] = SynthSpec("fake_upsample", args.size, args.count,
                                     rng.derive_seed(args.seed, 5), args.slope,
                                     factor=args.factor)
    else:
        specs = {
            "real": SynthSpec("real1f", args.size, args.count,
                              rng.derive_seed(args.seed, 0), args.slope),
            "fake_up": SynthSpec("fake_upsample", args.size, args.count,
                                 rng.derive_seed(args.seed, 1), args.slope,
                                 factor=args.factor),
        }
    manifest = generate_multi_corpus(specs, args.out_dir)
    print(manifest)
    return 0


def cmd_fingerprint(args) -> int:
    entries = read_manifest(args.manifest)
    pipe = _pipeline_of(args)
    normalize = not args.no_normalize
    by_dataset: dict[str, list] = {}
    for e in entries:
        by_dataset.setdefault(e.dataset, []).append(e)
    fps = []
    for name, group in by_dataset.items():
        images = ((load_image(e.path), e.bbox) for e in group)
        fp = fingerprint_dataset(images, args.padding, pipe, normalize, name)
        fps.append(fp)
        save_fingerprint(os.path.join(args.out_dir, f"{name}_fingerprint.csv"), fp)
    chart = render_line_chart([(fp.name, fp.mean) for fp in fps],
                              title="dataset mean spectral profiles")
    _write(os.path.join(args.out_dir, "fingerprints.svg"), chart)
    if len(fps) >= 2:
        print(f"pairwise_spread={pairwise_spread(fps):.9g}")
    return 0


def cmd_compare(args) -> int:
    if len(args.fingerprints) < 2:
        raise UsageError("compare needs at least 2 fingerprint CSVs")
    fps = [load_fingerprint(p) for p in args.fingerprints]
    sm = similarity_matrix(fps)
    _write(os.path.join(args.out_dir, "similarity.csv"), similarity_to_csv(sm))
    with open(os.path.join(args.out_dir, "similarity.json"), "w") as f:
        json.dump({"names": list(sm.names), "max_d2": sm.max_d2},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    _write(os.path.join(args.out_dir, "similarity.svg"),
           render_heatmap(sm.names, sm.values, title="dataset similarity"))
    return 0


def cmd_degrade(args) -> int:
    entries = read_manifest(args.manifest)
    out_entries = []
    for e in entries:
        img = to_grayscale(load_image(e.path))
        degraded = jpeg_like_compress(img, args.quality)
        stem = os.path.splitext(os.path.basename(e.path))[0]
        path = os.path.join(args.out_dir, f"{stem}_q{args.quality}.pgm")
        save_image(path, degraded)
        out_entries.append(ManifestEntry(path, e.label, e.dataset, e.bbox))
    manifest = os.path.join(args.out_dir, "manifest.csv")
    write_manifest(manifest, out_entries)
    print(manifest)
    return 0


def _split(X, y, val_frac: float, seed: int):
    n = len(y)
    perm = np.random.default_rng(seed).permutation(n)
    n_val = max(1, int(round(val_frac * n)))
    val, tr = perm[:n_val], perm[n_val:]
    return (X[tr], y[tr]), (X[val], y[val])


def cmd_train(args) -> int:
    entries = read_manifest(args.manifest)
    pipe = _pipeline_of(args)
    X, y, _ = load_samples(entries, args.padding, pipe, features=args.features)
    (Xtr, ytr), (Xva, yva) = _split(X, y, args.val_frac, args.seed)
    cfg = TrainConfig(lr_max=args.lr_max, batch_size=args.batch_size,
                      epochs=args.epochs, seed=args.seed)
    model, history = train((Xtr, ytr), (Xva, yva), args.arch, cfg,
                           h=args.hidden if args.arch == "mlp" else 0)
    feature_cfg = {
        "features": args.features,
        "pipeline": pipe.descriptor(),
        "padding": args.padding,
        "normalize": True,
    }
    save_checkpoint(os.path.join(args.out_dir, "checkpoint.json"), model,
                    extra={"feature_config": feature_cfg, "seed": args.seed})
    _write(os.path.join(args.out_dir, "history.csv"), history_to_csv(history))
    scores = forward_batch(model, Xva)
    metrics = {"val_acc": accuracy(scores, yva), "val_auc": roc_auc(scores, yva)}
    with open(os.path.join(args.out_dir, "metrics.json"), "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"val_acc={metrics['val_acc']:.9g} val_auc={metrics['val_auc']:.9g}")
    return 0


def _samples_for_checkpoint(doc: dict, manifest: str, args):
    fc = doc["feature_config"]
    pipe = pipeline_from_descriptor(fc["pipeline"])
    entries = read_manifest(manifest)
    X, y, tags = load_samples(entries, fc["padding"], pipe,
                              features=fc["features"],
                              normalize=fc.get("normalize", True))
    return [Sample(x, int(lbl)) for x, lbl in zip(X, y)], tags


def cmd_attack(args) -> int:
    model, doc = load_checkpoint(args.checkpoint)
    samples, _ = _samples_for_checkpoint(doc, args.manifest, args)
    lo = min(float(np.min([s.features.min() for s in samples])), 0.0)
    hi = max(float(np.max([s.features.max() for s in samples])), 1.0)
    cfg = AttackConfig(epsilon=args.epsilon, step_size=args.alpha,
                       steps=args.steps, clamp_lo=lo, clamp_hi=hi)
    clean, adv = evaluate_attack(model, samples, cfg)
    _write(os.path.join(args.out_dir, "attack_report.csv"),
           attack_report_csv(model, samples, cfg))
    metrics = {"clean_acc": clean.acc, "clean_auc": clean.auc,
               "adv_acc": adv.acc, "adv_auc": adv.auc,
               "epsilon": cfg.epsilon, "alpha": cfg.step_size,
               "steps": cfg.steps}
    with open(os.path.join(args.out_dir, "attack_metrics.json"), "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"clean_acc={clean.acc:.9g} adv_acc={adv.acc:.9g} "
          f"clean_auc={clean.auc:.9g} adv_auc={adv.auc:.9g}")
    return 0


def cmd_embed(args) -> int:
    entries = read_manifest(args.manifest)
    per_ds: dict[str, int] = {}
    kept = []
    for e in entries:
        if per_ds.get(e.dataset, 0) < args.per_dataset:
            per_ds[e.dataset] = per_ds.get(e.dataset, 0) + 1
            kept.append(e)
    pipe = _pipeline_of(args)
    X, y, tags = load_samples(kept, args.padding, pipe, features="profile")
    cfg = EmbedConfig(perplexity=args.perplexity, iterations=args.iterations,
                      learning_rate=args.learning_rate, seed=args.seed)
    result = tsne_fit(X, tags, cfg)
    _write(os.path.join(args.out_dir, "embedding.csv"),
           embedding_to_csv(result, point_labels=y))
    _write(os.path.join(args.out_dir, "kl_history.csv"),
           kl_history_to_csv(result))
    points = [(cx, cy, tag) for (cx, cy), tag in zip(result.coords, tags)]
    _write(os.path.join(args.out_dir, "embedding.svg"),
           render_scatter(points, title="dataset t-SNE embedding"))
    print(f"final_kl={result.kl_history[-1]:.9g}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "fingerprint": cmd_fingerprint,
    "compare": cmd_compare,
    "degrade": cmd_degrade,
    "train": cmd_train,
    "attack": cmd_attack,
    "embed": cmd_embed,
}


def run(argv: list[str]) -> int:
    args = _build_parser().parse_args(argv)
    args = _apply_config(args, argv)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_run_json(args)
    return _COMMANDS[args.command](args)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except AuditError as e:
        print(f"audit: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"audit: i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
