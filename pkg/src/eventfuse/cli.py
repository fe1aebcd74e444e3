"""Command-line entry point.

Exit codes: 0 success, 1 I/O or data errors, 2 usage or contract errors.
Diagnostics go to stderr; results go to stdout or to files under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import RunConfig, load_config, override
from .encoders import FileFeatureSource, StubEncoderConfig, StubFeatureSource
from .errors import ContractViolation, DataError, FormatError
from .evalbench import (build_eval_report, build_triplets, collect_pca_inputs, config_hash, cosine_table,
                        load_manifest, load_responses, load_samples, pca_export, read_report,
                        run_ablation, write_ablation_table, write_report, write_similarity_table)
from .evalbench.manifest import write_jsonl
from .evalbench.report import SimilarityTable, fmt, METRICS
from .events import accumulate, parse_event_csv, render_event_frame, simulate_events
from .fusion import (AdaptedModel, load_checkpoint, save_checkpoint, train_stage1, train_stage2_lora,
                     write_loss_history)
from .illumination import RATIO_LADDER, degrade, luminance, read_image, write_image
from .synth import generate_corpus, synthetic_responses


class UsageError(ContractViolation):
    pass


def _positive_float(name):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {text}")
        return v
    return parse


def _nonneg_int(name):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0, got {text}")
        return v
    return parse


# --- config plumbing -----------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="JSON run config; flags below override it")
    p.add_argument("--seed-init", type=int, dest="seeds.init")
    p.add_argument("--seed-shuffle", type=int, dest="seeds.shuffle")
    p.add_argument("--lr", type=float, dest="train.lr")
    p.add_argument("--epochs", type=_nonneg_int("--epochs"), dest="train.epochs")
    p.add_argument("--batch-size", type=int, dest="train.batch_size")
    p.add_argument("--encoder", choices=("stub", "file"), dest="encoder.kind")
    p.add_argument("--feature-root", dest="encoder.feature_root")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    flags = {k: v for k, v in vars(args).items() if "." in k}
    return override(cfg, flags)


def _echo(cfg: RunConfig) -> dict:
    """Config fields that affect results (I/O paths are left out)."""
    d = cfg.to_dict()
    d.pop("paths")
    return {"config": d, "config_hash": config_hash(d)}


def _source(cfg: RunConfig):
    e = cfg.encoder
    if e.kind == "file":
        return FileFeatureSource(e.feature_root)
    return StubFeatureSource(StubEncoderConfig(e.patch, e.dim, cfg.seeds.vision),
                             StubEncoderConfig(e.patch, e.dino_dim, cfg.seeds.dino))


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, cfg):
    path = args.manifest or cfg.paths.manifest
    if not path:
        raise UsageError("--manifest is required (or set paths.manifest in the config)")
    return path


# --- subcommands -----------------------------------------------------------------

def cmd_synth(args):
    out = _outdir(args.out)
    manifest = generate_corpus(out, args.n, args.seed)
    if args.responses:
        write_jsonl(out / "responses.jsonl",
                    [r.to_json() for r in synthetic_responses(load_manifest(manifest), args.seed)])
    print(manifest)


def cmd_degrade(args):
    img = read_image(args.inp)
    write_image(args.out, degrade(img, args.ratio))
    print(args.out)


def cmd_events(args):
    if args.simulate:
        img = read_image(args.simulate)
        stream = simulate_events(luminance(img), args.shift, args.threshold)
    else:
        if not args.csv:
            raise UsageError("events needs --csv FILE or --simulate IMAGE")
        if args.size:
            w, h = (int(v) for v in args.size.lower().split("x"))
        elif args.like:
            h, w = read_image(args.like).shape[:2]
        else:
            raise UsageError("--csv needs --size WxH or --like IMAGE for sensor bounds")
        path = Path(args.csv)
        if not path.exists():
            raise FileNotFoundError(f"event file not found: {path}")
        stream = parse_event_csv(path.read_text(), w, h)
    if args.out_csv:
        Path(args.out_csv).write_text(stream.to_csv(header=True))
    frame = accumulate(stream, args.t0, args.t1)
    if args.out:
        write_image(args.out, render_event_frame(frame))
    pos, neg = int(frame.counts[..., 0].sum()), int(frame.counts[..., 1].sum())
    print(f"events={len(stream)} window_total={frame.total} positive={pos} negative={neg}")


def cmd_train(args):
    cfg = _config(args)
    samples = load_samples(_manifest(args, cfg))
    corpus = build_triplets(samples, _source(cfg))
    first = corpus[0]
    dims = cfg.fusion_dims(first.f_extreme.shape[1], first.f_dino.shape[1])
    model, history = train_stage1(corpus, cfg.train_config(), cfg.seeds.init, dims, cfg.illu_mode)
    out = _outdir(args.out)
    save_checkpoint(out / "stage1.ckpt", model, {"shuffle": cfg.seeds.shuffle}, stage=1)
    write_loss_history(out / "loss_history.csv", history)
    (out / "config.json").write_text(json.dumps(_echo(cfg), sort_keys=True, indent=2) + "\n")
    print(f"epochs={len(history)} first_loss={history[0]:.6f} final_loss={history[-1]:.6f}"
          if history else "epochs=0")


def cmd_lora(args):
    cfg = _config(args)
    model = load_checkpoint(args.checkpoint)
    if isinstance(model, AdaptedModel):
        raise DataError(f"{args.checkpoint} already carries adapters; pass a stage-1 checkpoint")
    corpus = build_triplets(load_samples(_manifest(args, cfg)), _source(cfg))
    lc = cfg.lora
    adapted, history = train_stage2_lora(model, corpus, cfg.train_config(), lc.rank, lc.alpha,
                                         cfg.seeds.lora, lc.epochs)
    out = _outdir(args.out)
    save_checkpoint(out / "stage2.ckpt", adapted, {"shuffle": cfg.seeds.shuffle, "lora": cfg.seeds.lora},
                    stage=2)
    write_loss_history(out / "lora_history.csv", history)
    print(f"epochs={len(history)} final_loss={history[-1]:.6f}" if history else "epochs=0")


def cmd_eval_features(args):
    cfg = _config(args)
    samples = load_samples(_manifest(args, cfg))
    source = _source(cfg)
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    meta = _echo(cfg)
    if model is not None:
        ck = model.base if isinstance(model, AdaptedModel) else model
        meta["checkpoint_stage"] = ck.meta.get("stage")
        meta["checkpoint_seeds"] = ck.meta.get("seeds")
    table = cosine_table(source, model, samples, RATIO_LADDER, meta)
    out = _outdir(args.out)
    write_similarity_table(table, out)
    pca_export(collect_pca_inputs(source, model, samples, RATIO_LADDER), out / "pca.csv")
    for name in table.columns:
        print(f"{name}: ratio 0.05 {table.value(name, 0.05):.4f}  ratio 20 {table.value(name, 20.0):.4f}")


def cmd_score(args):
    entries = load_manifest(args.manifest)
    responses = load_responses(args.responses)
    cfg = _config(args)
    report = build_eval_report(entries, responses, _echo(cfg))
    write_report(report, _outdir(args.out))
    avg = report.average
    print(" ".join(f"{m}={avg[m]:.6f}" for m in METRICS))


def cmd_ablate(args):
    cfg = _config(args)
    samples = load_samples(_manifest(args, cfg))
    rows = run_ablation(samples, _source(cfg), cfg.train_config(), cfg.seeds.init)
    write_ablation_table(rows, _outdir(args.out), _echo(cfg))
    for name, v in rows:
        print(f"{name},{fmt(v)}")


def cmd_report(args):
    """Merge feature, scoring and ablation results into one summary table."""
    path = Path(args.similarity)
    if not path.exists():
        raise FileNotFoundError(f"similarity file not found: {path}")
    table = SimilarityTable.from_json(json.loads(path.read_text()))
    scores = read_report(args.scores) if args.scores else None
    cols = list(table.columns)
    header = ["ratio"] + [f"cos_{c}" for c in cols] + (list(METRICS) if scores else [])
    lines = [",".join(header)]
    for i, r in enumerate(table.ratios):
        row = [fmt(r)] + [fmt(table.columns[c][i]) for c in cols]
        if scores:
            row += [fmt(v) for v in scores.rows[i].values()]
        lines.append(",".join(row))
    avg = ["avg"] + [fmt(table.average(c)) for c in cols]
    if scores:
        avg += [fmt(scores.average[m]) for m in METRICS]
    lines.append(",".join(avg))
    out = _outdir(args.out)
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    summary = {"similarity": table.to_json()}
    if scores:
        summary["scores"] = scores.to_json()
    if args.ablation:
        ab = Path(args.ablation)
        if not ab.exists():
            raise FileNotFoundError(f"ablation file not found: {ab}")
        summary["ablation"] = json.loads(ab.read_text())
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(out / "summary.csv")


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eventfuse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate the seeded synthetic triplet corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--responses", action="store_true", help="also write mock model responses")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("degrade", help="apply a brightness ratio to an image")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--ratio", type=_positive_float("--ratio"), required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("events", help="parse or simulate events, accumulate and render")
    s.add_argument("--csv")
    s.add_argument("--size", help="sensor size WxH for --csv")
    s.add_argument("--like", help="image whose size gives the sensor bounds")
    s.add_argument("--simulate", metavar="IMAGE")
    s.add_argument("--shift", type=int, default=1)
    s.add_argument("--threshold", type=_positive_float("--threshold"), default=0.2)
    s.add_argument("--t0", type=_nonneg_int("--t0"), default=0)
    s.add_argument("--t1", type=_nonneg_int("--t1"))
    s.add_argument("--out", help="rendered event frame (PPM)")
    s.add_argument("--out-csv", help="write the (sorted) event stream as CSV")
    s.set_defaults(func=cmd_events)

    for name, func, help_ in (("train", cmd_train, "stage-1 fusion training"),
                              ("lora", cmd_lora, "stage-2 adapter tuning"),
                              ("eval-features", cmd_eval_features, "cosine table and PCA export"),
                              ("ablate", cmd_ablate, "fusion-strategy ablation")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--manifest")
        s.add_argument("--out", required=True)
        if name == "lora":
            s.add_argument("--checkpoint", required=True)
        if name == "eval-features":
            s.add_argument("--checkpoint")
        _add_config_flags(s)
        s.set_defaults(func=func)

    s = sub.add_parser("score", help="score model responses into a per-ratio report")
    s.add_argument("--manifest", required=True)
    s.add_argument("--responses", required=True)
    s.add_argument("--out", required=True)
    _add_config_flags(s)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("report", help="merge result files into one summary")
    s.add_argument("--similarity", required=True)
    s.add_argument("--scores")
    s.add_argument("--ablation")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except ContractViolation as exc:
        print(f"eventfuse {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, FormatError, DataError, OSError) as exc:
        print(f"eventfuse {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
