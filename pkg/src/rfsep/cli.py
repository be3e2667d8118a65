"""Command-line entry point: ``rfsep {generate,ingest,train,sweep,eval,report}``.

Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
command fails at run time.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from . import pipeline
from .baselines import MatchedFilterSeparator
from .config import ConfigError, ExperimentConfig, load_config
from .eval import SweepResult, ber, mse_db, sinr_sweep, _soi_chain

log = logging.getLogger("rfsep")

METHODS = ("mf", "lmmse", "unet", "wavenet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_help: str):
    p.add_argument("--config", type=Path, help="YAML or JSON experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--out", type=Path, required=True, help=out_help)
    p.add_argument("--data-dir", type=Path, help="dataset root (default $RFSEP_DATA_DIR, then cwd)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfsep", description="Single-channel RF source separation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="synthesize a mixture dataset")
    _common(p, "output directory")
    p.add_argument("--num-examples", type=int, help="override dataset.num_examples")

    p = sub.add_parser("ingest", help="convert raw float32 IQ into a unit-power frame file")
    p.add_argument("raw", type=Path)
    p.add_argument("--frame-len", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--truncate", action="store_true", help="drop a trailing partial frame")

    p = sub.add_parser("train", help="train a separator and write its weights")
    _common(p, "weight container path (writes <out>.json, <out>.bin, <out>.loss.csv)")
    p.add_argument("--method", choices=("lmmse", "unet", "wavenet"), help="default: model.kind from the config")
    p.add_argument("--dataset", type=Path, help="train on a generated dataset instead of fresh draws")
    p.add_argument("--max-steps", type=int, help="override train.max_steps")

    p = sub.add_parser("sweep", help="BER/MSE versus SINR")
    _common(p, "CSV output path")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--weights", type=Path, help="weight container (required for lmmse/unet/wavenet)")
    p.add_argument("--trials", type=int, help="override sweep.trials")
    p.add_argument("--sinr", type=float, nargs="+", help="override the SINR grid (dB)")

    p = sub.add_parser("eval", help="score a separator on a generated dataset")
    _common(p, "JSON output path")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--weights", type=Path)
    p.add_argument("--dataset", type=Path, required=True)

    p = sub.add_parser("report", help="render sweep CSVs as a markdown table")
    p.add_argument("csvs", type=Path, nargs="+")
    p.add_argument("--out", type=Path, required=True)
    return parser


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


def _resolve(path: Path | None, data_dir) -> Path | None:
    if path is None or path.is_absolute() or path.exists():
        return path
    return rio.data_root(data_dir) / path


def _load_separator(method: str, weights: Path | None, cfg: ExperimentConfig):
    if method == "mf":
        return MatchedFilterSeparator()
    if weights is None:
        raise UsageError(f"--weights is required for --method {method}")
    tensors, meta = rio.load_weights(weights)
    kind = meta.get("kind")
    if kind != method:
        raise UsageError(f"{weights} holds a {kind!r} separator, not {method!r}")
    if method == "lmmse":
        return pipeline.SinrAwareLmmse.from_state(tensors, meta)
    model, _ = rio.load_model(weights)
    return model


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    if args.num_examples is not None:
        cfg = cfg.model_copy(update={"dataset": cfg.dataset.model_copy(update={"num_examples": args.num_examples})})
    manifest = pipeline.write_dataset(args.out, cfg, data_dir=args.data_dir)
    print(f"wrote {manifest['num_examples']} examples of {manifest['N']} samples to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    if args.frame_len < 1:
        raise UsageError("--frame-len must be positive")
    header, powers = rio.ingest_raw_iq(args.raw, args.frame_len, args.out, truncate=args.truncate)
    p = np.array(powers)
    print(
        f"wrote {header.num_frames} frames x {header.frame_len} samples to {args.out} "
        f"(input power min {p.min():.4g} median {np.median(p):.4g} max {p.max():.4g})"
    )
    return 0


def _write_loss_log(path: Path, history: list[dict]):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.DictWriter(fh, ["epoch", "step", "train_loss", "val_loss"], lineterminator="\n")
        w.writeheader()
        w.writerows(history)


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    method = args.method or cfg.model.kind
    if args.max_steps is not None:
        cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"max_steps": args.max_steps})})
    args.out.parent.mkdir(parents=True, exist_ok=True)
    if method == "lmmse":
        sep = pipeline.fit_lmmse(cfg, data_dir=args.data_dir)
        meta = {
            "kind": "lmmse",
            "block_len": sep.cov.block_len,
            "sample_count": sep.cov.sample_count,
            "sinr_db": sep.sinr_db,
            "eps_reg": sep.eps_reg,
            "seed": cfg.seed,
        }
        path = rio.save_weights(args.out, sep.state_dict(), meta)
        print(f"fitted LMMSE covariances from {sep.cov.sample_count} blocks -> {path}")
        return 0
    if method != cfg.model.kind:
        cfg = cfg.model_copy(update={"model": cfg.model.model_copy(update={"kind": method})})
    dataset = None
    if args.dataset is not None:
        ds = pipeline.read_dataset(_resolve(args.dataset, args.data_dir))
        dataset = (ds.y, ds.s, ds.b)
    model, result = pipeline.train_from_config(cfg, dataset, data_dir=args.data_dir)
    path = rio.save_model(args.out, model, {"seed": cfg.seed, "best_val": result.best_val, "steps": result.steps})
    loss_path = Path(f"{rio.weight_stem(args.out)}.loss.csv")
    _write_loss_log(loss_path, result.history)
    print(f"trained {method} for {result.steps} steps, best val MSE {result.best_val:.5g} -> {path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    sep = _load_separator(args.method, _resolve(args.weights, args.data_dir), cfg)
    sinrs = args.sinr or cfg.sweep.sinr_db
    trials = args.trials or cfg.sweep.trials
    N = cfg.mixture.N
    result = sinr_sweep(
        sep,
        cfg.soi.kind,
        pipeline.interference_from_config(cfg, "test", args.data_dir),
        sinrs,
        trials,
        cfg.seed,
        N=N,
        soi_cfg=cfg.soi_config(N),
        method=args.method,
        threads=args.threads,
        # full-length neural inference keeps every activation, so go one frame at a time
        batch=1 if args.method in ("unet", "wavenet") else 8,
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    result.to_csv(args.out)
    failed = [r for r in result.rows if r.error]
    for r in failed:
        print(f"warning: {r.method} failed at {r.sinr_db} dB: {r.error}", file=sys.stderr)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    return 2 if failed and len(failed) == len(result.rows) else 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    ds = pipeline.read_dataset(_resolve(args.dataset, args.data_dir))
    sep = _load_separator(args.method, _resolve(args.weights, args.data_dir), cfg)
    soi_cfg, _, demod = _soi_chain(ds.manifest["soi_kind"], ds.manifest["N"], cfg.soi_config(ds.manifest["N"]))
    s_hat = []
    for rec, y in zip(ds.manifest["examples"], ds.y):
        fn = sep.at_sinr(rec["sinr_db"]) if hasattr(sep, "at_sinr") else sep
        s_hat.append(np.asarray(fn.separate(y[None]))[0])
    s_hat = np.stack(s_hat)
    bits = demod(s_hat, soi_cfg)
    summary = {
        "method": args.method,
        "dataset": str(args.dataset),
        "num_examples": int(ds.y.shape[0]),
        "mse_db": mse_db(s_hat, ds.s),
        "ber": ber(bits, ds.bits),
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{args.method}: MSE {summary['mse_db']:.2f} dB, BER {summary['ber']:.4g}")
    return 0


def render_report(results: list[SweepResult]) -> str:
    rows = [r for res in results for r in res.rows]
    methods = sorted({r.method for r in rows})
    sinrs = sorted({r.sinr_db for r in rows})
    cell = {(r.method, r.sinr_db): r for r in rows}
    lines = []
    for metric, fmt in (("mse_db", "{:.2f}"), ("ber", "{:.3e}")):
        title = "MSE (dB)" if metric == "mse_db" else "BER"
        lines += [f"### {title}", "", "| SINR (dB) | " + " | ".join(methods) + " |"]
        lines.append("|---" * (len(methods) + 1) + "|")
        for x in sinrs:
            vals = [fmt.format(getattr(cell[m, x], metric)) if (m, x) in cell else "" for m in methods]
            lines.append(f"| {x:g} | " + " | ".join(vals) + " |")
        lines.append("")
    return "\n".join(lines)


def cmd_report(args) -> int:
    results = [SweepResult.from_csv(p) for p in args.csvs]
    text = render_report(results)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text, encoding="utf-8")
    print(f"wrote report for {sum(len(r.rows) for r in results)} rows to {args.out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = getattr(args, "threads", None)
    if threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(threads))
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"rfsep {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
        print(f"rfsep {args.command}: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
