"""``qae-peptide`` command line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from . import pipeline
from .autoencoder import AnsatzConfig
from .config import ConfigError, RunConfig, full_grid_config
from .data import DatasetError
from .verification import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _variant(text: str) -> str:
    try:
        return AnsatzConfig.from_variant(text).variant_id
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults are desk scale)")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--seed", type=_u64, help="root seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--variant", type=_variant, help="restrict to one <n>q-<d>l-<m>t variant")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qae-peptide",
                                     description="Quantum autoencoder kernels for peptide classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", parents=[common], help="train autoencoder variants")
    p.add_argument("--dry-run", action="store_true", help="write the run manifest only")
    p.add_argument("--full-grid", action="store_true", help="use the 18-variant grid")
    for name, text in (("embed", "write embeddings"), ("kernel", "write kernel matrices"),
                       ("classify", "cross-validate SVMs on written kernels"),
                       ("compare", "QAE vs Hamiltonian kernel report")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--dataset", action="append", metavar="CSV",
                       help="labeled id,sequence,label file (repeatable; overrides the config)")
    sub.add_parser("shadow-verify", parents=[common], help="shadow estimation and truncation bound report")
    p = sub.add_parser("verify", parents=[common], help="run a property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    return parser


def _load_config(args) -> RunConfig:
    if getattr(args, "full_grid", False):
        cfg = full_grid_config()
    elif args.config:
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig()
        cfg.validate()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def run(args) -> int:
    started = time.time()
    if args.command == "verify":
        seed = 0 if args.seed is None else args.seed
        checks, elapsed = run_suite(args.suite, seed=seed)
        for c in checks:
            print(c.line())
        ok = all(c.passed for c in checks)
        print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s)")
        return EXIT_OK if ok else EXIT_FAIL

    cfg = _load_config(args)
    out = pipeline.out_dir(cfg, args.out)
    if args.command == "pretrain":
        manifest = pipeline.cmd_pretrain(cfg, out, args.variant, args.jobs, args.dry_run)
        print(f"{manifest['n_planned']} planned run(s)")
        for run_ in manifest["planned_runs"]:
            print(f"  {run_['variant']}: {run_['n_params']} params, {run_['epochs']} epochs")
        for r in manifest.get("results", []):
            print(f"  {r['variant']}: loss {r['first_batch_loss']:.4f} -> {r['corpus_loss']:.4f}")
    elif args.command == "embed":
        print("\n".join(pipeline.cmd_embed(cfg, out, args.dataset, args.variant)["outputs"]))
    elif args.command == "kernel":
        print("\n".join(pipeline.cmd_kernel(cfg, out, args.dataset, args.variant)["outputs"]))
    elif args.command == "classify":
        for r in pipeline.cmd_classify(cfg, out, args.dataset):
            print(json.dumps({k: r[k] for k in ("dataset", "method", "variant", "protocol", "accuracy")}))
    elif args.command == "compare":
        pipeline.cmd_compare(cfg, out, args.dataset, args.variant)
        print((out / "compare.txt").read_text(), end="")
    elif args.command == "shadow-verify":
        report = pipeline.cmd_shadow_verify(cfg, out)
        print(pipeline.format_shadow_report(report), end="")
        sh = report["shadows"]
        if sh["passed"] < len(sh["trials"]) - 1 or any(r["status"] == "fail" for r in report["truncation"]):
            pipeline.write_run_info(out, args.command, started)
            return EXIT_FAIL
    pipeline.write_run_info(out, args.command, started)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (pipeline.PipelineError, DatasetError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
