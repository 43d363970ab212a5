"""Command-line entry point.

Subcommands: ``run`` (train and write report.json, optionally an embedding
CSV), ``check-grad`` (finite-difference gradient suite), ``oracle-test``
(brute-force loss equivalences), ``dump-embeddings`` (embedding CSV of a
freshly initialized model on the held-out scene). Exit codes: 0 success,
1 validation/run failure, 2 usage or config error. Output files are written
to a temp name and renamed on success, so failures leave nothing partial.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, config_to_dict, load_config_file, parse_config
from .core import argmax_predict
from .experiment import execute_run
from .gradcheck import GRAD_TOLERANCE, run_gradient_suite, run_oracle_suite
from .metrics import dump_embeddings
from .model import TrainingDivergenceError, forward, init_params
from .scenes import make_scenes
from .validation import rng_from


def _add_config_flags(parser, with_run_flags: bool = False):
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--seed", type=int, help="global seed (overrides config)")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    if with_run_flags:
        parser.add_argument("--mode", choices=("ce", "ce+nce", "ce+pne"), help="loss mode")
        parser.add_argument("--temperature", type=float, help="contrast temperature")
        parser.add_argument("--alpha", type=float, help="contrast weight in the combined loss")
        parser.add_argument("--anchor-cap", type=int, help="max total anchors per scene")
        parser.add_argument("--pairs-per-group", type=int, help="max matched pairs per group")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnecontrast",
        description="Pixel-contrast loss engine: toy experiments and validation suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train a toy experiment and write report.json")
    _add_config_flags(run_p, with_run_flags=True)
    run_p.add_argument(
        "--dump-embeddings", action="store_true",
        help="also write embeddings.csv of the trained model on the eval scene",
    )

    grad_p = sub.add_parser("check-grad", help="finite-difference gradient suite")
    grad_p.add_argument("--trials", type=int, default=100, help="instances per loss")
    grad_p.add_argument("--seed", type=int, default=0)

    oracle_p = sub.add_parser("oracle-test", help="brute-force loss equivalence suite")
    oracle_p.add_argument("--trials", type=int, default=50, help="random map pairs")
    oracle_p.add_argument("--seed", type=int, default=0)

    dump_p = sub.add_parser(
        "dump-embeddings",
        help="embedding CSV of an untrained (seeded) model on the eval scene",
    )
    _add_config_flags(dump_p)
    return parser


def _overrides_from_args(args) -> dict:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out"] = args.out
    train = {}
    if getattr(args, "mode", None) is not None:
        train["loss_mode"] = args.mode
    if train:
        overrides["train"] = train
    contrast = {}
    if getattr(args, "temperature", None) is not None:
        contrast["temperature"] = args.temperature
    if getattr(args, "alpha", None) is not None:
        contrast["alpha"] = args.alpha
    if contrast:
        overrides["contrast"] = contrast
    sampling = {}
    if getattr(args, "anchor_cap", None) is not None:
        sampling["anchor_cap"] = args.anchor_cap
    if getattr(args, "pairs_per_group", None) is not None:
        sampling["pairs_per_group"] = args.pairs_per_group
    if sampling:
        overrides["sampling"] = sampling
    return overrides


def _resolve_config(args):
    data = load_config_file(args.config) if getattr(args, "config", None) else {}
    return parse_config(data, _overrides_from_args(args))


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    artifacts = execute_run(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_text = json.dumps(artifacts.report.to_json_dict(), sort_keys=True, indent=2) + "\n"
    _write_atomic(out_dir / "report.json", report_text)

    if args.dump_embeddings:
        est = artifacts.estimator
        emb = est.transform(artifacts.eval_features)
        preds = est.predict(artifacts.eval_features)
        n, h, w, d = emb.shape
        tmp = out_dir / "embeddings.csv.tmp"
        dump_embeddings(
            emb.reshape(n * h, w, d),
            artifacts.eval_labels.reshape(n * h, w),
            preds.reshape(n * h, w),
            tmp,
        )
        os.replace(tmp, out_dir / "embeddings.csv")

    final = artifacts.report.final
    print(
        f"run complete: mIoU={final['miou']:.4f} in "
        f"{artifacts.report.wall_clock_seconds:.1f}s; wrote {out_dir / 'report.json'}",
        file=sys.stderr,
    )
    return 0


def _cmd_check_grad(args) -> int:
    suite = run_gradient_suite(trials=args.trials, seed=args.seed)
    _print_json(suite)
    if suite["max_rel_error"] >= GRAD_TOLERANCE:
        return 1
    return 0


def _cmd_oracle_test(args) -> int:
    suite = run_oracle_suite(trials=args.trials, seed=args.seed)
    _print_json(suite)
    return 0 if suite["passed"] else 1


def _cmd_dump_embeddings(args) -> int:
    config = _resolve_config(args)
    eval_x, eval_y = make_scenes(
        config.scene, config.train.eval_scenes, rng_from(config.seed, "scenes", "eval")
    )
    params = init_params(
        config.scene.n_features, config.train.hidden_dim, config.train.embed_dim,
        config.scene.n_classes, rng_from(config.seed, "init"),
    )
    n, h, w, feat = eval_x.shape
    state = forward(params, eval_x.reshape(-1, feat))
    scores = state.scores.reshape(n * h, w, config.scene.n_classes)
    preds = argmax_predict(scores)
    emb = state.embeddings.reshape(n * h, w, config.train.embed_dim)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = out_dir / "embeddings.csv.tmp"
    rows = dump_embeddings(emb, eval_y.reshape(n * h, w), preds, tmp)
    os.replace(tmp, out_dir / "embeddings.csv")
    print(f"wrote {rows} rows to {out_dir / 'embeddings.csv'}", file=sys.stderr)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "check-grad": _cmd_check_grad,
    "oracle-test": _cmd_oracle_test,
    "dump-embeddings": _cmd_dump_embeddings,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0

    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
