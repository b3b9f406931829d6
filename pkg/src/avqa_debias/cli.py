"""Command-line front end.

Subcommands: split, score, kappa, gen-synth, train-toy, gradcheck,
ablation, grid. Exit codes: 0 success, 1 check failure (e.g. gradient
tolerance exceeded), 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import serialize
from .data import CorpusError, parse_predictions, parse_samples, write_samples
from .losses import (
    LogitBundle,
    MccdConfig,
    answer_loss,
    cycle_loss,
    discrepancy_loss,
    finite_difference_check,
    joint_loss,
)
from .scoring import ScoringError, VoteTable, fleiss_kappa, render_report, score_predictions
from .splitting import (
    SplitConfig,
    SplitError,
    TiePolicy,
    assign_splits,
    group_report_json,
    read_splits,
    write_splits,
)
from .toy import (
    AblationSpec,
    AblationVariant,
    SyntheticConfig,
    ToyModel,
    ToySample,
    TrainConfig,
    ablation_run,
    class_index,
    evaluate,
    generate_synthetic,
    render_ablation_table,
    train,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


class CliError(Exception):
    pass


def _read_corpus(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"input file not found: {path}")
    with open(p, "rb") as f:
        return parse_samples(f)


def _dump_json(obj, path: Path) -> None:
    path.write_bytes((json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode("utf-8"))


def _mccd_from_args(args) -> MccdConfig:
    return MccdConfig(
        alpha=args.alpha,
        beta=args.beta,
        epsilon=args.epsilon,
        distance_space=args.distance_space,
    )


def cmd_split(args) -> int:
    corpus = _read_corpus(args.input)
    cfg = SplitConfig(
        entropy_threshold=args.entropy_threshold,
        tail_factor=args.tail_factor,
        two_answer_tie=TiePolicy.BOTH_HEAD if args.tie_both_head else TiePolicy.ERROR,
    )
    result = assign_splits(corpus, cfg)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "splits.jsonl", "wb") as f:
        write_splits(result.assignments, f)
    _dump_json(group_report_json(result), out / "groups.json")
    print(
        f"wrote {len(result.assignments)} assignments; "
        f"skipped groups: {', '.join(str(g) for g in result.skipped_groups) or 'none'}"
    )
    return EXIT_OK


def cmd_score(args) -> int:
    gold = _read_corpus(args.gold)
    with open(args.splits, "rb") as f:
        splits = read_splits(f)
    with open(args.preds, "rb") as f:
        preds = parse_predictions(f)
    report = score_predictions(gold, splits, preds)
    fmt = "json" if args.format == "json" else "text-table"
    sys.stdout.buffer.write(render_report(report, fmt))
    return EXIT_OK


def cmd_kappa(args) -> int:
    p = Path(args.votes)
    if not p.exists():
        raise CliError(f"votes file not found: {args.votes}")
    obj = json.loads(p.read_text(encoding="utf-8"))
    table = VoteTable(
        raters=obj["raters"],
        rows=tuple(tuple(r) for r in obj["rows"]),
        multiplicities=tuple(obj["multiplicities"]) if "multiplicities" in obj else None,
    )
    print(f"{fleiss_kappa(table):.4f}")
    return EXIT_OK


def _synth_from_args(args) -> SyntheticConfig:
    return SyntheticConfig(
        num_classes=args.classes,
        feature_dim=args.feature_dim,
        train_n=args.train_n,
        test_n=args.test_n,
        bias_strength=args.bias_strength,
        tail_fraction=args.tail_fraction,
        noise_scale=args.noise_scale,
        seed=args.seed,
    )


def cmd_gen_synth(args) -> int:
    cfg = _synth_from_args(args)
    data = generate_synthetic(cfg)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, samples in (("train", data.train), ("test", data.test)):
        with open(out / f"{name}.jsonl", "wb") as f:
            write_samples((s.qa for s in samples), f)
        serialize.write_features(
            out / f"{name}.features", [(s.audio, s.video, s.question) for s in samples]
        )
    with open(out / "splits.jsonl", "wb") as f:
        write_splits(data.splits, f)
    _dump_json(
        {
            "schema_version": 1,
            "num_classes": cfg.num_classes,
            "feature_dim": cfg.feature_dim,
            "train_n": cfg.train_n,
            "test_n": cfg.test_n,
            "bias_strength": cfg.bias_strength,
            "tail_fraction": cfg.tail_fraction,
            "noise_scale": cfg.noise_scale,
            "seed": cfg.seed,
        },
        out / "synth_config.json",
    )
    print(f"wrote synthetic corpus to {out}")
    return EXIT_OK


def _load_toy_corpus(data_dir: Path, name: str) -> list[ToySample]:
    with open(data_dir / f"{name}.jsonl", "rb") as f:
        qa = parse_samples(f)
    feats = serialize.read_features(data_dir / f"{name}.features")
    if len(feats) != len(qa):
        raise CliError(f"{name}: {len(qa)} samples but {len(feats)} feature rows")
    return [
        ToySample(qa=s, label=class_index(s.answer), audio=a, video=v, question=q)
        for s, (a, v, q) in zip(qa, feats)
    ]


def cmd_train_toy(args) -> int:
    data_dir = Path(args.data)
    if not data_dir.is_dir():
        raise CliError(f"data directory not found: {args.data}")
    synth_cfg = json.loads((data_dir / "synth_config.json").read_text(encoding="utf-8"))
    train_set = _load_toy_corpus(data_dir, "train")
    test_set = _load_toy_corpus(data_dir, "test")
    with open(data_dir / "splits.jsonl", "rb") as f:
        splits = read_splits(f)

    spec = AblationSpec(variant=AblationVariant(args.variant))
    tcfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        mccd=_mccd_from_args(args),
        seed=args.seed,
    )
    model = ToyModel.initialize(
        num_classes=synth_cfg["num_classes"],
        feature_dim=synth_cfg["feature_dim"],
        seed=args.seed,
    )
    result = train(model, train_set, tcfg, spec)
    report = evaluate(result.model, test_set, splits)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "schema_version": 1,
        "variant": spec.variant.value,
        "epochs": tcfg.epochs,
        "batch_size": tcfg.batch_size,
        "learning_rate": tcfg.learning_rate,
        "alpha": tcfg.mccd.alpha,
        "beta": tcfg.mccd.beta,
        "epsilon": tcfg.mccd.epsilon,
        "distance_space": tcfg.mccd.distance_space,
        "seed": args.seed,
        "data_dir": str(data_dir),
    }
    if not args.no_timestamp:
        config["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _dump_json(config, out / "config.json")
    with open(out / "history.jsonl", "wb") as f:
        for row in result.history:
            f.write(json.dumps(row).encode("utf-8") + b"\n")
    serialize.write_model(out / "model.bin", result.model.params)
    (out / "report.json").write_bytes(render_report(report, "json"))
    sys.stdout.buffer.write(render_report(report, "text-table"))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    batch = [
        LogitBundle(*(rng.standard_normal(args.classes) * 3.0 for _ in range(4)))
        for _ in range(args.batch)
    ]
    cfg = _mccd_from_args(args)
    labels = list(rng.integers(args.classes, size=args.batch))
    loss_fns = {
        "answer": lambda b: answer_loss([x.fused for x in b], labels),
        "discrepancy": lambda b: discrepancy_loss(b, cfg),
        "cycle": lambda b: cycle_loss(b, cfg),
        "joint": lambda b: joint_loss(b, labels, cfg),
    }
    if args.loss not in loss_fns:
        raise CliError(f"unknown loss {args.loss!r}")
    fn = loss_fns[args.loss]
    err = finite_difference_check(fn, batch, h=args.step)
    obj = {
        "loss": args.loss,
        "value": fn(batch).value,
        "max_rel_err": err,
        "mode": cfg.distance_space,
        "seed": args.seed,
    }
    print(json.dumps(obj))
    return EXIT_OK if err < args.tolerance else EXIT_CHECK_FAILED


def _parse_variants(text: str) -> list[AblationSpec]:
    return [AblationSpec(variant=AblationVariant(v.strip())) for v in text.split(",") if v.strip()]


def _parse_seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def cmd_ablation(args) -> int:
    scfg = _synth_from_args(args)
    tcfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        mccd=_mccd_from_args(args),
        seed=args.seed,
    )
    rows = ablation_run(scfg, tcfg, _parse_variants(args.variants), _parse_seeds(args.seeds))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json({"schema_version": 1, "rows": rows}, out / "ablation.json")
    if args.format == "json":
        print(json.dumps({"schema_version": 1, "rows": rows}, indent=2))
    else:
        sys.stdout.write(render_ablation_table(rows))
    return EXIT_OK


def cmd_grid(args) -> int:
    scfg = _synth_from_args(args)
    seeds = _parse_seeds(args.seeds)
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    betas = [float(b) for b in args.betas.split(",") if b.strip()]
    lines = ["alpha,beta,median_head_acc,median_tail_acc,median_overall_acc"]
    for alpha in alphas:
        for beta in betas:
            tcfg = TrainConfig(
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.lr,
                mccd=MccdConfig(alpha=alpha, beta=beta, epsilon=args.epsilon,
                                distance_space=args.distance_space),
                seed=args.seed,
            )
            row = ablation_run(scfg, tcfg, [AblationSpec()], seeds)[0]
            lines.append(
                f"{alpha},{beta},{row['median_head_acc']:.4f},"
                f"{row['median_tail_acc']:.4f},{row['median_overall_acc']:.4f}"
            )
    text = "\n".join(lines) + "\n"
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "grid.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _add_mccd_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=1e-2)
    p.add_argument("--beta", type=float, default=3e-1)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--distance-space", choices=["probability", "raw_logit"], default="probability")


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--train-n", type=int, default=4000)
    p.add_argument("--test-n", type=int, default=2000)
    p.add_argument("--bias-strength", type=float, default=0.9)
    p.add_argument("--tail-fraction", type=float, default=0.3)
    p.add_argument("--noise-scale", type=float, default=3.0)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    _add_mccd_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avqa-debias",
        description="Distribution-shift splitting, robustness scoring, and debiasing tools",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=0,
                        help="worker bound; outputs are identical for any value")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="build head/tail splits from a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--entropy-threshold", type=float, default=0.9)
    p.add_argument("--tail-factor", type=float, default=1.2)
    p.add_argument("--tie-both-head", action="store_true")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("score", help="score predictions under a split")
    p.add_argument("--gold", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("kappa", help="Fleiss kappa of a vote table")
    p.add_argument("--votes", required=True)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("gen-synth", help="generate a synthetic biased corpus")
    _add_synth_flags(p)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train-toy", help="train the toy model on a generated corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=[v.value for v in AblationVariant], default="full")
    _add_train_flags(p)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("gradcheck", help="finite-difference check of the loss gradients")
    p.add_argument("--loss", choices=["answer", "discrepancy", "cycle", "joint"], default="joint")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-5)
    _add_mccd_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablation", help="run the variant grid over seeds")
    p.add_argument("--variants", default="full,without_md,without_cg,baseline")
    p.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    _add_synth_flags(p)
    _add_train_flags(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("grid", help="alpha/beta sensitivity sweep to CSV")
    p.add_argument("--alphas", default="0.001,0.01,0.1")
    p.add_argument("--betas", default="0.03,0.3,1.0")
    p.add_argument("--seeds", default="0,1,2")
    _add_synth_flags(p)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--distance-space", choices=["probability", "raw_logit"], default="probability")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (CliError, CorpusError, SplitError, ScoringError, OSError, ValueError,
            KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
