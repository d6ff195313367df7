"""Command line interface.

Subcommands: ``train-teacher``, ``train-generator``, ``distill``,
``verify-privacy`` and ``report``. All training commands read an experiment
config file, write checkpoints plus CSV metrics under the config's output
directory, and exit non-zero with a diagnostic on any error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import audit_grid
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, resolve_out_dir
from .datasets import make_task_data
from .exceptions import CheckpointError, ConfigError, IdxFormatError
from .metrics import (
    AUDIT_FIELDS,
    GENERATOR_FIELDS,
    STAGE_FIELDS,
    read_csv,
    with_provenance,
    write_csv,
)
from .pipeline import (
    PrivateStore,
    accuracy,
    pretrain_generator,
    run_pipeline,
    train_teacher,
)


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    for name in ("seed", "stages", "samples_per_stage", "epsilon", "out_dir"):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            overrides[name] = value
    return cfg.replace(**overrides) if overrides else cfg


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--stages", type=int, help="override the stage count")
    parser.add_argument(
        "--samples-per-stage", type=int, dest="samples_per_stage",
        help="override the per-stage synthetic sample count",
    )
    parser.add_argument("--epsilon", type=float, help="override the privacy budget")
    parser.add_argument("--out-dir", dest="out_dir", help="override the output dir")


def cmd_train_teacher(args) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg.out_dir)
    x_train, y_train, x_test, y_test = make_task_data(cfg)
    teacher = train_teacher(PrivateStore(x_train, y_train), cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(teacher, out / "teacher.ckpt")
    msg = f"teacher saved to {out / 'teacher.ckpt'}"
    if len(x_test):
        msg += f" (test accuracy {accuracy(teacher, x_test, y_test):.4f})"
    print(msg)
    return 0


def cmd_train_generator(args) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg.out_dir)
    teacher_path = Path(args.teacher) if args.teacher else out / "teacher.ckpt"
    teacher = load_checkpoint(teacher_path)
    x_train, _, _, _ = make_task_data(cfg)
    generator, history = pretrain_generator(teacher, cfg, x_train.shape[1])
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(generator, out / "generator.ckpt")
    rows = [dict(terms.row(), step=i) for i, terms in enumerate(history)]
    write_csv(
        out / "gen_pretrain.csv",
        with_provenance(rows, cfg.seed, cfg.digest()),
        GENERATOR_FIELDS,
    )
    print(
        f"generator saved to {out / 'generator.ckpt'}; "
        f"{len(history)} steps logged to {out / 'gen_pretrain.csv'}"
    )
    return 0


def cmd_distill(args) -> int:
    cfg = _load_config(args)
    out = resolve_out_dir(cfg.out_dir)
    x_train, y_train, x_test, y_test = make_task_data(cfg)

    teacher = generator = None
    teacher_path, generator_path = out / "teacher.ckpt", out / "generator.ckpt"
    if teacher_path.exists():
        teacher = load_checkpoint(teacher_path)
    if generator_path.exists():
        generator = load_checkpoint(generator_path)

    result = run_pipeline(
        cfg, x_train, y_train, x_test, y_test, teacher=teacher, generator=generator
    )
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.student, out / "student.ckpt")
    if teacher is None:
        save_checkpoint(result.teacher, teacher_path)
    rows = [r.row() for r in result.stage_records]
    write_csv(
        out / "stages.csv",
        with_provenance(rows, cfg.seed, cfg.digest()),
        STAGE_FIELDS,
    )
    print(f"student saved to {out / 'student.ckpt'}")
    print(f"stage metrics written to {out / 'stages.csv'}")
    print(
        f"label queries: {result.label_query_count} "
        f"({result.synthetic_total} synthetic samples), "
        f"private reads during stages: {result.private_reads_during_stages}"
    )
    if result.teacher_accuracy is not None:
        print(f"teacher accuracy: {result.teacher_accuracy:.4f}")
    if result.student_accuracy is not None:
        print(f"student accuracy: {result.student_accuracy:.4f}")
    return 0


def _parse_k_range(spec: str) -> list[int]:
    lo, sep, hi = spec.partition(":")
    if not sep:
        return [int(spec)]
    return list(range(int(lo), int(hi) + 1))


def cmd_verify_privacy(args) -> int:
    k_values = _parse_k_range(args.k_range)
    reports = audit_grid(args.eps, k_values, args.classes)
    header = f"{'epsilon':>8} {'k':>4} {'max_ratio':>12} {'bound':>12} {'status':>7}"
    print(header)
    print("-" * len(header))
    worst = True
    for report in reports:
        status = "ok" if report.passed else "FAIL"
        worst &= report.passed
        print(
            f"{report.epsilon:>8.4g} {report.candidate_size:>4d} "
            f"{report.max_ratio:>12.6f} {np.exp(report.epsilon):>12.6f} "
            f"{status:>7}"
        )
    if args.csv:
        write_csv(args.csv, [r.row() for r in reports], AUDIT_FIELDS)
        print(f"csv written to {args.csv}")
    print("all bounds hold" if worst else "BOUND VIOLATION DETECTED")
    return 0 if worst else 1


def cmd_report(args) -> int:
    path = Path(args.run_dir) / "stages.csv" if args.run_dir else Path(args.csv)
    if not path.exists():
        raise ConfigError(f"no stage metrics found at {path}")
    rows = read_csv(path)
    if not rows:
        raise ConfigError(f"{path} has no rows")
    print(f"run: seed={rows[0]['seed']} config={rows[0]['config_digest']}")
    print(f"{'stage':>6} {'k_mean':>8} {'agreement':>10} {'student_acc':>12}")
    for row in rows:
        acc = row["student_acc"] or "-"
        if acc != "-":
            acc = f"{float(acc):.4f}"
        print(
            f"{row['stage']:>6} {float(row['k_mean']):>8.2f} "
            f"{float(row['label_agreement']):>10.4f} {acc:>12}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpdistill",
        description="label-private data-free distillation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-teacher", help="pretrain the teacher on private data")
    _add_config_options(p)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser(
        "train-generator", help="pretrain the generator against a teacher"
    )
    _add_config_options(p)
    p.add_argument("--teacher", help="teacher checkpoint (default: out_dir/teacher.ckpt)")
    p.set_defaults(func=cmd_train_generator)

    p = sub.add_parser("distill", help="run the full staged distillation")
    _add_config_options(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser(
        "verify-privacy", help="exact audit of the mechanism's privacy bound"
    )
    p.add_argument("--eps", type=float, nargs="+", required=True,
                   help="privacy budgets to audit")
    p.add_argument("--k-range", default="2:10", dest="k_range",
                   help="candidate sizes, 'lo:hi' or a single value")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--csv", help="also write a machine-readable table")
    p.set_defaults(func=cmd_verify_privacy)

    p = sub.add_parser("report", help="print the stage-vs-accuracy table of a run")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--run-dir", help="run directory containing stages.csv")
    g.add_argument("--csv", help="stage metrics file")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IdxFormatError, CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
