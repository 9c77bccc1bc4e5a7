"""Command-line entry point.

Subcommands::

    transtack preprocess --sp SP.csv [--si SI.csv] --out DIR
    transtack train      --sp SP.csv --out DIR
    transtack stack      --sp SP.csv --si SI.csv --out DIR
    transtack experiment --id {1..5} [--variant V] --sp SP.csv [--si SI.csv] --out DIR

Data goes to files under ``--out`` only (written atomically); diagnostics go
to stderr. Exit status: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from transtack import experiments as ex
from transtack._io import write_atomic
from transtack.errors import TranstackError, UsageError
from transtack.neuralnet import TrainingConfig, init_network, predict_batch, rmse, train_sgd
from transtack.stacking import STACK_MODES, build_stacked_dataset, evaluate_transfer_stack, fit_transfer_stack
from transtack.timeseries import (
    apply_normalizer,
    concatenate,
    embed,
    fit_normalizer,
    load_corpus,
    split_by_year,
)

SEED_ENV = "TRANSTACK_SEED"
SUBCOMMANDS = ("preprocess", "train", "stack", "experiment")


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    sp: Path | None
    si: Path | None
    out: Path
    D: int = 5
    T: int = 1
    H: int = 7
    learning_rate: float = 0.1
    epochs: int = 2000
    runs: int = 30
    seed: int = 0
    stack_mode: str = "target-only"
    first_test_year: int = 2006
    combiner_hidden: int | None = None
    jobs: int = 1
    experiment_id: int | None = None
    variant: str | None = None

    def hyperparameters(self) -> ex.Hyperparameters:
        return ex.Hyperparameters(self.D, self.T, self.H, self.learning_rate, self.epochs, self.runs,
                                  self.seed, self.first_test_year, self.stack_mode, self.combiner_hidden)


def _available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = _Parser(add_help=False)
    common.add_argument("--sp", type=Path, help="South Pacific (target) corpus CSV")
    common.add_argument("--si", type=Path, help="South Indian (source) corpus CSV")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--embed-dim", "-D", dest="D", type=_positive_int, default=5, help="embedding dimension D")
    common.add_argument("--time-lag", "-T", dest="T", type=_positive_int, default=1, help="embedding time lag T")
    common.add_argument("--hidden", dest="H", type=_positive_int, default=7, help="hidden units per network")
    common.add_argument("--combiner-hidden", type=_positive_int, default=None,
                        help="combiner hidden units (default: same as --hidden)")
    common.add_argument("--lr", dest="learning_rate", type=_positive_float, default=0.1, help="SGD learning rate")
    common.add_argument("--epochs", type=_positive_int, default=2000, help="SGD epochs")
    common.add_argument("--runs", type=_positive_int, default=30, help="seeded repetitions per experiment")
    common.add_argument("--seed", type=int, default=None,
                        help=f"base seed (default: ${SEED_ENV} if set, else 0)")
    common.add_argument("--mode", dest="stack_mode", choices=STACK_MODES, default="target-only",
                        help="combiner training data: target windows only, or target and source windows")
    common.add_argument("--first-test-year", type=int, default=2006,
                        help="cyclones starting in this year or later are test data")
    common.add_argument("--jobs", type=_positive_int, default=_available_cpus(),
                        help="worker processes for independent runs")

    parser = _Parser(prog="transtack", description="Transfer stacking for cyclone wind-intensity series.",
                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    sub.add_parser("preprocess", parents=[common], formatter_class=fmt,
                   help="write normalized, embedded train/test datasets")
    sub.add_parser("train", parents=[common], formatter_class=fmt,
                   help="train one network on SP training data and score it on SP test data")
    sub.add_parser("stack", parents=[common], formatter_class=fmt,
                   help="fit one transfer stack (SI source, SP target) and score it")
    exp = sub.add_parser("experiment", parents=[common], formatter_class=fmt,
                         help="run one experiment of the protocol over seeded runs")
    exp.add_argument("--id", dest="experiment_id", type=int, choices=ex.EXPERIMENT_IDS, required=True,
                     help="experiment number")
    parser.subcommand_parsers = sub.choices
    exp.add_argument("--variant", default=None,
                     help="Exp 3 lifetime category (%s) or Exp 5 decade (%s); default: all"
                          % (", ".join(ex.VARIANTS[3]), ", ".join(ex.VARIANTS[5])))
    return parser


def parse_args(argv: Sequence[str] | None = None, environ=None) -> CliConfig:
    """Parse ``argv`` into a :class:`CliConfig`; raises :class:`UsageError` on bad input."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    environ = os.environ if environ is None else environ
    usage = parser.subcommand_parsers[ns.subcommand].format_usage()

    seed = ns.seed
    if seed is None:
        raw = environ.get(SEED_ENV)
        try:
            seed = int(raw) if raw not in (None, "") else 0
        except ValueError:
            raise UsageError(f"{SEED_ENV}={raw!r} is not an integer", usage) from None

    exp_id = getattr(ns, "experiment_id", None)
    variant = getattr(ns, "variant", None)
    if ns.sp is None:
        raise UsageError(f"{ns.subcommand} requires --sp", usage)
    if ns.subcommand == "stack" and ns.si is None:
        raise UsageError("stack requires --si (source corpus)", usage)
    if exp_id in ex.NEEDS_SOURCE and ns.si is None:
        raise UsageError(f"experiment {exp_id} requires --si (source corpus)", usage)
    if variant is not None:
        allowed = ex.VARIANTS.get(exp_id)
        if allowed is None:
            raise UsageError(f"experiment {exp_id} takes no --variant", usage)
        if variant not in allowed:
            raise UsageError(f"--variant for experiment {exp_id} must be one of {', '.join(allowed)}", usage)

    return CliConfig(
        subcommand=ns.subcommand, sp=ns.sp, si=ns.si, out=ns.out, D=ns.D, T=ns.T, H=ns.H,
        learning_rate=ns.learning_rate, epochs=ns.epochs, runs=ns.runs, seed=seed,
        stack_mode=ns.stack_mode, first_test_year=ns.first_test_year,
        combiner_hidden=ns.combiner_hidden, jobs=ns.jobs, experiment_id=exp_id, variant=variant,
    )


# -- subcommands ------------------------------------------------------------

def _embedded_csv(data) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f"x_{d + 1}" for d in range(data.embedding_dimension)] + ["target"])
    for row, target in zip(data.inputs, data.targets):
        writer.writerow([repr(float(x)) for x in row] + [repr(float(target))])
    return out.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return load_corpus(path)


def _split_embed(config: CliConfig, sp, si):
    sp_train, sp_test = split_by_year(sp, config.first_test_year)
    series = {"sp_train": concatenate(sp_train), "sp_test": concatenate(sp_test)}
    if si is not None:
        series["si_train"] = concatenate(split_by_year(si, config.first_test_year)[0])
    fit_on = [series["sp_train"]] + ([series["si_train"]] if "si_train" in series else [])
    norm = fit_normalizer(np.concatenate(fit_on))
    embedded = {k: embed(apply_normalizer(s, norm), config.D, config.T) for k, s in series.items()}
    return norm, embedded


def _preprocess(config: CliConfig, sp, si) -> None:
    norm, embedded = _split_embed(config, sp, si)
    for name, data in embedded.items():
        write_atomic(config.out / f"{name}.csv", _embedded_csv(data))
    write_atomic(config.out / "normalization.json",
                 _json({"min_value": norm.min_value, "max_value": norm.max_value}))


def _train(config: CliConfig, sp, si) -> None:
    _, embedded = _split_embed(config, sp, None)
    tc = TrainingConfig(config.epochs, config.learning_rate, config.seed)
    network, trace = train_sgd(init_network(config.D, config.H, config.seed), embedded["sp_train"], tc)
    test = embedded["sp_test"]
    write_atomic(config.out / "network.txt", network.dumps())
    write_atomic(config.out / "trace.csv",
                 "epoch,train_rmse\n" + "".join(f"{i + 1},{v!r}\n" for i, v in enumerate(trace.rmse.tolist())))
    write_atomic(config.out / "metrics.json", _json({
        "seed": config.seed, "train_rmse": trace.final,
        "test_rmse": rmse(test.targets, predict_batch(network, test)),
    }))


def _stack(config: CliConfig, sp, si) -> None:
    _, embedded = _split_embed(config, sp, si)
    tc = TrainingConfig(config.epochs, config.learning_rate, config.seed)
    stack = fit_transfer_stack(embedded["si_train"], embedded["sp_train"], config.H, tc,
                               combiner_hidden=config.combiner_hidden, mode=config.stack_mode)
    test = embedded["sp_test"]
    for m in stack.members:
        write_atomic(config.out / f"{m.label}_member.txt", m.network.dumps())
    write_atomic(config.out / "combiner.txt", stack.combiner.dumps())
    write_atomic(config.out / "stacked_train.csv", stack.stacked_train.to_csv())
    write_atomic(config.out / "stacked_test.csv", build_stacked_dataset(stack.members, test).to_csv())
    write_atomic(config.out / "metrics.json", _json({
        "seed": config.seed, "mode": config.stack_mode,
        "member_train_rmse": {m.label: m.trace.final for m in stack.members},
        "combiner_train_rmse": stack.combiner_trace.final,
        "test_rmse": evaluate_transfer_stack(stack.members, stack.combiner, test),
    }))


def _experiment(config: CliConfig, sp, si) -> None:
    specs = ex.expand_specs(config.experiment_id, config.variant, config.hyperparameters())
    outcomes = []
    for spec in specs:
        print(f"running {spec.key} ({spec.hyper.runs} runs)", file=sys.stderr)
        outcomes.append(ex.run_experiment(spec, sp, si, results_dir=config.out / "runs", jobs=config.jobs))
    write_atomic(config.out / "results.csv", ex.results_csv(outcomes))
    write_atomic(config.out / "summary.csv", ex.summary_csv(outcomes))
    write_atomic(config.out / "summary.json", ex.summary_json(outcomes))


_HANDLERS = {"preprocess": _preprocess, "train": _train, "stack": _stack, "experiment": _experiment}


def main(config: CliConfig) -> int:
    """Execute ``config``; returns the process exit status."""
    try:
        sp = _load(config.sp)
        si = _load(config.si) if config.si is not None else None
        _HANDLERS[config.subcommand](config, sp, si)
    except (TranstackError, OSError, ValueError) as exc:
        print(f"transtack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def run(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(exc.usage)
        print(f"transtack: error: {exc}", file=sys.stderr)
        return 2
    return main(config)


if __name__ == "__main__":
    sys.exit(run())
