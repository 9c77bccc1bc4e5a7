"""Seeded, repeated experiment protocol over South Pacific (SP) and South
Indian (SI) corpora.

=====  ==================================================================
Exp    Setup
=====  ==================================================================
1      FNN trained on SP training cyclones, tested on SP test cyclones
2      FNN trained on SI training cyclones, tested on SP test cyclones
3      FNN trained on one lifetime category of SP training cyclones, tested
       on the same category of SP test cyclones and on the full SP test set
4      Transfer stacking: SI source member, SP target member, combiner
5      FNN trained on one decade of SP training cyclones, tested on SP test
=====  ==================================================================

Run ``r`` uses seed ``base_seed + r``. Reported deviations are sample
standard deviations (n - 1 denominator).
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from transtack._io import write_atomic
from transtack.errors import EmptyCorpus, EmptyInput
from transtack.neuralnet import NetworkParams, TrainingConfig, init_network, predict_batch, rmse, train_sgd
from transtack.stacking import (
    STACK_MODES,
    EnsembleMember,
    evaluate_transfer_stack,
    fit_transfer_stack,
)
from transtack.timeseries import (
    DURATION_CATEGORIES,
    Corpus,
    EmbeddedDataset,
    NormalizationParams,
    apply_normalizer,
    concatenate,
    embed,
    filter_by_category,
    filter_by_year_range,
    fit_normalizer,
    split_by_year,
)

# Half-open start-year ranges; the second decade runs through the last training year.
DECADES: dict[str, tuple[int, int]] = {
    "1985-1995": (1985, 1995),
    "1995-2005": (1995, 2006),
}
VARIANTS: dict[int, tuple[str, ...]] = {
    3: tuple(DURATION_CATEGORIES),
    5: tuple(DECADES),
}
EXPERIMENT_IDS = (1, 2, 3, 4, 5)
NEEDS_SOURCE = (2, 4)

RESULTS_HEADER = ("experiment", "variant", "run", "seed", "train_rmse", "test_rmse", "categorical_rmse")
SUMMARY_HEADER = ("experiment", "variant", "metric", "mean", "std", "n")
METRICS = ("train_rmse", "test_rmse", "categorical_rmse")


@dataclass(frozen=True)
class Hyperparameters:
    D: int = 5
    T: int = 1
    H: int = 7
    learning_rate: float = 0.1
    epochs: int = 2000
    runs: int = 30
    base_seed: int = 0
    first_test_year: int = 2006
    stack_mode: str = "target-only"
    combiner_hidden: int | None = None

    def __post_init__(self):
        for name in ("D", "T", "H", "epochs", "runs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.stack_mode not in STACK_MODES:
            raise ValueError(f"stack_mode must be one of {STACK_MODES}, got {self.stack_mode!r}")
        if self.combiner_hidden is not None and self.combiner_hidden < 1:
            raise ValueError("combiner_hidden must be positive")

    def training_config(self, seed: int) -> TrainingConfig:
        return TrainingConfig(self.epochs, self.learning_rate, seed, True)


@dataclass(frozen=True)
class ExperimentSpec:
    id: int
    variant: str | None = None
    hyper: Hyperparameters = field(default_factory=Hyperparameters)

    def __post_init__(self):
        if self.id not in EXPERIMENT_IDS:
            raise ValueError(f"experiment id must be one of {EXPERIMENT_IDS}, got {self.id!r}")
        allowed = VARIANTS.get(self.id)
        if allowed is None:
            if self.variant is not None:
                raise ValueError(f"experiment {self.id} takes no variant")
        elif self.variant not in allowed:
            raise ValueError(f"experiment {self.id} variant must be one of {allowed}, got {self.variant!r}")

    @property
    def needs_source(self) -> bool:
        return self.id in NEEDS_SOURCE

    @property
    def key(self) -> str:
        return f"exp{self.id}" + (f"_{self.variant}" if self.variant else "")

    def seed_for(self, run: int) -> int:
        return self.hyper.base_seed + run


def expand_specs(exp_id: int, variant: str | None, hyper: Hyperparameters) -> list[ExperimentSpec]:
    """One spec per variant when ``variant`` is omitted for Exp. 3 or 5."""
    if variant is None and exp_id in VARIANTS:
        return [ExperimentSpec(exp_id, v, hyper) for v in VARIANTS[exp_id]]
    return [ExperimentSpec(exp_id, variant, hyper)]


@dataclass(frozen=True)
class RunResult:
    run: int
    seed: int
    train_rmse: float
    test_rmse: float
    categorical_rmse: float | None = None

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float


@dataclass(frozen=True)
class ExperimentSummary:
    experiment: int
    variant: str | None
    n: int
    metrics: dict[str, MetricSummary]


@dataclass
class ExperimentOutcome:
    spec: ExperimentSpec
    summary: ExperimentSummary
    results: list[RunResult]


def summarize(results: Sequence[RunResult], experiment: int = 0,
              variant: str | None = None) -> ExperimentSummary:
    """Mean and sample standard deviation of every metric present in all runs."""
    if not results:
        raise EmptyInput("no run results to summarize")
    metrics = {}
    for name in METRICS:
        values = [r.metric(name) for r in results]
        if any(v is None for v in values):
            continue
        metrics[name] = MetricSummary(*mean_std(values))
    return ExperimentSummary(experiment, variant, len(results), metrics)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("no values")
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


# -- data preparation -------------------------------------------------------

@dataclass(frozen=True)
class PreparedData:
    """Normalized, embedded datasets for one experiment."""

    normalization: NormalizationParams
    train: EmbeddedDataset
    test: EmbeddedDataset
    source_train: EmbeddedDataset | None = None
    categorical_test: EmbeddedDataset | None = None


def _require(corpus: Corpus, what: str) -> Corpus:
    if len(corpus) == 0:
        raise EmptyCorpus(f"{what} contains no cyclones")
    return corpus


def prepare_data(spec: ExperimentSpec, sp_corpus: Corpus, si_corpus: Corpus | None = None) -> PreparedData:
    """Split, filter, normalize (on training series only) and embed the corpora for ``spec``."""
    hp = spec.hyper
    sp_train, sp_test = split_by_year(_require(sp_corpus, "SP corpus"), hp.first_test_year)
    _require(sp_test, f"SP test set (start year >= {hp.first_test_year})")
    source_train = categorical = None

    if spec.id == 1:
        train = _require(sp_train, "SP training set")
    elif spec.id == 2:
        if si_corpus is None:
            raise EmptyCorpus("experiment 2 needs the SI corpus")
        train = _require(split_by_year(si_corpus, hp.first_test_year)[0], "SI training set")
    elif spec.id == 3:
        train = _require(filter_by_category(sp_train, spec.variant), f"SP training cyclones of {spec.variant} days")
        categorical = _require(filter_by_category(sp_test, spec.variant), f"SP test cyclones of {spec.variant} days")
    elif spec.id == 4:
        if si_corpus is None:
            raise EmptyCorpus("experiment 4 needs the SI corpus")
        train = _require(sp_train, "SP training set")
        source_train = _require(split_by_year(si_corpus, hp.first_test_year)[0], "SI training set")
    else:
        lo, hi = DECADES[spec.variant]
        train = _require(filter_by_year_range(sp_train, lo, hi), f"SP training cyclones of {spec.variant}")

    train_series = concatenate(train)
    source_series = concatenate(source_train) if source_train is not None else None
    fit_on = train_series if source_series is None else np.concatenate([train_series, source_series])
    norm = fit_normalizer(fit_on)

    def prep(series):
        return embed(apply_normalizer(series, norm), hp.D, hp.T)

    return PreparedData(
        normalization=norm,
        train=prep(train_series),
        test=prep(concatenate(sp_test)),
        source_train=prep(source_series) if source_series is not None else None,
        categorical_test=prep(concatenate(categorical)) if categorical is not None else None,
    )


# -- runs -------------------------------------------------------------------

@dataclass(eq=False)
class RunArtifacts:
    normalization: NormalizationParams
    networks: dict[str, NetworkParams]


def run_single(spec: ExperimentSpec, data: PreparedData, run: int) -> tuple[RunResult, RunArtifacts]:
    """Execute run ``run`` of ``spec`` on already prepared data."""
    hp = spec.hyper
    seed = spec.seed_for(run)
    config = hp.training_config(seed)

    if spec.id == 4:
        stack = fit_transfer_stack(data.source_train, data.train, hp.H, config,
                                   combiner_hidden=hp.combiner_hidden, mode=hp.stack_mode)
        test_rmse = evaluate_transfer_stack(stack.members, stack.combiner, data.test)
        networks = {f"{m.label}_member": m.network for m in stack.members}
        networks["combiner"] = stack.combiner
        result = RunResult(run, seed, stack.combiner_trace.final, test_rmse)
        return result, RunArtifacts(data.normalization, networks)

    network, trace = train_sgd(init_network(hp.D, hp.H, seed), data.train, config)
    test_rmse = rmse(data.test.targets, predict_batch(network, data.test))
    categorical = None
    if data.categorical_test is not None:
        categorical = rmse(data.categorical_test.targets, predict_batch(network, data.categorical_test))
    result = RunResult(run, seed, trace.final, test_rmse, categorical)
    return result, RunArtifacts(data.normalization, {"network": network})


def _run_job(args):
    spec, data, run = args
    return run_single(spec, data, run)


def run_experiment(spec: ExperimentSpec, sp_corpus: Corpus, si_corpus: Corpus | None = None,
                   results_dir=None, jobs: int = 1) -> ExperimentOutcome:
    """Run ``spec.hyper.runs`` seeded repetitions and summarize them.

    Runs are independent; with ``jobs > 1`` they execute in worker processes.
    Results are always reduced in run order so the summary does not depend on
    scheduling. When ``results_dir`` is given, each run's normalization and
    trained networks are written under ``<results_dir>/<spec.key>/run_<r>/``.
    """
    data = prepare_data(spec, sp_corpus, si_corpus)
    runs = range(spec.hyper.runs)
    if jobs > 1 and spec.hyper.runs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, spec.hyper.runs)) as pool:
            outputs = list(pool.map(_run_job, [(spec, data, r) for r in runs]))
    else:
        outputs = [run_single(spec, data, r) for r in runs]
    outputs.sort(key=lambda item: item[0].run)
    results = [res for res, _ in outputs]
    if results_dir is not None:
        for res, artifacts in outputs:
            save_run_artifacts(run_dir(results_dir, spec, res.run), res, artifacts)
    summary = summarize(results, spec.id, spec.variant)
    return ExperimentOutcome(spec, summary, results)


# -- persistence and audit --------------------------------------------------

def run_dir(results_dir, spec: ExperimentSpec, run: int) -> Path:
    return Path(results_dir) / spec.key / f"run_{run:03d}"


def save_run_artifacts(directory, result: RunResult, artifacts: RunArtifacts) -> None:
    directory = Path(directory)
    norm = artifacts.normalization
    write_atomic(directory / "normalization.txt", f"{norm.min_value!r} {norm.max_value!r}\n")
    for name, net in artifacts.networks.items():
        write_atomic(directory / f"{name}.txt", net.dumps())
    record = {k: getattr(result, k) for k in ("run", "seed") + METRICS}
    write_atomic(directory / "result.json", json.dumps(record, indent=2, sort_keys=True) + "\n")


def load_run_artifacts(directory) -> RunArtifacts:
    directory = Path(directory)
    lo, hi = (float(x) for x in (directory / "normalization.txt").read_text().split())
    networks = {p.stem: NetworkParams.loads(p.read_text())
                for p in sorted(directory.glob("*.txt")) if p.name != "normalization.txt"}
    return RunArtifacts(NormalizationParams(lo, hi), networks)


def recompute_test_rmse(spec: ExperimentSpec, directory, sp_corpus: Corpus) -> float:
    """Rebuild the SP test windows from persisted normalization and score the persisted networks."""
    artifacts = load_run_artifacts(directory)
    hp = spec.hyper
    _, sp_test = split_by_year(sp_corpus, hp.first_test_year)
    test = embed(apply_normalizer(concatenate(sp_test), artifacts.normalization), hp.D, hp.T)
    nets = artifacts.networks
    if spec.id == 4:
        members = [EnsembleMember(label, nets[f"{label}_member"], label, (hp.D, hp.T))
                   for label in ("target", "source")]
        return evaluate_transfer_stack(members, nets["combiner"], test)
    return rmse(test.targets, predict_batch(nets["network"], test))


# -- reports ----------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_csv(outcomes: Sequence[ExperimentOutcome]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for outcome in outcomes:
        for r in outcome.results:
            writer.writerow([outcome.spec.id, outcome.spec.variant or "", r.run, r.seed,
                             _fmt(r.train_rmse), _fmt(r.test_rmse), _fmt(r.categorical_rmse)])
    return out.getvalue()


def _summary_rows(outcomes: Sequence[ExperimentOutcome]):
    for outcome in outcomes:
        s = outcome.summary
        for name, m in s.metrics.items():
            yield s.experiment, s.variant or "", name, m.mean, m.std, s.n


def summary_csv(outcomes: Sequence[ExperimentOutcome]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in _summary_rows(outcomes):
        writer.writerow([_fmt(x) for x in row])
    return out.getvalue()


def summary_json(outcomes: Sequence[ExperimentOutcome]) -> str:
    rows = [dict(zip(SUMMARY_HEADER, row)) for row in _summary_rows(outcomes)]
    return json.dumps({"deviation": "std (n-1)", "summary": rows}, indent=2) + "\n"

