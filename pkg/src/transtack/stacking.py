"""Two-phase transfer stacking.

Phase one trains one network on the target data and one on the source data.
Their predictions on a dataset become the columns of a stacked dataset, and a
combiner network is trained on the stacked training data. Testing mirrors
this: test windows go through every member, then through the combiner.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from transtack.errors import DimensionMismatch, EmptyDataset
from transtack.neuralnet import (
    NetworkParams,
    TrainingConfig,
    TrainingTrace,
    init_network,
    predict_batch,
    rmse,
    train_sgd,
)
from transtack.timeseries import EmbeddedDataset

TARGET = "target"
SOURCE = "source"
STACK_MODES = ("target-only", "union")


@dataclass(frozen=True, eq=False)
class EnsembleMember:
    label: str
    network: NetworkParams
    provenance: str
    embedding: tuple[int, int]
    trace: TrainingTrace | None = None

    def __post_init__(self):
        if self.label not in (TARGET, SOURCE):
            raise ValueError(f"member label must be {TARGET!r} or {SOURCE!r}, got {self.label!r}")
        if self.network.input_dim != self.embedding[0]:
            raise DimensionMismatch(
                f"member network takes {self.network.input_dim} inputs but embedding D={self.embedding[0]}")


@dataclass(frozen=True)
class StackedDataset:
    """Ensemble outputs (one column per member) paired with the original targets."""

    inputs: np.ndarray
    targets: np.ndarray = field(repr=False)

    def __post_init__(self):
        targets = np.array(self.targets, dtype=np.float64).reshape(-1)
        inputs = np.array(self.inputs, dtype=np.float64)
        if inputs.ndim == 1:
            inputs = inputs.reshape(targets.shape[0], -1) if targets.size else inputs.reshape(0, 1)
        if inputs.ndim != 2 or inputs.shape[0] != targets.shape[0]:
            raise DimensionMismatch(f"stacked inputs {inputs.shape} do not align with {targets.shape[0]} targets")
        inputs.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def member_count(self) -> int:
        return self.inputs.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return self.targets.shape[0]

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow([f"col_{k + 1}" for k in range(self.member_count)] + ["target"])
        for row, target in zip(self.inputs, self.targets):
            writer.writerow([repr(float(x)) for x in row] + [repr(float(target))])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "StackedDataset":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise ValueError("stacked CSV has no header")
        header = rows[0]
        K = len(header) - 1
        expected = [f"col_{k + 1}" for k in range(K)] + ["target"]
        if K < 1 or header != expected:
            raise ValueError(f"stacked CSV header must be {','.join(expected)!r}")
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64).reshape(-1, K + 1)
        return cls(data[:, :K], data[:, K])

    @classmethod
    def concat(cls, parts: Sequence["StackedDataset"]) -> "StackedDataset":
        return cls(np.vstack([p.inputs for p in parts]), np.concatenate([p.targets for p in parts]))


def _embedding_of(data: EmbeddedDataset) -> tuple[int, int]:
    return (data.embedding_dimension, data.time_lag)


def train_member(label: str, data: EmbeddedDataset, hidden: int, config: TrainingConfig,
                 provenance: str = "") -> EnsembleMember:
    if len(data) == 0:
        raise EmptyDataset(f"{label} training data is empty")
    params = init_network(data.embedding_dimension, hidden, config.seed)
    network, trace = train_sgd(params, data, config)
    return EnsembleMember(label, network, provenance or label, _embedding_of(data), trace)


def train_ensembles(source_data: EmbeddedDataset, target_data: EmbeddedDataset,
                    hidden: int | tuple[int, int], config: TrainingConfig,
                    seeds: tuple[int, int] | None = None) -> list[EnsembleMember]:
    """Phase one: train the target member and the source member.

    Returns ``[target_member, source_member]``. Unless ``seeds`` overrides them,
    the members use ``config.seed`` and ``config.seed + 1``. ``hidden`` is one
    hidden size for both members or a ``(target, source)`` pair.
    """
    if _embedding_of(source_data) != _embedding_of(target_data):
        raise DimensionMismatch(
            f"source embedding (D, T)={_embedding_of(source_data)} differs from target {_embedding_of(target_data)}")
    if len(source_data) == 0 or len(target_data) == 0:
        raise EmptyDataset("source and target training data must be non-empty")
    h_target, h_source = (hidden, hidden) if isinstance(hidden, int) else hidden
    s_target, s_source = seeds if seeds is not None else (config.seed, config.seed + 1)
    return [
        train_member(TARGET, target_data, h_target, config.with_seed(s_target), "target-train"),
        train_member(SOURCE, source_data, h_source, config.with_seed(s_source), "source-train"),
    ]


def _check_members(members: Sequence[EnsembleMember], data: EmbeddedDataset) -> None:
    if not members:
        raise ValueError("at least one ensemble member is required")
    for m in members:
        if m.network.input_dim != data.embedding_dimension or m.embedding[1] != data.time_lag:
            raise DimensionMismatch(
                f"{m.label} member expects (D, T)={m.embedding}, data has {_embedding_of(data)}")


def build_stacked_dataset(members: Sequence[EnsembleMember], data: EmbeddedDataset) -> StackedDataset:
    """Column ``k`` holds member ``k``'s prediction for each pattern; targets are copied."""
    _check_members(members, data)
    columns = [predict_batch(m.network, data) for m in members]
    inputs = np.column_stack(columns) if len(data) else np.empty((0, len(members)))
    return StackedDataset(inputs, data.targets)


def stacked_training_data(members: Sequence[EnsembleMember], target_train: EmbeddedDataset,
                          source_train: EmbeddedDataset | None = None,
                          mode: str = "target-only") -> StackedDataset:
    """Combiner training set: the target training windows mapped through all members,
    plus the source training windows when ``mode == "union"``."""
    if mode not in STACK_MODES:
        raise ValueError(f"unknown stacking mode {mode!r}; expected one of {STACK_MODES}")
    stacked = build_stacked_dataset(members, target_train)
    if mode == "union":
        if source_train is None:
            raise ValueError("union mode needs the source training data")
        stacked = StackedDataset.concat([stacked, build_stacked_dataset(members, source_train)])
    return stacked


def train_combiner(stacked_train: StackedDataset, hidden: int,
                   config: TrainingConfig) -> tuple[NetworkParams, TrainingTrace]:
    """Train the combiner; its input width is the number of members."""
    if len(stacked_train) == 0:
        raise EmptyDataset("stacked training data is empty")
    params = init_network(stacked_train.member_count, hidden, config.seed)
    return train_sgd(params, stacked_train, config)


def evaluate_transfer_stack(members: Sequence[EnsembleMember], combiner: NetworkParams,
                            test_data: EmbeddedDataset) -> float:
    if len(test_data) == 0:
        raise EmptyDataset("test data is empty")
    stacked = build_stacked_dataset(members, test_data)
    if combiner.input_dim != stacked.member_count:
        raise DimensionMismatch(f"combiner takes {combiner.input_dim} inputs, ensemble has {stacked.member_count}")
    return rmse(stacked.targets, predict_batch(combiner, stacked))


@dataclass(frozen=True, eq=False)
class TransferStack:
    members: list[EnsembleMember]
    combiner: NetworkParams
    combiner_trace: TrainingTrace
    stacked_train: StackedDataset


def fit_transfer_stack(source_train: EmbeddedDataset, target_train: EmbeddedDataset, hidden: int,
                       config: TrainingConfig, combiner_hidden: int | None = None,
                       mode: str = "target-only") -> TransferStack:
    """Run both phases with seeds ``seed``, ``seed + 1`` (members) and ``seed + 2`` (combiner)."""
    members = train_ensembles(source_train, target_train, hidden, config)
    stacked = stacked_training_data(members, target_train, source_train, mode)
    combiner, trace = train_combiner(stacked, combiner_hidden or hidden, config.with_seed(config.seed + 2))
    return TransferStack(members, combiner, trace, stacked)
