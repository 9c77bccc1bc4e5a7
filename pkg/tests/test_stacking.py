import numpy as np
import pytest

from transtack.errors import DimensionMismatch, EmptyDataset
from transtack.neuralnet import NetworkParams, TrainingConfig, forward, init_network, predict_batch, rmse, train_sgd
from transtack.stacking import (
    EnsembleMember,
    StackedDataset,
    build_stacked_dataset,
    evaluate_transfer_stack,
    fit_transfer_stack,
    stacked_training_data,
    train_combiner,
    train_ensembles,
)
from transtack.timeseries import EmbeddedDataset, embed

FAST = TrainingConfig(epochs=40, learning_rate=0.1, seed=3)


def wave(n, period, phase=0.0, D=5, T=1):
    t = np.arange(n)
    return embed(0.5 + 0.35 * np.sin(2 * np.pi * t / period + phase), D, T)


def member(label, seed, D=5, T=1, H=4):
    return EnsembleMember(label, init_network(D, H, seed), label, (D, T))


def test_train_ensembles_returns_target_then_source():
    target, source = wave(150, 25), wave(200, 30, 1.0)
    members = train_ensembles(source, target, 4, FAST)
    assert [m.label for m in members] == ["target", "source"]
    expect_t, _ = train_sgd(init_network(5, 4, 3), target, FAST)
    expect_s, _ = train_sgd(init_network(5, 4, 4), source, FAST.with_seed(4))
    assert members[0].network.equals(expect_t)
    assert members[1].network.equals(expect_s)


def test_identical_data_and_forced_seeds_give_identical_members():
    data = wave(120, 20)
    a, b = train_ensembles(data, data, 4, FAST, seeds=(11, 11))
    assert a.network.equals(b.network)


def test_member_final_rmse_matches_recomputation():
    target, source = wave(150, 25), wave(200, 30, 1.0)
    for m, data in zip(train_ensembles(source, target, 4, FAST), (target, source)):
        assert m.trace.final == rmse(data.targets, predict_batch(m.network, data))


def test_train_ensembles_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        train_ensembles(wave(100, 20, D=4), wave(100, 20, D=5), 4, FAST)
    with pytest.raises(DimensionMismatch):
        train_ensembles(wave(100, 20, T=2), wave(100, 20, T=1), 4, FAST)


def test_build_stacked_dataset_cells_are_forward_calls():
    full = wave(8, 10)
    data = EmbeddedDataset(5, 1, full.inputs[:3], full.targets[:3])
    members = [member("target", 1), member("source", 2)]
    stacked = build_stacked_dataset(members, data)
    assert stacked.inputs.shape == (3, 2)
    for i in range(3):
        for k in range(2):
            assert stacked.inputs[i, k] == forward(members[k].network, data.inputs[i])
    assert np.array_equal(stacked.targets, data.targets)


def test_zero_weight_member_column_is_half():
    zero = EnsembleMember("source", NetworkParams(np.zeros((5, 3)), np.zeros(3), np.zeros(3), 0.0), "z", (5, 1))
    stacked = build_stacked_dataset([member("target", 1), zero], wave(30, 10))
    assert np.all(stacked.inputs[:, 1] == 0.5)


def test_single_member_stack_has_width_one():
    stacked = build_stacked_dataset([member("target", 1)], wave(30, 10))
    assert stacked.member_count == 1


def test_build_stacked_dataset_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        build_stacked_dataset([member("target", 1, D=4)], wave(30, 10))
    with pytest.raises(DimensionMismatch):
        build_stacked_dataset([member("target", 1, T=1)], wave(30, 10, T=2))


def test_union_mode_appends_source_rows():
    target, source = wave(60, 20), wave(80, 15)
    members = [member("target", 1), member("source", 2)]
    only = stacked_training_data(members, target, source, "target-only")
    both = stacked_training_data(members, target, source, "union")
    assert len(only) == len(target)
    assert len(both) == len(target) + len(source)
    assert np.array_equal(both.inputs[: len(target)], only.inputs)
    with pytest.raises(ValueError):
        stacked_training_data(members, target, source, "bogus")


def test_combiner_topology_and_determinism():
    stacked = build_stacked_dataset([member("target", 1), member("source", 2)], wave(80, 20))
    a, _ = train_combiner(stacked, 5, FAST)
    b, _ = train_combiner(stacked, 5, FAST)
    assert a.input_dim == 2 and a.hidden_count == 5
    assert a.equals(b)
    with pytest.raises(EmptyDataset):
        train_combiner(StackedDataset(np.empty((0, 2)), []), 5, FAST)


def test_evaluate_equals_manual_pipeline():
    test = wave(90, 20, 0.3)
    members = [member("target", 1), member("source", 2)]
    combiner = init_network(2, 3, 9)
    stacked = build_stacked_dataset(members, test)
    manual = rmse(test.targets, predict_batch(combiner, stacked))
    assert evaluate_transfer_stack(members, combiner, test) == manual


def test_evaluate_errors():
    members = [member("target", 1), member("source", 2)]
    with pytest.raises(EmptyDataset):
        evaluate_transfer_stack(members, init_network(2, 3, 0), EmbeddedDataset(5, 1, np.empty((0, 5)), []))
    with pytest.raises(DimensionMismatch):
        evaluate_transfer_stack(members, init_network(3, 3, 0), wave(30, 10))


def test_pass_through_combiner_reproduces_member_rmse():
    train, test = wave(400, 25), wave(200, 25, 0.7)
    good = EnsembleMember("target", train_sgd(init_network(5, 7, 0), train,
                                              TrainingConfig(epochs=300, seed=0))[0], "t", (5, 1))
    other = member("source", 5)
    # Fit a 1-input identity map on a grid, then give column 2 zero weight.
    grid = np.linspace(0, 1, 201)
    ident, _ = train_sgd(init_network(1, 7, 1), StackedDataset(grid[:, None], grid),
                         TrainingConfig(epochs=2000, learning_rate=0.5, seed=1))
    copy_first = NetworkParams(np.vstack([ident.w, np.zeros((1, 7))]), ident.hidden_bias, ident.v,
                               ident.output_bias)
    member_rmse = rmse(test.targets, predict_batch(good.network, test))
    stacked_rmse = evaluate_transfer_stack([good, other], copy_first, test)
    assert abs(stacked_rmse - member_rmse) < 0.01


def test_fit_transfer_stack_seeds():
    target, source = wave(120, 25), wave(160, 30, 1.0)
    stack = fit_transfer_stack(source, target, 4, FAST)
    combiner, _ = train_combiner(build_stacked_dataset(stack.members, target), 4, FAST.with_seed(5))
    assert stack.combiner.equals(combiner)
    again = fit_transfer_stack(source, target, 4, FAST)
    assert evaluate_transfer_stack(stack.members, stack.combiner, target) == \
        evaluate_transfer_stack(again.members, again.combiner, target)


def test_stacked_csv_round_trip():
    stacked = build_stacked_dataset([member("target", 1), member("source", 2)], wave(40, 10))
    text = stacked.to_csv()
    assert text.splitlines()[0] == "col_1,col_2,target"
    back = StackedDataset.from_csv(text)
    assert np.array_equal(back.inputs, stacked.inputs)
    assert np.array_equal(back.targets, stacked.targets)
    with pytest.raises(ValueError):
        StackedDataset.from_csv("a,b,target\n0.1,0.2,0.3\n")
