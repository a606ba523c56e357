import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sisfilter.errors import IndexRangeError, ShapeError
from sisfilter.model import ChainModel, SignalDims, SubsystemBlock, block_at, partition_g, validate_chain

from conftest import scalar_chain


# -- partition_g -----------------------------------------------------------

def test_partition_scalar_blocks():
    G11, G12, G21, G22 = partition_g([[1, 2], [3, 4]], SignalDims(1, n_wp=1, n_wm=1))
    assert (G11, G12, G21, G22) == ([[1]], [[2]], [[3]], [[4]])


def test_partition_identity():
    G11, G12, G21, G22 = partition_g(np.eye(4), SignalDims(1, n_wp=2, n_wm=2))
    np.testing.assert_array_equal(G11, np.eye(2))
    np.testing.assert_array_equal(G22, np.eye(2))
    assert not G12.any() and not G21.any()


def test_partition_no_rightward_signal():
    G = np.arange(9.0).reshape(3, 3)
    G11, G12, G21, G22 = partition_g(G, SignalDims(1, n_wp=0, n_wm=3))
    assert G11.shape == (0, 0) and G12.shape == (0, 3) and G21.shape == (3, 0)
    np.testing.assert_array_equal(G22, G)


def test_partition_rejects_wrong_shape():
    with pytest.raises(ShapeError):
        partition_g(np.eye(3), SignalDims(1, n_wp=1, n_wm=1))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_partition_reassembles_bit_exactly(n_wp, n_wm, seed):
    G = np.random.default_rng(seed).normal(size=(n_wp + n_wm,) * 2)
    G11, G12, G21, G22 = partition_g(G, SignalDims(1, n_wp=n_wp, n_wm=n_wm))
    back = np.block([[G11, G12], [G21, G22]]) if G.size else np.zeros((0, 0))
    assert np.array_equal(back, G)


# -- validate_chain --------------------------------------------------------

def test_identical_scalar_blocks_pass():
    report = validate_chain(scalar_chain([[0.0, 0.0], [0.0, 1.0]]))
    assert report.ok and report.lines() == ["OK"]


def test_singular_g22_reported_with_location():
    report = validate_chain(scalar_chain([[0.0, 0.0], [0.0, 0.0]]))
    assert not report.ok
    assert any(v.startswith("G22 singular at (t=1,i=2)") for v in report.violations)


def test_neighbor_mismatch_reported():
    b1 = SubsystemBlock.build([[1.0]], n_wp=1, n_wm=1, G=np.eye(2))
    b2 = SubsystemBlock.build([[1.0]], n_wp=2, n_wm=1, G=np.eye(3))
    model = ChainModel([b1, b2, b1], 3)
    report = validate_chain(model)
    assert any(v.startswith("neighbor dim mismatch at i=3") for v in report.violations)


def test_single_subsystem_needs_no_interconnection():
    ok = ChainModel([SubsystemBlock.build([[1.0]], J=[[1.0]], M=[[1.0]])], 4)
    assert validate_chain(ok).ok
    bad = ChainModel([SubsystemBlock.build([[1.0]], n_wp=1, n_wm=1, G=np.eye(2))], 4)
    assert "S_m=1 requires n_wp=n_wm=0 at i=1" in validate_chain(bad).violations


def test_non_psd_noise_reported():
    blk = SubsystemBlock.build([[1.0]], J=[[1.0]], M=[[-1.0]])
    report = validate_chain(ChainModel([blk], 2))
    assert len(report.violations) == 1 and "M not symmetric PSD" in report.violations[0]


def test_time_varying_dims_change_reported():
    base = SubsystemBlock.build([[1.0]], J=[[1.0]], M=[[1.0]])
    other = SubsystemBlock.build(np.eye(2), J=[[1.0, 0.0]], M=[[1.0]])
    model = ChainModel([base], 3, overrides={(2, 1): other})
    assert validate_chain(model).violations == ["dims changed over time at (t=2,i=1)"]


MATRICES = ["A", "B", "C", "D", "G", "H", "J", "R", "M"]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(MATRICES), st.integers(1, 3), st.sampled_from([0, 1]),
       st.integers(1, 3))
def test_corrupting_one_dimension_reports_exactly_that(name, index, axis, S_m):
    dims = SignalDims(n_x=2, n_u=1, n_y=1, n_wp=1, n_wm=1)
    rng = np.random.default_rng(0)
    shapes = dims.shapes()
    mats = {k: rng.uniform(-1, 1, s) for k, s in shapes.items()}
    mats["G"][1, 1] = 2.0
    mats["M"] = np.eye(1)
    if S_m == 1:
        dims = SignalDims(n_x=2, n_u=1, n_y=1)
        shapes = dims.shapes()
        mats = {k: np.zeros(s) for k, s in shapes.items()}
        mats["M"] = np.eye(1)
    good = SubsystemBlock(dims=dims, **mats)
    assert validate_chain(ChainModel([good] * S_m, 2)).ok
    index = min(index, S_m)
    shape = list(shapes[name])
    shape[axis] += 1
    bad = good.replace(**{name: np.ones(shape)})
    blocks = [good] * S_m
    blocks[index - 1] = bad
    violations = validate_chain(ChainModel(blocks, 2)).violations
    assert len(violations) == 1
    assert violations[0].startswith(f"block at (t=1,i={index}): {name} is {shape[0]}x{shape[1]}")


# -- block_at --------------------------------------------------------------

def test_time_invariant_lookup():
    model = scalar_chain([[0.0, 0.0], [0.0, 1.0]], horizon=10)
    a, b = block_at(model, 1, 2), block_at(model, 7, 2)
    for name in MATRICES:
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@pytest.mark.parametrize("t,i", [(0, 1), (11, 1), (1, 0), (1, 4)])
def test_out_of_range(t, i):
    with pytest.raises(IndexRangeError):
        scalar_chain([[0.0, 0.0], [0.0, 1.0]], horizon=10).block_at(t, i)


def test_rule_based_time_variation():
    model = ChainModel.from_rule(lambda t, i: SubsystemBlock.build(t * np.eye(2)), 2, 5)
    np.testing.assert_array_equal(model.block_at(3, 1).A, 3 * np.eye(2))
    assert not model.time_invariant


def test_blocks_are_read_only():
    blk = SubsystemBlock.build([[1.0]])
    with pytest.raises(ValueError):
        blk.A[0, 0] = 2.0


def test_build_fills_zeros_and_infers_sizes():
    blk = SubsystemBlock.build(np.eye(2), C=np.ones((2, 3)), J=np.ones((1, 2)), n_wp=1)
    assert blk.dims == SignalDims(n_x=2, n_u=3, n_y=1, n_wp=1, n_wm=0)
    assert blk.R.shape == (1, 3) and not blk.R.any()
    assert blk.violations() == []
