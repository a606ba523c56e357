"""Shared builders for randomized chains."""
import numpy as np
import pytest

from sisfilter import _linalg
from sisfilter.interconnect import _known_parts, stacked_system
from sisfilter.model import ChainModel, SignalDims, SubsystemBlock


def random_block(rng, dims: SignalDims, scale=0.5):
    nx, nu, ny, nw = dims.n_x, dims.n_u, dims.n_y, dims.n_w
    G = scale * rng.uniform(-1, 1, (nw, nw))
    # keep G22 comfortably invertible
    p = dims.n_wp
    G[p:, p:] += np.eye(dims.n_wm) * rng.choice([-1.0, 1.0]) * 1.5
    Mroot = rng.normal(size=(ny, ny))
    return SubsystemBlock(
        A=rng.uniform(-1, 1, (nx, nx)) / max(nx, 1),
        B=rng.uniform(-1, 1, (nx, nw)),
        C=rng.uniform(-1, 1, (nx, nu)),
        D=rng.uniform(-1, 1, (nw, nx)),
        G=G,
        H=rng.uniform(-1, 1, (nw, nu)),
        J=rng.uniform(-1, 1, (ny, nx)),
        R=rng.uniform(-1, 1, (ny, nu)),
        M=Mroot @ Mroot.T + 0.1 * np.eye(ny),
        dims=dims,
    )


def random_dims(rng, n_wp, n_wm, max_dim=4):
    return SignalDims(n_x=int(rng.integers(1, max_dim + 1)), n_u=int(rng.integers(0, 3)),
                      n_y=int(rng.integers(1, max_dim + 1)), n_wp=n_wp, n_wm=n_wm)


def random_states(rng, model):
    xs = [rng.normal(size=d.n_x) for d in model.dims]
    us = [rng.normal(size=d.n_u) for d in model.dims]
    return xs, us


def well_conditioned(model, t=1):
    blocks = model.blocks_at(t)
    rng = np.random.default_rng(0)
    xs, us = random_states(rng, model)
    L, _ = stacked_system(blocks, _known_parts(blocks, xs, us))
    return _linalg.rcond(L) > 1e-6


def random_chain(seed, S_m=None, horizon=5, max_dim=4):
    """Well-posed random chain; resamples until the stacked system is well conditioned."""
    rng = np.random.default_rng(seed)
    if S_m is None:
        S_m = int(rng.integers(2, 11))
    while True:
        n_wp = int(rng.integers(1, max_dim))
        n_wm = int(rng.integers(1, max_dim - n_wp + 1))
        blocks = [random_block(rng, random_dims(rng, n_wp, n_wm, max_dim)) for _ in range(S_m)]
        model = ChainModel(blocks, horizon)
        if S_m == 1 or well_conditioned(model):
            return model


def scalar_chain(G, S_m=3, horizon=10, D=None):
    """Chain of identical scalar blocks with ``n_wp = n_wm = 1``."""
    blk = SubsystemBlock.build([[0.5]], B=[[1.0, 1.0]], D=D if D is not None else [[1.0], [1.0]],
                               G=G, J=[[1.0]], M=[[1.0]], n_wp=1, n_wm=1)
    return ChainModel.uniform(blk, S_m, horizon)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
