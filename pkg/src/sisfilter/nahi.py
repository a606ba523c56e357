"""Local recursive estimators robust to Bernoulli-missing measurements.

Each subsystem runs the uncertain-observation recursion::

    xi2 = p A T J' [M + p^2 J T J' + (p - p^2) J S J']^{-1}
    xi1 = A - p xi2 J
    x_hat(t+1) = xi1 x_hat(t) + xi2 (y - c2) + c1
    S(t+1) = A S A'
    T(t+1) = (A - p xi2 J) T A'

with ``c1 = B v_hat + C u`` and ``c2 = R u``.  ``S`` is the unconditional
second moment of the state and ``T`` the error moment that drives the gain.
The dynamics carry no process noise, so neither recursion adds one.

The interconnection ``v_hat`` is recomputed at every step from the current
estimates (the only causal choice; the true states are not available to a
filter).  :func:`step_all` can be fed true states instead for oracle checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _linalg
from .errors import IndexRangeError, ShapeError, SingularBlockError, ValidationError
from .interconnect import solve_interconnect
from .model import ChainModel, SubsystemBlock


def _check_probability(p, where=""):
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"probability {p!r} outside [0, 1]{where}")
    return float(p)


class DropoutSchedule:
    """Probability ``p(t,i)`` that observation ``y(t,i)`` carries the state.

    A scalar ``default`` applies everywhere; ``per_index`` (one value per
    subsystem) overrides it, and ``per_time`` (``{t: [p per index]}``)
    overrides both.
    """

    def __init__(self, default: float = 1.0, per_index: Optional[Sequence[float]] = None,
                 per_time: Optional[Mapping[int, Sequence[float]]] = None):
        self.default = _check_probability(default)
        self.per_index = None
        if per_index is not None:
            self.per_index = tuple(_check_probability(p, f" at i={i}")
                                   for i, p in enumerate(per_index, start=1))
        self.per_time = {}
        for t, row in (per_time or {}).items():
            self.per_time[int(t)] = tuple(_check_probability(p, f" at (t={t},i={i})")
                                          for i, p in enumerate(row, start=1))

    @classmethod
    def constant(cls, p: float) -> "DropoutSchedule":
        return cls(default=p)

    def at(self, t: int, i: int) -> float:
        row = self.per_time.get(t)
        if row is not None:
            return row[i - 1]
        if self.per_index is not None:
            return self.per_index[i - 1]
        return self.default

    def __call__(self, t, i):
        return self.at(t, i)

    def to_config(self):
        if self.per_index is None and not self.per_time:
            return self.default
        out = {"default": self.default}
        if self.per_index is not None:
            out["per_index"] = list(self.per_index)
        if self.per_time:
            out["per_time"] = {str(t): list(row) for t, row in sorted(self.per_time.items())}
        return out

    def __repr__(self):
        return f"DropoutSchedule({self.to_config()!r})"


@dataclass(frozen=True)
class GainPair:
    xi1: np.ndarray
    xi2: np.ndarray


@dataclass(frozen=True)
class FilterState:
    """Estimates and moment matrices of every subsystem at time ``t``."""

    t: int
    x_hat: tuple[np.ndarray, ...]
    S: tuple[np.ndarray, ...]
    T: tuple[np.ndarray, ...]

    @property
    def length(self) -> int:
        return len(self.x_hat)


def innovation_matrix(block: SubsystemBlock, p: float, S, T) -> np.ndarray:
    J = block.J
    X = block.M + p * p * (J @ T @ J.T) + (p - p * p) * (J @ S @ J.T)
    return _linalg.symmetrize(X)


def gains(block: SubsystemBlock, p: float, S, T, t=None, i=None) -> GainPair:
    """Gain pair for one subsystem.

    Raises
    ------
    SingularBlockError
        When ``p > 0`` and the innovation matrix has rcond at or below
        1e-12, typically a singular ``M`` with a singular ``J T J'``.
        At ``p = 0`` the gain is zero and nothing is inverted.
    """
    p = _check_probability(p)
    A, J = block.A, block.J

    def fail(rc):
        raise SingularBlockError("innovation matrix", t=t, i=i, rcond=rc)

    if p == 0.0:
        # the leading factor p is zero, so the bracket is never inverted
        xi2 = np.zeros((A.shape[0], J.shape[0]))
    else:
        X_inv = _linalg.inv_checked(innovation_matrix(block, p, S, T), fail)
        xi2 = p * (A @ T @ J.T) @ X_inv
    xi1 = A - p * xi2 @ J
    return GainPair(xi1, xi2)


def local_update(block: SubsystemBlock, p: float, x_hat, S, T, y, c1, c2, t=None, i=None):
    """One recursion step for a single subsystem; returns ``(x_next, S_next, T_next)``."""
    d = block.dims
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (d.n_y,):
        raise ShapeError(f"observation has size {y.size}, expected {d.n_y}")
    g = gains(block, p, S, T, t=t, i=i)
    x_next = g.xi1 @ x_hat + g.xi2 @ (y - c2) + c1
    A = block.A
    S_next = A @ S @ A.T
    T_next = g.xi1 @ T @ A.T
    return x_next, S_next, T_next


def update(state: FilterState, block: SubsystemBlock, p: float, y, c1, c2, i: int) -> FilterState:
    """Advance subsystem ``i`` of ``state`` by one step and bump ``state.t``.

    Meant for single-subsystem use; :func:`step_all` advances a whole chain.
    """
    k = i - 1
    x_next, S_next, T_next = local_update(block, p, state.x_hat[k], state.S[k], state.T[k],
                                          y, np.asarray(c1, float), np.asarray(c2, float),
                                          t=state.t, i=i)

    def put(seq, val):
        return seq[:k] + (val,) + seq[k + 1:]

    return FilterState(state.t + 1, put(state.x_hat, x_next), put(state.S, S_next),
                       put(state.T, T_next))


def init_filter(model: ChainModel, second_moment, initial_mean=None) -> FilterState:
    """Start at ``t = 1`` with ``S = T = second_moment`` per subsystem.

    ``second_moment`` and ``initial_mean`` are per-index sequences; a missing
    mean means zero.
    """
    S_m = model.length
    if len(second_moment) != S_m:
        raise ShapeError(f"got {len(second_moment)} second moments for {S_m} subsystems")
    if initial_mean is None:
        initial_mean = [np.zeros(d.n_x) for d in model.dims]
    x_hat, S = [], []
    for i, (d, P, m) in enumerate(zip(model.dims, second_moment, initial_mean), start=1):
        P = np.array(P, dtype=float).reshape(d.n_x, d.n_x)
        reason = _linalg.psd_violation(P, sym_tol=1e-12, eig_tol=-1e-10)
        if reason is not None:
            raise ValidationError(f"second moment at i={i} not PSD: {reason}")
        m = np.array(m, dtype=float).reshape(-1)
        if m.shape != (d.n_x,):
            raise ShapeError(f"initial mean at i={i} has size {m.size}, expected {d.n_x}")
        x_hat.append(m)
        S.append(P)
    return FilterState(1, tuple(x_hat), tuple(S), tuple(S))


def known_inputs(block: SubsystemBlock, v, u):
    """``(c1, c2) = (B v + C u, R u)``."""
    c1 = block.B @ v
    c2 = np.zeros(block.dims.n_y)
    if block.dims.n_u:
        u = np.asarray(u, dtype=float).reshape(-1)
        c1 = c1 + block.C @ u
        c2 = block.R @ u
    return c1, c2


def step_all(model: ChainModel, state: FilterState, u_all, y_all, schedule,
             step1_states=None) -> FilterState:
    """Advance every subsystem from ``state.t`` to ``state.t + 1``.

    The interconnection is solved from ``state.x_hat`` unless
    ``step1_states`` supplies other states (for oracle comparisons).
    ``schedule`` is a :class:`DropoutSchedule` or any ``(t, i) -> p`` callable.
    """
    t = state.t
    if t > model.horizon:
        raise IndexRangeError(f"filter time t={t} beyond model horizon {model.horizon}")
    S_m = model.length
    if u_all is None:
        u_all = [None] * S_m
    states = state.x_hat if step1_states is None else step1_states
    sol = solve_interconnect(model, t, states, u_all)
    x_hat, S, T = [], [], []
    for i in range(1, S_m + 1):
        block = model.block_at(t, i)
        c1, c2 = known_inputs(block, sol.v(i), u_all[i - 1])
        p = schedule(t, i)
        xn, Sn, Tn = local_update(block, p, state.x_hat[i - 1], state.S[i - 1],
                                  state.T[i - 1], y_all[i - 1], c1, c2, t=t, i=i)
        x_hat.append(xn)
        S.append(Sn)
        T.append(Tn)
    return FilterState(t + 1, tuple(x_hat), tuple(S), tuple(T))
