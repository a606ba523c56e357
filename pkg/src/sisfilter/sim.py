"""Seeded ground-truth simulation of a chain with random measurement dropout.

Randomness comes from three independent Philox (counter-based) streams
spawned from one ``numpy.random.SeedSequence``:

* ``init``  - initial state draws,
* ``gamma`` - one uniform per ``(t, i)``, compared against ``p(t,i)``,
* ``noise`` - ``n_y`` standard normals per ``(t, i)``.

Each stream is consumed the same way whatever the dropout probabilities are,
so two scenarios that differ only in ``p`` see identical noise.  True
interconnections come from :func:`~sisfilter.interconnect.monolithic_solve`,
which keeps the ground truth independent of the chain recursion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import SISError, ShapeError, SimulationError, ValidationError
from .interconnect import monolithic_solve
from .model import ChainModel
from .nahi import DropoutSchedule

STREAMS = ("init", "gamma", "noise")
EIG_CLIP_TOL = 1e-10


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(ss)) for name, ss in zip(STREAMS, children)}


def gaussian_factor(cov) -> np.ndarray:
    """``F`` with ``F F' = cov`` via symmetric eigendecomposition.

    Eigenvalues in ``[-1e-10, 0)`` are clipped to zero; anything more
    negative is rejected.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.size == 0:
        return np.zeros(cov.shape)
    lam, Q = np.linalg.eigh(0.5 * (cov + cov.T))
    if lam.min() < -EIG_CLIP_TOL:
        raise ValidationError(f"covariance has negative eigenvalue {lam.min():.3g}")
    return Q * np.sqrt(np.clip(lam, 0.0, None))


def sample_gamma(rng_state: dict, p: float):
    """Draw one dropout indicator from a Philox state.

    Returns ``(gamma, new_state)``; ``rng_state`` itself is left untouched,
    so the call is a pure function of its arguments.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability {p!r} outside [0, 1]")
    bg = np.random.Philox()
    bg.state = rng_state
    gamma = int(np.random.Generator(bg).random() < p)
    return gamma, bg.state


@dataclass(frozen=True)
class InitialCondition:
    """Per-index Gaussian initial state; ``cov=None`` means a fixed vector."""

    mean: tuple[np.ndarray, ...]
    cov: Optional[tuple[np.ndarray, ...]] = None

    @classmethod
    def fixed(cls, values):
        return cls(tuple(np.asarray(v, dtype=float).reshape(-1) for v in values))

    @classmethod
    def gaussian(cls, mean, cov):
        return cls(tuple(np.asarray(m, dtype=float).reshape(-1) for m in mean),
                   tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in cov))

    def second_moment(self) -> list[np.ndarray]:
        """``E[x x']`` per index (``cov + m m'``)."""
        out = []
        for k, m in enumerate(self.mean):
            P = np.outer(m, m)
            if self.cov is not None:
                P = P + self.cov[k]
            out.append(P)
        return out


InputFn = Callable[[int, int], np.ndarray]


@dataclass(frozen=True)
class Scenario:
    model: ChainModel
    horizon: int
    schedule: DropoutSchedule
    seed: int
    init: InitialCondition
    inputs: Optional[InputFn] = None

    def __post_init__(self):
        if not 1 <= self.horizon <= self.model.horizon:
            raise ValidationError(f"scenario horizon {self.horizon} outside [1, {self.model.horizon}]")
        if len(self.init.mean) != self.model.length:
            raise ShapeError("initial condition must cover every subsystem")
        if self.init.cov is not None:
            for c in self.init.cov:
                gaussian_factor(c)

    def input_at(self, t: int, i: int) -> np.ndarray:
        n_u = self.model.dims[i - 1].n_u
        if self.inputs is None or n_u == 0:
            return np.zeros(n_u)
        u = np.asarray(self.inputs(t, i), dtype=float).reshape(-1)
        if u.shape != (n_u,):
            raise ShapeError(f"input at (t={t},i={i}) has size {u.size}, expected {n_u}")
        return u


@dataclass
class Trace:
    """Simulation record.  Every per-index list holds a ``(horizon, n)`` array
    whose row ``t-1`` is the value at time ``t``.
    """

    seed: int
    horizon: int
    x: list[np.ndarray]
    u: list[np.ndarray]
    v_plus: list[np.ndarray]
    v_minus: list[np.ndarray]
    w_plus: list[np.ndarray]
    w_minus: list[np.ndarray]
    gamma: np.ndarray
    y: list[np.ndarray]
    d: Optional[list[np.ndarray]] = field(default=None)

    @property
    def length(self) -> int:
        return len(self.x)

    def at(self, kind: str, t: int) -> list[np.ndarray]:
        """All per-index vectors of ``kind`` at time ``t``."""
        return [arr[t - 1] for arr in getattr(self, kind)]


def simulate(scenario: Scenario) -> Trace:
    """Generate a trace; identical scenarios give bit-identical traces.

    Raises
    ------
    SimulationError
        If the interconnection at some ``t`` is ill-posed.
    """
    model = scenario.model
    S_m, T_end = model.length, scenario.horizon
    dims = model.dims
    rng = spawn_streams(scenario.seed)

    def alloc(attr):
        return [np.zeros((T_end, getattr(d, attr))) for d in dims]

    x, u, y, d = alloc("n_x"), alloc("n_u"), alloc("n_y"), alloc("n_y")
    v_plus, w_plus = alloc("n_wp"), alloc("n_wp")
    v_minus, w_minus = alloc("n_wm"), alloc("n_wm")
    gamma = np.zeros((T_end, S_m), dtype=int)
    factors = {}

    def noise_factor(block):
        # keyed by identity; the block is kept alive alongside its factor
        hit = factors.get(id(block))
        if hit is None or hit[0] is not block:
            hit = factors[id(block)] = (block, gaussian_factor(block.M))
        return hit[1]

    for k in range(S_m):
        x0 = scenario.init.mean[k].copy()
        if scenario.init.cov is not None:
            F = gaussian_factor(scenario.init.cov[k])
            x0 = x0 + F @ rng["init"].standard_normal(F.shape[1])
        x[k][0] = x0

    for t in range(1, T_end + 1):
        xs = [x[k][t - 1] for k in range(S_m)]
        us = [scenario.input_at(t, k + 1) for k in range(S_m)]
        try:
            sol = monolithic_solve(model, t, xs, us)
        except SISError as exc:
            raise SimulationError(t, exc) from exc
        for k in range(S_m):
            i = k + 1
            block = model.block_at(t, i)
            u[k][t - 1] = us[k]
            v_plus[k][t - 1] = sol.v_plus[k]
            v_minus[k][t - 1] = sol.v_minus[k]
            w_plus[k][t - 1] = sol.w_plus[k]
            w_minus[k][t - 1] = sol.w_minus[k]
            g = int(rng["gamma"].random() < scenario.schedule.at(t, i))
            gamma[t - 1, k] = g
            F = noise_factor(block)
            noise = F @ rng["noise"].standard_normal(F.shape[1])
            d[k][t - 1] = noise
            y[k][t - 1] = g * (block.J @ xs[k]) + block.R @ us[k] + noise
            if t < T_end:
                x[k][t] = block.A @ xs[k] + block.B @ sol.v(i) + block.C @ us[k]

    return Trace(scenario.seed, T_end, x, u, v_plus, v_minus, w_plus, w_minus, gamma, y, d)


def mse(trace: Trace, estimates: Sequence[np.ndarray]):
    """Per-time and aggregate mean squared state error.

    ``MSE(t) = (1/S_m) sum_i ||x(t,i) - x_hat(t,i)||^2``; the aggregate is the
    mean of ``MSE(t)`` over time.  ``estimates`` follows the trace layout.
    """
    if len(estimates) != trace.length:
        raise ShapeError(f"got estimates for {len(estimates)} subsystems, trace has {trace.length}")
    total = np.zeros(trace.horizon)
    for k, (xt, xe) in enumerate(zip(trace.x, estimates)):
        xe = np.asarray(xe, dtype=float)
        if xe.shape != xt.shape:
            raise ShapeError(f"estimates at i={k + 1} have shape {xe.shape}, expected {xt.shape}")
        total += np.sum((xt - xe) ** 2, axis=1)
    per_t = total / trace.length
    return per_t, float(per_t.mean())
