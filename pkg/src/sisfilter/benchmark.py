"""Reference scenario: three coupled 2-state subsystems, ``p = 0.7``.

Each subsystem rotates its state with spectral radius 0.95, observes the
first component through unit-variance noise and exchanges one rightward and
one leftward signal with its neighbours.
"""
import numpy as np

from .model import ChainModel, SubsystemBlock
from .nahi import DropoutSchedule
from .sim import InitialCondition, Scenario

RHO = 0.95
ANGLE = 0.3
P_OBS = 0.7


def benchmark_block() -> SubsystemBlock:
    c, s = np.cos(ANGLE), np.sin(ANGLE)
    A = RHO * np.array([[c, -s], [s, c]])
    return SubsystemBlock.build(
        A,
        B=[[0.10, 0.05], [0.05, 0.10]],
        D=[[0.30, 0.00], [0.00, 0.30]],
        G=[[0.20, 0.10], [0.10, 1.00]],
        J=[[1.0, 0.0]],
        M=[[1.0]],
        n_wp=1,
        n_wm=1,
    )


def benchmark_model(horizon: int = 100) -> ChainModel:
    return ChainModel.uniform(benchmark_block(), 3, horizon)


def benchmark_scenario(seed: int, horizon: int = 100, p: float = P_OBS) -> Scenario:
    model = benchmark_model(horizon)
    init = InitialCondition.gaussian([np.zeros(2)] * 3, [4.0 * np.eye(2)] * 3)
    return Scenario(model, horizon, DropoutSchedule.constant(p), seed, init)
