"""Run the two-step filter over a recorded trace."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ChainModel
from .nahi import DropoutSchedule, FilterState, init_filter, step_all
from .sim import Trace


@dataclass
class FilterRun:
    """Estimates in trace layout (per index, ``(horizon, n_x)``).

    ``S_diag``/``T_diag`` are filled only when moments were requested.
    ``states`` keeps every :class:`FilterState` when ``keep_states`` is set.
    """

    estimates: list[np.ndarray]
    S_diag: Optional[list[np.ndarray]] = None
    T_diag: Optional[list[np.ndarray]] = None
    states: Optional[list[FilterState]] = None


def run_filter(model: ChainModel, trace: Trace, schedule: DropoutSchedule, second_moment,
               initial_mean=None, *, step1_truth=False, moments=False,
               keep_states=False) -> FilterRun:
    """Filter ``trace`` from ``t = 1`` to ``trace.horizon``.

    Observation ``y(t)`` produces the estimate for ``t + 1``, so the last
    observation is not used.  With ``step1_truth`` the interconnection is
    solved from the recorded true states instead of the estimates.
    """
    state = init_filter(model, second_moment, initial_mean)
    T_end = trace.horizon
    est = [np.zeros((T_end, d.n_x)) for d in model.dims]
    S_diag = [np.zeros((T_end, d.n_x)) for d in model.dims] if moments else None
    T_diag = [np.zeros((T_end, d.n_x)) for d in model.dims] if moments else None
    kept = [state] if keep_states else None

    def record(st):
        row = st.t - 1
        for k in range(model.length):
            est[k][row] = st.x_hat[k]
            if moments:
                S_diag[k][row] = np.diag(st.S[k])
                T_diag[k][row] = np.diag(st.T[k])

    record(state)
    for t in range(1, T_end):
        step1 = trace.at("x", t) if step1_truth else None
        state = step_all(model, state, trace.at("u", t), trace.at("y", t), schedule,
                         step1_states=step1)
        record(state)
        if keep_states:
            kept.append(state)
    return FilterRun(est, S_diag, T_diag, kept)


def run_predictor(model: ChainModel, trace: Trace, second_moment, initial_mean=None) -> FilterRun:
    """Prediction only: the same recursion with ``p = 0`` everywhere."""
    return run_filter(model, trace, DropoutSchedule.constant(0.0), second_moment, initial_mean)
