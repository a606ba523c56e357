"""Reference estimators used to check the distributed filter.

Both are written in the textbook measurement-update / time-update form so
they share no code with :mod:`sisfilter.nahi`.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag

from .interconnect import KnownPart, stacked_system
from .model import ChainModel
from .sim import Trace


def kalman_no_process_noise(blocks_at, x0, P0, ys, c1s, c2s):
    """Standard Kalman filter for ``x+ = A x + c1``, ``y = J x + c2 + d``.

    ``blocks_at(t)`` returns an object with ``A``, ``J`` and ``M``.  Returns
    the predicted means ``x(1..N)`` for ``N = len(ys)``; the last observation
    is not used, matching :func:`sisfilter.runner.run_filter`.
    """
    x = np.asarray(x0, dtype=float).copy()
    P = np.asarray(P0, dtype=float).copy()
    out = [x.copy()]
    for t in range(1, len(ys)):
        blk = blocks_at(t)
        A, J, M = blk.A, blk.J, blk.M
        innov = ys[t - 1] - c2s[t - 1] - J @ x
        Sy = J @ P @ J.T + M
        L = np.linalg.solve(Sy.T, (P @ J.T).T).T
        x_f = x + L @ innov
        P_f = P - L @ Sy @ L.T
        x = A @ x_f + c1s[t - 1]
        P = A @ P_f @ A.T
        P = 0.5 * (P + P.T)
        out.append(x.copy())
    return np.array(out)


def lifted_interconnect_map(model: ChainModel, t: int):
    """Matrices ``(Vx, Vu)`` with ``v_stack = Vx X + Vu U`` at time ``t``.

    ``X``/``U`` stack all states/inputs and ``v_stack`` stacks every
    ``[v+(i); v-(i)]``; obtained by eliminating the interconnection equations
    in closed form.
    """
    blocks = model.blocks_at(t)
    S_m = len(blocks)
    p, n = blocks[0].dims.n_wp, blocks[0].dims.n_w
    Dbl = block_diag(*[b.D for b in blocks])
    Hbl = block_diag(*[b.H for b in blocks])
    # selection from stacked z to the right-hand side of the stacked system
    sel = np.zeros((S_m * n, S_m * n))
    for k in range(S_m):
        if k > 0:
            sel[k * n:k * n + p, (k - 1) * n:(k - 1) * n + p] = np.eye(p)
        if k < S_m - 1:
            sel[k * n + p:(k + 1) * n, (k + 1) * n + p:(k + 2) * n] = np.eye(n - p)

    zero = KnownPart(np.zeros(p), np.zeros(n - p))
    L, _ = stacked_system(blocks, [zero] * S_m)
    Linv_sel = np.linalg.solve(L, sel)
    return Linv_sel @ Dbl, Linv_sel @ Hbl


def centralized_kalman(model: ChainModel, trace: Trace, x0_all, P0_all, coupling="truth"):
    """Centralized Kalman filter on the stacked chain (all ``p = 1``).

    ``coupling="truth"`` feeds ``B v`` computed from the recorded true states
    through the lifted map, which is what the distributed filter sees when
    its first step is fed true states.  ``coupling="model"`` folds the lifted
    map into the global dynamics ``A + B Vx`` instead, the full centralized
    estimator.  Returns estimates in trace layout.
    """
    S_m = model.length
    nx = [d.n_x for d in model.dims]
    offs = np.concatenate([[0], np.cumsum(nx)])
    x = np.concatenate([np.asarray(m, float).reshape(-1) for m in x0_all])
    P = block_diag(*P0_all)
    est = np.zeros((trace.horizon, offs[-1]))
    est[0] = x
    for t in range(1, trace.horizon):
        blocks = model.blocks_at(t)
        A = block_diag(*[b.A for b in blocks])
        B = block_diag(*[b.B for b in blocks])
        C = block_diag(*[b.C for b in blocks])
        J = block_diag(*[b.J for b in blocks])
        R = block_diag(*[b.R for b in blocks])
        M = block_diag(*[b.M for b in blocks])
        Vx, Vu = lifted_interconnect_map(model, t)
        U = np.concatenate(trace.at("u", t))
        Y = np.concatenate(trace.at("y", t))
        Xtrue = np.concatenate(trace.at("x", t))
        innov = Y - R @ U - J @ x
        Sy = J @ P @ J.T + M
        L = np.linalg.solve(Sy.T, (P @ J.T).T).T
        x_f = x + L @ innov
        P_f = P - L @ Sy @ L.T
        if coupling == "truth":
            Ag = A
            c = B @ (Vx @ Xtrue + Vu @ U) + C @ U
        elif coupling == "model":
            Ag = A + B @ Vx
            c = (B @ Vu + C) @ U
        else:
            raise ValueError(f"unknown coupling mode {coupling!r}")
        x = Ag @ x_f + c
        P = Ag @ P_f @ Ag.T
        P = 0.5 * (P + P.T)
        est[t] = x
    return [est[:, offs[k]:offs[k + 1]] for k in range(S_m)]
