"""Interconnection signals of a chain at one time step.

Given every state ``x(t,i)`` and input ``u(t,i)``, the signals ``v`` and ``w``
are fixed by the output equation ``w = G v + z`` (with ``z = D x + H u``), the
neighbour couplings and the zero boundary conditions.  Two solvers are
provided:

* :func:`solve_interconnect` runs the sequential chain recursion.  It
  eliminates ``v-(t,i)`` through ``G22`` so that the pair
  ``s(i) = [w+(t,i); v-(t,i)]`` obeys ``s(i) = phi(i) s(i-1) + beta(i)``,
  carries the product of the ``phi`` factors down the chain, closes it with
  the right-end boundary condition and propagates forward again.
* :func:`monolithic_solve` stacks every equation into one dense linear
  system.  It does not need ``G22`` to be invertible and serves as the
  reference for the recursion.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _linalg
from .errors import IllPosedChainError, ShapeError, SingularBlockError
from .model import ChainModel, SubsystemBlock


@dataclass(frozen=True)
class KnownPart:
    """``z = D x + H u`` split into its ``w+`` and ``w-`` rows."""

    z_plus: np.ndarray
    z_minus: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.z_plus, self.z_minus])


@dataclass(frozen=True)
class PhiBeta:
    phi: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class ChainTransfer:
    """Affine map ``s(S_m-1) = MT s(1) + MC`` accumulated along the chain.

    ``steps`` holds the per-index ``PhiBeta`` for ``i = 2..S_m-1`` so the
    forward sweep can reuse them.
    """

    MT: np.ndarray
    MC: np.ndarray
    n_wp: int
    n_wm: int
    steps: tuple[PhiBeta, ...] = field(default=(), repr=False)

    @property
    def MT11(self):
        return self.MT[:self.n_wp, :self.n_wp]

    @property
    def MT12(self):
        return self.MT[:self.n_wp, self.n_wp:]

    @property
    def MT21(self):
        return self.MT[self.n_wp:, :self.n_wp]

    @property
    def MT22(self):
        return self.MT[self.n_wp:, self.n_wp:]


@dataclass(frozen=True)
class InterconnectSolution:
    """All interconnection signals at time ``t``; lists are indexed ``i-1``."""

    t: Optional[int]
    v_plus: list[np.ndarray]
    v_minus: list[np.ndarray]
    w_plus: list[np.ndarray]
    w_minus: list[np.ndarray]

    @property
    def length(self) -> int:
        return len(self.v_plus)

    def v(self, i: int) -> np.ndarray:
        return np.concatenate([self.v_plus[i - 1], self.v_minus[i - 1]])

    def w(self, i: int) -> np.ndarray:
        return np.concatenate([self.w_plus[i - 1], self.w_minus[i - 1]])

    def stacked(self) -> np.ndarray:
        """Every signal in one flat vector (for comparisons)."""
        parts = [np.concatenate([self.v(i), self.w(i)]) for i in range(1, self.length + 1)]
        return np.concatenate(parts) if parts else np.zeros(0)


def known_part(block: SubsystemBlock, x, u=None) -> KnownPart:
    d = block.dims
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (d.n_x,):
        raise ShapeError(f"state has size {x.size}, expected {d.n_x}")
    z = block.D @ x
    if d.n_u:
        if u is None:
            raise ShapeError(f"input of size {d.n_u} required")
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape != (d.n_u,):
            raise ShapeError(f"input has size {u.size}, expected {d.n_u}")
        z = z + block.H @ u
    return KnownPart(z[:d.n_wp], z[d.n_wp:])


@functools.lru_cache(maxsize=4096)
def _g22_factors(block: SubsystemBlock):
    # phi and the two G22^{-1}-based maps that build beta from z
    G11, G12, G21, G22 = block.partition_g()

    def fail(rc):
        raise SingularBlockError("G22", rcond=rc)

    G22inv = _linalg.inv_checked(G22, fail)
    G12_G22inv = G12 @ G22inv
    G22inv_G21 = G22inv @ G21
    phi = np.block([[G11 - G12_G22inv @ G21, G12_G22inv],
                    [-G22inv_G21, G22inv]])
    return phi, G12_G22inv, G22inv


def phi_beta(block: SubsystemBlock, z: KnownPart, t=None, i=None) -> PhiBeta:
    """One link of the chain recursion, ``s(i) = phi s(i-1) + beta``.

    Raises
    ------
    SingularBlockError
        If ``G22`` of ``block`` has rcond at or below 1e-12; the error
        carries ``t`` and ``i``.
    """
    try:
        phi, G12_G22inv, G22inv = _g22_factors(block)
    except SingularBlockError as exc:
        raise SingularBlockError("G22", t=t, i=i, rcond=exc.rcond) from None
    beta = np.concatenate([z.z_plus - G12_G22inv @ z.z_minus, -G22inv @ z.z_minus])
    return PhiBeta(phi, beta)


def chain_transfer(model: ChainModel, t: int, z_all: Sequence[KnownPart]) -> ChainTransfer:
    """Accumulate ``MT = phi(S_m-1)...phi(2)`` and the matching affine term.

    For ``S_m = 2`` the product and the sum are empty, giving ``MT = I`` and
    ``MC = 0``.
    """
    S_m = model.length
    if S_m < 2:
        raise ShapeError("chain_transfer needs S_m >= 2")
    d = model.dims[0]
    MT = np.eye(d.n_w)
    MC = np.zeros(d.n_w)
    steps = []
    for i in range(2, S_m):
        pb = phi_beta(model.block_at(t, i), z_all[i - 1], t=t, i=i)
        steps.append(pb)
        MT = pb.phi @ MT
        MC = pb.phi @ MC + pb.beta
    return ChainTransfer(MT, MC, d.n_wp, d.n_wm, tuple(steps))


def closure_matrix(transfer: ChainTransfer, block_1: SubsystemBlock,
                   block_Sm: SubsystemBlock) -> np.ndarray:
    """``K`` such that the right-end boundary reads ``K v-(t,1) = rhs``."""
    G12_1 = block_1.partition_g()[1]
    G21_Sm = block_Sm.partition_g()[2]
    return (G21_Sm @ transfer.MT11 @ G12_1 - transfer.MT21 @ G12_1
            + G21_Sm @ transfer.MT12 - transfer.MT22)


def solve_boundary(transfer: ChainTransfer, block_1: SubsystemBlock, block_Sm: SubsystemBlock,
                   z_1: KnownPart, z_Sm: KnownPart, t=None):
    """Pin down ``(w+(t,1), v-(t,1))`` from the two chain ends.

    The left end gives ``w+(1) = G12(1) v-(1) + z+(1)``.  The right end
    requires ``v-(S_m-1) - G21(S_m) w+(S_m-1) = z-(S_m)``, and substituting
    ``s(S_m-1) = MT s(1) + MC`` turns it into ``K v-(1) = rhs`` where the
    affine contributions of ``z+(1)`` and ``z-(S_m)`` are kept explicitly.

    Raises
    ------
    IllPosedChainError
        If ``K`` has rcond at or below 1e-12.
    """
    n_wp, n_wm = transfer.n_wp, transfer.n_wm
    G12_1 = block_1.partition_g()[1]
    G21_Sm = block_Sm.partition_g()[2]
    K = closure_matrix(transfer, block_1, block_Sm)
    E = np.hstack([-G21_Sm, np.eye(n_wm)])
    s1_offset = np.concatenate([z_1.z_plus, np.zeros(n_wm)])
    rhs = E @ (transfer.MT @ s1_offset + transfer.MC) - z_Sm.z_minus

    def fail(rc):
        raise IllPosedChainError(t, f"closure matrix K singular (rcond={rc:.3g})")

    v_minus_1 = _linalg.solve_checked(K, rhs, fail)
    w_plus_1 = G12_1 @ v_minus_1 + z_1.z_plus
    return w_plus_1, v_minus_1


def _assemble(t, blocks, z_all, v_plus, v_minus):
    """Fill in ``w`` from ``v`` using the couplings; outward ends use ``w = G v + z``."""
    S_m = len(blocks)
    w_plus = [v_plus[i + 1] for i in range(S_m - 1)]
    w_minus = [v_minus[i - 1] for i in range(1, S_m)]
    last, first = blocks[-1], blocks[0]
    p_last = last.dims.n_wp
    w_plus.append(last.G[:p_last] @ np.concatenate([v_plus[-1], v_minus[-1]])
                  + z_all[-1].z_plus)
    p_first = first.dims.n_wp
    w_minus.insert(0, first.G[p_first:] @ np.concatenate([v_plus[0], v_minus[0]])
                   + z_all[0].z_minus)
    return InterconnectSolution(t, v_plus, v_minus, w_plus, w_minus)


def propagate_chain(first_item, steps: Sequence[PhiBeta], blocks: Sequence[SubsystemBlock],
                    z_all: Sequence[KnownPart], t=None) -> InterconnectSolution:
    """Run ``s(k) = phi(k) s(k-1) + beta(k)`` from ``k = 2`` and assemble ``v``/``w``.

    ``v(t,k) = [w+(t,k-1); v-(t,k)]`` for ``k >= 2``, ``v(t,1) = [0; v-(t,1)]``
    and ``v-(t,S_m) = 0``.  The outward signals ``w-(t,1)`` and ``w+(t,S_m)``
    come from ``w = G v + z`` and are reported as they are.
    """
    S_m = len(blocks)
    n_wp = blocks[0].dims.n_wp
    n_wm = blocks[0].dims.n_wm
    w_plus_1, v_minus_1 = first_item
    s = [np.concatenate([w_plus_1, v_minus_1])]
    for pb in steps:
        s.append(pb.phi @ s[-1] + pb.beta)
    if len(s) != S_m - 1:
        raise ShapeError(f"expected {S_m - 2} chain steps, got {len(steps)}")
    v_plus = [np.zeros(n_wp)] + [sk[:n_wp] for sk in s]
    v_minus = [sk[n_wp:] for sk in s] + [np.zeros(n_wm)]
    return _assemble(t, blocks, z_all, v_plus, v_minus)


def _empty_solution(t, blocks):
    zeros = [np.zeros(0) for _ in blocks]
    return InterconnectSolution(t, list(zeros), list(zeros), list(zeros), list(zeros))


def _known_parts(blocks, x_all, u_all):
    if len(x_all) != len(blocks):
        raise ShapeError(f"got {len(x_all)} states for {len(blocks)} subsystems")
    if u_all is None:
        u_all = [None] * len(blocks)
    return [known_part(b, x, u) for b, x, u in zip(blocks, x_all, u_all)]


def solve_interconnect(model: ChainModel, t: int, x_all, u_all=None) -> InterconnectSolution:
    """Interconnection signals at time ``t`` by the chain recursion.

    ``x_all`` and ``u_all`` are per-index sequences (``u_all`` may be None
    for input-free models).  A single-subsystem chain has no interconnection
    and yields zero-size vectors.

    Raises
    ------
    SingularBlockError
        An interior ``G22(t,i)`` is singular; the recursion cannot run even
        if the stacked system is solvable (see :func:`monolithic_solve`).
    IllPosedChainError
        The closure matrix at time ``t`` is singular.
    """
    blocks = model.blocks_at(t)
    if len(blocks) == 1:
        return _empty_solution(t, blocks)
    z_all = _known_parts(blocks, x_all, u_all)
    transfer = chain_transfer(model, t, z_all)
    first = solve_boundary(transfer, blocks[0], blocks[-1], z_all[0], z_all[-1], t=t)
    return propagate_chain(first, transfer.steps, blocks, z_all, t=t)


def stacked_system(blocks: Sequence[SubsystemBlock], z_all: Sequence[KnownPart]):
    """Dense ``(L, r)`` with ``L v = r`` collecting every coupling and boundary.

    The unknown is ``[v(1); v(2); ...; v(S_m)]`` with ``v(i) = [v+(i); v-(i)]``.
    """
    S_m = len(blocks)
    p, m = blocks[0].dims.n_wp, blocks[0].dims.n_wm
    n = p + m
    L = np.eye(S_m * n)
    r = np.zeros(S_m * n)
    for k in range(S_m):
        row = k * n
        if k > 0:
            # v+(k) = G11 v+(k-1) + G12 v-(k-1) + z+(k-1)
            L[row:row + p, (k - 1) * n:k * n] -= blocks[k - 1].G[:p]
            r[row:row + p] = z_all[k - 1].z_plus
        if k < S_m - 1:
            # v-(k) = G21 v+(k+1) + G22 v-(k+1) + z-(k+1)
            L[row + p:row + n, (k + 1) * n:(k + 2) * n] -= blocks[k + 1].G[p:]
            r[row + p:row + n] = z_all[k + 1].z_minus
    return L, r


def monolithic_solve(model: ChainModel, t: int, x_all, u_all=None) -> InterconnectSolution:
    """Reference solution: one dense solve of the stacked interconnection system.

    Needs no invertibility of ``G22``; fails only when the stacked system
    itself is singular.
    """
    blocks = model.blocks_at(t)
    if len(blocks) == 1:
        return _empty_solution(t, blocks)
    z_all = _known_parts(blocks, x_all, u_all)
    L, r = stacked_system(blocks, z_all)

    def fail(rc):
        raise IllPosedChainError(t, f"stacked interconnection system singular (rcond={rc:.3g})")

    v = _linalg.solve_checked(L, r, fail)
    p, n = blocks[0].dims.n_wp, blocks[0].dims.n_w
    v_plus = [v[k * n:k * n + p] for k in range(len(blocks))]
    v_minus = [v[k * n + p:(k + 1) * n] for k in range(len(blocks))]
    v_plus[0] = np.zeros(p)
    v_minus[-1] = np.zeros(n - p)
    return _assemble(t, blocks, z_all, v_plus, v_minus)


def output_residual(solution: InterconnectSolution, blocks, z_all) -> float:
    """Max-norm residual of ``w = G v + z`` over the whole chain."""
    worst = 0.0
    for i, (b, z) in enumerate(zip(blocks, z_all), start=1):
        if b.dims.n_w == 0:
            continue
        res = b.G @ solution.v(i) + z.z - solution.w(i)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def coupling_holds(solution: InterconnectSolution) -> bool:
    """True iff couplings and boundary values hold bit-exactly."""
    S_m = solution.length
    if np.any(solution.v_plus[0] != 0) or np.any(solution.v_minus[-1] != 0):
        return False
    for i in range(1, S_m):
        if not np.array_equal(solution.v_plus[i], solution.w_plus[i - 1]):
            return False
        if not np.array_equal(solution.v_minus[i - 1], solution.w_minus[i]):
            return False
    return True


def relative_deviation(a: InterconnectSolution, b: InterconnectSolution) -> float:
    """``max|a - b| / max(max|a|, max|b|)`` over every signal; 0 when both vanish."""
    va, vb = a.stacked(), b.stacked()
    scale = max(np.max(np.abs(va), initial=0.0), np.max(np.abs(vb), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(va - vb)) / scale)
