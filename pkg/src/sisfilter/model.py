"""One-dimensional chains of interconnected linear subsystems.

Each subsystem ``i`` of a chain of length ``S_m`` evolves as::

    x(t+1,i) = A x(t,i) + B v(t,i) + C u(t,i)
    w(t,i)   = D x(t,i) + G v(t,i) + H u(t,i)
    y(t,i)   = gamma(t,i) J x(t,i) + R u(t,i) + d(t,i),   d ~ N(0, M)

and neighbours are coupled through ``v+(t,i) = w+(t,i-1)`` and
``v-(t,i-1) = w-(t,i)`` with zero inbound signals at both chain ends.
All public indices (``t`` and ``i``) are 1-based.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import _linalg
from .errors import IndexRangeError, ShapeError

MATRIX_NAMES = ("A", "B", "C", "D", "G", "H", "J", "R", "M")


@dataclass(frozen=True)
class SignalDims:
    """Signal sizes of one subsystem.

    ``n_wp`` is the size of the rightward pair ``v+``/``w+`` and ``n_wm`` the
    size of the leftward pair ``v-``/``w-``.
    """

    n_x: int
    n_u: int = 0
    n_y: int = 0
    n_wp: int = 0
    n_wm: int = 0

    @property
    def n_w(self) -> int:
        return self.n_wp + self.n_wm

    def shapes(self) -> dict[str, tuple[int, int]]:
        """Expected shape of every block matrix."""
        nx, nu, ny, nw = self.n_x, self.n_u, self.n_y, self.n_w
        return {
            "A": (nx, nx),
            "B": (nx, nw),
            "C": (nx, nu),
            "D": (nw, nx),
            "G": (nw, nw),
            "H": (nw, nu),
            "J": (ny, nx),
            "R": (ny, nu),
            "M": (ny, ny),
        }

    def violations(self) -> list[str]:
        out = []
        for name in ("n_x", "n_u", "n_y", "n_wp", "n_wm"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or val < 0:
                out.append(f"{name} must be a non-negative integer, got {val!r}")
        if isinstance(self.n_x, (int, np.integer)) and self.n_x < 1:
            out.append(f"n_x must be >= 1, got {self.n_x}")
        return out


def _as_matrix(value, shape=None):
    arr = np.array(value, dtype=float)
    # scalars and flat vectors are accepted in place of matrices of the same size
    if arr.ndim < 2:
        if shape is not None and arr.size == shape[0] * shape[1]:
            arr = arr.reshape(shape)
        else:
            arr = np.atleast_2d(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SubsystemBlock:
    """Matrices of one subsystem at one time step.

    Shapes are not enforced at construction so that malformed blocks can be
    reported by :func:`validate_chain`; use :meth:`violations` to check one
    block on its own.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    G: np.ndarray
    H: np.ndarray
    J: np.ndarray
    R: np.ndarray
    M: np.ndarray
    dims: SignalDims

    def __post_init__(self):
        shapes = self.dims.shapes()
        for name in MATRIX_NAMES:
            object.__setattr__(self, name, _as_matrix(getattr(self, name), shapes[name]))

    @classmethod
    def build(cls, A, *, B=None, C=None, D=None, G=None, H=None, J=None,
              R=None, M=None, n_wp=0, n_wm=0, n_u=None, n_y=None):
        """Build a block, inferring sizes from the given matrices.

        Omitted matrices are zero.  ``n_u`` is taken from ``C``/``H``/``R``
        and ``n_y`` from ``J``/``R``/``M`` when not given.
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n_x = A.shape[0]
        if n_u is None:
            n_u = 0
            for mat, axis in ((C, 1), (H, 1), (R, 1)):
                if mat is not None:
                    n_u = np.atleast_2d(np.asarray(mat)).shape[axis]
                    break
        if n_y is None:
            n_y = 0
            for mat in (J, R, M):
                if mat is not None:
                    n_y = np.atleast_2d(np.asarray(mat)).shape[0]
                    break
        dims = SignalDims(n_x=n_x, n_u=n_u, n_y=n_y, n_wp=n_wp, n_wm=n_wm)
        given = dict(A=A, B=B, C=C, D=D, G=G, H=H, J=J, R=R, M=M)
        mats = {
            name: np.zeros(shape) if given[name] is None else given[name]
            for name, shape in dims.shapes().items()
        }
        return cls(dims=dims, **mats)

    def replace(self, **changes) -> "SubsystemBlock":
        values = {name: getattr(self, name) for name in MATRIX_NAMES}
        values["dims"] = self.dims
        values.update(changes)
        return SubsystemBlock(**values)

    def violations(self) -> list[str]:
        """Human-readable list of shape and noise-covariance problems."""
        out = list(self.dims.violations())
        if out:
            return out
        for name, shape in self.dims.shapes().items():
            got = getattr(self, name).shape
            if got != shape:
                out.append(f"{name} is {got[0]}x{got[1] if len(got) > 1 else 0}, "
                           f"expected {shape[0]}x{shape[1]}")
        if not out:
            reason = _linalg.psd_violation(self.M)
            if reason is not None:
                out.append(f"M not symmetric PSD: {reason}")
        return out

    def partition_g(self):
        return _cached_partition(self)


def partition_g(G, dims: SignalDims):
    """Split ``G`` into ``(G11, G12, G21, G22)`` along ``(n_wp, n_wm)``.

    Rows follow ``(w+, w-)`` and columns ``(v+, v-)``.
    """
    G = np.asarray(G, dtype=float)
    n = dims.n_w
    if G.shape != (n, n):
        raise ShapeError(f"G has shape {G.shape}, expected {(n, n)}")
    p = dims.n_wp
    return G[:p, :p].copy(), G[:p, p:].copy(), G[p:, :p].copy(), G[p:, p:].copy()


@functools.lru_cache(maxsize=4096)
def _cached_partition(block):
    parts = partition_g(block.G, block.dims)
    for p in parts:
        p.setflags(write=False)
    return parts


BlockRule = Callable[[int, int], SubsystemBlock]


class ChainModel:
    """A finite chain of ``S_m`` subsystems over times ``1..horizon``.

    Time variation comes from one of three sources, checked in order: a
    ``rule(t, i)`` callable, an ``overrides`` table keyed by ``(t, i)``, and the
    per-index base ``blocks``.  The model is never mutated after construction.

    Parameters
    ----------
    blocks : sequence of SubsystemBlock
        Base block for each spatial index, in order ``i = 1..S_m``.
    horizon : int
        Last valid time index.
    overrides : mapping, optional
        ``{(t, i): SubsystemBlock}`` replacing the base block at that time.
    rule : callable, optional
        ``rule(t, i) -> SubsystemBlock``; when given, ``blocks`` only fixes
        the per-index dimensions and is otherwise ignored.
    """

    def __init__(self, blocks: Sequence[SubsystemBlock], horizon: int, *,
                 overrides: Optional[Mapping[tuple[int, int], SubsystemBlock]] = None,
                 rule: Optional[BlockRule] = None):
        blocks = tuple(blocks)
        if not blocks:
            raise ShapeError("a chain needs at least one subsystem")
        self._blocks = blocks
        self.horizon = int(horizon)
        self._overrides = dict(overrides or {})
        self._rule = rule
        self.dims = tuple(b.dims for b in blocks)

    @classmethod
    def uniform(cls, block: SubsystemBlock, length: int, horizon: int) -> "ChainModel":
        return cls([block] * length, horizon)

    @classmethod
    def from_rule(cls, rule: BlockRule, length: int, horizon: int) -> "ChainModel":
        """Model whose blocks are produced by ``rule(t, i)``.

        Dimensions are frozen from ``rule(1, i)``.
        """
        return cls([rule(1, i) for i in range(1, length + 1)], horizon, rule=rule)

    @property
    def length(self) -> int:
        return len(self._blocks)

    @property
    def time_invariant(self) -> bool:
        return self._rule is None and not self._overrides

    @property
    def base_blocks(self) -> tuple[SubsystemBlock, ...]:
        return self._blocks

    @property
    def overrides(self) -> dict[tuple[int, int], SubsystemBlock]:
        return dict(self._overrides)

    @property
    def rule(self) -> Optional[BlockRule]:
        return self._rule

    def with_horizon(self, horizon: int) -> "ChainModel":
        return ChainModel(self._blocks, horizon, overrides=self._overrides, rule=self._rule)

    def block_at(self, t: int, i: int) -> SubsystemBlock:
        if not 1 <= t <= self.horizon:
            raise IndexRangeError(f"time index t={t} outside [1, {self.horizon}]")
        if not 1 <= i <= self.length:
            raise IndexRangeError(f"spatial index i={i} outside [1, {self.length}]")
        if self._rule is not None:
            return self._rule(t, i)
        return self._overrides.get((t, i), self._blocks[i - 1])

    def blocks_at(self, t: int) -> list[SubsystemBlock]:
        return [self.block_at(t, i) for i in range(1, self.length + 1)]

    def __repr__(self):
        kind = "time-invariant" if self.time_invariant else "time-varying"
        return f"ChainModel(S_m={self.length}, horizon={self.horizon}, {kind})"


def block_at(model: ChainModel, t: int, i: int) -> SubsystemBlock:
    return model.block_at(t, i)


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_chain`: one message per violated invariant."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def lines(self) -> list[str]:
        return ["OK"] if self.ok else list(self.violations)


def validate_chain(model: ChainModel) -> ValidationReport:
    """Check the structural invariants of ``model`` without raising.

    Reports bad signal sizes, neighbour size mismatches (``v+``/``w+`` and
    ``v-``/``w-`` must agree across each link), blocks whose shapes drift over
    time or disagree with their dims, non-PSD noise covariances, and
    numerically singular ``G22`` blocks (rcond at or below 1e-12).
    """
    report = ValidationReport()
    add = report.violations.append
    S_m = model.length

    if model.horizon < 1:
        add(f"horizon must be >= 1, got {model.horizon}")
        return report

    dims_ok = True
    for i, d in enumerate(model.dims, start=1):
        for msg in d.violations():
            add(f"bad dims at i={i}: {msg}")
            dims_ok = False
    if not dims_ok:
        return report

    if S_m == 1 and model.dims[0].n_w:
        add("S_m=1 requires n_wp=n_wm=0 at i=1")
    for i in range(2, S_m + 1):
        left, right = model.dims[i - 2], model.dims[i - 1]
        if right.n_wp != left.n_wp:
            add(f"neighbor dim mismatch at i={i}: v+ has size {right.n_wp} "
                f"but w+(i-1) has size {left.n_wp}")
        if right.n_wm != left.n_wm:
            add(f"neighbor dim mismatch at i={i}: w- has size {right.n_wm} "
                f"but v-(i-1) has size {left.n_wm}")

    times = [1] if model.time_invariant else range(1, model.horizon + 1)
    for t in times:
        for i in range(1, S_m + 1):
            block = model.block_at(t, i)
            if block.dims != model.dims[i - 1]:
                add(f"dims changed over time at (t={t},i={i})")
                continue
            problems = block.violations()
            for msg in problems:
                add(f"block at (t={t},i={i}): {msg}")
            if problems or block.dims.n_wm == 0:
                continue
            G22 = partition_g(block.G, block.dims)[3]
            rc = _linalg.rcond(G22)
            if not rc > _linalg.RCOND_TOL:
                add(f"G22 singular at (t={t},i={i}) (rcond={rc:.3g})")
    return report
