"""Dimension-reduction matrix design.

Solves the ratio-trace problem

    maximize  Tr( D C_A D^H (D C_B D^H)^-1 )  over  D (m x n)

either over unconstrained complex matrices (generalized eigendecomposition)
or over sparse binary row selectors (one 1 per row, at most one per
column), where it becomes a combinatorial sample-selection problem.  The
binary searches operate independently on diagonal submatrix blocks:
backward feature selection deletes the least significant row of an
identity start, restricted greedy search shifts each row's 1 inside a
column window around a uniform or quasi-uniform initial pattern, and the
simplified variants optimize a single block and replicate its pattern.
Exhaustive subset search is provided as a small-instance oracle.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .config import SystemConfig
from .flops import PHASE_DESIGN, PHASE_REDUCE, FlopCounter

__all__ = [
    "RatioTraceProblem",
    "ReductionMatrix",
    "SubmatrixPartition",
    "DegenerateSelectionError",
    "ratio_trace_objective",
    "solve_gevd",
    "initial_pattern",
    "identity_reduction",
    "partition_problem",
    "solve_slbfs",
    "solve_slrgs",
    "solve_simplified",
    "solve_exhaustive",
    "apply_reduction",
    "reduce_cov",
]


class DegenerateSelectionError(ValueError):
    """The reduced covariance D C_B D^H is singular for the given selection."""


def _hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


@dataclass(frozen=True)
class RatioTraceProblem:
    """A Hermitian pair (C_A, C_B) and the number of rows to keep."""

    c_a: np.ndarray
    c_b: np.ndarray
    target_rows: int

    def __post_init__(self):
        n = self.c_a.shape[0]
        if self.c_a.shape != (n, n) or self.c_b.shape != (n, n):
            raise ValueError("C_A and C_B must be square and equally sized")
        if not 1 <= self.target_rows <= n:
            raise ValueError(f"target_rows {self.target_rows} not in [1, {n}]")
        object.__setattr__(self, "c_a", _hermitize(np.asarray(self.c_a)))
        object.__setattr__(self, "c_b", _hermitize(np.asarray(self.c_b)))

    @property
    def dim(self) -> int:
        return self.c_a.shape[0]


@dataclass(frozen=True)
class ReductionMatrix:
    """A designed reduction operator with its provenance.

    ``kind`` is "dense" (complex matrix in ``matrix``) or "binary" (the
    selected column per row in ``indices``).  ``objective`` is the
    achieved ratio-trace value, always a fresh re-evaluation on the
    problem matrices; it is None for matrix-free constructions such as
    the initial pattern.  Greedy solvers record their running objective
    after each row decision in ``objective_trace``.
    """

    kind: str
    algorithm: str
    matrix: np.ndarray | None = None
    indices: np.ndarray | None = None
    objective: float | None = None
    objective_trace: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("dense", "binary"):
            raise ValueError(f"unknown reduction kind {self.kind!r}")
        if self.kind == "dense" and self.matrix is None:
            raise ValueError("dense reduction requires a matrix")
        if self.kind == "binary":
            idx = np.asarray(self.indices, dtype=int)
            if len(np.unique(idx)) != idx.size:
                raise ValueError("binary reduction selects a column twice")
            object.__setattr__(self, "indices", idx)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0] if self.kind == "dense" else self.indices.size

    def as_matrix(self, n_cols: int | None = None) -> np.ndarray:
        """Densify; binary selectors expand to their 0/1 matrix."""
        if self.kind == "dense":
            return self.matrix
        n = int(self.indices.max()) + 1 if n_cols is None else n_cols
        mat = np.zeros((self.indices.size, n))
        mat[np.arange(self.indices.size), self.indices] = 1.0
        return mat


def _objective_from_reduced(a_red: np.ndarray, b_red: np.ndarray,
                            counter: FlopCounter | None) -> float:
    p = a_red.shape[0]
    if counter is not None:
        counter.add_trace_ratio(PHASE_DESIGN, p)
    try:
        ratio = np.linalg.solve(b_red, a_red)
    except np.linalg.LinAlgError as err:
        raise DegenerateSelectionError(str(err)) from None
    val = float(np.trace(ratio).real)
    if not np.isfinite(val):
        raise DegenerateSelectionError("non-finite ratio-trace value")
    return val


def _objective_indices(idx: np.ndarray, c_a: np.ndarray, c_b: np.ndarray,
                       counter: FlopCounter | None = None) -> float:
    sel = np.ix_(idx, idx)
    return _objective_from_reduced(c_a[sel], c_b[sel], counter)


def ratio_trace_objective(delta, c_a: np.ndarray, c_b: np.ndarray,
                          counter: FlopCounter | None = None) -> float:
    """Tr(D C_A D^H (D C_B D^H)^-1) for a dense matrix or a binary selector.

    Binary selectors are evaluated by index gathering (no multiplications
    by zeros).  Raises DegenerateSelectionError when the reduced C_B is
    singular.
    """
    if isinstance(delta, ReductionMatrix):
        if delta.kind == "binary":
            return _objective_indices(delta.indices, c_a, c_b, counter)
        delta = delta.matrix
    delta = np.asarray(delta)
    if delta.ndim == 1:  # a bare index list
        return _objective_indices(delta.astype(int), c_a, c_b, counter)
    if counter is not None:
        m, n = delta.shape
        counter.add_matmul(PHASE_DESIGN, m, n, n)
        counter.add_matmul(PHASE_DESIGN, m, n, m)
        counter.add_matmul(PHASE_DESIGN, m, n, n)
        counter.add_matmul(PHASE_DESIGN, m, n, m)
        counter.add_trace_ratio(PHASE_DESIGN, m)
    a_red = delta @ c_a @ delta.conj().T
    b_red = delta @ c_b @ delta.conj().T
    return _objective_from_reduced(a_red, b_red, None)


def solve_gevd(problem: RatioTraceProblem,
               counter: FlopCounter | None = None) -> ReductionMatrix:
    """Unconstrained solution by generalized eigendecomposition.

    Whitens with the eigendecomposition of C_B, eigendecomposes the
    whitened C_A and keeps the eigenvectors of the ``target_rows``
    largest eigenvalues; the achieved objective equals the sum of the
    kept generalized eigenvalues.  C_B gets a small diagonal load when
    its smallest eigenvalue falls below 1e-12.
    """
    n, m = problem.dim, problem.target_rows
    vals_b, vecs_b = np.linalg.eigh(problem.c_b)
    if vals_b[0] < 1e-12:
        load = 1e-10 * np.trace(problem.c_b).real / n
        vals_b = vals_b + load  # same eigenvectors, shifted spectrum
        if vals_b[0] <= 0.0:
            raise DegenerateSelectionError("C_B is not positive definite")
    phi_tilde = vecs_b / np.sqrt(vals_b)
    whitened = _hermitize(phi_tilde.conj().T @ problem.c_a @ phi_tilde)
    vals_a, vecs_a = np.linalg.eigh(whitened)
    top = np.argsort(vals_a)[::-1][:m]
    delta_h = phi_tilde @ vecs_a[:, top]   # columns are the kept eigenvectors
    delta = delta_h.conj().T
    if counter is not None:
        counter.add_eigh(PHASE_DESIGN, n)
        counter.add_matmul(PHASE_DESIGN, n, n, n)  # whitening scale
        counter.add_matmul(PHASE_DESIGN, n, n, n)
        counter.add_matmul(PHASE_DESIGN, n, n, n)
        counter.add_eigh(PHASE_DESIGN, n)
        counter.add_matmul(PHASE_DESIGN, n, n, m)
    objective = ratio_trace_objective(delta, problem.c_a, problem.c_b)
    return ReductionMatrix(kind="dense", algorithm="gevd", matrix=delta,
                           objective=objective)


def _pattern_offsets(m_init: int, m_proc: int, n_rows: int,
                     alpha: int | None) -> np.ndarray:
    """Column of the 1 in each row of the (quasi-)uniform pattern."""
    rows = np.arange(n_rows)
    periods, rem = np.divmod(rows, m_proc)
    if m_init % m_proc == 0:
        return rows * (m_init // m_proc)
    if alpha is None:
        if m_proc == 2:
            alpha = -(-m_init // m_proc)  # ceil, second 1 of [1,0,1] for M=3
        else:
            # the single-offset rule only covers m_proc = 2; space evenly
            return m_init * periods + np.rint(rem * m_init / m_proc).astype(int)
    if not 0 < alpha < m_init:
        raise ValueError(f"alpha must lie in (0, {m_init}), got {alpha}")
    return m_init * periods + np.where(rem == 0, 0, alpha)


def initial_pattern(cfg: SystemConfig, n_cols: int, n_rows: int,
                    alpha: int | None = None) -> ReductionMatrix:
    """Uniform or quasi-uniform sampling pattern as a binary selector.

    Row r keeps the sample at column M*floor((r-1)/M') when r-1 is a
    multiple of M', and otherwise that column shifted by ``alpha`` (the
    in-period position of the second kept sample).  When M' divides M the
    pattern is uniform with stride M/M'.
    """
    if n_rows > n_cols:
        raise ValueError(f"cannot select {n_rows} rows from {n_cols} columns")
    cols = _pattern_offsets(cfg.m_init, cfg.m_proc, n_rows, alpha)
    if cols[-1] >= n_cols:
        raise ValueError(
            f"pattern column {int(cols[-1])} exceeds width {n_cols}; "
            "rows and columns are inconsistent with M, M'")
    if len(np.unique(cols)) != cols.size:
        raise RuntimeError("internal error: pattern column collision")
    return ReductionMatrix(kind="binary", algorithm="uniform-init", indices=cols)


def identity_reduction(n: int) -> ReductionMatrix:
    """The no-reduction selector (uniform oversampling, M = M')."""
    return ReductionMatrix(kind="binary", algorithm="identity",
                           indices=np.arange(n))


@dataclass(frozen=True)
class SubmatrixPartition:
    """Contiguous diagonal blocks of a ratio-trace problem.

    ``blocks[k]`` is the RatioTraceProblem restricted to rows/columns
    [k*block_size, (k+1)*block_size), each asked for ``block_rows`` kept
    rows.
    """

    k_sub: int
    block_size: int
    block_rows: int
    blocks: tuple


def partition_problem(problem: RatioTraceProblem, k_sub: int) -> SubmatrixPartition:
    n, m = problem.dim, problem.target_rows
    if n % k_sub or m % k_sub:
        raise ValueError(
            f"K={k_sub} must divide both the dimension {n} and target rows {m}")
    size, rows = n // k_sub, m // k_sub
    blocks = []
    for k in range(k_sub):
        sl = slice(k * size, (k + 1) * size)
        blocks.append(RatioTraceProblem(problem.c_a[sl, sl], problem.c_b[sl, sl], rows))
    return SubmatrixPartition(k_sub=k_sub, block_size=size, block_rows=rows,
                              blocks=tuple(blocks))


def _assemble_blocks(partition: SubmatrixPartition, local_indices: list[np.ndarray],
                     algorithm: str, problem: RatioTraceProblem,
                     objective_trace: tuple | None = None) -> ReductionMatrix:
    """Block-diagonal assembly: local block selections get column offsets."""
    parts = [idx + k * partition.block_size for k, idx in enumerate(local_indices)]
    indices = np.concatenate(parts)
    objective = _objective_indices(indices, problem.c_a, problem.c_b)
    return ReductionMatrix(kind="binary", algorithm=algorithm, indices=indices,
                           objective=objective, objective_trace=objective_trace)


def _bfs_block(block: RatioTraceProblem, counter: FlopCounter | None) -> np.ndarray:
    """Backward feature selection on one block: delete the least
    significant row of an identity start until ``target_rows`` remain."""
    selected = list(range(block.dim))
    for _ in range(block.dim - block.target_rows):
        best_val, best_pos = -np.inf, None
        for pos in range(len(selected)):
            cand = np.array(selected[:pos] + selected[pos + 1 :])
            try:
                val = _objective_indices(cand, block.c_a, block.c_b, counter)
            except DegenerateSelectionError:
                continue  # singular reduced block: candidate discarded
            if val > best_val:
                best_val, best_pos = val, pos
        if best_pos is None:
            raise DegenerateSelectionError("every candidate deletion is singular")
        del selected[best_pos]
    return np.array(selected)


def solve_slbfs(partition: SubmatrixPartition, problem: RatioTraceProblem,
                counter: FlopCounter | None = None) -> ReductionMatrix:
    """Submatrix-level backward feature selection over all blocks."""
    locals_ = [_bfs_block(b, counter) for b in partition.blocks]
    return _assemble_blocks(partition, locals_, "sl-bfs", problem)


def _split_init(partition: SubmatrixPartition, init: ReductionMatrix) -> list[np.ndarray]:
    """Per-block local column indices of a block-diagonal binary pattern."""
    if init.kind != "binary":
        raise ValueError("initial pattern must be a binary selector")
    idx = init.indices
    if idx.size != partition.k_sub * partition.block_rows:
        raise ValueError(f"pattern has {idx.size} rows, partition expects "
                         f"{partition.k_sub * partition.block_rows}")
    out = []
    for k in range(partition.k_sub):
        loc = idx[k * partition.block_rows : (k + 1) * partition.block_rows] \
            - k * partition.block_size
        if loc.min() < 0 or loc.max() >= partition.block_size:
            raise ValueError("initial pattern is not block diagonal for this partition")
        out.append(loc.copy())
    return out


def _rgs_block(block: RatioTraceProblem, init_idx: np.ndarray, beta: int,
               counter: FlopCounter | None) -> tuple[np.ndarray, list[float]]:
    """Restricted greedy search on one block.

    Sweeps the rows once in order; for each row the 1 may move to any
    unoccupied column within +-beta of its current position, and a move
    is kept only when it strictly improves the running objective.  The
    per-row objective sequence is returned alongside the selection.
    """
    n = block.dim
    j = init_idx.copy()
    s_max = _objective_indices(j, block.c_a, block.c_b, counter)
    trace = []
    for r in range(j.size):
        occupied = set(j.tolist())
        lo, hi = max(0, j[r] - beta), min(n - 1, j[r] + beta)
        best_col = j[r]
        for c in range(lo, hi + 1):
            if c in occupied:
                continue
            cand = j.copy()
            cand[r] = c
            try:
                s = _objective_indices(cand, block.c_a, block.c_b, counter)
            except DegenerateSelectionError:
                continue
            if s > s_max:
                s_max, best_col = s, c
        j[r] = best_col
        trace.append(s_max)
    return j, trace


def solve_slrgs(partition: SubmatrixPartition, problem: RatioTraceProblem,
                init: ReductionMatrix, beta: int,
                counter: FlopCounter | None = None) -> ReductionMatrix:
    """Submatrix-level restricted greedy search seeded by ``init``.

    Always returns a valid pattern; with no improving move the initial
    pattern survives.  ``objective_trace`` concatenates the per-row
    running objectives of the blocks in order.
    """
    if beta < 1:
        raise ValueError("beta must be at least 1")
    locals_, trace = [], []
    for block, loc in zip(partition.blocks, _split_init(partition, init)):
        out, tr = _rgs_block(block, loc, beta, counter)
        locals_.append(out)
        trace.extend(tr)
    return _assemble_blocks(partition, locals_, "sl-rgs", problem,
                            objective_trace=tuple(trace))


def solve_simplified(partition: SubmatrixPartition, problem: RatioTraceProblem,
                     variant: str, init: ReductionMatrix,
                     beta: int | None = None,
                     counter: FlopCounter | None = None) -> ReductionMatrix:
    """Simplified submatrix search: optimize one block, replicate its pattern.

    The initial-pattern objective is evaluated on every block and the
    block with the lowest value is optimized with SL-BFS or SL-RGS; its
    pattern is then shared by all blocks.  Requires equally sized blocks,
    which the partition guarantees.
    """
    if variant not in ("bfs", "rgs"):
        raise ValueError(f"variant must be 'bfs' or 'rgs', got {variant!r}")
    if variant == "rgs" and beta is None:
        raise ValueError("the rgs variant needs beta")
    local_inits = _split_init(partition, init)
    scores = [_objective_indices(loc, block.c_a, block.c_b, counter)
              for loc, block in zip(local_inits, partition.blocks)]
    k_star = int(np.argmin(scores))
    block = partition.blocks[k_star]
    if variant == "bfs":
        local = _bfs_block(block, counter)
        algorithm = "simplified-bfs"
        trace = None
    else:
        local, tr = _rgs_block(block, local_inits[k_star], beta, counter)
        algorithm = "simplified-rgs"
        trace = tuple(tr)
    locals_ = [local.copy() for _ in range(partition.k_sub)]
    return _assemble_blocks(partition, locals_, algorithm, problem,
                            objective_trace=trace)


def solve_exhaustive(problem: RatioTraceProblem,
                     counter: FlopCounter | None = None) -> ReductionMatrix:
    """Optimal binary selection by enumerating all column subsets.

    Row order does not affect the objective, so subsets suffice.  Guarded
    to n <= 16, target_rows <= 6 to keep the enumeration tractable.
    """
    n, m = problem.dim, problem.target_rows
    if n > 16 or m > 6:
        raise ValueError(f"exhaustive search guard: n={n} > 16 or m={m} > 6")
    best_val, best_idx = -np.inf, None
    for combo in combinations(range(n), m):
        idx = np.array(combo)
        try:
            val = _objective_indices(idx, problem.c_a, problem.c_b, counter)
        except DegenerateSelectionError:
            continue
        if val > best_val:
            best_val, best_idx = val, idx
    if best_idx is None:
        raise DegenerateSelectionError("all selections are singular")
    return ReductionMatrix(kind="binary", algorithm="exhaustive",
                           indices=best_idx, objective=best_val)


def apply_reduction(red: ReductionMatrix, y: np.ndarray,
                    counter: FlopCounter | None = None) -> np.ndarray:
    """Reduce a received vector (or stacked columns of vectors).

    Binary selectors gather components without arithmetic; dense
    reductions multiply.
    """
    if red.kind == "binary":
        if counter is not None:
            counter.add(PHASE_REDUCE, 0, 0)  # selection is arithmetic-free
        return y[red.indices]
    if counter is not None:
        m, n = red.matrix.shape
        counter.add_matmul(PHASE_REDUCE, m, n, 1 if y.ndim == 1 else y.shape[1])
    return red.matrix @ y


def reduce_cov(red: ReductionMatrix, c: np.ndarray,
               counter: FlopCounter | None = None) -> np.ndarray:
    """D C D^H for a covariance matrix; gathering for binary selectors."""
    if red.kind == "binary":
        if counter is not None:
            counter.add(PHASE_REDUCE, 0, 0)
        return c[np.ix_(red.indices, red.indices)]
    if counter is not None:
        m, n = red.matrix.shape
        counter.add_matmul(PHASE_REDUCE, m, n, n)
        counter.add_matmul(PHASE_REDUCE, m, n, m)
    return red.matrix @ c @ red.matrix.conj().T
