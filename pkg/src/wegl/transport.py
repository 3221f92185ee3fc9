"""Exact optimal transport between uniform empirical measures.

The solver is a transportation simplex (network simplex specialized to the
bipartite transportation polytope): it starts from a northwest-corner basis
and pivots along tree cycles until no reduced cost is negative, returning an
optimal vertex plan.  Entering candidates are picked by most-negative reduced
cost with ties broken by lowest flat index; a run of degenerate pivots
switches entering selection to Bland's lowest-index rule, which guarantees
termination, and a non-degenerate pivot switches back.  Degenerate bases are
kept as zero-mass cells; no epsilon perturbation is applied.

Plans store probability mass: rows sum to 1/N and columns to 1/N_i.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TransportPlan",
    "OptimalityCertificate",
    "squared_cost",
    "solve_ot",
    "wasserstein2",
    "verify_optimality",
    "sinkhorn",
    "solve_count",
    "reset_solve_count",
]

_solve_lock = threading.Lock()
_solve_count = 0


def solve_count() -> int:
    """Total exact LP solves performed since the last reset."""
    return _solve_count


def reset_solve_count() -> None:
    global _solve_count
    with _solve_lock:
        _solve_count = 0


@dataclass
class TransportPlan:
    """An optimal coupling in mass form together with its objective value."""

    plan: np.ndarray       # (N, N_i), entries >= 0, rows sum 1/N, cols sum 1/N_i
    objective: float       # sum(plan * cost), squared-distance units


@dataclass
class OptimalityCertificate:
    """Dual feasibility check for a plan: potentials, violations, verdict."""

    passed: bool
    worst_violation: float     # max over all cells of alpha_j + beta_k - cost_jk
    support_gap: float         # max |alpha_j + beta_k - cost_jk| over support cells
    duality_gap: float         # |primal objective - dual objective|
    row_potentials: np.ndarray = field(repr=False)
    col_potentials: np.ndarray = field(repr=False)


def squared_cost(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, source rows against target rows."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.ndim != 2 or target.ndim != 2 or source.shape[1] != target.shape[1]:
        raise ValueError("point clouds must be 2-D with a shared coordinate dimension")
    diff = source[:, None, :] - target[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _northwest_corner(row_masses: np.ndarray, col_masses: np.ndarray):
    """Initial basic feasible solution: exactly n + m - 1 cells on a staircase."""
    n, m = len(row_masses), len(col_masses)
    rows = np.empty(n + m - 1, dtype=np.int64)
    cols = np.empty(n + m - 1, dtype=np.int64)
    mass = np.empty(n + m - 1, dtype=np.float64)
    a = row_masses.copy()
    b = col_masses.copy()
    i = j = 0
    for t in range(n + m - 1):
        q = min(a[i], b[j])
        q = max(q, 0.0)
        rows[t], cols[t], mass[t] = i, j, q
        a[i] -= q
        b[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if a[i] <= 0.0 and i < n - 1:
            i += 1
        elif j < m - 1:
            j += 1
        else:
            i += 1
    return rows, cols, mass


class _Basis:
    """Spanning-tree basis of a transportation problem.

    Nodes are rows (0..n-1) and columns (n..n+m-1); basic cells are the tree
    edges.  Adjacency lists index into the parallel rows/cols/mass arrays.
    """

    def __init__(self, rows, cols, mass, n, m):
        self.rows = rows
        self.cols = cols
        self.mass = mass
        self.n = n
        self.m = m
        self.row_cells = [[] for _ in range(n)]
        self.col_cells = [[] for _ in range(m)]
        for idx in range(len(rows)):
            self.row_cells[rows[idx]].append(idx)
            self.col_cells[cols[idx]].append(idx)

    def duals(self, cost):
        """Potentials with u[0] anchored at 0, solved over the tree."""
        n, m = self.n, self.m
        u = np.empty(n)
        v = np.empty(m)
        seen_row = np.zeros(n, dtype=bool)
        seen_col = np.zeros(m, dtype=bool)
        u[0] = 0.0
        seen_row[0] = True
        stack = [(True, 0)]
        while stack:
            is_row, node = stack.pop()
            if is_row:
                for idx in self.row_cells[node]:
                    col = self.cols[idx]
                    if not seen_col[col]:
                        v[col] = cost[node, col] - u[node]
                        seen_col[col] = True
                        stack.append((False, col))
            else:
                for idx in self.col_cells[node]:
                    row = self.rows[idx]
                    if not seen_row[row]:
                        u[row] = cost[row, node] - v[node]
                        seen_row[row] = True
                        stack.append((True, row))
        if not (seen_row.all() and seen_col.all()):
            raise RuntimeError("basis does not span the transportation graph")
        return u, v

    def path_cells(self, start_row, end_col):
        """Cells on the unique tree path from a row node to a column node."""
        n = self.n
        parent_cell = {}
        parent_node = {}
        start = ("r", start_row)
        goal = ("c", end_col)
        parent_node[start] = None
        stack = [start]
        while stack:
            node = stack.pop()
            if node == goal:
                break
            kind, index = node
            cells = self.row_cells[index] if kind == "r" else self.col_cells[index]
            for idx in cells:
                nxt = ("c", self.cols[idx]) if kind == "r" else ("r", self.rows[idx])
                if nxt not in parent_node:
                    parent_node[nxt] = node
                    parent_cell[nxt] = idx
                    stack.append(nxt)
        if goal not in parent_node:
            raise RuntimeError("entering cell not connected to the basis tree")
        path = []
        node = goal
        while parent_node[node] is not None:
            path.append(parent_cell[node])
            node = parent_node[node]
        return path  # ordered from the column end back to the row end

    def replace(self, leaving_idx, new_row, new_col, new_mass):
        self.row_cells[self.rows[leaving_idx]].remove(leaving_idx)
        self.col_cells[self.cols[leaving_idx]].remove(leaving_idx)
        self.rows[leaving_idx] = new_row
        self.cols[leaving_idx] = new_col
        self.mass[leaving_idx] = new_mass
        self.row_cells[new_row].append(leaving_idx)
        self.col_cells[new_col].append(leaving_idx)


def _transportation_simplex(cost, row_masses, col_masses):
    n, m = cost.shape
    rows, cols, mass = _northwest_corner(row_masses, col_masses)
    basis = _Basis(rows, cols, mass, n, m)
    tol = 1e-12 * (1.0 + float(np.abs(cost).max()))
    max_pivots = 20 * (n + m) * max(n, m) + 1000
    bland = False
    degenerate_run = 0

    for _ in range(max_pivots):
        u, v = basis.duals(cost)
        reduced = cost - u[:, None] - v[None, :]
        reduced[basis.rows, basis.cols] = 0.0
        if bland:
            candidates = np.flatnonzero(reduced.ravel() < -tol)
            if candidates.size == 0:
                break
            enter_flat = int(candidates[0])
        else:
            enter_flat = int(np.argmin(reduced))  # first occurrence on ties
            if reduced.flat[enter_flat] >= -tol:
                break
        enter_row, enter_col = divmod(enter_flat, m)

        # The entering cell closes a unique cycle with the tree path between
        # its endpoints; cells at even positions walking from the column end
        # lose mass, the others gain it.
        path = basis.path_cells(enter_row, enter_col)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(basis.mass[idx] for idx in minus)
        leave = min(
            (idx for idx in minus if basis.mass[idx] <= theta),
            key=lambda idx: basis.rows[idx] * m + basis.cols[idx],
        )
        for idx in minus:
            basis.mass[idx] = max(basis.mass[idx] - theta, 0.0)
        for idx in plus:
            basis.mass[idx] += theta
        basis.replace(leave, enter_row, enter_col, theta)

        if theta <= tol:
            degenerate_run += 1
            if degenerate_run > n + m:
                bland = True
        else:
            degenerate_run = 0
            bland = False
    else:
        raise RuntimeError("transportation simplex failed to converge")

    plan = np.zeros((n, m))
    plan[basis.rows, basis.cols] = basis.mass
    objective = float(np.dot(basis.mass, cost[basis.rows, basis.cols]))
    return plan, objective


def solve_ot(cost: np.ndarray) -> TransportPlan:
    """Exact OT plan between uniform measures for the given cost matrix.

    Returns a vertex of the transportation polytope (at most N + N_i - 1
    nonzero entries) minimizing ``sum(plan * cost)``.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost matrix must be 2-D and nonempty")
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix must be finite")
    n, m = cost.shape
    global _solve_count
    with _solve_lock:
        _solve_count += 1
    plan, objective = _transportation_simplex(
        cost, np.full(n, 1.0 / n), np.full(m, 1.0 / m)
    )
    return TransportPlan(plan=plan, objective=objective)


def wasserstein2(source: np.ndarray, target: np.ndarray) -> float:
    """2-Wasserstein distance between two uniform point clouds."""
    result = solve_ot(squared_cost(source, target))
    return float(np.sqrt(max(result.objective, 0.0)))


def _support_components(support_rows, support_cols, n, m):
    """Union-find over rows/cols joined by support cells."""
    parent = list(range(n + m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(support_rows, support_cols):
        ri, rj = find(i), find(n + j)
        if ri != rj:
            parent[ri] = rj
    return find


def verify_optimality(cost: np.ndarray, plan: TransportPlan | np.ndarray,
                      tol: float = 1e-9) -> OptimalityCertificate:
    """Certify a plan by constructing dual potentials from its support.

    Potentials are propagated over the support forest; disconnected
    components are joined by shifting whole components so that the tightest
    cross-component constraint becomes an equality (the implied tight cells
    play the role of zero-mass basic cells completing the forest).  The plan
    passes when alpha_j + beta_k <= cost_jk + tol everywhere with equality on
    the support.
    """
    cost = np.asarray(cost, dtype=np.float64)
    matrix = plan.plan if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    if matrix.shape != cost.shape:
        raise ValueError("plan and cost shapes differ")
    n, m = cost.shape
    support = matrix > 1e-12 * max(float(matrix.max(initial=0.0)), 1e-300)
    s_rows, s_cols = np.nonzero(support)

    # Anchored potentials inside each support component.
    alpha = np.zeros(n)
    beta = np.zeros(m)
    seen_row = np.zeros(n, dtype=bool)
    seen_col = np.zeros(m, dtype=bool)
    row_adj = [[] for _ in range(n)]
    col_adj = [[] for _ in range(m)]
    for i, j in zip(s_rows, s_cols):
        row_adj[i].append(j)
        col_adj[j].append(i)
    for start in range(n):
        if seen_row[start]:
            continue
        alpha[start] = 0.0
        seen_row[start] = True
        stack = [(True, start)]
        while stack:
            is_row, node = stack.pop()
            if is_row:
                for j in row_adj[node]:
                    if not seen_col[j]:
                        beta[j] = cost[node, j] - alpha[node]
                        seen_col[j] = True
                        stack.append((False, j))
            else:
                for i in col_adj[node]:
                    if not seen_row[i]:
                        alpha[i] = cost[i, node] - beta[node]
                        seen_row[i] = True
                        stack.append((True, i))
    for j in range(m):
        if not seen_col[j]:
            beta[j] = 0.0  # isolated column component

    # Component offsets: difference constraints delta_P - delta_Q <= slack
    # for every cross cell, solved by Bellman-Ford from a virtual source.
    find = _support_components(s_rows, s_cols, n, m)
    comp_of_row = np.array([find(i) for i in range(n)])
    comp_of_col = np.array([find(n + j) for j in range(m)])
    comps = sorted(set(comp_of_row.tolist()) | set(comp_of_col.tolist()))
    comp_index = {c: k for k, c in enumerate(comps)}
    p = len(comps)
    if p > 1:
        slack = cost - alpha[:, None] - beta[None, :]
        delta = np.zeros(p)
        edges = {}
        for i in range(n):
            ci = comp_index[comp_of_row[i]]
            for j in range(m):
                cj = comp_index[comp_of_col[j]]
                if ci != cj:
                    key = (cj, ci)  # constraint: delta[ci] - delta[cj] <= slack[i, j]
                    val = slack[i, j]
                    if key not in edges or val < edges[key]:
                        edges[key] = val
        for _ in range(p):
            changed = False
            for (q, r), w in edges.items():
                if delta[q] + w < delta[r] - 1e-15:
                    delta[r] = delta[q] + w
                    changed = True
            if not changed:
                break
        alpha = alpha + delta[np.vectorize(lambda c: comp_index[c])(comp_of_row)]
        beta = beta - delta[np.vectorize(lambda c: comp_index[c])(comp_of_col)]

    residual = alpha[:, None] + beta[None, :] - cost
    worst = float(residual.max())
    support_gap = float(np.abs(residual[support]).max()) if support.any() else 0.0
    row_masses = matrix.sum(axis=1)
    col_masses = matrix.sum(axis=0)
    primal = float(np.sum(matrix * cost))
    dual = float(np.dot(row_masses, alpha) + np.dot(col_masses, beta))
    passed = worst <= tol and support_gap <= tol
    return OptimalityCertificate(
        passed=passed,
        worst_violation=worst,
        support_gap=support_gap,
        duality_gap=abs(primal - dual),
        row_potentials=alpha,
        col_potentials=beta,
    )


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    peak = a.max(axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - peak), axis=axis)) + np.squeeze(peak, axis=axis)
    return out


def sinkhorn(cost: np.ndarray, epsilon: float, max_iter: int = 1000000,
             marginal_tol: float = 1e-8) -> TransportPlan:
    """Entropy-regularized OT via log-domain Sinkhorn iterations.

    Converges to a plan whose marginals match the uniform measures within
    ``marginal_tol``; the objective upper-bounds the exact optimum and
    approaches it as epsilon shrinks.  The iteration count grows quickly as
    epsilon drops below the cost scale.  Raises if max_iter is exhausted.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost matrix must be 2-D and nonempty")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n, m = cost.shape
    log_a = np.full(n, -np.log(n))
    log_b = np.full(m, -np.log(m))
    f = np.zeros(n)
    g = np.zeros(m)
    scaled = -cost / epsilon
    for _ in range(max_iter):
        f = epsilon * (log_a - _logsumexp(scaled + g[None, :] / epsilon, axis=1))
        g = epsilon * (log_b - _logsumexp(scaled + f[:, None] / epsilon, axis=0))
        plan = np.exp(scaled + f[:, None] / epsilon + g[None, :] / epsilon)
        err = max(
            float(np.abs(plan.sum(axis=1) - 1.0 / n).max()),
            float(np.abs(plan.sum(axis=0) - 1.0 / m).max()),
        )
        if err < marginal_tol:
            return TransportPlan(plan=plan, objective=float(np.sum(plan * cost)))
    raise RuntimeError(f"sinkhorn did not reach marginal tolerance in {max_iter} iterations")
