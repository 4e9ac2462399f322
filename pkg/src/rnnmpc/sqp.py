"""Local solver for move sequences under per-step and running-total bounds.

The decision variable is a sequence of input moves d[0..m-1] (each a vector
over control channels). Feasibility requires every move to sit inside a box
and every running total start + d[0] + ... + d[i] to sit inside a second box;
per channel the two families couple through the prefix sums, so the feasible
set is a polytope rather than a plain box.

The outer loop is a quasi-Newton sequential-quadratic method: gradients come
from forward differences of the (black-box, batched) objective, curvature
from damped BFGS updates, and each quadratic subproblem is solved over the
polytope with an ADMM splitting followed by an active-set polish. Steps are
globalized with a backtracking line search; since the feasible set is convex,
every line-search iterate stays feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class MoveBounds:
    """Box bounds on individual moves and on their running totals."""

    steps: int
    move_min: np.ndarray
    move_max: np.ndarray
    total_min: np.ndarray
    total_max: np.ndarray
    start: np.ndarray

    def __post_init__(self) -> None:
        for name in ("move_min", "move_max", "total_min", "total_max", "start"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = len(self.move_min)
        if not all(len(getattr(self, f)) == n for f in ("move_max", "total_min", "total_max", "start")):
            raise ValueError("all bound vectors must have the same number of channels")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if np.any(self.move_min >= self.move_max):
            raise ValueError("move_min must be strictly below move_max")
        if np.any(self.total_min >= self.total_max):
            raise ValueError("total_min must be strictly below total_max")
        if np.any(self.start < self.total_min - FEASIBILITY_TOL) or np.any(
            self.start > self.total_max + FEASIBILITY_TOL
        ):
            raise ValueError(f"start {self.start} lies outside the total box")
        if np.any(self.move_min > 0.0) or np.any(self.move_max < 0.0):
            raise ValueError("the zero move must be feasible (move box must contain 0)")

    @property
    def n_channels(self) -> int:
        return len(self.move_min)

    @property
    def n_vars(self) -> int:
        return self.steps * self.n_channels

    def residual(self, moves: np.ndarray) -> float:
        """Maximum constraint violation of a (steps, channels) move sequence."""
        d = np.asarray(moves, dtype=float).reshape(self.steps, self.n_channels)
        viol = np.maximum(self.move_min - d, d - self.move_max)
        totals = self.start + np.cumsum(d, axis=0)
        viol_tot = np.maximum(self.total_min - totals, totals - self.total_max)
        return float(max(viol.max(), viol_tot.max(), 0.0))

    def clip_feasible(self, moves: np.ndarray) -> np.ndarray:
        """Repair tiny constraint violations by sequential clipping.

        Intended for numerical residuals (~1e-8 or below) left by the QP
        solver; adjustments of that size cannot push a move across the
        opposite bound of its box, so the result is feasible to roundoff.
        """
        d = np.array(moves, dtype=float).reshape(self.steps, self.n_channels)
        d = np.clip(d, self.move_min, self.move_max)
        running = self.start.copy()
        for i in range(self.steps):
            target = np.clip(running + d[i], self.total_min, self.total_max)
            d[i] = np.clip(target - running, self.move_min, self.move_max)
            running = running + d[i]
        return d


def _prefix_matrix(bounds: MoveBounds) -> np.ndarray:
    """Linear map from flattened moves to flattened running totals."""
    m, n_ch = bounds.steps, bounds.n_channels
    n = bounds.n_vars
    mat = np.zeros((n, n))
    for c in range(n_ch):
        for i in range(m):
            for j in range(i + 1):
                mat[i * n_ch + c, j * n_ch + c] = 1.0
    return mat


def _constraint_system(bounds: MoveBounds):
    """Stacked linear constraints lo <= A x <= hi over flattened moves."""
    m, n_ch = bounds.steps, bounds.n_channels
    n = bounds.n_vars
    a = np.vstack([np.eye(n), _prefix_matrix(bounds)])
    lo = np.concatenate([np.tile(bounds.move_min, m), np.tile(bounds.total_min - bounds.start, m)])
    hi = np.concatenate([np.tile(bounds.move_max, m), np.tile(bounds.total_max - bounds.start, m)])
    return a, lo, hi


def _kkt_polish(h, g, a, lo, hi, x, z, tol=1e-7):
    """Solve the QP restricted to the active set implied by the ADMM solution."""
    active_lo = z <= lo + tol
    active_hi = z >= hi - tol
    active = active_lo | active_hi
    if not np.any(active):
        try:
            return np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            return None
    a_act = a[active]
    b_act = np.where(active_lo[active], lo[active], hi[active])
    n = len(g)
    k = len(b_act)
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = h
    kkt[:n, n:] = a_act.T
    kkt[n:, :n] = a_act
    rhs = np.concatenate([-g, b_act])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    return sol[:n]


def solve_qp(h: np.ndarray, g: np.ndarray, bounds: MoveBounds, x0: np.ndarray | None = None) -> np.ndarray:
    """Minimize 1/2 x'Hx + g'x over the move polytope (H symmetric PSD).

    The unconstrained minimizer is returned outright when it is feasible.
    Otherwise: ADMM on the split min f(x) + indicator(lo <= Ax <= hi) to
    locate the active set, then a KKT polish on that set for full precision
    when it checks out. Returns a flattened, feasible solution.
    """
    n = len(g)
    try:
        x_free = np.linalg.solve(h, -g)
    except np.linalg.LinAlgError:
        x_free = None
    if x_free is not None and bounds.residual(x_free) <= 1e-12:
        return bounds.clip_feasible(x_free.reshape(bounds.steps, bounds.n_channels)).reshape(-1)
    a, lo, hi = _constraint_system(bounds)
    rho = max(np.trace(h) / n, 1e-2)
    sigma = 1e-8
    lhs = h + sigma * np.eye(n) + rho * (a.T @ a)
    lhs_inv = np.linalg.inv(lhs)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n).copy()
    z = np.clip(a @ x, lo, hi)
    w = np.zeros(len(z))
    z_chk = z.copy()
    for it in range(1, 1001):
        x = lhs_inv @ (sigma * x - g + rho * (a.T @ (z - w)))
        ax = a @ x
        z = np.clip(ax + w, lo, hi)
        w += ax - z
        if it % 20 == 0:
            primal = np.max(np.abs(ax - z))
            dual = rho * np.max(np.abs(a.T @ (z - z_chk)))
            z_chk = z.copy()
            if primal < 1e-9 and dual < 1e-9:
                break
    polished = _kkt_polish(h, g, a, lo, hi, x, z)
    best = x
    if polished is not None:
        viol = max(np.max(lo - a @ polished), np.max(a @ polished - hi))
        if viol <= 1e-9:
            obj_admm = 0.5 * x @ h @ x + g @ x
            obj_pol = 0.5 * polished @ h @ polished + g @ polished
            if obj_pol <= obj_admm + 1e-10:
                best = polished
    moves = bounds.clip_feasible(best.reshape(bounds.steps, bounds.n_channels))
    return moves.reshape(-1)


def project(moves: np.ndarray, bounds: MoveBounds) -> np.ndarray:
    """Euclidean projection onto the move polytope."""
    x0 = np.asarray(moves, dtype=float).reshape(-1)
    n = bounds.n_vars
    sol = solve_qp(np.eye(n), -x0, bounds)
    return sol.reshape(bounds.steps, bounds.n_channels)


@dataclass
class SolveResult:
    """Outcome of one receding-horizon solve."""

    moves: np.ndarray
    cost: float
    iterations: int
    converged: bool
    n_evaluations: int
    constraint_residual: float


# Backtracking ladder evaluated as one batch; the first entry satisfying the
# sufficient-decrease test wins, matching sequential backtracking exactly.
_LINE_SEARCH_STEPS = 0.5 ** np.arange(0, 11)
_ARMIJO_C1 = 1e-4


def minimize_moves(
    objective,
    x0: np.ndarray,
    bounds: MoveBounds,
    max_iterations: int = 50,
    fd_step: float = 1e-6,
    step_tolerance: float = 1e-7,
    cost_tolerance: float = 1e-10,
) -> SolveResult:
    """Minimize a black-box cost over feasible move sequences.

    `objective` maps a batch of move sequences, shape (batch, steps,
    channels), to a cost vector of shape (batch,). The solver is fully
    deterministic. The returned sequence is feasible (residual below 1e-9),
    costs no more than both the supplied start point (after projection) and
    the zero sequence, and is flagged converged unless the iteration budget
    ran out while progress was still being made.
    """
    m, n_ch = bounds.steps, bounds.n_channels
    n = bounds.n_vars

    n_evals = 0

    def f_batch(flat_batch: np.ndarray) -> np.ndarray:
        nonlocal n_evals
        n_evals += len(flat_batch)
        return np.asarray(objective(flat_batch.reshape(-1, m, n_ch)), dtype=float)

    x_start = np.asarray(x0, dtype=float).reshape(n)
    if bounds.residual(x_start) > FEASIBILITY_TOL:
        x_start = project(x_start, bounds).reshape(n)
    zero = np.zeros(n)
    f_pair = f_batch(np.stack([x_start, zero]))
    if f_pair[1] < f_pair[0]:
        x, fx = zero, float(f_pair[1])
    else:
        x, fx = x_start, float(f_pair[0])

    best_x, best_f = x.copy(), fx

    def gradient(at: np.ndarray, f_at: float) -> np.ndarray:
        pert = at[np.newaxis, :] + fd_step * np.eye(n)
        return (f_batch(pert) - f_at) / fd_step

    g = gradient(x, fx)
    h = np.eye(n)
    scaled = False
    iterations = 0
    converged = False
    for _ in range(max_iterations):
        iterations += 1
        x_qp = solve_qp(h, g - h @ x, bounds, x)
        p = x_qp - x
        step_norm = float(np.linalg.norm(p))
        if step_norm <= step_tolerance:
            converged = True
            break
        slope = float(g @ p)
        if slope >= 0.0:
            converged = True
            break
        candidates = x[np.newaxis, :] + _LINE_SEARCH_STEPS[:, np.newaxis] * p
        f_cand = f_batch(candidates)
        accepted = f_cand <= fx + _ARMIJO_C1 * _LINE_SEARCH_STEPS * slope
        if np.any(accepted):
            pick = int(np.argmax(accepted))
        else:
            pick = int(np.argmin(f_cand))
            if f_cand[pick] >= fx:
                converged = True
                break
        x_new = candidates[pick]
        f_new = float(f_cand[pick])
        decrease = fx - f_new
        g_new = gradient(x_new, f_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if not scaled and sy > 0.0:
            h = np.eye(n) * max(float(y @ y) / sy, 1e-8)
            scaled = True
        hs = h @ s
        shs = float(s @ hs)
        if shs > 0.0:
            # Powell damping keeps the BFGS matrix positive definite.
            if sy < 0.2 * shs:
                theta = 0.8 * shs / (shs - sy)
                y = theta * y + (1.0 - theta) * hs
                sy = float(s @ y)
            if sy > 1e-14:
                h = h - np.outer(hs, hs) / shs + np.outer(y, y) / sy
        x, fx, g = x_new, f_new, g_new
        if fx < best_f:
            best_x, best_f = x.copy(), fx
        if decrease < cost_tolerance:
            converged = True
            break

    moves = bounds.clip_feasible(best_x.reshape(m, n_ch))
    residual = bounds.residual(moves)
    return SolveResult(
        moves=moves,
        cost=best_f,
        iterations=iterations,
        converged=converged,
        n_evaluations=n_evals,
        constraint_residual=residual,
    )
