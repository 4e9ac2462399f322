"""Receding-horizon control around a pluggable prediction model.

Each sampling instant, the controller minimizes a quadratic tracking cost
over a sequence of future input moves, subject to box bounds on the inputs
and on their per-step rates, applies the first optimized move, and repeats.
The prediction model is either the true plant integrated forward or a trained
sequence network evaluated on sliding regressor windows.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import lstm, plant, sqp
from .plant import DEFAULT_DT, DEFAULT_SUBSTEPS, KineticParameters
from .sysid import Normalization

N_INPUTS = 2


class ConstraintViolation(RuntimeError):
    """An optimized move violated the input constraints beyond tolerance."""


@dataclass(frozen=True)
class MpcSettings:
    """Horizons, weights, set-point and input bounds of the controller."""

    prediction_horizon: int = 10
    control_horizon: int = 10
    tracking_weights: tuple[float, float] = (2.4, 5.67)
    move_weights: tuple[float, float] = (25.0, 25.0)
    setpoint: tuple[float, float] = (0.324, 0.406)
    u_min: tuple[float, float] = (0.75, 0.5)
    u_max: tuple[float, float] = (0.85, 1.1)
    du_min: tuple[float, float] = (-0.1, -0.1)
    du_max: tuple[float, float] = (0.1, 0.1)
    dt: float = DEFAULT_DT

    def __post_init__(self) -> None:
        for name in ("tracking_weights", "move_weights", "setpoint", "u_min", "u_max", "du_min", "du_max"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.prediction_horizon < 1:
            raise ValueError("prediction horizon must be >= 1")
        if not 1 <= self.control_horizon <= self.prediction_horizon:
            raise ValueError("control horizon must lie in [1, prediction horizon]")
        if any(w < 0.0 for w in self.tracking_weights + self.move_weights):
            raise ValueError("weight entries must be non-negative")
        if any(lo >= hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must be strictly below u_max componentwise")
        if any(lo >= 0.0 for lo in self.du_min) or any(hi <= 0.0 for hi in self.du_max):
            raise ValueError("move bounds must straddle zero")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def tracking_diag(self) -> np.ndarray:
        return np.asarray(self.tracking_weights, dtype=float)

    @property
    def move_diag(self) -> np.ndarray:
        return np.asarray(self.move_weights, dtype=float)

    @property
    def setpoint_array(self) -> np.ndarray:
        return np.asarray(self.setpoint, dtype=float)

    def move_bounds(self, u_prev: np.ndarray) -> sqp.MoveBounds:
        return sqp.MoveBounds(
            steps=self.control_horizon,
            move_min=np.asarray(self.du_min),
            move_max=np.asarray(self.du_max),
            total_min=np.asarray(self.u_min),
            total_max=np.asarray(self.u_max),
            start=np.asarray(u_prev, dtype=float),
        )


class HistoryBuffer:
    """Ring buffer of the most recent measurements and applied inputs.

    The controller may act only once `size` completed (measurement, input)
    pairs are stored; at decision time the newest measurement has been
    observed but its input not yet committed.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("history size must be >= 1")
        self.size = size
        self._y: deque[np.ndarray] = deque(maxlen=size)
        self._u: deque[np.ndarray] = deque(maxlen=size)
        self._pending = False

    def observe(self, y) -> None:
        if self._pending:
            raise RuntimeError("previous measurement has no committed input yet")
        self._y.append(np.asarray(y, dtype=float).reshape(N_INPUTS).copy())
        self._pending = True

    def commit(self, u) -> None:
        if not self._pending:
            raise RuntimeError("no observed measurement to pair this input with")
        self._u.append(np.asarray(u, dtype=float).reshape(N_INPUTS).copy())
        self._pending = False

    @property
    def ready(self) -> bool:
        # A solve needs `size` measurements ending at the current one and the
        # size-1 inputs applied between them.
        return len(self._y) == self.size and self._pending

    def measurement_window(self) -> np.ndarray:
        """The last `size` measurements, newest (current) last."""
        if not self.ready:
            raise RuntimeError("history buffer is not filled yet")
        return np.stack(list(self._y))

    def input_window(self) -> np.ndarray:
        """The size-1 inputs applied between the stored measurements."""
        if not self.ready:
            raise RuntimeError("history buffer is not filled yet")
        return np.stack(list(self._u)[-(self.size - 1) :]) if self.size > 1 else np.empty((0, N_INPUTS))

    @property
    def last_input(self) -> np.ndarray:
        if not self._u:
            raise RuntimeError("no input has been committed yet")
        return self._u[-1].copy()


class PredictiveModel:
    """Interface for multi-step output prediction inside the controller."""

    def predict_many(self, y_hist: np.ndarray, u_hist: np.ndarray, u_future: np.ndarray) -> np.ndarray:
        """Predict outputs 1..p steps ahead for a batch of input candidates.

        y_hist: (p, 2) latest measurements, current one last. u_hist:
        (p-1, 2) inputs applied between them. u_future: (batch, p, 2)
        candidate input sequences. Returns (batch, p, 2). Implementations
        must be pure and safe for concurrent read-only use.
        """
        raise NotImplementedError

    def predict(self, y_hist: np.ndarray, u_hist: np.ndarray, u_future: np.ndarray) -> np.ndarray:
        """Single-candidate convenience wrapper; u_future has shape (p, 2)."""
        return self.predict_many(y_hist, u_hist, np.asarray(u_future, dtype=float)[np.newaxis])[0]


@dataclass(frozen=True)
class TruePlantModel(PredictiveModel):
    """Benchmark prediction model: integrate the actual plant equations."""

    kin: KineticParameters = KineticParameters()
    dt: float = DEFAULT_DT
    substeps: int = DEFAULT_SUBSTEPS

    def predict_many(self, y_hist, u_hist, u_future) -> np.ndarray:
        del u_hist
        u_future = np.asarray(u_future, dtype=float)
        batch, horizon, _ = u_future.shape
        state = np.tile(np.asarray(y_hist, dtype=float)[-1], (batch, 1))
        out = np.empty((batch, horizon, N_INPUTS))
        for j in range(horizon):
            state = plant.step(state, u_future[:, j], dt=self.dt, kin=self.kin, substeps=self.substeps)
            out[:, j] = state
        return out


@dataclass(frozen=True)
class LstmModel(PredictiveModel):
    """Trained-network prediction model over sliding regressor windows.

    The j-step-ahead output is the network applied to the window that starts
    j-p steps in the past, so early predictions lean mostly on measured data
    and only the final one is driven entirely by candidate inputs.
    """

    net: lstm.NetworkParameters
    normalization: Normalization

    def predict_many(self, y_hist, u_hist, u_future) -> np.ndarray:
        horizon = self.net.horizon
        y_hist = np.asarray(y_hist, dtype=float)
        u_hist = np.asarray(u_hist, dtype=float).reshape(-1, N_INPUTS)
        u_future = np.asarray(u_future, dtype=float)
        batch = u_future.shape[0]
        if y_hist.shape != (horizon, N_INPUTS):
            raise ValueError(f"need {horizon} past measurements, got shape {y_hist.shape}")
        if len(u_hist) != horizon - 1:
            raise ValueError(f"need {horizon - 1} past inputs, got {len(u_hist)}")
        if u_future.shape[1] != horizon:
            raise ValueError(f"need {horizon} future inputs per candidate including the pending one")
        norm = self.normalization
        y_hist_n = norm.normalize_y(y_hist)
        u_comb = np.concatenate(
            [np.tile(norm.normalize_u(u_hist), (batch, 1, 1)), norm.normalize_u(u_future)], axis=1
        )
        # Window j (0-based) predicts j+1 steps ahead: it starts at the j-th
        # stored measurement and spans `horizon` consecutive inputs.
        windows = np.stack([u_comb[:, j : j + horizon] for j in range(horizon)], axis=1)
        y0 = np.broadcast_to(y_hist_n, (batch, horizon, N_INPUTS))
        pred_n = lstm.forward(
            self.net,
            y0.reshape(batch * horizon, N_INPUTS),
            windows.reshape(batch * horizon, horizon, N_INPUTS),
        )
        return norm.denormalize_y(pred_n).reshape(batch, horizon, N_INPUTS)


def build_future_inputs(u_prev, du_seq, prediction_horizon: int) -> np.ndarray:
    """Accumulate moves onto the previous input; inputs hold after the last move.

    du_seq may be one sequence (m, 2) or a batch (batch, m, 2); the result has
    a matching leading shape with `prediction_horizon` time steps.
    """
    du = np.asarray(du_seq, dtype=float)
    single = du.ndim == 2
    if single:
        du = du[np.newaxis]
    m = du.shape[1]
    if m > prediction_horizon:
        raise ValueError(f"{m} moves exceed the prediction horizon {prediction_horizon}")
    u = np.asarray(u_prev, dtype=float) + np.cumsum(du, axis=1)
    if m < prediction_horizon:
        tail = np.repeat(u[:, -1:], prediction_horizon - m, axis=1)
        u = np.concatenate([u, tail], axis=1)
    return u[0] if single else u


def stage_cost(y_pred, du_seq, settings: MpcSettings) -> float:
    """Quadratic tracking-plus-move cost of one predicted horizon."""
    return float(stage_cost_batch(np.asarray(y_pred)[np.newaxis], np.asarray(du_seq)[np.newaxis], settings)[0])


def stage_cost_batch(y_pred: np.ndarray, du_seq: np.ndarray, settings: MpcSettings) -> np.ndarray:
    y_pred = np.asarray(y_pred, dtype=float)
    du_seq = np.asarray(du_seq, dtype=float)
    err = y_pred - settings.setpoint_array
    track = np.sum(err**2 * settings.tracking_diag, axis=(1, 2))
    move = np.sum(du_seq**2 * settings.move_diag, axis=(1, 2))
    return track + move


def predict_horizon(model: PredictiveModel, hist: HistoryBuffer, du_seq, settings: MpcSettings) -> np.ndarray:
    """Predicted outputs over the horizon for one candidate move sequence."""
    if not hist.ready:
        raise RuntimeError("history buffer must be full before predicting")
    u_future = build_future_inputs(hist.last_input, du_seq, settings.prediction_horizon)
    return model.predict(hist.measurement_window(), hist.input_window(), u_future)


@dataclass
class RhcSolution:
    """First-move decision plus solver diagnostics for one sampling instant."""

    du_seq: np.ndarray
    cost: float
    iterations: int
    converged: bool
    n_evaluations: int
    constraint_residual: float

    @property
    def first_move(self) -> np.ndarray:
        return self.du_seq[0]

    @property
    def flagged(self) -> bool:
        return not self.converged


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 50
    fd_step: float = 1e-6
    step_tolerance: float = 1e-7
    cost_tolerance: float = 1e-10


def shift_warm_start(du_seq: np.ndarray | None, control_horizon: int) -> np.ndarray:
    """Previous optimal moves shifted one step, zero-padded at the tail."""
    if du_seq is None:
        return np.zeros((control_horizon, N_INPUTS))
    du = np.asarray(du_seq, dtype=float).reshape(-1, N_INPUTS)
    shifted = np.zeros((control_horizon, N_INPUTS))
    shifted[: len(du) - 1] = du[1:]
    return shifted


def solve_rhc(
    model: PredictiveModel,
    hist: HistoryBuffer,
    settings: MpcSettings,
    warm_start: np.ndarray | None = None,
    options: SolverOptions = SolverOptions(),
) -> RhcSolution:
    """Minimize the horizon cost over feasible move sequences at one instant.

    The returned sequence is feasible with respect to both bound families and
    costs no more than the (projected) warm start and the zero sequence. A
    non-converged solve still returns the best feasible point found, flagged.
    """
    if not hist.ready:
        raise RuntimeError("history buffer must be full before solving")
    u_prev = hist.last_input
    bounds = settings.move_bounds(u_prev)
    y_hist = hist.measurement_window()
    u_hist = hist.input_window()

    def objective(du_batch: np.ndarray) -> np.ndarray:
        u_future = build_future_inputs(u_prev, du_batch, settings.prediction_horizon)
        y_pred = model.predict_many(y_hist, u_hist, u_future)
        return stage_cost_batch(y_pred, du_batch, settings)

    start = np.zeros((settings.control_horizon, N_INPUTS)) if warm_start is None else warm_start
    result = sqp.minimize_moves(
        objective,
        np.asarray(start, dtype=float),
        bounds,
        max_iterations=options.max_iterations,
        fd_step=options.fd_step,
        step_tolerance=options.step_tolerance,
        cost_tolerance=options.cost_tolerance,
    )
    return RhcSolution(
        du_seq=result.moves,
        cost=result.cost,
        iterations=result.iterations,
        converged=result.converged,
        n_evaluations=result.n_evaluations,
        constraint_residual=result.constraint_residual,
    )


def apply_first_move(du_seq, u_prev, settings: MpcSettings, tol: float = 1e-9) -> np.ndarray:
    """Apply the first optimized move; clamping must be a no-op.

    The solver guarantees feasibility, so the clamp only absorbs roundoff;
    anything larger indicates a solver bug and raises instead of silently
    distorting the commanded input.
    """
    du = np.asarray(du_seq, dtype=float).reshape(-1, N_INPUTS)
    if len(du) == 0:
        raise ValueError("du_seq must contain at least one move")
    raw = np.asarray(u_prev, dtype=float) + du[0]
    clamped = np.clip(raw, settings.u_min, settings.u_max)
    if np.any(np.abs(clamped - raw) > tol):
        raise ConstraintViolation(
            f"first move {du[0]} from {np.asarray(u_prev)} violates input bounds "
            f"by {np.max(np.abs(clamped - raw)):.3e}"
        )
    return clamped
