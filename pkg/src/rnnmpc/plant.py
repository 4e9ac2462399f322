"""True-plant model of a single CSTR running the reversible network A <=> R <=> S.

All quantities are dimensionless: concentrations are fractions of the feed
basis (C_A + C_R + C_S = 1), temperature is scaled by its reference value and
time by the nominal residence time. The manipulated variables are the feed
flow rate q and the reactor temperature T; the measured state is (C_A, C_R),
with C_S always recovered as 1 - C_A - C_R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_C_A0 = 0.8
DEFAULT_K0 = (1.0, 0.7, 0.1, 0.006)
DEFAULT_E_OVER_RT0 = (8.33, 10.0, 50.0, 83.3)
DEFAULT_DT = 0.1
DEFAULT_SUBSTEPS = 10

# Tolerance for "inside the concentration simplex" checks on constructed states.
SIMPLEX_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Fixed-step integration produced non-finite values."""


class SingularSteadyStateError(np.linalg.LinAlgError):
    """The steady-state linear system is singular or numerically unusable."""


@dataclass(frozen=True)
class KineticParameters:
    """Arrhenius kinetics for the four reaction channels of A <=> R <=> S.

    k0 holds the pre-exponential factors and e_over_rt0 the normalized
    activation energies, ordered (A->R, R->S, S->R, R->A). c_a0 is the feed
    fraction of species A; the remainder of the feed is R.
    """

    c_a0: float = DEFAULT_C_A0
    k0: tuple[float, float, float, float] = DEFAULT_K0
    e_over_rt0: tuple[float, float, float, float] = DEFAULT_E_OVER_RT0

    def __post_init__(self) -> None:
        object.__setattr__(self, "k0", tuple(float(v) for v in self.k0))
        object.__setattr__(self, "e_over_rt0", tuple(float(v) for v in self.e_over_rt0))
        if not 0.0 < self.c_a0 <= 1.0:
            raise ValueError(f"c_a0 must lie in (0, 1], got {self.c_a0}")
        if len(self.k0) != 4 or len(self.e_over_rt0) != 4:
            raise ValueError("k0 and e_over_rt0 must each have four entries")
        if any(v <= 0.0 for v in self.k0):
            raise ValueError(f"all pre-exponential factors must be positive, got {self.k0}")
        if any(v <= 0.0 for v in self.e_over_rt0):
            raise ValueError(f"all activation energies must be positive, got {self.e_over_rt0}")

    @property
    def k0_array(self) -> np.ndarray:
        return np.asarray(self.k0, dtype=float)

    @property
    def e_array(self) -> np.ndarray:
        return np.asarray(self.e_over_rt0, dtype=float)


@dataclass(frozen=True)
class PlantState:
    """Measured reactor composition (C_A, C_R); C_S is the simplex remainder."""

    c_a: float
    c_r: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "c_a", float(self.c_a))
        object.__setattr__(self, "c_r", float(self.c_r))
        if self.c_a < -SIMPLEX_TOL or self.c_r < -SIMPLEX_TOL:
            raise ValueError(f"concentrations must be non-negative, got ({self.c_a}, {self.c_r})")
        if self.c_a + self.c_r > 1.0 + SIMPLEX_TOL:
            raise ValueError(f"C_A + C_R must not exceed 1, got {self.c_a + self.c_r}")

    @property
    def c_s(self) -> float:
        return 1.0 - self.c_a - self.c_r

    def as_array(self) -> np.ndarray:
        return np.array([self.c_a, self.c_r], dtype=float)

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        arr = self.as_array()
        return arr.astype(dtype) if dtype is not None else arr

    @classmethod
    def from_array(cls, arr) -> "PlantState":
        a = np.asarray(arr, dtype=float).reshape(2)
        return cls(a[0], a[1])


@dataclass(frozen=True)
class ControlInput:
    """Manipulated variables: feed flow rate q and reactor temperature T."""

    q: float
    temperature: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "temperature", float(self.temperature))
        if self.q <= 0.0:
            raise ValueError(f"flow rate must be positive, got {self.q}")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.temperature], dtype=float)

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        arr = self.as_array()
        return arr.astype(dtype) if dtype is not None else arr

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        a = np.asarray(arr, dtype=float).reshape(2)
        return cls(a[0], a[1])


def rate_constants(kin: KineticParameters, temperature) -> np.ndarray:
    """Arrhenius rates k_j = k0_j * exp(-(E/RT0)_j * (1/T - 1)).

    Accepts a scalar temperature or an array of temperatures; the four rate
    constants populate the trailing axis of the result.
    """
    t = np.asarray(temperature, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("temperature must be positive")
    return kin.k0_array * np.exp(-kin.e_array * (1.0 / t[..., np.newaxis] - 1.0))


def state_derivative(x, u, kin: KineticParameters = KineticParameters()) -> np.ndarray:
    """Time derivative of (C_A, C_R) under flow q and temperature T.

    x and u may be single vectors of shape (2,) or batches of shape (..., 2);
    batch dimensions broadcast.
    """
    xa = np.asarray(x, dtype=float)
    ua = np.asarray(u, dtype=float)
    c_a, c_r = xa[..., 0], xa[..., 1]
    q, temp = ua[..., 0], ua[..., 1]
    k = rate_constants(kin, temp)
    k1, k2, k3, k4 = k[..., 0], k[..., 1], k[..., 2], k[..., 3]
    c_s = 1.0 - c_a - c_r
    d_a = q * (kin.c_a0 - c_a) - k1 * c_a + k4 * c_r
    d_r = q * (1.0 - kin.c_a0 - c_r) + k1 * c_a + k3 * c_s - (k2 + k4) * c_r
    return np.stack([d_a, d_r], axis=-1)


def _affine_dynamics(u: np.ndarray, kin: KineticParameters) -> tuple[np.ndarray, np.ndarray]:
    """The balance equations as dx/dt = A(u) x + b(u) (exact, not a linearization)."""
    q, temp = u[..., 0], u[..., 1]
    k = rate_constants(kin, temp)
    k1, k2, k3, k4 = k[..., 0], k[..., 1], k[..., 2], k[..., 3]
    a = np.empty(u.shape[:-1] + (2, 2))
    a[..., 0, 0] = -(q + k1)
    a[..., 0, 1] = k4
    a[..., 1, 0] = k1 - k3
    a[..., 1, 1] = -(q + k2 + k3 + k4)
    b = np.stack([q * kin.c_a0, q * (1.0 - kin.c_a0) + k3], axis=-1)
    return a, b


def step(
    x,
    u,
    dt: float = DEFAULT_DT,
    kin: KineticParameters = KineticParameters(),
    substeps: int = DEFAULT_SUBSTEPS,
) -> np.ndarray:
    """Advance the plant by one sampling interval with the input held constant.

    Classical fourth-order Runge-Kutta with `substeps` equal internal steps;
    the default (dt=0.1, substeps=10) integrates with h=0.01. Because the
    balance equations are affine in the state at fixed input, one RK4 substep
    is exactly the affine map given by the degree-4 Taylor polynomial of the
    dynamics matrix; the full step composes that map `substeps` times by
    squaring. Works on single states or batches of shape (..., 2).
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    state = np.asarray(x, dtype=float)
    ua = np.asarray(u, dtype=float)
    batch_shape = np.broadcast_shapes(state.shape[:-1], ua.shape[:-1])
    state = np.broadcast_to(state, batch_shape + (2,))
    ua = np.broadcast_to(ua, batch_shape + (2,))
    a, b = _affine_dynamics(ua, kin)
    h = dt / substeps
    ha = h * a
    ha2 = ha @ ha
    ha3 = ha2 @ ha
    ha4 = ha3 @ ha
    eye = np.broadcast_to(np.eye(2), batch_shape + (2, 2))
    m_sub = eye + ha + ha2 / 2.0 + ha3 / 6.0 + ha4 / 24.0
    poly = eye + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0
    c_sub = h * np.einsum("...ij,...j->...i", poly, b)
    # Compose the per-substep affine map x -> Mx + c with itself by squaring.
    m_acc = eye.copy()
    c_acc = np.zeros(batch_shape + (2,))
    m_pow, c_pow = m_sub, c_sub
    n = substeps
    while n:
        if n & 1:
            c_acc = np.einsum("...ij,...j->...i", m_pow, c_acc) + c_pow
            m_acc = m_pow @ m_acc
        n >>= 1
        if n:
            c_pow = np.einsum("...ij,...j->...i", m_pow, c_pow) + c_pow
            m_pow = m_pow @ m_pow
    result = np.einsum("...ij,...j->...i", m_acc, state) + c_acc
    if not np.all(np.isfinite(result)):
        raise IntegrationError(f"non-finite state after integrating dt={dt} from x={x}, u={u}")
    return result


def steady_state(u, kin: KineticParameters = KineticParameters(), x_guess=None) -> PlantState:
    """Steady composition for a fixed input, via the exact 2x2 linear solve.

    The balance equations are affine in (C_A, C_R) once the input is fixed,
    so no iteration is needed; x_guess is accepted for interface symmetry
    with iterative solvers and ignored.
    """
    del x_guess
    ua = np.asarray(u, dtype=float).reshape(2)
    q, temp = ua
    if q <= 0.0 or temp <= 0.0:
        raise ValueError(f"inputs must be positive, got q={q}, T={temp}")
    k1, k2, k3, k4 = rate_constants(kin, temp)
    mat = np.array(
        [
            [q + k1, -k4],
            [k3 - k1, q + k2 + k3 + k4],
        ]
    )
    rhs = np.array([q * kin.c_a0, q * (1.0 - kin.c_a0) + k3])
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSteadyStateError(
            f"steady-state system is singular at q={q}, T={temp} (condition number {cond:.3e})"
        )
    sol = np.linalg.solve(mat, rhs)
    residual = np.linalg.norm(state_derivative(sol, ua, kin))
    if residual >= 1e-10:
        raise SingularSteadyStateError(
            f"steady-state residual {residual:.3e} exceeds 1e-10 at q={q}, T={temp}"
        )
    return PlantState(sol[0], sol[1])


def sweep_steady_states(q: float, t_grid, kin: KineticParameters = KineticParameters()) -> np.ndarray:
    """Steady states over a temperature grid at fixed flow rate.

    Returns an array of rows (T, C_A, C_R, C_S) ordered like the grid. The
    grid must be non-empty and strictly ascending.
    """
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("temperature grid must be non-empty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        raise ValueError("temperature grid must be strictly ascending")
    rows = np.empty((grid.size, 4))
    for i, temp in enumerate(grid):
        try:
            ss = steady_state((q, temp), kin)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise type(exc)(f"steady-state sweep failed at T={temp}: {exc}") from exc
        rows[i] = (temp, ss.c_a, ss.c_r, ss.c_s)
    return rows


def temperature_grid(t_min: float, t_max: float, n: int) -> np.ndarray:
    """Uniform grid of n temperatures spanning [t_min, t_max]."""
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")
    if n == 1:
        if not math.isclose(t_min, t_max):
            raise ValueError("a single-point grid requires t_min == t_max")
        return np.array([t_min])
    if t_min >= t_max:
        raise ValueError(f"need t_min < t_max, got [{t_min}, {t_max}]")
    return np.linspace(t_min, t_max, n)
