"""Closed-loop scenario runs, stage-cost accounting and controller benchmarking.

A scenario starts the plant at the steady state of its initial input, holds
that input through a warm-up period while the controller's history fills,
then hands control to the receding-horizon loop. The aggregate cost J sums
the per-step tracking-plus-move cost over the controlled portion; controllers
are compared through the relative index I = (1 - (J - J*)/J*) * 100 against
the true-model benchmark.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import mpc, plant
from .plant import DEFAULT_SUBSTEPS, KineticParameters

STEADY_STATE_TOL = 1e-6
RUN_HEADER = ("k", "t", "C_A", "C_R", "q", "T", "dq", "dT", "stage_cost")
SOLVER_LOG_HEADER = ("k", "iterations", "cost", "constraint_residual", "converged")


@dataclass(frozen=True)
class Scenario:
    """Start-up or recovery case: initial operating point and run length."""

    name: str
    u0: tuple[float, float]
    x0: tuple[float, float]
    n_steps: int = 400
    warmup_steps: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "u0", tuple(float(v) for v in self.u0))
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.n_steps <= self.warmup_steps:
            raise ValueError("total steps must exceed the warm-up period")
        if self.warmup_steps < 1:
            raise ValueError("warm-up must last at least one step")

    @classmethod
    def from_initial_input(
        cls,
        name: str,
        u0,
        kin: KineticParameters = KineticParameters(),
        n_steps: int = 400,
        warmup_steps: int = 10,
        x0=None,
    ) -> "Scenario":
        """Build a scenario whose start state is the steady state of u0.

        If x0 is supplied it must actually be a steady state of u0 (residual
        below 1e-6), otherwise it is computed exactly.
        """
        u0 = tuple(float(v) for v in np.asarray(u0, dtype=float).reshape(2))
        if x0 is None:
            state = plant.steady_state(u0, kin)
            x0 = (state.c_a, state.c_r)
        else:
            x0 = tuple(float(v) for v in np.asarray(x0, dtype=float).reshape(2))
            residual = np.linalg.norm(plant.state_derivative(np.asarray(x0), np.asarray(u0), kin))
            if residual >= STEADY_STATE_TOL:
                raise ValueError(
                    f"scenario '{name}': x0={x0} is not a steady state of u0={u0} "
                    f"(residual {residual:.3e})"
                )
        return cls(name=name, u0=u0, x0=x0, n_steps=n_steps, warmup_steps=warmup_steps)


@dataclass
class ClosedLoopRecord:
    """Time-indexed log of one closed-loop run plus its aggregate cost."""

    scenario: str
    controller: str
    times: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    moves: np.ndarray
    stage_costs: np.ndarray
    warmup_steps: int
    solver_log: list[dict]

    @property
    def total_cost(self) -> float:
        """Aggregate cost J over the controlled portion of the run."""
        return float(np.sum(self.stage_costs[self.warmup_steps :]))

    def tracking_error(self, setpoint) -> np.ndarray:
        return self.outputs - np.asarray(setpoint, dtype=float)

    def final_mean_error(self, setpoint, window: int = 50) -> np.ndarray:
        """Mean absolute tracking error per channel over the last `window` steps."""
        err = np.abs(self.tracking_error(setpoint)[-window:])
        return err.mean(axis=0)

    def has_offset(self, setpoint, window: int = 50, threshold: float = 0.01) -> bool:
        """True when the run settles measurably away from the set-point."""
        return bool(np.any(self.final_mean_error(setpoint, window) > threshold))

    def solver_stats(self) -> dict:
        if not self.solver_log:
            return {"solves": 0}
        iters = [entry["iterations"] for entry in self.solver_log]
        residuals = [entry["constraint_residual"] for entry in self.solver_log]
        return {
            "solves": len(self.solver_log),
            "total_iterations": int(np.sum(iters)),
            "max_iterations": int(np.max(iters)),
            "max_constraint_residual": float(np.max(residuals)),
            "flagged_solves": int(sum(1 for e in self.solver_log if not e["converged"])),
        }

    def to_csv(self, path, config_digest: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if config_digest is not None:
                fh.write(f"# config_digest={config_digest}\n")
            writer = csv.writer(fh)
            writer.writerow(RUN_HEADER)
            for k in range(len(self.times)):
                writer.writerow(
                    [
                        k,
                        repr(float(self.times[k])),
                        repr(float(self.outputs[k, 0])),
                        repr(float(self.outputs[k, 1])),
                        repr(float(self.inputs[k, 0])),
                        repr(float(self.inputs[k, 1])),
                        repr(float(self.moves[k, 0])),
                        repr(float(self.moves[k, 1])),
                        repr(float(self.stage_costs[k])),
                    ]
                )

    def solver_log_to_csv(self, path, config_digest: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if config_digest is not None:
                fh.write(f"# config_digest={config_digest}\n")
            writer = csv.writer(fh)
            writer.writerow(SOLVER_LOG_HEADER)
            for entry in self.solver_log:
                writer.writerow(
                    [
                        entry["k"],
                        entry["iterations"],
                        repr(float(entry["cost"])),
                        repr(float(entry["constraint_residual"])),
                        int(entry["converged"]),
                    ]
                )

    def summary(self, settings: mpc.MpcSettings, benchmark_cost: float | None = None) -> dict:
        doc = {
            "scenario": self.scenario,
            "controller": self.controller,
            "J": self.total_cost,
            "offset": self.has_offset(settings.setpoint_array),
            "final_mean_error": [float(v) for v in self.final_mean_error(settings.setpoint_array)],
            "solver_stats": self.solver_stats(),
        }
        if benchmark_cost is not None:
            doc["I"] = performance_index(self.total_cost, benchmark_cost)
        return doc


def run_scenario(
    scenario: Scenario,
    model: mpc.PredictiveModel,
    settings: mpc.MpcSettings,
    kin: KineticParameters = KineticParameters(),
    substeps: int = DEFAULT_SUBSTEPS,
    solver_options: mpc.SolverOptions = mpc.SolverOptions(),
    controller_label: str = "controller",
) -> ClosedLoopRecord:
    """Simulate one scenario end to end under receding-horizon control.

    The true plant always advances the simulation; `model` only shapes the
    controller's predictions. During warm-up the initial input is held, no
    moves are logged, and the history buffer fills with plant-driven samples.
    Solver failures are flagged in the log and the run continues on the best
    feasible move found.
    """
    if settings.prediction_horizon > scenario.warmup_steps:
        raise ValueError(
            f"warm-up of {scenario.warmup_steps} steps cannot fill a history of "
            f"{settings.prediction_horizon} samples"
        )
    n = scenario.n_steps
    dt = settings.dt
    hist = mpc.HistoryBuffer(settings.prediction_horizon)
    state = np.asarray(scenario.x0, dtype=float)
    u_prev = np.asarray(scenario.u0, dtype=float)
    times = np.arange(n) * dt
    outputs = np.empty((n, 2))
    inputs = np.empty((n, 2))
    moves = np.zeros((n, 2))
    stage_costs = np.empty(n)
    solver_log: list[dict] = []
    warm: np.ndarray | None = None
    setpoint = settings.setpoint_array
    tracking = settings.tracking_diag
    move_w = settings.move_diag
    for k in range(n):
        y = state.copy()
        outputs[k] = y
        hist.observe(y)
        if k < scenario.warmup_steps:
            u = u_prev.copy()
            du = np.zeros(2)
        else:
            start = mpc.shift_warm_start(warm, settings.control_horizon)
            solution = mpc.solve_rhc(model, hist, settings, warm_start=start, options=solver_options)
            warm = solution.du_seq
            du = solution.first_move
            u = mpc.apply_first_move(solution.du_seq, u_prev, settings)
            solver_log.append(
                {
                    "k": k,
                    "iterations": solution.iterations,
                    "cost": solution.cost,
                    "constraint_residual": solution.constraint_residual,
                    "converged": solution.converged,
                }
            )
        hist.commit(u)
        inputs[k] = u
        moves[k] = du
        err = y - setpoint
        stage_costs[k] = float(err @ (tracking * err) + du @ (move_w * du))
        state = plant.step(state, u, dt=dt, kin=kin, substeps=substeps)
        u_prev = u
    return ClosedLoopRecord(
        scenario=scenario.name,
        controller=controller_label,
        times=times,
        outputs=outputs,
        inputs=inputs,
        moves=moves,
        stage_costs=stage_costs,
        warmup_steps=scenario.warmup_steps,
        solver_log=solver_log,
    )


def performance_index(cost: float, benchmark_cost: float) -> float:
    """Relative closed-loop index: 100 means exactly the benchmark cost.

    Values above 100 indicate a run cheaper than the benchmark; each percent
    below 100 is one percent of benchmark cost in excess.
    """
    if benchmark_cost <= 0.0:
        raise ValueError(
            f"performance index is undefined for benchmark cost {benchmark_cost} "
            "(division by zero)"
        )
    return (1.0 - (cost - benchmark_cost) / benchmark_cost) * 100.0


@dataclass
class BenchmarkRow:
    """One architecture's closed-loop result across all scenarios."""

    nodes: int
    layers: int
    indices: dict[str, float]
    offset: bool

    @property
    def average_index(self) -> float:
        return float(np.mean(list(self.indices.values())))


def benchmark_suite(
    scenarios: list[Scenario],
    architectures: list[tuple[int, int, mpc.LstmModel]],
    settings: mpc.MpcSettings,
    kin: KineticParameters = KineticParameters(),
    substeps: int = DEFAULT_SUBSTEPS,
    solver_options: mpc.SolverOptions = mpc.SolverOptions(),
    offset_window: int = 50,
    offset_threshold: float = 0.01,
) -> tuple[list[BenchmarkRow], dict[str, ClosedLoopRecord], dict[tuple[int, int, str], ClosedLoopRecord]]:
    """Run every architecture against the true-model benchmark on all scenarios.

    `architectures` holds (layers, nodes, model) triples. Returns the report
    rows plus the benchmark and per-architecture records for inspection. An
    empty architecture list yields an empty report (the benchmark runs are
    skipped too).
    """
    rows: list[BenchmarkRow] = []
    benchmark_records: dict[str, ClosedLoopRecord] = {}
    rnn_records: dict[tuple[int, int, str], ClosedLoopRecord] = {}
    if not architectures:
        return rows, benchmark_records, rnn_records
    true_model = mpc.TruePlantModel(kin=kin, dt=settings.dt, substeps=substeps)
    benchmark_costs: dict[str, float] = {}
    for scenario in scenarios:
        record = run_scenario(
            scenario,
            true_model,
            settings,
            kin=kin,
            substeps=substeps,
            solver_options=solver_options,
            controller_label="benchmark_nmpc",
        )
        benchmark_records[scenario.name] = record
        benchmark_costs[scenario.name] = record.total_cost
    for layers, nodes, model in architectures:
        indices: dict[str, float] = {}
        offset = False
        for scenario in scenarios:
            record = run_scenario(
                scenario,
                model,
                settings,
                kin=kin,
                substeps=substeps,
                solver_options=solver_options,
                controller_label=f"rnn_mpc_{layers}x{nodes}",
            )
            rnn_records[(layers, nodes, scenario.name)] = record
            indices[scenario.name] = performance_index(
                record.total_cost, benchmark_costs[scenario.name]
            )
            offset = offset or record.has_offset(
                settings.setpoint_array, window=offset_window, threshold=offset_threshold
            )
        rows.append(BenchmarkRow(nodes=nodes, layers=layers, indices=indices, offset=offset))
    return rows, benchmark_records, rnn_records


def benchmark_report_csv(path, rows: list[BenchmarkRow], scenario_names: list[str], config_digest: str | None = None) -> None:
    """Write the per-architecture performance table."""
    with open(path, "w", newline="") as fh:
        if config_digest is not None:
            fh.write(f"# config_digest={config_digest}\n")
        writer = csv.writer(fh)
        header = ["nodes", "layers"] + [f"I_{name}" for name in scenario_names] + ["I_avg", "steady_state_offset"]
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [row.nodes, row.layers]
                + [repr(float(row.indices[name])) for name in scenario_names]
                + [repr(row.average_index), int(row.offset)]
            )


def write_summary_json(path, doc: dict, config_digest: str | None = None) -> None:
    if config_digest is not None:
        doc = {**doc, "config_digest": config_digest}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
