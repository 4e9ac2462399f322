"""Experiment configuration: schema, defaults, validation and digesting.

A single JSON document drives the whole pipeline. Every field has a default
matching the reference reactor study, unknown keys are rejected, and every
violation is reported with its JSON path. The canonical serialized form of a
validated configuration (paths excluded, since they only relocate artifacts)
is hashed into a digest that all artifacts embed, so mixed-provenance inputs
can be refused.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .plant import KineticParameters
from .mpc import MpcSettings, SolverOptions

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """One or more configuration violations, each tagged with its JSON path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


class _Validator:
    def __init__(self) -> None:
        self.errors: list[str] = []

    def fail(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def section(self, doc: dict, key: str, path: str) -> dict:
        value = doc.get(key, {})
        if not isinstance(value, dict):
            self.fail(f"{path}{key}", f"expected an object, got {type(value).__name__}")
            return {}
        return dict(value)

    def check_unknown(self, leftover: dict, path: str) -> None:
        for key in sorted(leftover):
            self.fail(f"{path}{key}", "unknown key")

    def number(self, doc: dict, key: str, default: float, path: str, lo=None, hi=None,
               lo_open: bool = False, hi_open: bool = False) -> float:
        raw = doc.pop(key, default)
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail(f"{path}{key}", f"expected a number, got {raw!r}")
            return float(default)
        value = float(raw)
        if lo is not None and (value <= lo if lo_open else value < lo):
            self.fail(f"{path}{key}", f"must be {'>' if lo_open else '>='} {lo}, got {value}")
        if hi is not None and (value >= hi if hi_open else value > hi):
            self.fail(f"{path}{key}", f"must be {'<' if hi_open else '<='} {hi}, got {value}")
        return value

    def integer(self, doc: dict, key: str, default: int, path: str, lo=None, hi=None) -> int:
        raw = doc.pop(key, default)
        if isinstance(raw, bool) or not isinstance(raw, int):
            self.fail(f"{path}{key}", f"expected an integer, got {raw!r}")
            return int(default)
        if lo is not None and raw < lo:
            self.fail(f"{path}{key}", f"must be >= {lo}, got {raw}")
        if hi is not None and raw > hi:
            self.fail(f"{path}{key}", f"must be <= {hi}, got {raw}")
        return raw

    def string(self, doc: dict, key: str, default: str, path: str) -> str:
        raw = doc.pop(key, default)
        if not isinstance(raw, str) or not raw:
            self.fail(f"{path}{key}", f"expected a non-empty string, got {raw!r}")
            return default
        return raw

    def number_list(self, doc: dict, key: str, default, path: str, length=None, positive=False) -> tuple:
        raw = doc.pop(key, list(default))
        if not isinstance(raw, (list, tuple)) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw
        ):
            self.fail(f"{path}{key}", f"expected a list of numbers, got {raw!r}")
            return tuple(default)
        values = tuple(float(v) for v in raw)
        if length is not None and len(values) != length:
            self.fail(f"{path}{key}", f"expected {length} entries, got {len(values)}")
            return tuple(default)
        if positive and any(v <= 0.0 for v in values):
            self.fail(f"{path}{key}", f"all entries must be positive, got {values}")
        return values

    def interval(self, doc: dict, key: str, default, path: str) -> tuple[float, float]:
        values = self.number_list(doc, key, default, path, length=2)
        if len(values) == 2 and values[0] >= values[1]:
            self.fail(f"{path}{key}", f"lower bound must be below upper bound, got {values}")
            return tuple(default)
        return values


@dataclass(frozen=True)
class PlantConfig:
    c_a0: float = 0.8
    k0: tuple = (1.0, 0.7, 0.1, 0.006)
    e_over_rt0: tuple = (8.33, 10.0, 50.0, 83.3)
    dt: float = 0.1
    substeps: int = 10

    def kinetics(self) -> KineticParameters:
        return KineticParameters(c_a0=self.c_a0, k0=self.k0, e_over_rt0=self.e_over_rt0)

    def to_dict(self) -> dict:
        return {
            "c_a0": self.c_a0,
            "k0": list(self.k0),
            "e_over_rt0": list(self.e_over_rt0),
            "dt": self.dt,
            "substeps": self.substeps,
        }


@dataclass(frozen=True)
class RefineStage:
    """Optional second staircase concentrating samples in a temperature band.

    The productive operating region sits on a steep part of the steady-state
    map; a dedicated fine sweep there is what makes the surrogate accurate
    enough for offset-free control.
    """

    t_min: float = 0.95
    t_max: float = 1.1
    t_step: float = 0.025
    dwell: int = 20

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "t_step": self.t_step, "dwell": self.dwell}


@dataclass(frozen=True)
class WalkStage:
    """Optional rate-limited random temperature walk appended per flow level.

    Covers input sequences shaped like the controller's own moves (a change
    every sample, bounded by the rate limits), which pure staircases never
    produce; without it the surrogate predicts transients poorly.
    """

    t_min: float = 0.9
    t_max: float = 1.1
    steps: int = 200
    max_move: float = 0.1
    t_start: float = 1.04

    def to_dict(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "steps": self.steps,
            "max_move": self.max_move,
            "t_start": self.t_start,
        }


@dataclass(frozen=True)
class ExcitationSplit:
    seed: int
    q_levels: tuple
    t_min: float = 0.5
    t_max: float = 1.1
    t_step: float = 0.05
    dwell: int = 20
    jitter: float = 0.01
    refine: RefineStage | None = None
    walk: WalkStage | None = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "q_levels": list(self.q_levels),
            "t_min": self.t_min,
            "t_max": self.t_max,
            "t_step": self.t_step,
            "dwell": self.dwell,
            "jitter": self.jitter,
            "refine": self.refine.to_dict() if self.refine is not None else None,
            "walk": self.walk.to_dict() if self.walk is not None else None,
        }


DEFAULT_TRAIN_SPLIT = ExcitationSplit(
    seed=2024,
    q_levels=(0.75, 0.8, 0.85),
    refine=RefineStage(dwell=10),
    walk=WalkStage(),
)
DEFAULT_TEST_SPLIT = ExcitationSplit(
    seed=77,
    q_levels=(0.77, 0.83),
    t_step=0.07,
    dwell=15,
    refine=RefineStage(t_step=0.03, dwell=12),
    walk=WalkStage(steps=120),
)


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    nodes: int = 64
    horizon: int = 10
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 7
    forget_bias: float = 1.0

    def to_dict(self) -> dict:
        return {
            "layers": self.layers,
            "nodes": self.nodes,
            "horizon": self.horizon,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "seed": self.seed,
            "forget_bias": self.forget_bias,
        }


@dataclass(frozen=True)
class MpcConfig:
    prediction_steps: int = 10
    control_steps: int = 10
    tracking_weights: tuple = (2.4, 5.67)
    move_weights: tuple = (25.0, 25.0)
    setpoint: tuple = (0.324, 0.406)
    q_bounds: tuple = (0.75, 0.85)
    t_bounds: tuple = (0.5, 1.1)
    dq_bounds: tuple = (-0.1, 0.1)
    dt_bounds: tuple = (-0.1, 0.1)
    solver_max_iterations: int = 50
    solver_fd_step: float = 1e-6
    solver_step_tolerance: float = 1e-7
    solver_cost_tolerance: float = 1e-10

    def settings(self, dt: float) -> MpcSettings:
        return MpcSettings(
            prediction_horizon=self.prediction_steps,
            control_horizon=self.control_steps,
            tracking_weights=self.tracking_weights,
            move_weights=self.move_weights,
            setpoint=self.setpoint,
            u_min=(self.q_bounds[0], self.t_bounds[0]),
            u_max=(self.q_bounds[1], self.t_bounds[1]),
            du_min=(self.dq_bounds[0], self.dt_bounds[0]),
            du_max=(self.dq_bounds[1], self.dt_bounds[1]),
            dt=dt,
        )

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            max_iterations=self.solver_max_iterations,
            fd_step=self.solver_fd_step,
            step_tolerance=self.solver_step_tolerance,
            cost_tolerance=self.solver_cost_tolerance,
        )

    def to_dict(self) -> dict:
        return {
            "prediction_steps": self.prediction_steps,
            "control_steps": self.control_steps,
            "tracking_weights": list(self.tracking_weights),
            "move_weights": list(self.move_weights),
            "setpoint": list(self.setpoint),
            "u_bounds": {"q": list(self.q_bounds), "T": list(self.t_bounds)},
            "du_bounds": {"q": list(self.dq_bounds), "T": list(self.dt_bounds)},
            "solver": {
                "max_iterations": self.solver_max_iterations,
                "fd_step": self.solver_fd_step,
                "step_tolerance": self.solver_step_tolerance,
                "cost_tolerance": self.solver_cost_tolerance,
            },
        }


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    u0_q: float
    u0_t: float
    n_steps: int = 400
    warmup_steps: int = 10

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "u0": {"q": self.u0_q, "T": self.u0_t},
            "n_steps": self.n_steps,
            "warmup_steps": self.warmup_steps,
        }


DEFAULT_SCENARIOS = (
    ScenarioConfig(name="startup", u0_q=0.8, u0_t=0.8),
    ScenarioConfig(name="upset_recovery", u0_q=0.8, u0_t=1.1),
)


@dataclass(frozen=True)
class BenchmarkConfig:
    architectures: tuple = ((1, 16), (2, 64))
    offset_threshold: float = 0.01
    offset_window: int = 50

    def to_dict(self) -> dict:
        return {
            "architectures": [{"layers": l, "nodes": n} for l, n in self.architectures],
            "offset_threshold": self.offset_threshold,
            "offset_window": self.offset_window,
        }


@dataclass(frozen=True)
class SweepConfig:
    q: float = 0.8
    t_min: float = 0.5
    t_max: float = 1.1
    n: int = 121

    def to_dict(self) -> dict:
        return {"q": self.q, "t_min": self.t_min, "t_max": self.t_max, "n": self.n}


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = "data"
    models_dir: str = "models"
    results_dir: str = "results"

    def to_dict(self) -> dict:
        return {
            "data_dir": self.data_dir,
            "models_dir": self.models_dir,
            "results_dir": self.results_dir,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantConfig = PlantConfig()
    train_split: ExcitationSplit = DEFAULT_TRAIN_SPLIT
    test_split: ExcitationSplit = DEFAULT_TEST_SPLIT
    model: ModelConfig = ModelConfig()
    mpc: MpcConfig = MpcConfig()
    scenarios: tuple = DEFAULT_SCENARIOS
    benchmark: BenchmarkConfig = BenchmarkConfig()
    sweep: SweepConfig = SweepConfig()
    paths: PathsConfig = PathsConfig()

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "plant": self.plant.to_dict(),
            "excitation": {
                "train": self.train_split.to_dict(),
                "test": self.test_split.to_dict(),
            },
            "model": self.model.to_dict(),
            "mpc": self.mpc.to_dict(),
            "scenarios": [s.to_dict() for s in self.scenarios],
            "benchmark": self.benchmark.to_dict(),
            "sweep": self.sweep.to_dict(),
            "paths": self.paths.to_dict(),
        }

    def digest(self) -> str:
        """Hash of the experiment identity (everything except artifact paths)."""
        doc = self.to_dict()
        doc.pop("paths")
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def mpc_settings(self) -> MpcSettings:
        return self.mpc.settings(self.plant.dt)


def _validate_excitation_split(v: _Validator, doc: dict, path: str, default: ExcitationSplit) -> ExcitationSplit:
    seed = v.integer(doc, "seed", default.seed, path, lo=0)
    q_levels = v.number_list(doc, "q_levels", default.q_levels, path, positive=True)
    if not q_levels:
        v.fail(f"{path}q_levels", "must not be empty")
        q_levels = default.q_levels
    t_min = v.number(doc, "t_min", default.t_min, path, lo=0.0, lo_open=True)
    t_max = v.number(doc, "t_max", default.t_max, path, lo=0.0, lo_open=True)
    if t_min >= t_max:
        v.fail(f"{path}t_max", f"must exceed t_min={t_min}, got {t_max}")
        t_min, t_max = default.t_min, default.t_max
    t_step = v.number(doc, "t_step", default.t_step, path, lo=0.0, lo_open=True)
    dwell = v.integer(doc, "dwell", default.dwell, path, lo=1)
    jitter = v.number(doc, "jitter", default.jitter, path, lo=0.0)
    refine_default = default.refine if default.refine is not None else RefineStage()
    refine: RefineStage | None
    if "refine" in doc and doc["refine"] is None:
        doc.pop("refine")
        refine = None
    else:
        had_refine = "refine" in doc
        refine_doc = v.section(doc, "refine", path)
        doc.pop("refine", None)
        if had_refine or default.refine is not None:
            r_min = v.number(refine_doc, "t_min", refine_default.t_min, f"{path}refine.", lo=0.0, lo_open=True)
            r_max = v.number(refine_doc, "t_max", refine_default.t_max, f"{path}refine.", lo=0.0, lo_open=True)
            if r_min >= r_max:
                v.fail(f"{path}refine.t_max", f"must exceed t_min={r_min}, got {r_max}")
                r_min, r_max = refine_default.t_min, refine_default.t_max
            refine = RefineStage(
                t_min=r_min,
                t_max=r_max,
                t_step=v.number(refine_doc, "t_step", refine_default.t_step, f"{path}refine.", lo=0.0, lo_open=True),
                dwell=v.integer(refine_doc, "dwell", refine_default.dwell, f"{path}refine.", lo=1),
            )
            v.check_unknown(refine_doc, f"{path}refine.")
        else:
            refine = None
    walk_default = default.walk if default.walk is not None else WalkStage()
    walk: WalkStage | None
    if "walk" in doc and doc["walk"] is None:
        doc.pop("walk")
        walk = None
    else:
        had_walk = "walk" in doc
        walk_doc = v.section(doc, "walk", path)
        doc.pop("walk", None)
        if had_walk or default.walk is not None:
            w_min = v.number(walk_doc, "t_min", walk_default.t_min, f"{path}walk.", lo=0.0, lo_open=True)
            w_max = v.number(walk_doc, "t_max", walk_default.t_max, f"{path}walk.", lo=0.0, lo_open=True)
            if w_min >= w_max:
                v.fail(f"{path}walk.t_max", f"must exceed t_min={w_min}, got {w_max}")
                w_min, w_max = walk_default.t_min, walk_default.t_max
            w_start = v.number(walk_doc, "t_start", walk_default.t_start, f"{path}walk.")
            if not w_min <= w_start <= w_max:
                v.fail(f"{path}walk.t_start", f"must lie within [{w_min}, {w_max}], got {w_start}")
                w_start = 0.5 * (w_min + w_max)
            walk = WalkStage(
                t_min=w_min,
                t_max=w_max,
                steps=v.integer(walk_doc, "steps", walk_default.steps, f"{path}walk.", lo=1),
                max_move=v.number(walk_doc, "max_move", walk_default.max_move, f"{path}walk.", lo=0.0, lo_open=True),
                t_start=w_start,
            )
            v.check_unknown(walk_doc, f"{path}walk.")
        else:
            walk = None
    v.check_unknown(doc, path)
    return ExcitationSplit(
        seed=seed,
        q_levels=q_levels,
        t_min=t_min,
        t_max=t_max,
        t_step=t_step,
        dwell=dwell,
        jitter=jitter,
        refine=refine,
        walk=walk,
    )


def validate_config(document: dict | None) -> ExperimentConfig:
    """Turn a raw JSON document into a fully defaulted, range-checked config.

    Unknown keys anywhere are rejected. Raises ConfigError listing every
    violation with its JSON path; an empty or missing document yields the
    built-in reference configuration.
    """
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    doc = dict(document)
    v = _Validator()

    version = v.integer(doc, "schema_version", SCHEMA_VERSION, "")
    if version != SCHEMA_VERSION:
        v.fail("schema_version", f"unsupported version {version}, expected {SCHEMA_VERSION}")

    plant_doc = v.section(doc, "plant", "")
    doc.pop("plant", None)
    c_a0 = v.number(plant_doc, "c_a0", 0.8, "plant.", lo=0.0, lo_open=True, hi=1.0)
    k0 = v.number_list(plant_doc, "k0", PlantConfig.k0, "plant.", length=4, positive=True)
    e_over = v.number_list(
        plant_doc, "e_over_rt0", PlantConfig.e_over_rt0, "plant.", length=4, positive=True
    )
    dt = v.number(plant_doc, "dt", 0.1, "plant.", lo=0.0, lo_open=True, hi=10.0)
    substeps = v.integer(plant_doc, "substeps", 10, "plant.", lo=1, hi=10000)
    v.check_unknown(plant_doc, "plant.")
    plant_cfg = PlantConfig(c_a0=c_a0, k0=k0, e_over_rt0=e_over, dt=dt, substeps=substeps)

    exc_doc = v.section(doc, "excitation", "")
    doc.pop("excitation", None)
    train_doc = v.section(exc_doc, "train", "excitation.")
    exc_doc.pop("train", None)
    test_doc = v.section(exc_doc, "test", "excitation.")
    exc_doc.pop("test", None)
    v.check_unknown(exc_doc, "excitation.")
    train_split = _validate_excitation_split(v, train_doc, "excitation.train.", DEFAULT_TRAIN_SPLIT)
    test_split = _validate_excitation_split(v, test_doc, "excitation.test.", DEFAULT_TEST_SPLIT)

    model_doc = v.section(doc, "model", "")
    doc.pop("model", None)
    model_cfg = ModelConfig(
        layers=v.integer(model_doc, "layers", 2, "model.", lo=1, hi=16),
        nodes=v.integer(model_doc, "nodes", 64, "model.", lo=1, hi=4096),
        horizon=v.integer(model_doc, "horizon", 10, "model.", lo=1, hi=100),
        epochs=v.integer(model_doc, "epochs", 300, "model.", lo=1),
        batch_size=v.integer(model_doc, "batch_size", 64, "model.", lo=1),
        learning_rate=v.number(model_doc, "learning_rate", 1e-3, "model.", lo=0.0, lo_open=True),
        beta1=v.number(model_doc, "beta1", 0.9, "model.", lo=0.0, hi=1.0, hi_open=True),
        beta2=v.number(model_doc, "beta2", 0.999, "model.", lo=0.0, hi=1.0, hi_open=True),
        eps=v.number(model_doc, "eps", 1e-8, "model.", lo=0.0, lo_open=True),
        seed=v.integer(model_doc, "seed", 7, "model.", lo=0),
        forget_bias=v.number(model_doc, "forget_bias", 1.0, "model."),
    )
    v.check_unknown(model_doc, "model.")

    mpc_doc = v.section(doc, "mpc", "")
    doc.pop("mpc", None)
    prediction_steps = v.integer(mpc_doc, "prediction_steps", 10, "mpc.", lo=1, hi=1000)
    control_steps = v.integer(mpc_doc, "control_steps", 10, "mpc.", lo=1, hi=1000)
    if control_steps > prediction_steps:
        v.fail("mpc.control_steps", f"must not exceed prediction_steps={prediction_steps}")
        control_steps = prediction_steps
    tracking = v.number_list(mpc_doc, "tracking_weights", (2.4, 5.67), "mpc.", length=2)
    move_w = v.number_list(mpc_doc, "move_weights", (25.0, 25.0), "mpc.", length=2)
    if any(w < 0 for w in tracking + move_w):
        v.fail("mpc.tracking_weights", "weights must be non-negative")
    setpoint = v.number_list(mpc_doc, "setpoint", (0.324, 0.406), "mpc.", length=2)
    ub_doc = v.section(mpc_doc, "u_bounds", "mpc.")
    mpc_doc.pop("u_bounds", None)
    q_bounds = v.interval(ub_doc, "q", (0.75, 0.85), "mpc.u_bounds.")
    t_bounds = v.interval(ub_doc, "T", (0.5, 1.1), "mpc.u_bounds.")
    v.check_unknown(ub_doc, "mpc.u_bounds.")
    dub_doc = v.section(mpc_doc, "du_bounds", "mpc.")
    mpc_doc.pop("du_bounds", None)
    dq_bounds = v.interval(dub_doc, "q", (-0.1, 0.1), "mpc.du_bounds.")
    dt_bounds = v.interval(dub_doc, "T", (-0.1, 0.1), "mpc.du_bounds.")
    for key, bounds in (("q", dq_bounds), ("T", dt_bounds)):
        if not bounds[0] < 0.0 < bounds[1]:
            v.fail(f"mpc.du_bounds.{key}", f"move bounds must straddle zero, got {bounds}")
    v.check_unknown(dub_doc, "mpc.du_bounds.")
    solver_doc = v.section(mpc_doc, "solver", "mpc.")
    mpc_doc.pop("solver", None)
    solver_max = v.integer(solver_doc, "max_iterations", 50, "mpc.solver.", lo=1, hi=10000)
    solver_fd = v.number(solver_doc, "fd_step", 1e-6, "mpc.solver.", lo=0.0, lo_open=True)
    solver_step_tol = v.number(solver_doc, "step_tolerance", 1e-7, "mpc.solver.", lo=0.0, lo_open=True)
    solver_cost_tol = v.number(solver_doc, "cost_tolerance", 1e-10, "mpc.solver.", lo=0.0, lo_open=True)
    v.check_unknown(solver_doc, "mpc.solver.")
    v.check_unknown(mpc_doc, "mpc.")
    mpc_cfg = MpcConfig(
        prediction_steps=prediction_steps,
        control_steps=control_steps,
        tracking_weights=tracking,
        move_weights=move_w,
        setpoint=setpoint,
        q_bounds=q_bounds,
        t_bounds=t_bounds,
        dq_bounds=dq_bounds,
        dt_bounds=dt_bounds,
        solver_max_iterations=solver_max,
        solver_fd_step=solver_fd,
        solver_step_tolerance=solver_step_tol,
        solver_cost_tolerance=solver_cost_tol,
    )

    if model_cfg.horizon != mpc_cfg.prediction_steps:
        v.fail(
            "model.horizon",
            f"must equal mpc.prediction_steps ({mpc_cfg.prediction_steps}) so the trained "
            f"network serves the controller, got {model_cfg.horizon}",
        )

    scenarios_raw = doc.pop("scenarios", None)
    scenarios: list[ScenarioConfig] = []
    if scenarios_raw is None:
        scenarios = list(DEFAULT_SCENARIOS)
    elif not isinstance(scenarios_raw, list):
        v.fail("scenarios", "expected a list of scenario objects")
        scenarios = list(DEFAULT_SCENARIOS)
    else:
        for i, entry in enumerate(scenarios_raw):
            path = f"scenarios[{i}]."
            if not isinstance(entry, dict):
                v.fail(path[:-1], "expected an object")
                continue
            entry = dict(entry)
            name = v.string(entry, "name", f"scenario_{i}", path)
            u0_doc = v.section(entry, "u0", path)
            entry.pop("u0", None)
            u0_q = v.number(u0_doc, "q", 0.8, f"{path}u0.", lo=0.0, lo_open=True)
            u0_t = v.number(u0_doc, "T", 0.8, f"{path}u0.", lo=0.0, lo_open=True)
            v.check_unknown(u0_doc, f"{path}u0.")
            n_steps = v.integer(entry, "n_steps", 400, path, lo=2)
            warmup = v.integer(entry, "warmup_steps", 10, path, lo=1)
            if warmup >= n_steps:
                v.fail(f"{path}warmup_steps", f"must be below n_steps={n_steps}, got {warmup}")
            if warmup < mpc_cfg.prediction_steps:
                v.fail(
                    f"{path}warmup_steps",
                    f"must cover the {mpc_cfg.prediction_steps}-step history, got {warmup}",
                )
            if not mpc_cfg.q_bounds[0] <= u0_q <= mpc_cfg.q_bounds[1]:
                v.fail(f"{path}u0.q", f"must lie within mpc.u_bounds.q {list(mpc_cfg.q_bounds)}")
            if not mpc_cfg.t_bounds[0] <= u0_t <= mpc_cfg.t_bounds[1]:
                v.fail(f"{path}u0.T", f"must lie within mpc.u_bounds.T {list(mpc_cfg.t_bounds)}")
            v.check_unknown(entry, path)
            scenarios.append(
                ScenarioConfig(name=name, u0_q=u0_q, u0_t=u0_t, n_steps=n_steps, warmup_steps=warmup)
            )
        names = [s.name for s in scenarios]
        if len(set(names)) != len(names):
            v.fail("scenarios", f"scenario names must be unique, got {names}")

    bench_doc = v.section(doc, "benchmark", "")
    doc.pop("benchmark", None)
    arch_raw = bench_doc.pop("architectures", None)
    architectures: list[tuple[int, int]] = []
    if arch_raw is None:
        architectures = list(BenchmarkConfig.architectures)
    elif not isinstance(arch_raw, list):
        v.fail("benchmark.architectures", "expected a list of {layers, nodes} objects")
        architectures = list(BenchmarkConfig.architectures)
    else:
        for i, entry in enumerate(arch_raw):
            path = f"benchmark.architectures[{i}]."
            if not isinstance(entry, dict):
                v.fail(path[:-1], "expected an object")
                continue
            entry = dict(entry)
            layers = v.integer(entry, "layers", 1, path, lo=1, hi=16)
            nodes = v.integer(entry, "nodes", 16, path, lo=1, hi=4096)
            v.check_unknown(entry, path)
            architectures.append((layers, nodes))
    offset_threshold = v.number(bench_doc, "offset_threshold", 0.01, "benchmark.", lo=0.0, lo_open=True)
    offset_window = v.integer(bench_doc, "offset_window", 50, "benchmark.", lo=1)
    v.check_unknown(bench_doc, "benchmark.")
    bench_cfg = BenchmarkConfig(
        architectures=tuple(architectures),
        offset_threshold=offset_threshold,
        offset_window=offset_window,
    )

    sweep_doc = v.section(doc, "sweep", "")
    doc.pop("sweep", None)
    sweep_q = v.number(sweep_doc, "q", 0.8, "sweep.", lo=0.0, lo_open=True)
    sweep_t_min = v.number(sweep_doc, "t_min", 0.5, "sweep.", lo=0.0, lo_open=True)
    sweep_t_max = v.number(sweep_doc, "t_max", 1.1, "sweep.", lo=0.0, lo_open=True)
    sweep_n = v.integer(sweep_doc, "n", 121, "sweep.", lo=1, hi=1000000)
    if sweep_n > 1 and sweep_t_min >= sweep_t_max:
        v.fail("sweep.t_max", f"must exceed t_min={sweep_t_min}, got {sweep_t_max}")
    v.check_unknown(sweep_doc, "sweep.")
    sweep_cfg = SweepConfig(q=sweep_q, t_min=sweep_t_min, t_max=sweep_t_max, n=sweep_n)

    paths_doc = v.section(doc, "paths", "")
    doc.pop("paths", None)
    paths_cfg = PathsConfig(
        data_dir=v.string(paths_doc, "data_dir", "data", "paths."),
        models_dir=v.string(paths_doc, "models_dir", "models", "paths."),
        results_dir=v.string(paths_doc, "results_dir", "results", "paths."),
    )
    v.check_unknown(paths_doc, "paths.")

    for split_name, split in (("train", train_split), ("test", test_split)):
        for q in split.q_levels:
            if not mpc_cfg.q_bounds[0] <= q <= mpc_cfg.q_bounds[1]:
                v.fail(
                    f"excitation.{split_name}.q_levels",
                    f"level {q} lies outside mpc.u_bounds.q {list(mpc_cfg.q_bounds)}",
                )
        if split.t_min < mpc_cfg.t_bounds[0] or split.t_max > mpc_cfg.t_bounds[1]:
            v.fail(
                f"excitation.{split_name}.t_min",
                f"excitation range [{split.t_min}, {split.t_max}] must stay within "
                f"mpc.u_bounds.T {list(mpc_cfg.t_bounds)}",
            )
        if split.refine is not None and (
            split.refine.t_min < mpc_cfg.t_bounds[0] or split.refine.t_max > mpc_cfg.t_bounds[1]
        ):
            v.fail(
                f"excitation.{split_name}.refine.t_min",
                f"refine range [{split.refine.t_min}, {split.refine.t_max}] must stay "
                f"within mpc.u_bounds.T {list(mpc_cfg.t_bounds)}",
            )
        if split.walk is not None and (
            split.walk.t_min < mpc_cfg.t_bounds[0] or split.walk.t_max > mpc_cfg.t_bounds[1]
        ):
            v.fail(
                f"excitation.{split_name}.walk.t_min",
                f"walk range [{split.walk.t_min}, {split.walk.t_max}] must stay "
                f"within mpc.u_bounds.T {list(mpc_cfg.t_bounds)}",
            )

    v.check_unknown(doc, "")
    if v.errors:
        raise ConfigError(v.errors)
    return ExperimentConfig(
        plant=plant_cfg,
        train_split=train_split,
        test_split=test_split,
        model=model_cfg,
        mpc=mpc_cfg,
        scenarios=tuple(scenarios),
        benchmark=bench_cfg,
        sweep=sweep_cfg,
        paths=paths_cfg,
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<file>: not valid JSON ({exc})"]) from exc
    return validate_config(document)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
