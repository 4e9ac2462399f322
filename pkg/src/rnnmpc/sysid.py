"""Excitation design, trajectory simulation, windowing and dataset handling.

The identification data come from staircase experiments: for each flow-rate
level, the reactor temperature is stepped up across its admissible range and
back down, each level held for a fixed dwell. Trajectories are cut into
fixed-horizon regressor windows (current output plus the future input
sequence, paired with the output at the end of the horizon) and normalized
channel-wise to [-1, 1] using training-split statistics only.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import plant
from .plant import DEFAULT_DT, DEFAULT_SUBSTEPS, KineticParameters

CHANNELS = ("C_A", "C_R", "q", "T")
TRAJECTORY_HEADER = ("k", "C_A", "C_R", "q", "T")

# Uniform-spacing tolerance for trajectory time stamps.
SPACING_TOL = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """Sampled closed- or open-loop run: times, applied inputs, measured outputs."""

    times: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float).reshape(-1, 2)
        outputs = np.asarray(self.outputs, dtype=float).reshape(-1, 2)
        if not (len(times) == len(inputs) == len(outputs)):
            raise ValueError(
                f"times, inputs and outputs must have equal length, got "
                f"{len(times)}, {len(inputs)}, {len(outputs)}"
            )
        if len(times) > 1:
            spacing = np.diff(times)
            if np.max(np.abs(spacing - spacing[0])) > SPACING_TOL:
                raise ValueError("sample instants must be uniformly spaced")
        for arr, name in ((times, "times"), (inputs, "inputs"), (outputs, "outputs")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            raise ValueError("spacing is undefined for trajectories shorter than 2 samples")
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class RegressorWindow:
    """One supervised sample: output now, the next `horizon` inputs, output then."""

    y0: np.ndarray
    u_seq: np.ndarray
    target: np.ndarray

    def __post_init__(self) -> None:
        y0 = np.asarray(self.y0, dtype=float).reshape(2)
        u_seq = np.asarray(self.u_seq, dtype=float).reshape(-1, 2)
        target = np.asarray(self.target, dtype=float).reshape(2)
        if len(u_seq) < 1:
            raise ValueError("a window needs at least one input step")
        for arr, name in ((y0, "y0"), (u_seq, "u_seq"), (target, "target")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return len(self.u_seq)


def generate_excitation(
    seed: int,
    q_levels,
    t_min: float = 0.5,
    t_max: float = 1.1,
    t_step: float = 0.05,
    dwell: int = 20,
    jitter: float = 0.01,
) -> np.ndarray:
    """Staircase input profile covering both sides of the product peak.

    For each flow-rate level the temperature walks up from t_min to t_max and
    back down in increments of t_step, holding each level for `dwell` samples.
    Each held level is perturbed by a seeded uniform jitter (clipped back into
    [t_min, t_max]) so repeated sweeps do not sit on identical grid points.
    Returns the (N, 2) array of (q, T) samples; deterministic in the seed.
    """
    q_levels = [float(q) for q in q_levels]
    if not q_levels:
        raise ValueError("q_levels must not be empty")
    if not t_min < t_max:
        raise ValueError(f"need t_min < t_max, got [{t_min}, {t_max}]")
    if t_step <= 0.0 or dwell < 1:
        raise ValueError("t_step must be positive and dwell >= 1")
    if jitter < 0.0:
        raise ValueError("jitter must be non-negative")
    rng = np.random.default_rng(seed)
    up = np.arange(t_min, t_max + 1e-12, t_step)
    levels = np.concatenate([up, up[-2::-1]]) if len(up) > 1 else up
    blocks = []
    for q in q_levels:
        jittered = levels + rng.uniform(-jitter, jitter, size=len(levels))
        jittered = np.clip(jittered, t_min, t_max)
        temps = np.repeat(jittered, dwell)
        block = np.column_stack([np.full(len(temps), q), temps])
        blocks.append(block)
    return np.concatenate(blocks, axis=0)


def generate_random_walk(
    seed: int,
    q_levels,
    t_min: float = 0.9,
    t_max: float = 1.1,
    steps: int = 200,
    max_move: float = 0.1,
    t_start: float = 1.04,
) -> np.ndarray:
    """Rate-limited random temperature walk, one move per sample.

    Mimics the input sequences a rate-bounded controller produces: at every
    sample the temperature moves by a uniform draw within +-max_move, clipped
    to [t_min, t_max]. One block per flow level; deterministic in the seed.
    """
    q_levels = [float(q) for q in q_levels]
    if not q_levels:
        raise ValueError("q_levels must not be empty")
    if not t_min <= t_start <= t_max:
        raise ValueError(f"t_start {t_start} must lie within [{t_min}, {t_max}]")
    if steps < 1 or max_move <= 0.0:
        raise ValueError("steps must be >= 1 and max_move positive")
    rng = np.random.default_rng(seed)
    blocks = []
    for q in q_levels:
        temps = np.empty(steps)
        t = t_start
        for i in range(steps):
            t = float(np.clip(t + rng.uniform(-max_move, max_move), t_min, t_max))
            temps[i] = t
        blocks.append(np.column_stack([np.full(steps, q), temps]))
    return np.concatenate(blocks, axis=0)


def simulate_trajectory(
    profile,
    x0,
    kin: KineticParameters = KineticParameters(),
    dt: float = DEFAULT_DT,
    substeps: int = DEFAULT_SUBSTEPS,
) -> Trajectory:
    """Run the plant over an input profile with zero-order hold.

    Sample k records the state before input k acts, so outputs[k] is the
    response to inputs[:k] only.
    """
    prof = np.asarray(profile, dtype=float).reshape(-1, 2)
    n = len(prof)
    times = np.arange(n) * dt
    outputs = np.empty((n, 2))
    state = np.asarray(x0, dtype=float).reshape(2)
    for k in range(n):
        outputs[k] = state
        state = plant.step(state, prof[k], dt=dt, kin=kin, substeps=substeps)
    return Trajectory(times=times, inputs=prof, outputs=outputs)


def make_windows(traj: Trajectory, horizon: int) -> list[RegressorWindow]:
    """Cut a trajectory into the len(traj) - horizon overlapping windows."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n = len(traj)
    if n < horizon + 1:
        raise ValueError(
            f"trajectory of length {n} is too short for horizon {horizon} "
            f"(needs at least {horizon + 1} samples)"
        )
    return [
        RegressorWindow(
            y0=traj.outputs[k],
            u_seq=traj.inputs[k : k + horizon],
            target=traj.outputs[k + horizon],
        )
        for k in range(n - horizon)
    ]


@dataclass(frozen=True)
class Normalization:
    """Per-channel affine map x -> (x - offset) / scale onto roughly [-1, 1]."""

    offsets: np.ndarray
    scales: np.ndarray

    def __post_init__(self) -> None:
        offsets = np.asarray(self.offsets, dtype=float).reshape(len(CHANNELS))
        scales = np.asarray(self.scales, dtype=float).reshape(len(CHANNELS))
        if np.any(scales == 0.0):
            raise ValueError("normalization scales must be nonzero")
        offsets.setflags(write=False)
        scales.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "scales", scales)

    def normalize_y(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.offsets[:2]) / self.scales[:2]

    def denormalize_y(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.scales[:2] + self.offsets[:2]

    def normalize_u(self, u) -> np.ndarray:
        return (np.asarray(u, dtype=float) - self.offsets[2:]) / self.scales[2:]

    def denormalize_u(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float) * self.scales[2:] + self.offsets[2:]

    def to_dict(self) -> dict:
        return {
            name: {"offset": float(self.offsets[i]), "scale": float(self.scales[i])}
            for i, name in enumerate(CHANNELS)
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Normalization":
        missing = [name for name in CHANNELS if name not in doc]
        if missing:
            raise ValueError(f"normalization record is missing channels {missing}")
        offsets = [float(doc[name]["offset"]) for name in CHANNELS]
        scales = [float(doc[name]["scale"]) for name in CHANNELS]
        return cls(np.array(offsets), np.array(scales))


def fit_normalization(trajectories) -> Normalization:
    """Min/max statistics per channel, mapped so the data span [-1, 1].

    A channel with no spread (for instance q during a single-level run) gets
    offset = value and scale = 1 so the map stays invertible; a warning is
    emitted because the network then sees that channel as identically zero.
    """
    trajs = list(trajectories)
    if not trajs:
        raise ValueError("need at least one trajectory to fit normalization")
    samples = np.concatenate([np.hstack([t.outputs, t.inputs]) for t in trajs], axis=0)
    if samples.size == 0:
        raise ValueError("cannot fit normalization on empty trajectories")
    lo = samples.min(axis=0)
    hi = samples.max(axis=0)
    offsets = 0.5 * (hi + lo)
    scales = 0.5 * (hi - lo)
    for i, name in enumerate(CHANNELS):
        if scales[i] == 0.0:
            warnings.warn(f"channel {name} is constant; using unit scale", stacklevel=2)
            scales[i] = 1.0
    return Normalization(offsets=offsets, scales=scales)


@dataclass(frozen=True)
class Dataset:
    """Stacked regressor windows plus the normalization that applies to them.

    y0 has shape (n, 2), u_seq (n, horizon, 2) and target (n, 2). When
    `normalization` is set the arrays are already in normalized units.
    """

    y0: np.ndarray
    u_seq: np.ndarray
    target: np.ndarray
    split: str = "train"
    normalization: Normalization | None = None

    def __post_init__(self) -> None:
        y0 = np.asarray(self.y0, dtype=float).reshape(-1, 2)
        u_seq = np.asarray(self.u_seq, dtype=float)
        target = np.asarray(self.target, dtype=float).reshape(-1, 2)
        if u_seq.ndim != 3 or u_seq.shape[2] != 2:
            raise ValueError(f"u_seq must have shape (n, horizon, 2), got {u_seq.shape}")
        if not (len(y0) == len(u_seq) == len(target)):
            raise ValueError("window arrays must have equal leading dimension")
        for arr, name in ((y0, "y0"), (u_seq, "u_seq"), (target, "target")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.y0)

    @property
    def horizon(self) -> int:
        return self.u_seq.shape[1]

    @property
    def windows(self) -> list[RegressorWindow]:
        return [
            RegressorWindow(y0=self.y0[i], u_seq=self.u_seq[i], target=self.target[i])
            for i in range(len(self))
        ]

    @classmethod
    def from_trajectories(cls, trajectories, horizon: int, split: str = "train") -> "Dataset":
        """Window each trajectory separately so no window spans two runs."""
        windows: list[RegressorWindow] = []
        for traj in trajectories:
            windows.extend(make_windows(traj, horizon))
        if not windows:
            raise ValueError("no windows could be extracted")
        return cls(
            y0=np.stack([w.y0 for w in windows]),
            u_seq=np.stack([w.u_seq for w in windows]),
            target=np.stack([w.target for w in windows]),
            split=split,
        )


def normalize_dataset(ds: Dataset, norm: Normalization) -> Dataset:
    """Apply a (training-split) normalization record to a physical dataset."""
    if ds.normalization is not None:
        raise ValueError("dataset is already normalized")
    return replace(
        ds,
        y0=norm.normalize_y(ds.y0),
        u_seq=norm.normalize_u(ds.u_seq),
        target=norm.normalize_y(ds.target),
        normalization=norm,
    )


def denormalize_dataset(ds: Dataset) -> Dataset:
    """Invert normalize_dataset; exact to floating-point roundoff."""
    if ds.normalization is None:
        raise ValueError("dataset carries no normalization record")
    norm = ds.normalization
    return replace(
        ds,
        y0=norm.denormalize_y(ds.y0),
        u_seq=norm.denormalize_u(ds.u_seq),
        target=norm.denormalize_y(ds.target),
        normalization=None,
    )


def save_trajectory_csv(path, traj: Trajectory, config_digest: str | None = None) -> None:
    """Persist a trajectory as `k,C_A,C_R,q,T` rows with full double precision."""
    with open(path, "w", newline="") as fh:
        if config_digest is not None:
            fh.write(f"# config_digest={config_digest}\n")
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for k in range(len(traj)):
            writer.writerow(
                [
                    k,
                    repr(float(traj.outputs[k, 0])),
                    repr(float(traj.outputs[k, 1])),
                    repr(float(traj.inputs[k, 0])),
                    repr(float(traj.inputs[k, 1])),
                ]
            )


def load_trajectory_csv(path, dt: float = DEFAULT_DT) -> tuple[Trajectory, str | None]:
    """Read a trajectory CSV; returns the trajectory and any embedded digest."""
    digest = None
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("# config_digest="):
            digest = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header} in {path}")
        ks, outputs, inputs = [], [], []
        for row in reader:
            ks.append(int(row[0]))
            outputs.append((float(row[1]), float(row[2])))
            inputs.append((float(row[3]), float(row[4])))
    if ks != list(range(len(ks))):
        raise ValueError(f"sample indices in {path} are not contiguous from 0")
    times = np.arange(len(ks)) * dt
    traj = Trajectory(times=times, inputs=np.array(inputs), outputs=np.array(outputs))
    return traj, digest


def save_normalization(path, norm: Normalization, config_digest: str | None = None) -> None:
    doc = {"channels": norm.to_dict()}
    if config_digest is not None:
        doc["config_digest"] = config_digest
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_normalization(path) -> tuple[Normalization, str | None]:
    with open(path) as fh:
        doc = json.load(fh)
    return Normalization.from_dict(doc["channels"]), doc.get("config_digest")
