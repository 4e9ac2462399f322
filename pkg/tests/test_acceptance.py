"""Acceptance gate: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run pytest with -s or check the captured
output). The heavyweight fixtures (trained desk-scale models) are shared
across criteria via conftest-style session caching inside this module.
"""

import json
import time

import numpy as np
import pytest

from rnnmpc import cli, closedloop, lstm, mpc, plant, sysid
from conftest import tiny_cli_config

TABLE_ROWS = [
    ((0.8, 0.8), (0.692, 0.287)),
    ((0.8, 1.1), (0.822, 0.152)),
    ((0.8, 1.043), (0.324, 0.406)),
]
SETPOINT_TEMPERATURE = 1.043


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"{criterion}: {detail}"


@pytest.fixture(scope="session")
def desk_dataset(default_config, kin):
    """Reference identification dataset built from the default configuration."""
    cfg = default_config
    train_traj = cli._generate_split(cfg, "train")
    test_traj = cli._generate_split(cfg, "test")
    norm = sysid.fit_normalization([train_traj])
    horizon = cfg.model.horizon
    train = sysid.normalize_dataset(
        sysid.Dataset.from_trajectories([train_traj], horizon, split="train"), norm
    )
    test = sysid.Dataset.from_trajectories([test_traj], horizon, split="test")
    return {"train": train, "test": test, "normalization": norm}


def _train_architecture(desk_dataset, layers, nodes, seed, epochs):
    norm = desk_dataset["normalization"]
    net = lstm.initialize_network(
        seed=seed, n_layers=layers, hidden_size=nodes, horizon=10, normalization=norm
    )
    lstm.train(net, desk_dataset["train"], epochs=epochs, batch_size=64, seed=seed)
    rmse = lstm.evaluate_rmse(net, desk_dataset["test"], norm)
    return net, rmse


@pytest.fixture(scope="session")
def seed_study(desk_dataset):
    """Three-seed training study at the criterion-4 configuration."""
    t0 = time.time()
    results = {}
    for layers, nodes in ((2, 64), (1, 16)):
        for seed in (7, 8, 9):
            net, rmse = _train_architecture(desk_dataset, layers, nodes, seed, epochs=300)
            results[(layers, nodes, seed)] = (net, rmse)
    results["elapsed"] = time.time() - t0
    return results


@pytest.fixture(scope="session")
def controller_models(desk_dataset, default_config):
    """Models trained at the full configured budget for closed-loop use."""
    cfg = default_config
    out = {}
    for layers, nodes in cfg.benchmark.architectures:
        net, rmse = _train_architecture(
            desk_dataset, layers, nodes, cfg.model.seed, epochs=cfg.model.epochs
        )
        out[(layers, nodes)] = (net, rmse)
    return out


@pytest.fixture(scope="session")
def benchmark_runs(default_config, kin):
    """True-model controller runs for both scenarios."""
    settings = default_config.mpc_settings()
    model = mpc.TruePlantModel(kin=kin, dt=default_config.plant.dt, substeps=default_config.plant.substeps)
    records = {}
    elapsed = {}
    for s in default_config.scenarios:
        scenario = closedloop.Scenario.from_initial_input(
            s.name, (s.u0_q, s.u0_t), kin=kin, n_steps=s.n_steps, warmup_steps=s.warmup_steps
        )
        t0 = time.time()
        records[s.name] = closedloop.run_scenario(
            scenario, model, settings, kin=kin, controller_label="benchmark_nmpc"
        )
        elapsed[s.name] = time.time() - t0
    return {"records": records, "elapsed": elapsed, "settings": settings}


def test_criterion_1_steady_state_reproduction(kin):
    t0 = time.time()
    deltas = []
    for u, expected in TABLE_ROWS:
        ss = plant.steady_state(u, kin)
        deltas.append(max(abs(ss.c_a - expected[0]), abs(ss.c_r - expected[1])))
    elapsed = time.time() - t0
    ok = max(deltas) <= 0.005 and elapsed < 1.0
    _report(
        "criterion 1 (steady-state reproduction)",
        ok,
        f"max |delta|={max(deltas):.4f} (tol 0.005), runtime {elapsed:.2f}s (< 1s)",
    )


def test_criterion_2_peak_structure(kin):
    t0 = time.time()
    grid = plant.temperature_grid(0.5, 1.1, 121)  # 0.005 spacing
    table = plant.sweep_steady_states(0.8, grid, kin)
    c_r = table[:, 2]
    peak = int(np.argmax(c_r))
    unique_interior = (
        0 < peak < len(grid) - 1 and np.sum(c_r == c_r[peak]) == 1
    )
    ratio = c_r / table[:, 1]
    t_ratio = table[int(np.argmax(ratio)), 0]
    elapsed = time.time() - t0
    ok = unique_interior and abs(t_ratio - SETPOINT_TEMPERATURE) <= 0.01 and elapsed < 5.0
    _report(
        "criterion 2 (peak structure)",
        ok,
        f"peak at T={table[peak, 0]:.3f} interior+unique={unique_interior}, "
        f"ratio maximizer T={t_ratio:.3f} (within 0.01 of {SETPOINT_TEMPERATURE}), "
        f"runtime {elapsed:.2f}s (< 5s)",
    )


def test_criterion_3_gradient_correctness():
    t0 = time.time()
    net = lstm.initialize_network(seed=3, n_layers=2, hidden_size=8, horizon=4)
    rng = np.random.default_rng(42)
    y0 = rng.uniform(-1, 1, (5, 2))
    u_seq = rng.uniform(-1, 1, (5, 4, 2))
    targets = rng.uniform(-1, 1, (5, 2))
    _, grads = lstm.backward(net, y0, u_seq, targets)
    h = 1e-5
    max_rel = 0.0
    for p_idx, p in enumerate(net.parameter_arrays()):
        flat = p.reshape(-1)
        g_flat = grads[p_idx].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = lstm.loss_mae(lstm.forward(net, y0, u_seq), targets)
            flat[i] = orig - h
            down = lstm.loss_mae(lstm.forward(net, y0, u_seq), targets)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            rel = abs(fd - g_flat[i]) / max(abs(fd), abs(g_flat[i]), 1e-6)
            max_rel = max(max_rel, rel)
    elapsed = time.time() - t0
    ok = max_rel < 1e-4 and elapsed < 10.0
    _report(
        "criterion 3 (gradient correctness)",
        ok,
        f"max relative error {max_rel:.2e} (< 1e-4) over all parameters, "
        f"runtime {elapsed:.1f}s (< 10s)",
    )


def test_criterion_4_identification_desk_scale(seed_study):
    rmse_main = seed_study[(2, 64, 7)][1]
    med_big = float(np.median([seed_study[(2, 64, s)][1] for s in (7, 8, 9)]))
    med_small = float(np.median([seed_study[(1, 16, s)][1] for s in (7, 8, 9)]))
    elapsed = seed_study["elapsed"]
    ok = rmse_main < 0.05 and med_big < med_small and elapsed < 1200.0
    _report(
        "criterion 4 (identification at desk scale)",
        ok,
        f"test RMSE(2x64, 300 epochs)={rmse_main:.4f} (< 0.05); 3-seed medians "
        f"2x64={med_big:.4f} < 1x16={med_small:.4f}; runtime {elapsed:.0f}s (< 1200s)",
    )


def test_criterion_5_benchmark_nmpc_closed_loop(benchmark_runs):
    settings = benchmark_runs["settings"]
    setpoint = settings.setpoint_array
    failures = []
    details = []
    for name, record in benchmark_runs["records"].items():
        err = record.final_mean_error(setpoint, window=50)
        in_u = np.all(record.inputs >= np.array(settings.u_min) - 1e-9) and np.all(
            record.inputs <= np.array(settings.u_max) + 1e-9
        )
        in_du = np.all(np.abs(record.moves) <= np.array(settings.du_max) + 1e-9)
        index = closedloop.performance_index(record.total_cost, record.total_cost)
        elapsed = benchmark_runs["elapsed"][name]
        details.append(
            f"{name}: err={err.round(4).tolist()}, J={record.total_cost:.4f}, {elapsed:.0f}s"
        )
        if not (np.all(err < 0.01) and in_u and in_du and index == 100.0 and elapsed < 120.0):
            failures.append(name)
    _report(
        "criterion 5 (benchmark NMPC closed loop)",
        not failures,
        "; ".join(details) + " (err tol 0.01/channel, <120s each)",
    )


def test_criterion_6_rnn_mpc_closed_loop(controller_models, benchmark_runs, default_config, kin):
    t0 = time.time()
    settings = benchmark_runs["settings"]
    scenarios = [
        closedloop.Scenario.from_initial_input(
            s.name, (s.u0_q, s.u0_t), kin=kin, n_steps=s.n_steps, warmup_steps=s.warmup_steps
        )
        for s in default_config.scenarios
    ]
    architectures = [
        (layers, nodes, mpc.LstmModel(net=net, normalization=net.normalization))
        for (layers, nodes), (net, _) in controller_models.items()
    ]
    rows, bench, _ = closedloop.benchmark_suite(
        scenarios,
        architectures,
        settings,
        kin=kin,
        offset_window=default_config.benchmark.offset_window,
        offset_threshold=default_config.benchmark.offset_threshold,
    )
    by_arch = {(r.layers, r.nodes): r for r in rows}
    best = max(rows, key=lambda r: r.average_index)
    small = by_arch[(1, 16)]
    elapsed = time.time() - t0
    ok = best.average_index >= 90.0 and small.offset and elapsed < 600.0
    _report(
        "criterion 6 (RNN-MPC closed loop)",
        ok,
        f"best {best.layers}x{best.nodes} I_avg={best.average_index:.1f} (>= 90); "
        f"1x16 offset flagged={small.offset}; runtime {elapsed:.0f}s (< 600s)",
    )


def test_criterion_7_small_instance_solver_oracle(kin):
    t0 = time.time()
    settings = mpc.MpcSettings(control_horizon=1)
    model = mpc.TruePlantModel(kin=kin)
    rng = np.random.default_rng(2024)
    worst_excess = -np.inf
    for _ in range(20):
        c_a = rng.uniform(0.05, 0.85)
        c_r = rng.uniform(0.05, min(0.9, 1.0 - c_a))
        u_prev = np.array([rng.uniform(0.75, 0.85), rng.uniform(0.5, 1.1)])
        hist = mpc.HistoryBuffer(settings.prediction_horizon)
        y = np.array([c_a, c_r])
        for _ in range(settings.prediction_horizon - 1):
            hist.observe(y)
            hist.commit(u_prev)
            y = plant.step(y, u_prev, kin=kin)
        hist.observe(y)
        solution = mpc.solve_rhc(model, hist, settings)

        lo = np.maximum(settings.du_min, np.array(settings.u_min) - u_prev)
        hi = np.minimum(settings.du_max, np.array(settings.u_max) - u_prev)
        g_q = np.linspace(lo[0], hi[0], 41)
        g_t = np.linspace(lo[1], hi[1], 41)
        grid = np.stack(np.meshgrid(g_q, g_t, indexing="ij"), -1).reshape(-1, 1, 2)
        u_futures = mpc.build_future_inputs(u_prev, grid, settings.prediction_horizon)
        y_preds = model.predict_many(hist.measurement_window(), hist.input_window(), u_futures)
        costs = mpc.stage_cost_batch(y_preds, grid, settings)
        best_idx = int(np.argmin(costs))
        # "Within one grid cell": allow the cost variation across the best
        # point's grid neighborhood.
        bi, bj = divmod(best_idx, 41)
        neighborhood = [
            costs[i * 41 + j]
            for i in range(max(0, bi - 1), min(41, bi + 2))
            for j in range(max(0, bj - 1), min(41, bj + 2))
        ]
        cell_tol = float(np.max(neighborhood) - costs[best_idx])
        excess = solution.cost - float(costs[best_idx])
        worst_excess = max(worst_excess, excess - cell_tol)
    elapsed = time.time() - t0
    ok = worst_excess <= 1e-9 and elapsed < 60.0
    _report(
        "criterion 7 (small-instance solver oracle)",
        ok,
        f"worst excess beyond one grid cell {worst_excess:.2e} over 20 states, "
        f"runtime {elapsed:.0f}s (< 60s)",
    )


def test_criterion_8_reproduce_all_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(cli.RESULTS_ENV_VAR, raising=False)
    config = tiny_cli_config(tmp_path)
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))

    def run_once(tag: str) -> dict:
        results = tmp_path / "results"
        for d in (tmp_path / "data", tmp_path / "models", results):
            if d.exists():
                for p in d.iterdir():
                    p.unlink()
        assert cli.main(["--config", str(config_path), "reproduce-all", "--no-figure"]) == 0
        artifacts = {}
        for directory in (tmp_path / "data", results):
            for p in sorted(directory.glob("*.csv")) + sorted(directory.glob("*.json")):
                artifacts[f"{directory.name}/{p.name}"] = p.read_bytes()
        return artifacts

    first = run_once("first")
    second = run_once("second")
    changed = [name for name in first if first[name] != second.get(name)]
    ok = not changed and set(first) == set(second) and len(first) > 0
    _report(
        "criterion 8 (reproduce-all determinism)",
        ok,
        f"{len(first)} artifacts byte-identical across two runs"
        + (f"; changed: {changed}" if changed else ""),
    )
