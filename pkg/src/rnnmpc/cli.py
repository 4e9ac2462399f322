"""Command-line entry point tying the pipeline together.

Subcommands: sweep, gen-data, train, evaluate, run-closed-loop, benchmark,
reproduce-all. Every subcommand is driven by one JSON configuration document
(defaults apply when none is given); artifacts embed the configuration digest
so later stages can refuse mixed-provenance inputs. Exit codes: 0 success,
2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import closedloop, lstm, mpc, plant, sysid
from .config import ConfigError, ExperimentConfig, load_config, validate_config

RESULTS_ENV_VAR = "RNNMPC_RESULTS_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

SWEEP_HEADER = ("T", "C_A", "C_R", "C_S")


class StageError(RuntimeError):
    """A pipeline stage failed; the message is user-facing."""


def _load_cli_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return validate_config({})
    return load_config(path)


def _results_dir(config: ExperimentConfig) -> Path:
    override = os.environ.get(RESULTS_ENV_VAR)
    return Path(override) if override else Path(config.paths.results_dir)


def _write_sweep_csv(path: Path, table: np.ndarray, digest: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_digest={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])


def _model_path(config: ExperimentConfig, layers: int, nodes: int) -> Path:
    return Path(config.paths.models_dir) / f"lstm_{layers}x{nodes}.json"


def _dataset_paths(config: ExperimentConfig) -> dict[str, Path]:
    data_dir = Path(config.paths.data_dir)
    return {
        "train": data_dir / "train.csv",
        "test": data_dir / "test.csv",
        "normalization": data_dir / "normalization.json",
    }


def _require_dataset(config: ExperimentConfig) -> dict[str, Path]:
    paths = _dataset_paths(config)
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        raise StageError(
            "identification dataset not found: missing " + ", ".join(missing) + "; run `rnnmpc gen-data` first"
        )
    return paths


def cmd_sweep(config: ExperimentConfig, args) -> int:
    q = args.q if args.q is not None else config.sweep.q
    t_min = args.t_min if args.t_min is not None else config.sweep.t_min
    t_max = args.t_max if args.t_max is not None else config.sweep.t_max
    n = args.n if args.n is not None else config.sweep.n
    grid = plant.temperature_grid(t_min, t_max, n)
    table = plant.sweep_steady_states(q, grid, config.plant.kinetics())
    out = Path(args.out) if args.out else _results_dir(config) / "sweep.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_sweep_csv(out, table, config.digest())
    if not args.no_figure:
        from . import plots

        plots.save_figure(plots.plot_sweep(table), out.with_suffix(".png"))
    print(f"sweep: wrote {len(table)} steady states to {out}")
    return EXIT_OK


def _generate_split(config: ExperimentConfig, split: str) -> sysid.Trajectory:
    split_cfg = config.train_split if split == "train" else config.test_split
    profile = sysid.generate_excitation(
        seed=split_cfg.seed,
        q_levels=split_cfg.q_levels,
        t_min=split_cfg.t_min,
        t_max=split_cfg.t_max,
        t_step=split_cfg.t_step,
        dwell=split_cfg.dwell,
        jitter=split_cfg.jitter,
    )
    if split_cfg.refine is not None:
        fine = sysid.generate_excitation(
            seed=split_cfg.seed + 1,
            q_levels=split_cfg.q_levels,
            t_min=split_cfg.refine.t_min,
            t_max=split_cfg.refine.t_max,
            t_step=split_cfg.refine.t_step,
            dwell=split_cfg.refine.dwell,
            jitter=split_cfg.jitter,
        )
        profile = np.concatenate([profile, fine], axis=0)
    if split_cfg.walk is not None:
        walk = sysid.generate_random_walk(
            seed=split_cfg.seed + 2,
            q_levels=split_cfg.q_levels,
            t_min=split_cfg.walk.t_min,
            t_max=split_cfg.walk.t_max,
            steps=split_cfg.walk.steps,
            max_move=split_cfg.walk.max_move,
            t_start=split_cfg.walk.t_start,
        )
        profile = np.concatenate([profile, walk], axis=0)
    kin = config.plant.kinetics()
    x0 = plant.steady_state(profile[0], kin).as_array()
    return sysid.simulate_trajectory(
        profile, x0, kin=kin, dt=config.plant.dt, substeps=config.plant.substeps
    )


def cmd_gen_data(config: ExperimentConfig, args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else Path(config.paths.data_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config.digest()
    train_traj = _generate_split(config, "train")
    test_traj = _generate_split(config, "test")
    norm = sysid.fit_normalization([train_traj])
    sysid.save_trajectory_csv(out_dir / "train.csv", train_traj, digest)
    sysid.save_trajectory_csv(out_dir / "test.csv", test_traj, digest)
    sysid.save_normalization(out_dir / "normalization.json", norm, digest)
    if not args.no_figure:
        from . import plots

        plots.save_figure(plots.plot_trajectory(train_traj), out_dir / "train.png")
        plots.save_figure(plots.plot_trajectory(test_traj), out_dir / "test.png")
    print(
        f"gen-data: wrote {len(train_traj)} training and {len(test_traj)} test samples to {out_dir}"
    )
    return EXIT_OK


def _load_datasets(config: ExperimentConfig):
    paths = _require_dataset(config)
    train_traj, train_digest = sysid.load_trajectory_csv(paths["train"], dt=config.plant.dt)
    test_traj, test_digest = sysid.load_trajectory_csv(paths["test"], dt=config.plant.dt)
    norm, norm_digest = sysid.load_normalization(paths["normalization"])
    digests = {train_digest, test_digest, norm_digest}
    return train_traj, test_traj, norm, digests


def _train_one(
    config: ExperimentConfig,
    layers: int,
    nodes: int,
    train_traj: sysid.Trajectory,
    test_traj: sysid.Trajectory,
    norm: sysid.Normalization,
) -> tuple[lstm.NetworkParameters, list[float], float]:
    model_cfg = config.model
    horizon = model_cfg.horizon
    train_ds = sysid.normalize_dataset(
        sysid.Dataset.from_trajectories([train_traj], horizon, split="train"), norm
    )
    test_ds = sysid.Dataset.from_trajectories([test_traj], horizon, split="test")
    net = lstm.initialize_network(
        seed=model_cfg.seed,
        n_layers=layers,
        hidden_size=nodes,
        horizon=horizon,
        forget_bias=model_cfg.forget_bias,
        normalization=norm,
    )
    history = lstm.train(
        net,
        train_ds,
        epochs=model_cfg.epochs,
        batch_size=model_cfg.batch_size,
        seed=model_cfg.seed,
        learning_rate=model_cfg.learning_rate,
        beta1=model_cfg.beta1,
        beta2=model_cfg.beta2,
        eps=model_cfg.eps,
    )
    rmse = lstm.evaluate_rmse(net, test_ds, norm)
    net.meta = dict(net.meta)
    net.meta.update(
        {
            "layers": layers,
            "nodes": nodes,
            "epochs": model_cfg.epochs,
            "seed": model_cfg.seed,
            "final_train_loss": history[-1],
            "test_rmse": rmse,
        }
    )
    return net, history, rmse


def cmd_train(config: ExperimentConfig, args) -> int:
    overrides = {}
    for key, value in (
        ("layers", args.layers),
        ("nodes", args.nodes),
        ("epochs", args.epochs),
        ("batch_size", args.batch),
        ("seed", args.seed),
        ("learning_rate", args.lr),
    ):
        if value is not None:
            overrides[key] = value
    if overrides:
        config = replace(config, model=replace(config.model, **overrides))
    if args.data:
        config = replace(config, paths=replace(config.paths, data_dir=args.data))
    train_traj, test_traj, norm, _ = _load_datasets(config)
    net, history, rmse = _train_one(
        config, config.model.layers, config.model.nodes, train_traj, test_traj, norm
    )
    out = Path(args.out) if args.out else _model_path(config, config.model.layers, config.model.nodes)
    out.parent.mkdir(parents=True, exist_ok=True)
    lstm.save_model(net, norm, out, config.digest())
    if not args.no_figure:
        from . import plots

        plots.save_figure(
            plots.plot_training_history(
                history, title=f"{config.model.layers} layers x {config.model.nodes} nodes"
            ),
            out.with_suffix(".history.png"),
        )
    print(
        f"train: {config.model.layers}x{config.model.nodes} for {config.model.epochs} epochs, "
        f"final training MAE {history[-1]:.5f}, test RMSE {rmse:.5f}; saved to {out}"
    )
    return EXIT_OK


def cmd_evaluate(config: ExperimentConfig, args) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        raise StageError(f"model file not found: {model_path}")
    if args.data:
        config = replace(config, paths=replace(config.paths, data_dir=args.data))
    net = lstm.load_model(model_path)
    model_digest = lstm.load_model_digest(model_path)
    if model_digest is not None and model_digest != config.digest():
        print(
            f"warning: model digest {model_digest[:12]} does not match the active "
            f"configuration {config.digest()[:12]}",
            file=sys.stderr,
        )
    _, test_traj, norm, _ = _load_datasets(config)
    test_ds = sysid.Dataset.from_trajectories([test_traj], net.horizon, split="test")
    rmse = lstm.evaluate_rmse(net, test_ds, norm)
    out = Path(args.out) if args.out else _results_dir(config) / f"evaluate_{model_path.stem}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    closedloop.write_summary_json(
        out,
        {"model": model_path.name, "test_rmse": rmse, "n_windows": len(test_ds)},
        config.digest(),
    )
    if not args.no_figure:
        from . import plots

        pred = norm.denormalize_y(
            lstm.forward(net, norm.normalize_y(test_ds.y0), norm.normalize_u(test_ds.u_seq))
        )
        plots.save_figure(
            plots.plot_prediction_fit(test_ds.target, pred, title=f"{model_path.stem} on test data"),
            out.with_suffix(".png"),
        )
    print(f"evaluate: {model_path.name} test RMSE {rmse:.5f} over {len(test_ds)} windows -> {out}")
    return EXIT_OK


def _build_scenarios(config: ExperimentConfig) -> list[closedloop.Scenario]:
    kin = config.plant.kinetics()
    return [
        closedloop.Scenario.from_initial_input(
            name=s.name,
            u0=(s.u0_q, s.u0_t),
            kin=kin,
            n_steps=s.n_steps,
            warmup_steps=s.warmup_steps,
        )
        for s in config.scenarios
    ]


def _run_and_save(
    config: ExperimentConfig,
    scenario: closedloop.Scenario,
    model: mpc.PredictiveModel,
    label: str,
    out_dir: Path,
    benchmark_cost: float | None = None,
    figure: bool = True,
) -> closedloop.ClosedLoopRecord:
    settings = config.mpc_settings()
    record = closedloop.run_scenario(
        scenario,
        model,
        settings,
        kin=config.plant.kinetics(),
        substeps=config.plant.substeps,
        solver_options=config.mpc.solver_options(),
        controller_label=label,
    )
    digest = config.digest()
    stem = out_dir / f"run_{scenario.name}_{label}"
    record.to_csv(stem.with_suffix(".csv"), digest)
    record.solver_log_to_csv(Path(f"{stem}.solver.csv"), digest)
    closedloop.write_summary_json(
        stem.with_suffix(".json"), record.summary(settings, benchmark_cost), digest
    )
    if figure:
        from . import plots

        plots.save_figure(
            plots.plot_closed_loop(record, settings, title=f"{scenario.name} - {label}"),
            stem.with_suffix(".png"),
        )
    return record


def cmd_run_closed_loop(config: ExperimentConfig, args) -> int:
    scenarios = {s.name: s for s in _build_scenarios(config)}
    if args.scenario not in scenarios:
        raise StageError(
            f"unknown scenario '{args.scenario}'; configured scenarios: {sorted(scenarios)}"
        )
    scenario = scenarios[args.scenario]
    out_dir = Path(args.out_dir) if args.out_dir else _results_dir(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    kin = config.plant.kinetics()
    if args.controller == "benchmark":
        model: mpc.PredictiveModel = mpc.TruePlantModel(
            kin=kin, dt=config.plant.dt, substeps=config.plant.substeps
        )
        label = "benchmark_nmpc"
    else:
        model_path = (
            Path(args.model)
            if args.model
            else _model_path(config, config.model.layers, config.model.nodes)
        )
        if not model_path.exists():
            raise StageError(f"model file not found: {model_path}; run `rnnmpc train` first")
        net = lstm.load_model(model_path)
        model_digest = lstm.load_model_digest(model_path)
        if model_digest is not None and model_digest != config.digest():
            print(
                f"warning: model digest {model_digest[:12]} does not match the active "
                f"configuration {config.digest()[:12]}",
                file=sys.stderr,
            )
        if net.normalization is None:
            raise StageError(f"model file {model_path} carries no normalization record")
        model = mpc.LstmModel(net=net, normalization=net.normalization)
        label = f"rnn_mpc_{len(net.layers)}x{net.layers[0].hidden_size}"
    record = _run_and_save(
        config, scenario, model, label, out_dir, figure=not args.no_figure
    )
    print(
        f"run-closed-loop: {scenario.name} with {label}: J={record.total_cost:.6f}, "
        f"offset={record.has_offset(config.mpc_settings().setpoint_array)}"
    )
    return EXIT_OK


def _benchmark_models(
    config: ExperimentConfig,
    train_traj: sysid.Trajectory,
    test_traj: sysid.Trajectory,
    norm: sysid.Normalization,
    models_dir: Path,
    allow_training: bool = True,
) -> list[tuple[int, int, mpc.LstmModel, float]]:
    """Load or train one model per benchmark architecture, enforcing digests."""
    digest = config.digest()
    entries = []
    for layers, nodes in config.benchmark.architectures:
        path = _model_path(config, layers, nodes)
        if models_dir != Path(config.paths.models_dir):
            path = models_dir / path.name
        if path.exists():
            model_digest = lstm.load_model_digest(path)
            if model_digest != digest:
                raise StageError(
                    f"refusing to mix artifacts: model {path} carries digest "
                    f"{str(model_digest)[:12]} but the active configuration digests to {digest[:12]}"
                )
            net = lstm.load_model(path)
            rmse = float(net.meta.get("test_rmse", float("nan")))
        elif allow_training:
            net, _, rmse = _train_one(config, layers, nodes, train_traj, test_traj, norm)
            path.parent.mkdir(parents=True, exist_ok=True)
            lstm.save_model(net, norm, path, digest)
            print(f"benchmark: trained {layers}x{nodes} (test RMSE {rmse:.5f}) -> {path}")
        else:
            raise StageError(f"model file not found: {path}")
        entries.append((layers, nodes, mpc.LstmModel(net=net, normalization=norm), rmse))
    return entries


def cmd_benchmark(config: ExperimentConfig, args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else _results_dir(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    models_dir = Path(args.models_dir) if args.models_dir else Path(config.paths.models_dir)
    digest = config.digest()
    scenario_names = [s.name for s in config.scenarios]
    if not config.benchmark.architectures:
        closedloop.benchmark_report_csv(out_dir / "benchmark.csv", [], scenario_names, digest)
        print("benchmark: no architectures configured; wrote empty report")
        return EXIT_OK
    train_traj, test_traj, norm, data_digests = _load_datasets(config)
    if data_digests - {None} - {digest}:
        raise StageError(
            "refusing to mix artifacts: dataset digests "
            f"{sorted(str(d)[:12] for d in data_digests)} do not match the active "
            f"configuration {digest[:12]}"
        )
    entries = _benchmark_models(config, train_traj, test_traj, norm, models_dir)
    scenarios = _build_scenarios(config)
    settings = config.mpc_settings()
    rows, bench_records, rnn_records = closedloop.benchmark_suite(
        scenarios,
        [(layers, nodes, model) for layers, nodes, model, _ in entries],
        settings,
        kin=config.plant.kinetics(),
        substeps=config.plant.substeps,
        solver_options=config.mpc.solver_options(),
        offset_window=config.benchmark.offset_window,
        offset_threshold=config.benchmark.offset_threshold,
    )
    closedloop.benchmark_report_csv(out_dir / "benchmark.csv", rows, scenario_names, digest)
    for name, record in bench_records.items():
        stem = out_dir / f"run_{name}_benchmark_nmpc"
        record.to_csv(stem.with_suffix(".csv"), digest)
        record.solver_log_to_csv(Path(f"{stem}.solver.csv"), digest)
        closedloop.write_summary_json(stem.with_suffix(".json"), record.summary(settings), digest)
    for (layers, nodes, name), record in rnn_records.items():
        stem = out_dir / f"run_{name}_rnn_mpc_{layers}x{nodes}"
        record.to_csv(stem.with_suffix(".csv"), digest)
        record.solver_log_to_csv(Path(f"{stem}.solver.csv"), digest)
        benchmark_cost = bench_records[name].total_cost
        closedloop.write_summary_json(
            stem.with_suffix(".json"), record.summary(settings, benchmark_cost), digest
        )
    if not args.no_figure:
        from . import plots

        for (layers, nodes, name), record in rnn_records.items():
            plots.save_figure(
                plots.plot_closed_loop_comparison(
                    bench_records[name], record, settings, title=f"{name}: {layers}x{nodes} vs benchmark"
                ),
                out_dir / f"benchmark_{name}_{layers}x{nodes}.png",
            )
    for row in rows:
        print(
            f"benchmark: {row.layers}x{row.nodes}: "
            + ", ".join(f"I[{k}]={v:.1f}" for k, v in row.indices.items())
            + f", I_avg={row.average_index:.1f}, offset={row.offset}"
        )
    print(f"benchmark: report written to {out_dir / 'benchmark.csv'}")
    return EXIT_OK


def cmd_reproduce_all(config: ExperimentConfig, args) -> int:
    """Full pipeline: sweep, data, training, evaluation, closed-loop benchmark."""
    digest = config.digest()
    results_dir = Path(args.out_dir) if args.out_dir else _results_dir(config)
    results_dir.mkdir(parents=True, exist_ok=True)

    sweep_args = argparse.Namespace(
        q=None, t_min=None, t_max=None, n=None, out=str(results_dir / "sweep.csv"), no_figure=args.no_figure
    )
    cmd_sweep(config, sweep_args)
    table = plant.sweep_steady_states(
        config.sweep.q,
        plant.temperature_grid(config.sweep.t_min, config.sweep.t_max, config.sweep.n),
        config.plant.kinetics(),
    )
    peak_idx = int(np.argmax(table[:, 2]))
    ratio = table[:, 2] / table[:, 1]
    ratio_idx = int(np.argmax(ratio))

    gen_args = argparse.Namespace(out_dir=None, no_figure=args.no_figure)
    cmd_gen_data(config, gen_args)
    train_traj, test_traj, norm, _ = _load_datasets(config)

    models_dir = Path(config.paths.models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    entries = _benchmark_models(config, train_traj, test_traj, norm, models_dir)
    rmse_table = [
        {"layers": layers, "nodes": nodes, "test_rmse": rmse}
        for layers, nodes, _, rmse in entries
    ]

    bench_args = argparse.Namespace(out_dir=str(results_dir), models_dir=None, no_figure=args.no_figure)
    cmd_benchmark(config, bench_args)

    kin = config.plant.kinetics()
    steady_rows = []
    for s in config.scenarios:
        ss = plant.steady_state((s.u0_q, s.u0_t), kin)
        steady_rows.append(
            {"name": s.name, "q": s.u0_q, "T": s.u0_t, "C_A": ss.c_a, "C_R": ss.c_r}
        )
    with open(results_dir / "benchmark.csv", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    bench_rows = list(csv.DictReader(lines))
    report = {
        "steady_states": steady_rows,
        "sweep": {
            "peak_temperature": float(table[peak_idx, 0]),
            "peak_c_r": float(table[peak_idx, 2]),
            "ratio_maximizer_temperature": float(table[ratio_idx, 0]),
            "max_ratio": float(ratio[ratio_idx]),
        },
        "identification": rmse_table,
        "closed_loop": bench_rows,
    }
    closedloop.write_summary_json(results_dir / "report.json", report, digest)
    print(f"reproduce-all: report written to {results_dir / 'report.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnnmpc",
        description=(
            "Reactor start-up and upset-recovery control with an LSTM prediction model: "
            "steady-state analysis, identification data, training, and closed-loop benchmarking."
        ),
    )
    parser.add_argument("--config", help="path to the experiment configuration JSON")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="steady-state sweep over temperature at fixed flow rate")
    p.add_argument("--q", type=float, help="flow rate (default from config)")
    p.add_argument("--t-min", type=float, dest="t_min")
    p.add_argument("--t-max", type=float, dest="t_max")
    p.add_argument("--n", type=int, help="number of grid points")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("gen-data", help="generate identification trajectories and normalization")
    p.add_argument("--out-dir", dest="out_dir", help="data directory (default from config)")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("train", help="train the sequence model on the generated dataset")
    p.add_argument("--layers", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--data", help="data directory (default from config)")
    p.add_argument("--out", help="model output path")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("evaluate", help="report test RMSE of a saved model")
    p.add_argument("--model", required=True, help="path to a saved model JSON")
    p.add_argument("--data", help="data directory (default from config)")
    p.add_argument("--out", help="summary JSON path")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("run-closed-loop", help="run one scenario under closed-loop control")
    p.add_argument("--scenario", required=True)
    p.add_argument("--controller", choices=("benchmark", "rnn"), default="benchmark")
    p.add_argument("--model", help="model path for the rnn controller")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("benchmark", help="benchmark all configured architectures against true-model control")
    p.add_argument("--models-dir", dest="models_dir")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("reproduce-all", help="full pipeline: sweep, data, training, benchmark, report")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--no-figure", action="store_true")

    return parser


COMMANDS = {
    "sweep": cmd_sweep,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "run-closed-loop": cmd_run_closed_loop,
    "benchmark": cmd_benchmark,
    "reproduce-all": cmd_reproduce_all,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_cli_config(args.config)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](config, args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
