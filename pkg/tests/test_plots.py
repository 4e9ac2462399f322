import numpy as np
import pytest

from rnnmpc import closedloop, mpc, plant, plots, sysid


@pytest.fixture(scope="module")
def short_record(kin):
    scenario = closedloop.Scenario.from_initial_input(
        "startup", (0.8, 0.8), kin=kin, n_steps=25, warmup_steps=10
    )
    return closedloop.run_scenario(
        scenario, mpc.TruePlantModel(kin=kin), mpc.MpcSettings(), kin=kin
    )


def test_sweep_figure_renders(tmp_path, kin):
    table = plant.sweep_steady_states(0.8, np.linspace(0.5, 1.1, 25), kin)
    out = tmp_path / "sweep.png"
    plots.save_figure(plots.plot_sweep(table), out)
    assert out.stat().st_size > 0


def test_closed_loop_figures_render(tmp_path, short_record):
    settings = mpc.MpcSettings()
    plots.save_figure(plots.plot_closed_loop(short_record, settings, title="t"), tmp_path / "a.png")
    plots.save_figure(
        plots.plot_closed_loop_comparison(short_record, short_record, settings), tmp_path / "b.png"
    )
    assert (tmp_path / "a.png").exists() and (tmp_path / "b.png").exists()


def test_trajectory_and_fit_figures_render(tmp_path, kin):
    profile = sysid.generate_excitation(seed=1, q_levels=[0.8], t_step=0.3, dwell=4, jitter=0.0)
    x0 = plant.steady_state(profile[0], kin).as_array()
    traj = sysid.simulate_trajectory(profile, x0, kin=kin)
    plots.save_figure(plots.plot_trajectory(traj), tmp_path / "traj.png")
    targets = traj.outputs[:-5]
    preds = targets + 0.01
    plots.save_figure(plots.plot_prediction_fit(targets, preds), tmp_path / "fit.png")
    plots.save_figure(plots.plot_training_history([0.5, 0.1, 0.05]), tmp_path / "hist.png")
    for name in ("traj.png", "fit.png", "hist.png"):
        assert (tmp_path / name).stat().st_size > 0
