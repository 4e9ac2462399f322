"""Reactor start-up and upset-recovery control with an LSTM prediction model.

The package simulates a reversible-reaction CSTR exactly, identifies a
stacked-LSTM surrogate for fixed-horizon output prediction, and closes the
loop with a constrained receding-horizon controller, benchmarked against the
same controller running on the true plant equations.
"""

from .plant import (
    ControlInput,
    IntegrationError,
    KineticParameters,
    PlantState,
    rate_constants,
    state_derivative,
    steady_state,
    step,
    sweep_steady_states,
)
from .sysid import (
    Dataset,
    Normalization,
    RegressorWindow,
    Trajectory,
    fit_normalization,
    generate_excitation,
    make_windows,
    normalize_dataset,
    simulate_trajectory,
)
from .lstm import (
    AdamState,
    LstmLayerParams,
    NetworkParameters,
    adam_step,
    backward,
    cell_step,
    evaluate_rmse,
    forward,
    initialize_network,
    load_model,
    loss_mae,
    save_model,
    train,
)
from .mpc import (
    HistoryBuffer,
    LstmModel,
    MpcSettings,
    PredictiveModel,
    RhcSolution,
    SolverOptions,
    TruePlantModel,
    apply_first_move,
    predict_horizon,
    solve_rhc,
    stage_cost,
)
from .closedloop import (
    BenchmarkRow,
    ClosedLoopRecord,
    Scenario,
    benchmark_suite,
    performance_index,
    run_scenario,
)
from .config import ConfigError, ExperimentConfig, load_config, save_config, validate_config

__version__ = "0.1.0"
