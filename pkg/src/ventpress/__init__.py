"""Ventilator breath simulation, a PID baseline and an LSTM pressure model."""

from .data_model import (
    Breath,
    BreathStep,
    Dataset,
    LungSettings,
    Violation,
    cmh2o_to_pascal,
    validate_breath,
)
from .ingest import DatasetStats, ParseError, compute_stats, parse_csv, write_csv
from .lstm import (
    LstmParams,
    LstmState,
    StepCache,
    featurize,
    init_params,
    load_params,
    lstm_backward,
    lstm_cell_forward,
    lstm_forward,
    save_params,
)
from .lung_sim import (
    ControlSchedule,
    SimConfig,
    generate_control,
    generate_dataset,
    simulate_breath,
)
from .pid import PidGains, PidState, pid_step, step_target, track_waveform
from .train_eval import (
    ModelConfig,
    TrainConfig,
    TrainReport,
    baseline_mean_predictor,
    evaluate,
    fit,
    masked_mae,
    masked_mae_grad,
    train,
)

__version__ = "0.1.0"
