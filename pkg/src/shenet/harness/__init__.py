"""Training loop, protocol drivers, prediction, reports and CLI."""
from .config import ConfigFileError, TrainConfig, toy_config
from .experiment import ExperimentResult, ProtocolError, predict_cube, prepare_synthetic, run_experiment
from .optim import AdamState, adam_step
from .report import ablation_table, comparison_grid, report, scheme_tables
from .train import (
    LOSS_COLUMNS,
    LossLog,
    OptStates,
    Variant,
    discriminator_step,
    generator_forward,
    generator_step,
    predict_stacks,
    train,
    train_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
