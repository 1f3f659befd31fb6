"""bellsim: hidden-variable models of paired-detector correlation
experiments, the coincidence-window protocol that measures them, and the
inequality / feasibility / statistics machinery that checks the results."""

from .errors import BellsimError, CapabilityError, UnderpoweredError, ValidationError
from .models import (
    AveragedResponseTable,
    CoincidenceModel,
    ContextualFittedModel,
    ContextualProductModel,
    FiniteInstrument,
    FiniteJointSource,
    JointOutcomeDist,
    LrhvModel,
    OUTCOMES,
    Setting,
    SettingPair,
    ShvModel,
    alice_marginal,
    averaged_response_table,
    bob_marginal,
    chsh_pairs,
    chsh_settings,
    coincidence_instance,
    contextual_joint,
    expectation,
    fit_contextual,
    instrument_averaged_expectation,
    joint_distribution,
    lrhv_expectation,
    sample_trial,
    shv_joint,
)
from .protocol import (
    CoincidenceCounts,
    ScheduleComparison,
    SettingSchedule,
    TrialLog,
    compare_schedules,
    run_experiment,
    scan_pairs,
    tabulate,
    window_sweep_counts,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
