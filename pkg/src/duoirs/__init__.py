"""Double-IRS aided multi-user MIMO uplink channel estimation.

Least-squares estimation of the cascaded user-IRS-BS channels in a
system with two cooperating reflecting surfaces.  A three-phase training
protocol first learns the reference user's aggregate responses, then
separates the per-element double-reflection coefficients, and finally
scales everything to the remaining users, at a training overhead well
below element-by-element schemes.
"""

__version__ = "0.1.0"

from .channel_model import (
    CascadedChannelSet,
    ChannelRealization,
    ReflectionState,
    SystemConfig,
    cascade,
    effective_channel,
    effective_channel_composite,
    effective_channel_raw,
    gen_channels,
    path_loss,
    receive,
)
from .errors import (
    CaseMismatchError,
    ConfigError,
    DegenerateChannelError,
    DesignFailureError,
    DuoIrsError,
    InsufficientPilotsError,
    RankDeficiencyError,
    UnsupportedConfigurationError,
)
from .training_design import (
    Phase1Schedule,
    Phase2Schedule,
    Phase3Schedule,
    dft,
    overhead,
    phase1_design,
    phase2_design_case1,
    phase2_design_case2,
    phase2_design_heuristic,
    phase2_design_random,
    phase3_design,
    phase_overheads,
    proposed_overhead,
    schedule_from_dict,
    schedule_to_dict,
    verify_phase2_conditions,
    verify_xi_rank,
    zadoff_chu,
)
from .estimators import (
    EstimateReport,
    build_b,
    build_xi,
    ls_phase1,
    ls_phase2_case1,
    ls_phase2_case2,
    ls_phase3_case1,
    ls_phase3_case2,
    normalized_mse,
    recover_multi_user,
    recover_single_user,
    run_pipeline,
    simulate_trial,
    theoretical_mse_phase1,
    theoretical_mse_phase2_case1,
    theoretical_mse_phase2_case2,
    theoretical_mse_phase3,
    theoretical_mse_phase3_stacked,
)
from .benchmarks import (
    DecoupledSchedule,
    decoupled_design,
    decoupled_estimate,
    decoupled_overhead,
    per_antenna_overhead,
)
from .harness import (
    ExperimentSpec,
    ResultTable,
    emit_csv,
    run_experiment,
)
