"""Joint user and beam selection for the beamspace massive MIMO downlink.

Channel generation, DPC sum-rate evaluation with water-filling, three
greedy selection algorithms, brute-force/statistical verifiers and a
Monte Carlo sweep harness with a CLI frontend.
"""

from .channel import (
    PAPER_CONVENTION,
    UNITARY_CONVENTION,
    BeamspaceChannel,
    ChannelConfig,
    ChannelMatrix,
    PathSpec,
    SteeringVector,
    dft_matrix,
    generate_channel,
    read_channel_dump,
    steering_vector,
    to_beamspace,
    trial_seed,
    write_channel_dump,
)
from .dpc_rate import (
    EQ5_CONSISTENT,
    PAPER_PRINTED,
    PowerAllocation,
    QrFactors,
    RateReport,
    det_sum_rate,
    dpc_precoder,
    dpc_sum_rate,
    qr_positive_diag,
    upper_bound,
    water_fill,
)
from .errors import (
    BeamselectError,
    DegenerateSelectionError,
    InvalidConfigError,
    InvalidInputError,
    OracleBudgetError,
    SelectionInfeasibleError,
)
from .experiments import (
    ExperimentConfig,
    SweepRow,
    measure_runtime,
    rows_from_csv,
    rows_to_csv,
    rows_to_json,
    sweep_equal_complexity,
    sweep_m,
    sweep_mbar,
    sweep_offsets,
    sweep_snr,
)
from .oracle import (
    OracleReport,
    exhaustive_select,
    verify_asymptotic_orthogonality,
    verify_beam_monotonicity,
    verify_qr_det_identity,
    verify_shared_beam_probability,
    verify_user_monotonicity,
)
from .selection import (
    SelectionResult,
    algorithm1,
    algorithm2,
    algorithm3,
    m_bar,
    neighbor_beam_set,
    null_projector,
    projection_power,
    select_beams,
    select_users,
    strongest_beam,
)

__version__ = "0.1.0"
