"""Online aggregation of probabilistic forecasts (CDFs) under the CRPS
loss: substitution and weighted-average rules, confidence-weighted
specialized experts, fixed-share mixing, and regret tracking against
time-independent bounds."""

from .aggregation import (
    AllExpertsAsleep,
    ExpertPool,
    SubstitutionError,
    aa_learning_rate,
    combine_wa,
    confidence_reweight,
    mix_past_posteriors,
    normalized_weights,
    substitute_crps_aa,
    substitute_square_aa,
    substitute_vector_aa,
    superprediction,
    update_weights,
    update_weights_confidence,
    wa_learning_rate,
)
from .data import (
    CsvSchema,
    LoadRecord,
    MixtureSchedule,
    calendar_segments,
    default_generators,
    load_csv,
    rotating_leader_schedule,
    smooth_crossfade_schedule,
    split_train_test,
    synth_stream,
)
from .experts import (
    ConfidenceSchedule,
    DegenerateFit,
    Gmm2D,
    TriangularExpert,
    combined_confidence,
    conditional_load_cdf,
    fit_gmm_em,
    triangular_cdf,
)
from .game import (
    GameConfig,
    GameLog,
    OnlineGame,
    RegretReport,
    regret_report,
    run_square_loss_game,
    telescoping_gap,
)
from .grids import (
    GridCDF,
    GridDomain,
    clip_to_domain,
    crps,
    crps_grid_profile,
    empirical_cdf,
    heaviside_cdf,
    quantile,
)
from .roster import LoadExpert, build_load_roster

__version__ = "0.1.0"
