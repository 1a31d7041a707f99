"""Fisher-information toolkit for quantum metrology with noisy readout."""

from .config import DEFAULT_TOL, Tolerances
from .qcore import (
    StateVector,
    DensityMatrix,
    ProjectiveMeasurement,
    Povm,
    DetectionChannel,
    KrausSet,
    UnitaryEncoding,
    povm_from_detection,
    outcome_distribution,
    conjugate_map_qc,
    conjugate_map_compact,
    is_nontrivial,
    is_information_erasing,
    tensor_povm,
    tensor_state,
)
from .fisher import (
    FiReport,
    OrthoPair,
    GammaSettings,
    classical_fi,
    qfi_pure,
    qfi_sld,
    channel_qfi_unitary,
    imperfect_fi,
    gamma_coefficient,
    gamma_classical,
    perfectly_distinguishable_pair,
    moment_lower_bound,
)
from .readout import (
    PoissonReadout,
    BinningScheme,
    poisson_detection_channel,
    nv_exact_fi,
    max_fi_over_angle,
    bin_channel,
    two_bin_rates,
    f2bin_star,
    f2bin_bar,
    optimize_binning,
)
from .global_control import (
    ZetaPair,
    GlobalBoundReport,
    hellinger_c,
    convergence_rate,
    ghz_lower_bound,
    werner_lower_bound,
    werner_exact_fi,
    exact_fn_ghz,
    optimal_zeta_search,
    cat_state_scan,
)
from .ce_bounds import (
    CanonicalKraus,
    CeResult,
    SolverSettings,
    canonical_kraus,
    alpha_beta,
    beta_zero_feasible,
    asymptotic_ce_bound,
    finite_ce_bound,
    bitflip_ce_closed_form,
    photonic_ce_closed_form,
)
from .covariance import (
    SeesawSettings,
    phase_cov_feasible,
    phase_cov_qfi,
    check_g_covariance,
    sld_solve,
    seesaw_channel_qfi,
    two_qubit_covariance_audit,
)
from .collective import (
    CollectiveState,
    ImperfectObservable,
    collective_ops,
    one_axis_squeezed,
    squeezing_strength,
    error_propagation_imperfect,
    jx_mse,
    parity_mse_ghz,
    parity_fi_opt,
    brute_force_imperfect_qfi,
)
from .photonics import (
    TwoModeSector,
    CountChannel,
    loss_channel,
    dark_channel,
    compose_loss_dark,
    gamma_photonic,
    gamma_photonic_opt,
    noon_fi,
    single_photon_channel,
)

__version__ = "0.1.0"
