"""Synthesis and verification toolkit for robust output regulation of
boundary-controlled linear systems with infinite-dimensional exosystems."""

from .exosystem import (
    TruncatedExosystem,
    build_periodic,
    disturbance_signal,
    exo_state,
    fourier_ingest,
    heat_example_profiles,
    reference_signal,
)
from .plant import (
    PerturbationSpec,
    PlantModel,
    StabilizationGains,
    build_heat2d,
    heat_stabilizers,
    perturb,
    transfer,
    transfer_PK,
    transfer_PL,
    transfer_disturbance,
)
from .synthesis import (
    ControllerRealization,
    SynthesisParams,
    check_mode_invertibility,
    synth_new_structure,
    synth_nonrobust,
    synth_observer_based,
    synth_reduced_im,
)
from .closedloop import (
    ClosedLoopModel,
    Trajectory,
    assemble,
    error_metrics,
    similarity_triangularization,
    simulate,
)
from .analysis import (
    check_g_conditions,
    fit_decay,
    fit_growth,
    im_norm_identity,
    regulator_residuals,
    resolvent_scan,
    robustness_suite,
)

__version__ = "0.1.0"
