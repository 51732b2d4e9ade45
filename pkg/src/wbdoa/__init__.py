"""Gridless coherent wideband DOA estimation on uniform linear arrays."""

from .model import (
    ArrayConfig,
    SubbandData,
    WidebandScene,
    f_to_theta,
    steering_vector,
    subband_transform,
    synthesize_scene,
    theta_to_f,
)
from .focusing import FocusingSet, focusing_error, focusing_matrix, gamma_bound
from .atoms import (
    Atom,
    AtomicDecomposition,
    ConicProblem,
    assemble_dual_sdp,
    atomic_norm_upper,
    build_atom,
    dual_atomic_norm,
    noiseless_matrix,
)
from .solver import (
    ConicSolution,
    SolverConfig,
    affine_project,
    complex_to_real_embed,
    psd_project,
    solve,
)
from .recovery import (
    DoaEstimate,
    DualPolynomial,
    RecoveryConfig,
    dual_polynomial,
    estimate_doa,
    locate_frequencies,
    recover_amplitudes,
    recover_coefficients,
)
from .baselines import RssConfig, music_spectrum, perturb_initial, rss_estimate
from .bench import ExperimentConfig, ResultTable, emit_report, rmse

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
