"""Dynamics of a Bose-Einstein condensate in a double-well trap.

Three engines share one parameter set: exact quantum evolution of the
two-mode Bose-Hubbard model, classical mean-field flow on the Bloch
sphere, and a semiclassical ensemble built from the Husimi distribution
of the initial coherent state. On top of them sit global-phase-space
scans of coherence, entanglement and spin squeezing, plus a small CLI.
"""

__version__ = "0.1.0"

from .quantum import (
    ModelParams,
    Spectrum,
    StateVector,
    SpinMoments,
    DiagonalizationError,
    NoMeanSpinError,
    build_hamiltonian,
    diagonalize,
    coherent_state,
    evolve,
    spdm,
    condensate_fraction,
    epr_entanglement,
    entanglement_semiclassical,
    spin_moments,
    squeezing_xi2,
    husimi_q,
    max_overlap,
    mean_imbalance,
)
from .meanfield import (
    PhasePoint,
    Trajectory,
    FixedPoint,
    bloch_from_phase,
    phase_from_bloch,
    h_cl,
    h_cl_bloch,
    eom_rhs,
    integrate,
    fixed_points,
    separatrix_energy,
    classify_regime,
    is_self_trapped,
    iso_energy_contours,
)
from .lida import (
    Ensemble,
    sample_husimi,
    propagate_ensemble,
    ensemble_condensate_fraction,
    ensemble_c_stderr,
    ensemble_c_series,
    lida_min_c_window,
)
from .gps import (
    GridSpec,
    FieldMap,
    Section,
    point_observables,
    quantum_series,
    scan_quantum,
    scan_min_window,
    symmetry_maps,
    section,
    movie_frames,
)
