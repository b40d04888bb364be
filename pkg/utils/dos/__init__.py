from .models import ConvergenceGap, DosEstimate, MomentEstimate, SmoothnessProbe, StabilityReport, moments_frame
from .semicircle import semicircle_cdf, semicircle_density, semicircle_moment
from .estimators import (
    dos_convergence_gap,
    dos_histogram,
    dos_kde,
    dos_moments,
    dos_resolvent,
    dos_upper_bound,
    empirical_lids,
    lids_estimate,
    refinement_stability,
    richardson_extrapolate,
    richardson_weights,
    sample_matrices,
    sample_spectra,
    smoothness_probe,
)
