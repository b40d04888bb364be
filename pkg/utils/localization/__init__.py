from .fractional import (
    FracMomentProfile,
    FractionalMoment,
    ProfileRow,
    SpectralAveragingReport,
    decay_profile,
    fractional_moment,
    high_energy_shift,
    profile_from_rows,
    spectral_averaging_bound,
    spectral_averaging_sup,
)
from .fit import DecayFit, decay_fit
from .volume import VolumeDifferenceReport, reduced_resolvent_decay, volume_difference_decay
from .decoupling import decoupling_lower_check, decoupling_upper_check, default_polynomial_grid
