from .rng import RngStream
from .density import DensitySpec, SiteDensity, assumption1_report, density_cdf, density_eval, density_ppf, density_sample, density_sample_many, fourier_bound
from .band_matrix import BandMatrix, EnsembleConfig, sample_band_matrix
