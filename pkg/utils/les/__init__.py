from .point_process import (
    MIN_REALIZATIONS,
    CountStatistics,
    PointProcessRealization,
    Window,
    count_statistics,
    rescale_eigenvalues,
    sample_realizations,
)
from .estimates import (
    WegnerMinamiReport,
    minami_bound,
    minami_gap_check,
    stieltjes_intensity,
    wegner_bound,
    wegner_minami_empirical,
)
from .gof import GofReport, poisson_gof, poisson_k_max, tv_distance, window_gap_cdf
from .blocks import DvjReport, block_dvj, block_length, block_superposed_process, dvj_criteria
from .pipeline import IntensityPipelineReport, estimate_intensity, intensity_pipeline
