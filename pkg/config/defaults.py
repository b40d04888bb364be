"""
.. module:: defaults
   :platform: Python
   :synopsis: Documented default of every experiment parameter.

Module `defaults` is the single source of parameter names, defaults and help strings. The TOML loader
rejects keys that are not listed here and the CLI generates one flag per entry.
"""

from dataclasses import dataclass
from typing import Any, Dict

EXPERIMENT_KINDS = ("identities", "dos", "locmoments", "volume-diff", "les", "wegner-minami", "decoupling")


@dataclass(frozen=True)
class Param:
    default: Any
    help: str


ENSEMBLE_DEFAULTS: Dict[str, Param] = {
    "N": Param(100, "half size N; the matrix order is 2N+1"),
    "L": Param(1, "half bandwidth L, 0 <= L <= 2N"),
    "seed": Param(1, "unsigned 64-bit master seed"),
}

DENSITY_DEFAULTS: Dict[str, Param] = {
    "kind": Param("gaussian", "single-site density: gaussian, uniform or tabulated"),
    "mean": Param(0.0, "density mean (gaussian) or centre (uniform)"),
    "scale": Param(1.0, "standard deviation (gaussian) or width (uniform)"),
}

RUN_DEFAULTS: Dict[str, Param] = {
    "out": Param("", "output directory; empty means results/<date>/<kind>"),
    "workers": Param(1, "worker processes; results do not depend on it"),
}

PARAM_DEFAULTS: Dict[str, Dict[str, Param]] = {
    "identities": {
        "matrices": Param(200, "random band matrices compared with dense oracles"),
        "max_order": Param(64, "largest matrix order in the oracle comparison"),
        "max_L": Param(8, "largest half bandwidth in the oracle comparison"),
        "pairs": Param(100, "random normal pairs for the Duhamel identity"),
        "pair_size": Param(6, "dimension of the normal pairs"),
        "E": Param(0.3, "energy of the resolvent-integral identity"),
        "eps": Param(0.5, "imaginary part of the resolvent-integral identity"),
        "t": Param(1.0, "time of the Duhamel identity"),
        "s": Param(0.5, "exponent of the Duhamel bound"),
    },
    "dos": {
        "E_min": Param(-3.0, "lowest energy of the grid"),
        "E_max": Param(3.0, "highest energy of the grid"),
        "E_points": Param(61, "number of grid energies"),
        "eps_ladder": Param((0.2, 0.1, 0.05), "eps values extrapolated to 0 by the resolvent estimator"),
        "samples": Param(2000, "matrices for the histogram, kde and moments"),
        "resolvent_samples": Param(200, "matrices for the resolvent estimator; 0 skips it"),
        "bin_rule": Param("fd", "histogram bin rule name (fd, auto, sturges, ...)"),
        "variant": Param("trace", "resolvent variant: trace or center"),
        "p_max": Param(4, "highest spectral moment"),
        "compare_N": Param(0, "second half size for the convergence gap; 0 skips it"),
        "refine_E": Param(0.0, "centre of the bin-refinement check of the first derivative"),
        "refine_step": Param(0.05, "coarse bin width of the refinement check, halved once; 0 skips it"),
    },
    "locmoments": {
        "E": Param(0.0, "real part of z"),
        "eps": Param(0.0, "imaginary part of z"),
        "s": Param(0.3, "fractional exponent in [0, 1)"),
        "center": Param(0, "column site of the profile"),
        "max_distance": Param(30, "largest distance from the center"),
        "samples": Param(1000, "matrices per profile"),
        "min_distance": Param(1, "smallest distance used by the decay fit"),
        "high_energy": Param(True, "also profile at |z| = 5 sqrt(2L+1)"),
        "averaging_E": Param((-1.0, 0.0, 1.0), "energies of the spectral-averaging check; empty skips it"),
        "averaging_eps": Param(0.01, "imaginary part of the spectral-averaging energies"),
    },
    "volume-diff": {
        "j": Param(0, "site of the diagonal Green's entry"),
        "E": Param(0.0, "real part of z"),
        "eps": Param(1.0, "imaginary part of z"),
        "s": Param(0.1, "exponent in (0, 1/9)"),
        "M_values": Param((10, 20, 40), "smaller half sizes M <= N"),
        "samples": Param(1000, "coupled samples"),
        "reduced_s": Param(0.3, "exponent of the reduced-resolvent decay, in (0, 1/3)"),
        "reduced_N_values": Param((10, 20, 40), "half sizes of the reduced-resolvent decay; empty skips it"),
    },
    "les": {
        "E0": Param(0.0, "reference energy"),
        "window_length": Param(0.0, "rescaled window length centred at 0; 0 means 1/n(E0)"),
        "N_values": Param((200, 800), "half sizes of the Poisson ladder"),
        "samples": Param(1000, "realizations per half size (at least 1000)"),
        "intensity_samples": Param(1000, "matrices for the intensity estimate"),
        "eps_ladder": Param((0.2, 0.1, 0.05), "eps ladder of the intensity estimate"),
        "alpha": Param(0.5, "block length exponent in (0, 1]"),
        "persist_points": Param(False, "write per-realization points as JSON lines"),
    },
    "wegner-minami": {
        "center": Param(0.0, "centre of the intervals"),
        "lengths": Param((0.005, 0.01, 0.02), "interval lengths"),
        "samples": Param(10000, "matrices per interval (at least 1000)"),
    },
    "decoupling": {
        "s_values": Param((0.3, 0.5), "exponents of the lower decoupling check"),
        "eta_grid": Param((10.0, 20.0, 50.0, 100.0), "values of eta"),
        "beta_grid": Param((-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0), "values of beta"),
        "upper_s": Param(0.3, "exponent of the upper decoupling check"),
        "gamma": Param(0.0, "moment order of the upper check; 0 means 4s"),
    },
}


def param_defaults(kind: str) -> Dict[str, Any]:
    return {name: p.default for name, p in PARAM_DEFAULTS[kind].items()}
