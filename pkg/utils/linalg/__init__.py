from .eigen import SpectralDecomposition, eigenvalues_banded
from .resolvent import BandedResolvent, ComplexShift, GreenEntry, green_column, green_entry, reduced_matrix, resolvent_trace
from .schur import schur_block_inverse
from .identities import check_duhamel, check_resolvent_integral, random_normal_pair
