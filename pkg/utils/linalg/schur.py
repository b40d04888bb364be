import logging
from typing import Sequence

import numpy as np
from scipy import linalg

from utils.errors import InvalidConfigError, NearSingularError

logger = logging.getLogger(__name__)

PIVOT_TOLERANCE = 1e-13


def _checked_lu(block: np.ndarray, scale: float, label: str):
    lu, piv = linalg.lu_factor(block, check_finite=False)
    smallest = float(np.min(np.abs(np.diag(lu)))) if block.size else np.inf
    if smallest <= PIVOT_TOLERANCE * scale:
        raise NearSingularError(f"{label} block is singular (pivot {smallest:.3e}); add i*eps to the diagonal")
    return lu, piv


def schur_block_inverse(M: np.ndarray, P: Sequence[int]) -> np.ndarray:
    """
    ``P M^{-1} P`` on the coordinates ``P`` through the Schur complement of ``D = QMQ``.

    With ``A = PMP``, ``B = PMQ``, ``C = QMP`` the result is ``(A - B D^{-1} C)^{-1}``.

    :param M: Square complex matrix.
    :param P: Distinct 0-based coordinates, in the order the returned block should use.
    :return: ``|P| x |P|`` complex block.
    :raises NearSingularError: If ``D`` or the complement is singular.
    :raises InvalidConfigError: For out-of-range or repeated coordinates.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    P = [int(p) for p in P]
    if len(set(P)) != len(P) or any(not 0 <= p < n for p in P) or not P:
        raise InvalidConfigError(f"P must be distinct coordinates in [0, {n}), got {P}")
    Q = [q for q in range(n) if q not in set(P)]
    scale = max(float(np.linalg.norm(M, np.inf)), np.finfo(float).tiny)

    A = M[np.ix_(P, P)]
    if Q:
        B = M[np.ix_(P, Q)]
        C = M[np.ix_(Q, P)]
        D = M[np.ix_(Q, Q)]
        lu_d = _checked_lu(D, scale, "QMQ")
        A = A - B @ linalg.lu_solve(lu_d, C, check_finite=False)
    lu_s = _checked_lu(A, scale, "Schur complement")
    return linalg.lu_solve(lu_s, np.eye(len(P), dtype=complex), check_finite=False)
