"""
.. module:: identities
   :platform: Python
   :synopsis: Machine-precision checks of resolvent and matrix-exponential identities.

Both checks use composite Gauss-Legendre quadrature (16 nodes per panel) with panel width
``<= min(1, 1/||A||)`` so the oscillation is resolved on every panel.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg, special

from utils.ensemble.rng import RngStream
from utils.errors import InvalidConfigError

logger = logging.getLogger(__name__)

GAUSS_NODES = 16
TAIL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ResolventIntegralReport:
    residual: float
    tail_bound: float
    cutoff: float
    panels: int

    @property
    def within_bound(self) -> bool:
        # quadrature error allowance on top of the analytic tail
        return self.residual <= self.tail_bound + 1e-10 * (1.0 + self.cutoff)


@dataclass(frozen=True)
class DuhamelReport:
    identity_residual: float
    lhs_norm: float
    bound: float
    slack: float
    bound_applicable: bool

    @property
    def passed(self) -> bool:
        return self.identity_residual <= 1e-8 and (not self.bound_applicable or self.slack >= -1e-12)


def _composite_nodes(upper: float, width: float) -> Tuple[np.ndarray, np.ndarray, int]:
    panels = max(1, math.ceil(upper / width))
    x, w = special.roots_legendre(GAUSS_NODES)
    edges = np.linspace(0.0, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights, panels


def default_cutoff(eps: float, tolerance: float = TAIL_TOLERANCE) -> float:
    """
    Smallest ``T`` with ``exp(-eps T) / eps <= tolerance``.
    """
    return max(0.0, math.log(1.0 / (eps * tolerance)) / eps)


def check_resolvent_integral(A, E: float, eps: float, quad_cutoff: Optional[float] = None) -> ResolventIntegralReport:
    """
    Compare ``i int_0^T exp(-i l (A - E - i eps)) dl`` with ``(A - E - i eps)^{-1}``.

    :param A: Small Hermitian matrix.
    :param E: Real energy.
    :param eps: Imaginary part, ``> 0``.
    :param quad_cutoff: Truncation ``T``; defaults to the ``1e-12`` tail tolerance.
    :return: Max-norm residual together with the analytic tail bound ``exp(-eps T) / eps``.
    """
    if not eps > 0:
        raise InvalidConfigError(f"eps must be > 0, got {eps}")
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    cutoff = default_cutoff(eps) if quad_cutoff is None else float(quad_cutoff)
    a, U = linalg.eigh(A)
    shifted = a - E
    spread = float(np.max(np.abs(shifted))) if shifted.size else 0.0
    width = min(1.0, 1.0 / spread) if spread > 0 else 1.0
    nodes, weights, panels = _composite_nodes(cutoff, width)

    phases = np.exp(-1j * np.outer(shifted - 1j * eps, nodes))
    integral = 1j * (phases @ weights)
    approx = (U * integral) @ U.conj().T
    exact = np.linalg.inv(A - (E + 1j * eps) * np.eye(A.shape[0]))
    residual = float(np.max(np.abs(approx - exact)))
    report = ResolventIntegralReport(residual, math.exp(-eps * cutoff) / eps, cutoff, panels)
    logger.debug("resolvent integral: residual=%.3e tail=%.3e T=%.2f panels=%d", residual, report.tail_bound, cutoff, panels)
    return report


def _is_normal(A: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.linalg.norm(A)))
    return float(np.linalg.norm(A @ A.conj().T - A.conj().T @ A)) <= tol * scale * scale


def _has_nonnegative_imaginary_part(A: np.ndarray, tol: float = 1e-10) -> bool:
    im_part = (A - A.conj().T) / 2j
    scale = max(1.0, float(np.linalg.norm(A)))
    return float(np.linalg.eigvalsh(im_part).min()) >= -tol * scale


def check_duhamel(A, B, t: float, s: float) -> DuhamelReport:
    """
    Check ``e^{itA} - e^{itB} = i int_0^t e^{i(t-u)A} (A - B) e^{iuB} du`` and, for normal ``A, B`` with
    nonnegative imaginary parts, ``||e^{itA} - e^{itB}|| <= 2^{1-s} |t|^s ||A - B||^s``.

    :param A: Square complex matrix.
    :param B: Square complex matrix of the same size.
    :param t: Time, ``>= 0``.
    :param s: Exponent in ``[0, 1]``.
    """
    if t < 0 or not 0.0 <= s <= 1.0:
        raise InvalidConfigError(f"need t >= 0 and s in [0, 1], got t={t}, s={s}")
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    lhs = linalg.expm(1j * t * A) - linalg.expm(1j * t * B)
    diff = A - B

    if t == 0:
        rhs = np.zeros_like(lhs)
    else:
        spread = max(float(np.linalg.norm(A, 2)), float(np.linalg.norm(B, 2)))
        width = min(1.0, 1.0 / spread) if spread > 0 else 1.0
        nodes, weights, _ = _composite_nodes(t, width)
        rhs = np.zeros_like(lhs)
        for u, w in zip(nodes, weights):
            rhs += w * (linalg.expm(1j * (t - u) * A) @ diff @ linalg.expm(1j * u * B))
        rhs *= 1j

    lhs_norm = float(np.linalg.norm(lhs, 2))
    diff_norm = float(np.linalg.norm(diff, 2))
    bound = 2.0 ** (1.0 - s) * (abs(t) ** s) * (diff_norm**s) if (t > 0 and diff_norm > 0) else 0.0
    applicable = all(_is_normal(X) and _has_nonnegative_imaginary_part(X) for X in (A, B))
    return DuhamelReport(
        identity_residual=float(np.max(np.abs(lhs - rhs))),
        lhs_norm=lhs_norm,
        bound=bound,
        slack=bound - lhs_norm,
        bound_applicable=applicable,
    )


def random_normal_pair(stream: RngStream, size: int, spread: float = 2.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two random normal matrices ``U diag(lambda) U*`` whose eigenvalues have ``Im >= 0``.
    """
    pair = []
    for _ in range(2):
        gauss = special.ndtri(stream.uniforms(2 * size * size)).reshape(2, size, size)
        q, r = np.linalg.qr(gauss[0] + 1j * gauss[1])
        q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
        u = stream.uniforms(2 * size)
        eigenvalues = spread * (2.0 * u[:size] - 1.0) + 1j * spread * u[size:]
        pair.append((q * eigenvalues) @ q.conj().T)
    return pair[0], pair[1]
