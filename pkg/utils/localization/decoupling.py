"""
.. module:: decoupling
   :platform: Python
   :synopsis: Quadrature checks of the lower and upper decoupling inequalities.

The integrands carry ``|v - beta|^{-s}`` singularities. Panels touching a singular point use QUADPACK's
algebraic endpoint weight (``scipy.integrate.quad(weight="alg")``); the others use plain adaptive quadrature.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
import polars as pl
from scipy import integrate

from utils.ensemble.density import DensitySpec
from utils.errors import InvalidConfigError

logger = logging.getLogger(__name__)


def _integrate(spec: DensitySpec, func: Callable[[float], float], singular: Tuple[float, float] = None, cuts: Sequence[float] = ()) -> float:
    """
    ``int func(v) |v - beta|^{-s} rho(v) dv`` with ``singular = (beta, s)``, or ``int func rho`` without.
    """
    law = spec.law
    lo, hi = law.quadrature_range()
    points = set(p for p in (*cuts, *law.breakpoints()) if lo < p < hi)
    if singular is not None and lo < singular[0] < hi:
        points.add(singular[0])
    edges = [lo, *sorted(points), hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if singular is None:
            value, _ = integrate.quad(lambda v: func(v) * float(law.pdf(v)), a, b, limit=200, epsabs=1e-14)
        else:
            beta, s = singular
            if a == beta:
                value, _ = integrate.quad(lambda v: func(v) * float(law.pdf(v)), a, b, weight="alg", wvar=(-s, 0.0), limit=200)
            elif b == beta:
                value, _ = integrate.quad(lambda v: func(v) * float(law.pdf(v)), a, b, weight="alg", wvar=(0.0, -s), limit=200)
            else:
                value, _ = integrate.quad(lambda v: func(v) * float(law.pdf(v)) * abs(v - beta) ** (-s), a, b, limit=200, epsabs=1e-14)
        total += value
    return total


@dataclass(frozen=True)
class LowerDecouplingRow:
    eta: float
    worst_ratio: float
    worst_beta: float
    c_over_eta: float


@dataclass(frozen=True)
class LowerDecouplingReport:
    """
    For each ``eta``, ``inf_beta LHS / (|eta|^s RHS)`` and ``C(|eta|)/|eta|`` derived from it.
    """

    s: float
    rows: Tuple[LowerDecouplingRow, ...]

    @property
    def min_ratio(self) -> float:
        return min(r.worst_ratio for r in self.rows)

    def c_over_eta_range(self, eta_min: float = 0.0) -> Tuple[float, float]:
        values = [r.c_over_eta for r in self.rows if abs(r.eta) >= eta_min]
        return min(values), max(values)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "eta": [r.eta for r in self.rows],
                "worst_ratio": [r.worst_ratio for r in self.rows],
                "worst_beta": [r.worst_beta for r in self.rows],
                "c_over_eta": [r.c_over_eta for r in self.rows],
            }
        )


def decoupling_lower_check(spec: DensitySpec, s: float, eta_grid: Sequence[float], beta_grid: Sequence[float]) -> LowerDecouplingReport:
    """
    Check ``int |v-eta|^s/|v-beta|^s rho >= C(|eta|)^s int |v-beta|^{-s} rho``.

    Pairs with ``eta == beta`` are skipped.

    :param spec: Lipschitz single-site density.
    :param s: Exponent in ``(0, 1)``.
    :param eta_grid: Nonzero values of ``eta``.
    :param beta_grid: Values of ``beta``.
    """
    if not 0.0 < s < 1.0:
        raise InvalidConfigError(f"s must lie in (0, 1), got {s}")
    if spec.kind == "uniform":
        raise InvalidConfigError("lower decoupling needs a Lipschitz density")
    rows = []
    rhs_cache = {}
    for eta in eta_grid:
        if eta == 0:
            raise InvalidConfigError("eta = 0 gives no scale for the ratio")
        worst, worst_beta = math.inf, math.nan
        for beta in beta_grid:
            if beta == eta:
                continue
            if beta not in rhs_cache:
                rhs_cache[beta] = _integrate(spec, lambda v: 1.0, (beta, s))
            lhs = _integrate(spec, lambda v, e=eta: abs(v - e) ** s, (beta, s), cuts=(eta,))
            ratio = lhs / (abs(eta) ** s * rhs_cache[beta])
            if ratio < worst:
                worst, worst_beta = ratio, beta
        if math.isfinite(worst):
            rows.append(LowerDecouplingRow(float(eta), worst, float(worst_beta), worst ** (1.0 / s)))
    report = LowerDecouplingReport(s, tuple(rows))
    logger.info("Lower decoupling (s=%.2f): min ratio %.4f over %d eta values", s, report.min_ratio, len(rows))
    return report


@dataclass(frozen=True)
class UpperDecouplingRow:
    p: Tuple[float, ...]
    q: Tuple[float, ...]
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class UpperDecouplingReport:
    s: float
    gamma: float
    rows: Tuple[UpperDecouplingRow, ...]

    @property
    def max_ratio(self) -> float:
        return max(r.ratio for r in self.rows)

    @property
    def variation(self) -> float:
        """
        ``max ratio / min ratio`` across the polynomial grid.
        """
        return self.max_ratio / min(r.ratio for r in self.rows)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "p": [str(list(r.p)) for r in self.rows],
                "q": [str(list(r.q)) for r in self.rows],
                "lhs": [r.lhs for r in self.rows],
                "rhs": [r.rhs for r in self.rows],
                "ratio": [r.ratio for r in self.rows],
            }
        )


def default_polynomial_grid() -> Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...]:
    """
    Degree-1 ``p(u) = u - r`` and degree-2 ``q(u) = (u - c)^2 + w^2`` over small root grids.
    """
    grid = []
    for r in (-1.0, 0.0, 1.0):
        for c in (-1.0, 0.0, 1.0):
            for w in (0.5, 1.0, 2.0):
                grid.append(((1.0, -r), (1.0, -2.0 * c, c * c + w * w)))
    return tuple(grid)


def decoupling_upper_check(spec: DensitySpec, s: float, gamma: float = None, poly_grid=None) -> UpperDecouplingReport:
    """
    Check ``int |u|^s |p|^s/|q|^s rho <= C int |p|^s/|q|^s rho`` and report ``C`` per ``(p, q)``.

    Polynomials are coefficient tuples, highest degree first. ``q`` must have no real roots.

    :param spec: Density with a finite ``gamma``-moment.
    :param s: Exponent in ``(0, 1/2)``.
    :param gamma: Moment order, ``4 s`` by default.
    :param poly_grid: ``(p, q)`` pairs; :func:`default_polynomial_grid` when omitted.
    :raises InvalidConfigError: For ``s`` outside ``(0, 1/2)``, degree constraints or real roots of ``q``.
    """
    if not 0.0 < s < 0.5:
        raise InvalidConfigError(f"s must lie in (0, 1/2), got {s}")
    gamma = 4.0 * s if gamma is None else float(gamma)
    if not math.isfinite(spec.law.absolute_moment(gamma)):
        raise InvalidConfigError(f"density has no finite {gamma}-moment")
    rows = []
    for p, q in poly_grid or default_polynomial_grid():
        p = tuple(float(c) for c in np.trim_zeros(np.asarray(p, dtype=float), "f")) or (0.0,)
        q = tuple(float(c) for c in np.trim_zeros(np.asarray(q, dtype=float), "f")) or (0.0,)
        deg_p, deg_q = len(p) - 1, len(q) - 1
        if p == (0.0,) or q == (0.0,):
            raise InvalidConfigError("p and q must be nonzero polynomials")
        if s * (deg_p + deg_q) > gamma + 1e-12 or s * deg_q >= 1.0:
            raise InvalidConfigError(f"degrees ({deg_p}, {deg_q}) violate s(n+k) <= gamma and s k < 1")
        if deg_q and np.any(np.abs(np.roots(q).imag) <= 1e-12):
            raise InvalidConfigError(f"q={list(q)} has a real root")
        roots = [float(r.real) for r in np.roots(p)] if deg_p else []

        def weight(u, p=p, q=q):
            return abs(np.polyval(p, u)) ** s / abs(np.polyval(q, u)) ** s

        cuts = tuple(roots) + (0.0,)
        lhs = _integrate(spec, lambda u: abs(u) ** s * weight(u), cuts=cuts)
        rhs = _integrate(spec, weight, cuts=cuts)
        rows.append(UpperDecouplingRow(p, q, lhs, rhs, lhs / rhs))
    report = UpperDecouplingReport(s, gamma, tuple(rows))
    logger.info("Upper decoupling (s=%.2f, gamma=%.2f): max ratio %.4f, variation %.3f", s, gamma, report.max_ratio, report.variation)
    return report
