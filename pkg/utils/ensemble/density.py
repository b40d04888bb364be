"""
.. module:: density
   :platform: Python
   :synopsis: Single-site probability densities, inverse-CDF sampling and regularity reports.

Module `density` provides the serialisable :class:`DensitySpec` and the concrete laws behind
it. All laws share the :class:`SiteDensity` interface (pdf, cdf, inverse cdf, Fourier
transform). Sampling is always inverse-CDF on open-interval uniforms so a replay is portable.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from utils.ensemble.rng import RngStream
from utils.errors import InvalidConfigError

logger = logging.getLogger(__name__)

DensityKind = Literal["gaussian", "uniform", "tabulated"]
CHECK_TOLERANCE = 1e-6
FOURIER_GRID_MAX = 50.0


@dataclass(frozen=True)
class DensitySpec:
    """
    Serialisable description of the common law of the entries ``v_ij``.

    ``gaussian``: mean ``mean`` and standard deviation ``scale``.
    ``uniform``: uniform law of width ``scale`` centred at ``mean``.
    ``tabulated``: piecewise-linear density through ``table`` knots ``(x, rho)``, renormalised
    to unit mass on construction.

    ``smoothness_index`` and ``moment_bound`` are declarations; ``None`` means unbounded.
    """

    kind: DensityKind = "gaussian"
    mean: float = 0.0
    scale: float = 1.0
    table: Optional[Tuple[Tuple[float, float], ...]] = None
    sup_norm: Optional[float] = None
    smoothness_index: Optional[int] = None
    moment_bound: Optional[int] = None
    _law: "SiteDensity" = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "tabulated"):
            raise InvalidConfigError(f"unknown density kind '{self.kind}'")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise InvalidConfigError(f"density scale must be positive, got {self.scale}")
        if self.kind == "tabulated":
            object.__setattr__(self, "table", _normalised_table(self.table))
        elif self.table is not None:
            raise InvalidConfigError(f"'table' is only valid for tabulated densities, not '{self.kind}'")
        law = _build_law(self)
        object.__setattr__(self, "_law", law)
        if self.sup_norm is None:
            object.__setattr__(self, "sup_norm", law.sup_norm())
        elif self.sup_norm <= 0 or self.sup_norm + 1e-8 < law.sup_norm():
            raise InvalidConfigError(f"declared sup_norm {self.sup_norm} is below the density maximum {law.sup_norm()}")
        if self.smoothness_index is not None and self.smoothness_index < 0:
            raise InvalidConfigError("smoothness_index must be >= 0")

    @classmethod
    def gaussian(cls, mean: float = 0.0, scale: float = 1.0) -> "DensitySpec":
        return cls(kind="gaussian", mean=mean, scale=scale)

    @classmethod
    def uniform(cls, mean: float = 0.0, scale: float = 1.0) -> "DensitySpec":
        # piecewise constant: C^0 only away from the edges
        return cls(kind="uniform", mean=mean, scale=scale, smoothness_index=0)

    @classmethod
    def tabulated(cls, table: Sequence[Sequence[float]], smoothness_index: int = 0) -> "DensitySpec":
        return cls(kind="tabulated", table=tuple((float(x), float(r)) for x, r in table), smoothness_index=smoothness_index)

    @property
    def law(self) -> "SiteDensity":
        return self._law

    def to_dict(self) -> dict:
        """
        Config-file block with keys ``kind``, ``mean``, ``scale``, ``table``.
        """
        block = {"kind": self.kind, "mean": self.mean, "scale": self.scale}
        if self.table is not None:
            block["table"] = [[x, r] for x, r in self.table]
        return block

    @classmethod
    def from_dict(cls, block: dict) -> "DensitySpec":
        unknown = set(block) - {"kind", "mean", "scale", "table"}
        if unknown:
            raise InvalidConfigError(f"unknown density keys: {', '.join(sorted(unknown))}")
        kind = block.get("kind", "gaussian")
        if kind == "tabulated":
            if "table" not in block:
                raise InvalidConfigError("tabulated density requires a 'table' of [x, rho] pairs")
            return cls.tabulated(block["table"])
        if kind == "uniform":
            return cls.uniform(float(block.get("mean", 0.0)), float(block.get("scale", 1.0)))
        return cls(kind=kind, mean=float(block.get("mean", 0.0)), scale=float(block.get("scale", 1.0)))


def _normalised_table(table) -> Tuple[Tuple[float, float], ...]:
    if table is None or len(table) < 2:
        raise InvalidConfigError("tabulated density needs at least two knots")
    knots = np.asarray(table, dtype=float)
    if knots.ndim != 2 or knots.shape[1] != 2:
        raise InvalidConfigError("table must be a list of [x, rho] pairs")
    x, rho = knots[:, 0], knots[:, 1]
    if np.any(np.diff(x) <= 0):
        raise InvalidConfigError("table knots must be strictly increasing in x")
    if np.any(rho < 0):
        raise InvalidConfigError("table density values must be >= 0")
    mass = float(np.trapezoid(rho, x)) if hasattr(np, "trapezoid") else float(np.trapz(rho, x))
    if mass <= 0:
        raise InvalidConfigError("table has zero mass")
    return tuple((float(a), float(b / mass)) for a, b in zip(x, rho))


def _build_law(spec: DensitySpec) -> "SiteDensity":
    if spec.kind == "gaussian":
        return GaussianDensity(spec.mean, spec.scale)
    if spec.kind == "uniform":
        return UniformDensity(spec.mean, spec.scale)
    return TabulatedDensity(spec.table)


class SiteDensity(ABC):
    """
    Abstract single-site law.
    """

    @abstractmethod
    def pdf(self, x):
        raise NotImplementedError

    @abstractmethod
    def cdf(self, x):
        raise NotImplementedError

    @abstractmethod
    def ppf(self, u):
        """
        Inverse CDF on (0, 1).
        """
        raise NotImplementedError

    @abstractmethod
    def fourier(self, xi):
        """
        ``rho_hat(xi) = int exp(-i x xi) rho(x) dx``.
        """
        raise NotImplementedError

    @abstractmethod
    def support(self) -> Tuple[float, float]:
        raise NotImplementedError

    @abstractmethod
    def sup_norm(self) -> float:
        raise NotImplementedError

    def quadrature_range(self) -> Tuple[float, float]:
        return self.support()

    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    def derivative_jump(self, order: int) -> Optional[float]:
        """
        Largest jump of the ``order``-th derivative, ``0.0`` if continuous, ``None`` if unknown.
        """
        return 0.0

    def expect(self, func, points: Sequence[float] = ()) -> float:
        """
        ``int func(v) rho(v) dv`` by adaptive quadrature, split at ``points`` and the law's breakpoints.
        """
        lo, hi = self.quadrature_range()
        cuts = sorted({p for p in (*points, *self.breakpoints()) if lo < p < hi})
        edges = [lo, *cuts, hi]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            value, _ = integrate.quad(lambda v: func(v) * float(self.pdf(v)), a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
            total += value
        return total

    def absolute_moment(self, gamma: float) -> float:
        return self.expect(lambda v: abs(v) ** gamma, points=(0.0,))

    def mean(self) -> float:
        return self.expect(lambda v: v)

    def variance(self) -> float:
        m = self.mean()
        return self.expect(lambda v: (v - m) ** 2)


class GaussianDensity(SiteDensity):
    def __init__(self, mean: float, scale: float):
        self.mu = mean
        self.sigma = scale

    def pdf(self, x):
        u = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi) / self.sigma

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def ppf(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def fourier(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-1j * xi * self.mu - 0.5 * (self.sigma * xi) ** 2)

    def support(self):
        return (-math.inf, math.inf)

    def sup_norm(self) -> float:
        return 1.0 / (math.sqrt(2.0 * math.pi) * self.sigma)

    def breakpoints(self):
        return (self.mu,)

    def quadrature_range(self):
        # the density underflows to 0 beyond 40 standard deviations
        return (self.mu - 40.0 * self.sigma, self.mu + 40.0 * self.sigma)

    def mean(self) -> float:
        return self.mu

    def variance(self) -> float:
        return self.sigma**2


class UniformDensity(SiteDensity):
    def __init__(self, mean: float, scale: float):
        self.lo = mean - 0.5 * scale
        self.hi = mean + 0.5 * scale
        self.width = scale

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / self.width, 0.0)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / self.width, 0.0, 1.0)

    def ppf(self, u):
        return self.lo + self.width * np.asarray(u, dtype=float)

    def fourier(self, xi):
        xi = np.asarray(xi, dtype=float)
        centre = 0.5 * (self.lo + self.hi)
        return np.exp(-1j * xi * centre) * np.sinc(xi * self.width / (2.0 * math.pi))

    def support(self):
        return (self.lo, self.hi)

    def sup_norm(self) -> float:
        return 1.0 / self.width

    def derivative_jump(self, order: int) -> Optional[float]:
        # rho' carries point masses at both edges
        return 1.0 / self.width if order == 0 else math.inf

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def variance(self) -> float:
        return self.width**2 / 12.0


class TabulatedDensity(SiteDensity):
    """
    Piecewise-linear density; its CDF is piecewise quadratic and inverted in closed form.
    """

    def __init__(self, table):
        knots = np.asarray(table, dtype=float)
        self.x = knots[:, 0]
        self.rho = knots[:, 1]
        self.h = np.diff(self.x)
        self.slope = np.diff(self.rho) / self.h
        seg_mass = 0.5 * (self.rho[:-1] + self.rho[1:]) * self.h
        self.F = np.concatenate(([0.0], np.cumsum(seg_mass)))

    def pdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.rho, left=0.0, right=0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, len(self.h) - 1)
        t = np.clip(x - self.x[i], 0.0, self.h[i])
        value = self.F[i] + self.rho[i] * t + 0.5 * self.slope[i] * t * t
        return np.where(x < self.x[0], 0.0, np.where(x >= self.x[-1], 1.0, value))

    def ppf(self, u):
        u = np.asarray(u, dtype=float) * self.F[-1]
        i = np.clip(np.searchsorted(self.F, u, side="right") - 1, 0, len(self.h) - 1)
        c = u - self.F[i]
        b = self.rho[i]
        a = 0.5 * self.slope[i]
        disc = np.sqrt(np.maximum(b * b + 4.0 * a * c, 0.0))
        denom = b + disc
        safe = np.where(denom > 0, denom, 1.0)
        t = np.where(denom > 0, 2.0 * c / safe, 0.0)
        return self.x[i] + np.clip(t, 0.0, self.h[i])

    def fourier(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty(xi.shape, dtype=complex)
        zero = np.abs(xi) < 1e-12
        out[zero] = self.F[-1]
        w = xi[~zero][:, None]
        x0, x1 = self.x[:-1][None, :], self.x[1:][None, :]
        r0, m = self.rho[:-1][None, :], self.slope[None, :]

        def primitive(x):
            e = np.exp(-1j * w * x)
            # int (r0 + m (x - x0)) e^{-i w x} dx
            const = (r0 - m * x0) * e / (-1j * w)
            linear = m * e * (x / (-1j * w) + 1.0 / (w * w))
            return const + linear

        out[~zero] = np.sum(primitive(x1) - primitive(x0), axis=1)
        return out

    def support(self):
        return (float(self.x[0]), float(self.x[-1]))

    def sup_norm(self) -> float:
        return float(self.rho.max())

    def breakpoints(self):
        return tuple(float(v) for v in self.x)

    def derivative_jump(self, order: int) -> Optional[float]:
        if order == 0:
            return float(max(self.rho[0], self.rho[-1]))
        if order == 1:
            slopes = np.concatenate(([0.0], self.slope, [0.0]))
            return float(np.max(np.abs(np.diff(slopes))))
        if len(self.x) < order + 2:
            return None
        # higher derivatives vanish inside segments, so they are continuous iff slopes are
        return self.derivative_jump(1)

    def expect(self, func, points=()):
        total = 0.0
        cuts = sorted(set(points))
        for a, b in zip(self.x[:-1], self.x[1:]):
            inner = [p for p in cuts if a < p < b]
            value, _ = integrate.quad(lambda v: func(v) * float(self.pdf(v)), a, b, points=inner or None, limit=200, epsabs=1e-13)
            total += value
        return total


def density_eval(spec: DensitySpec, x):
    """
    Evaluate ``rho(x)``; tabulated densities are zero outside their knot range.

    :param spec: Density description.
    :type spec: DensitySpec
    :param x: Point or array of points.
    :return: Density value(s), ``>= 0``.
    """
    value = spec.law.pdf(x)
    return float(value) if np.ndim(value) == 0 else value


def density_cdf(spec: DensitySpec, x):
    value = spec.law.cdf(x)
    return float(value) if np.ndim(value) == 0 else value


def density_ppf(spec: DensitySpec, u):
    value = spec.law.ppf(u)
    return float(value) if np.ndim(value) == 0 else value


def density_sample(spec: DensitySpec, stream: RngStream) -> float:
    """
    One inverse-CDF draw from ``spec`` using the next uniform of ``stream``.
    """
    return float(spec.law.ppf(stream.uniforms(1))[0])


def density_sample_many(spec: DensitySpec, stream: RngStream, size: int) -> np.ndarray:
    """
    ``size`` inverse-CDF draws; identical to ``size`` successive :func:`density_sample` calls.
    """
    return np.asarray(spec.law.ppf(stream.uniforms(size)), dtype=float)


def fourier_bound(spec: DensitySpec, m: int, xi_max: float = FOURIER_GRID_MAX, points: int = 4001) -> Tuple[float, float]:
    """
    Grid suprema of ``<xi>^m |rho_hat(xi)|`` on ``[0, xi_max/2]`` and ``[xi_max/2, xi_max]``.

    ``rho`` is real so ``|rho_hat|`` is even and the negative half-line adds nothing.

    :return: ``(inner_sup, outer_sup)``.
    """
    xi = np.linspace(0.0, xi_max, points)
    weighted = (1.0 + xi * xi) ** (0.5 * m) * np.abs(spec.law.fourier(xi))
    half = points // 2
    return float(weighted[: half + 1].max()), float(weighted[half:].max())


@dataclass(frozen=True)
class ConditionResult:
    condition: int
    order: int
    status: Literal["declared", "pass", "fail", "unverifiable"]
    value: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class Assumption1Report:
    kind: str
    k: str
    results: Tuple[ConditionResult, ...]

    def status(self, condition: int) -> str:
        """
        Worst status over all orders of one condition (fail > unverifiable > pass > declared).
        """
        rank = {"declared": 0, "pass": 1, "unverifiable": 2, "fail": 3}
        statuses = [r.status for r in self.results if r.condition == condition]
        return max(statuses, key=rank.__getitem__) if statuses else "declared"

    @property
    def passed(self) -> bool:
        return all(r.status != "fail" for r in self.results)


def assumption1_report(spec: DensitySpec, k: Optional[int] = None) -> Assumption1Report:
    """
    Check the four regularity conditions on the single-site density.

    Gaussian densities satisfy every condition for all k and are reported as ``declared``.
    Other kinds are spot-checked numerically at orders up to ``k >= 1`` (default: the declared
    smoothness index raised to 1, or 2 when none is declared):

    1. derivatives of order ``< k`` have no jumps (C^k, vanishing at infinity);
    2. ``int |rho^(m)|`` is finite for ``m <= k`` (no jump in the order ``m-1`` derivative);
    3. ``int <x>^m rho`` is finite for ``m <= k+1``;
    4. ``<xi>^m rho_hat`` stays bounded on ``|xi| <= 50`` for ``m <= k``.

    :param spec: Density to check.
    :param k: Smoothness order to check.
    :return: Per-condition, per-order results.
    """
    if spec.kind == "gaussian":
        results = tuple(ConditionResult(c, -1, "declared", detail="k = inf") for c in (1, 2, 3, 4))
        return Assumption1Report(kind=spec.kind, k="inf", results=results)

    if k is None:
        k = max(1, spec.smoothness_index) if spec.smoothness_index is not None else 2
    if k < 1:
        raise InvalidConfigError(f"smoothness order k must be >= 1, got {k}")
    law = spec.law
    results = []

    for order in range(k):
        jump = law.derivative_jump(order)
        if jump is None:
            results.append(ConditionResult(1, order, "unverifiable", detail="too few knots for this derivative"))
        else:
            status = "pass" if jump <= CHECK_TOLERANCE else "fail"
            results.append(ConditionResult(1, order, status, jump, "largest jump of the derivative"))

    for order in range(k + 1):
        if order == 0:
            results.append(ConditionResult(2, 0, "pass", law.expect(lambda v: 1.0), "total mass"))
            continue
        jump = law.derivative_jump(order - 1)
        if jump is None:
            results.append(ConditionResult(2, order, "unverifiable", detail="too few knots for this derivative"))
        elif jump > CHECK_TOLERANCE:
            results.append(ConditionResult(2, order, "fail", jump, "derivative contains a point mass"))
        else:
            results.append(ConditionResult(2, order, "pass", _derivative_l1(law, order), "L1 norm of the derivative"))

    for order in range(k + 2):
        value = law.expect(lambda v, m=order: (1.0 + v * v) ** (0.5 * m))
        status = "pass" if math.isfinite(value) else "fail"
        results.append(ConditionResult(3, order, status, value, "weighted moment"))

    for order in range(k + 1):
        inner, outer = fourier_bound(spec, order)
        status = "pass" if outer <= inner * (1.0 + CHECK_TOLERANCE) else "fail"
        results.append(ConditionResult(4, order, status, max(inner, outer), "grid sup of <xi>^m |rho_hat|"))

    report = Assumption1Report(kind=spec.kind, k=str(k), results=tuple(results))
    logger.info("Regularity report for %s density (k=%s): passed=%s", spec.kind, k, report.passed)
    return report


def _derivative_l1(law: SiteDensity, order: int) -> float:
    if isinstance(law, TabulatedDensity):
        # piecewise linear: only the first derivative is a function
        return float(np.sum(np.abs(law.slope) * law.h)) if order == 1 else 0.0
    return 0.0
