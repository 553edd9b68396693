"""
.. module:: divergence
   :platform: Unix, MacOSX
   :synopsis: the two-parameter S-divergence family between discrete densities,
              its limit cases and the estimating-equation kernel K

The family is indexed by alpha in [0, 1] and a real lambda through the
exponents A = 1 + lambda (1 - alpha) and B = alpha - lambda (1 - alpha),
A + B = 1 + alpha. alpha = 0 gives the Cressie-Read power divergences,
lambda = 0 the density power divergences, alpha = 1 the squared L2 distance.

"""
import enum
import logging
import dataclasses

import numpy as np
from scipy import special

from .exceptions import DomainError, UndefinedDivergence

logger = logging.getLogger(__name__)

LIMIT_THRESHOLD = 1e-12
FIRST_ORDER_THRESHOLD = 1e-8

# Cressie-Read members by their usual names
NAMED_LAMBDAS = {
    'PCS': 1.0,
    'LD': 0.0,
    'HD': -0.5,
    'KLD': -1.0,
    'NCS': -2.0,
}


class Regime(enum.Enum):
    GENERIC = "generic"
    A_LIMIT_ZERO = "A=0"
    B_LIMIT_ZERO = "B=0"


@dataclasses.dataclass(frozen=True)
class DivergenceParams:
    """The pair (alpha, lambda) with derived exponents A and B."""
    alpha: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise DomainError("alpha must lie in [0, 1], got {!r}".format(self.alpha))
        if not np.isfinite(self.lam):
            raise DomainError("lambda must be finite, got {!r}".format(self.lam))
        if abs(self.A + self.B - (1.0 + self.alpha)) > 1e-14 * max(1.0, abs(self.lam)):
            raise DomainError("A + B != 1 + alpha for {}".format(self))

    @property
    def A(self):
        return 1.0 + self.lam * (1.0 - self.alpha)

    @property
    def B(self):
        return self.alpha - self.lam * (1.0 - self.alpha)

    @property
    def regime(self):
        if abs(self.A) <= LIMIT_THRESHOLD:
            return Regime.A_LIMIT_ZERO
        if abs(self.B) <= LIMIT_THRESHOLD:
            return Regime.B_LIMIT_ZERO
        return Regime.GENERIC

    def __str__(self):
        return "(alpha={:g}, lambda={:g})".format(self.alpha, self.lam)


@dataclasses.dataclass(frozen=True, eq=False)
class PmfVector:
    """Probability masses on the consecutive integers origin, origin + 1, ..."""
    origin: int
    masses: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise DomainError("masses must be a non-empty vector")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise DomainError("masses must be finite and nonnegative")
        if abs(masses.sum() - 1.0) > 1e-9:
            raise DomainError("masses sum to {!r}, not 1".format(masses.sum()))
        object.__setattr__(self, 'origin', int(self.origin))
        object.__setattr__(self, 'masses', masses)

    def __eq__(self, other):
        if not isinstance(other, PmfVector):
            return NotImplemented
        return self.origin == other.origin and np.array_equal(self.masses, other.masses)

    @classmethod
    def from_frequencies(cls, points, weights):
        points = np.asarray(points, dtype=int)
        weights = np.asarray(weights, dtype=float)
        origin = int(points.min())
        dense = np.zeros(int(points.max()) - origin + 1)
        np.add.at(dense, points - origin, weights)
        return cls(origin, dense / dense.sum())

    @classmethod
    def from_model(cls, model, theta, policy=None):
        x = model.support(theta, policy)
        return cls(model.support_origin, np.exp(model.log_pmf(theta, x)))

    @property
    def points(self):
        return np.arange(self.origin, self.origin + self.masses.size)

    @property
    def max_point(self):
        return int(self.points[np.flatnonzero(self.masses)[-1]])

    @property
    def min_point(self):
        return int(self.points[np.flatnonzero(self.masses)[0]])

    def on(self, support):
        """Masses at the integers in ``support``, zero off this vector's grid."""
        idx = np.asarray(support, dtype=int) - self.origin
        inside = (idx >= 0) & (idx < self.masses.size)
        out = np.zeros(idx.shape)
        out[inside] = self.masses[idx[inside]]
        return out

    def mean(self):
        return float(np.dot(self.points, self.masses))

    def median(self):
        return int(self.points[np.searchsorted(np.cumsum(self.masses), 0.5 - 1e-12)])

    def without_max(self):
        """Renormalized copy with the largest support point removed."""
        keep = self.masses.copy()
        keep[self.max_point - self.origin] = 0.0
        if keep.sum() <= 0:
            return self
        return PmfVector(self.origin, keep / keep.sum())

    def mixture(self, other, weight):
        """(1 - weight) * self + weight * other."""
        lo = min(self.origin, other.origin)
        hi = max(self.points[-1], other.points[-1])
        x = np.arange(lo, hi + 1)
        mixed = (1.0 - weight) * self.on(x) + weight * other.on(x)
        return PmfVector(lo, mixed / mixed.sum())


def _power_kernel(log_ratio, a):
    """(exp(a * log_ratio) - 1) / a with its a -> 0 limit log_ratio."""
    log_ratio = np.asarray(log_ratio, dtype=float)
    if abs(a) <= LIMIT_THRESHOLD:
        return log_ratio.copy()
    z = a * log_ratio
    with np.errstate(over='ignore', invalid='ignore'):
        full = np.expm1(z) / a
        first_order = log_ratio * (1.0 + 0.5 * z)
    return np.where(np.abs(z) < FIRST_ORDER_THRESHOLD, first_order, full)


def _undefined(points, mask, params, what):
    cell = int(points[np.flatnonzero(mask)[0]])
    return UndefinedDivergence(
        "S-divergence {} undefined: {} at x={}".format(params, what, cell),
        cell=cell, alpha=params.alpha, lam=params.lam)


def s_cells(g, f, params, points=None):
    """Per-cell contributions to S_(alpha, lambda)(g, f) on a common grid.

    Raises:
        UndefinedDivergence: a zero cell meets a nonpositive exponent.
    """
    g = np.asarray(g, dtype=float)
    f = np.asarray(f, dtype=float)
    if points is None:
        points = np.arange(g.size)
    a1 = 1.0 + params.alpha
    A, B = params.A, params.B
    regime = params.regime
    out = np.zeros(g.shape)

    only_f = (g == 0) & (f > 0)
    if np.any(only_f):
        if A <= 0 or regime is Regime.A_LIMIT_ZERO:
            raise _undefined(points, only_f, params, "g=0 where f>0 with A={:g}".format(A))
        out[only_f] = f[only_f] ** a1 / A

    only_g = (f == 0) & (g > 0)
    if np.any(only_g):
        if B <= 0 or regime is Regime.B_LIMIT_ZERO:
            raise _undefined(points, only_g, params, "f=0 where g>0 with B={:g}".format(B))
        out[only_g] = g[only_g] ** a1 / B

    both = (g > 0) & (f > 0)
    gb, fb = g[both], f[both]
    with np.errstate(over='ignore', invalid='ignore'):
        if abs(B) >= abs(A):
            lt = np.log(gb) - np.log(fb)
            out[both] = fb ** a1 / B * (np.expm1(a1 * lt) - a1 * _power_kernel(lt, A))
        else:
            ls = np.log(fb) - np.log(gb)
            out[both] = gb ** a1 / A * (np.expm1(a1 * ls) - a1 * _power_kernel(ls, B))
    return out


def _common_grid(g, f):
    lo = min(g.origin, f.origin)
    hi = max(g.points[-1], f.points[-1])
    x = np.arange(lo, hi + 1)
    return x, g.on(x), f.on(x)


def s_divergence(g, f, params):
    """S_(alpha, lambda)(g, f) for two PmfVectors.

    Generic A, B use (1/A) sum f^(1+a) - (1+a)/(AB) sum f^B g^A + (1/B) sum g^(1+a);
    A = 0 and B = 0 are the continuous limits. 0 ln 0 = 0 and 0^p = 0 for p > 0.
    """
    x, gv, fv = _common_grid(g, f)
    return float(np.sum(s_cells(gv, fv, params, x)))


def kernel_K(delta, params):
    """K(delta) = ((delta + 1)^A - 1) / A, ln(delta + 1) when A = 0."""
    d = np.asarray(delta, dtype=float)
    if np.any(d < -1):
        raise DomainError("Pearson residual below -1")
    empty = d == -1
    if np.any(empty) and (params.A <= 0 or params.regime is Regime.A_LIMIT_ZERO):
        raise DomainError("K(-1) is infinite for A={:g}".format(params.A))
    with np.errstate(divide='ignore'):
        lt = np.log1p(d)
    k = _power_kernel(lt, 0.0 if params.regime is Regime.A_LIMIT_ZERO else params.A)
    if np.ndim(delta) == 0:
        return float(k)
    return k


def kernel_K_deriv(delta, params, order=1):
    """K'(delta) = (delta + 1)^(A - 1), K''(delta) = (A - 1)(delta + 1)^(A - 2)."""
    if order not in (1, 2):
        raise DomainError("kernel derivative order must be 1 or 2")
    d = np.asarray(delta, dtype=float)
    if np.any(d < -1):
        raise DomainError("Pearson residual below -1")
    A = 0.0 if params.regime is Regime.A_LIMIT_ZERO else params.A
    factor = 1.0 if order == 1 else A - 1.0
    exponent = A - order
    if factor == 0.0:
        out = np.zeros(d.shape)
    else:
        empty = d == -1
        if np.any(empty) and exponent < 0:
            raise DomainError("K derivative of order {} is infinite at delta=-1 for A={:g}".format(order, A))
        with np.errstate(divide='ignore', invalid='ignore'):
            out = factor * np.exp(exponent * np.log1p(d))
        if np.any(empty):
            out = np.where(empty, factor * (1.0 if exponent == 0 else 0.0), out)
    if np.ndim(delta) == 0:
        return float(out)
    return out


def power_divergence(g, f, lam):
    """Cressie-Read PD_lambda(g, f), written in its disparity form.

    PD = 1/(lam (lam + 1)) sum g [(g/f)^lam - 1] + sum (f - g) / (lam + 1)
    """
    _, gv, fv = _common_grid(g, f)
    if abs(lam) <= LIMIT_THRESHOLD:
        return float(np.sum(special.rel_entr(gv, fv)) + np.sum(fv - gv))
    if abs(lam + 1.0) <= LIMIT_THRESHOLD:
        return float(np.sum(special.rel_entr(fv, gv)) + np.sum(gv - fv))
    pos = gv > 0
    with np.errstate(divide='ignore', over='ignore'):
        log_ratio = np.log(gv[pos]) - np.log(fv[pos])
        body = np.sum(gv[pos] * np.expm1(lam * log_ratio)) / (lam * (lam + 1.0))
    return float(body + np.sum(fv - gv) / (lam + 1.0))


def density_power_divergence(g, f, alpha):
    """Density power divergence d_alpha(g, f); d_0 is sum g ln(g/f)."""
    _, gv, fv = _common_grid(g, f)
    if alpha == 0:
        return float(np.sum(special.rel_entr(gv, fv)))
    return float(np.sum(fv ** (1.0 + alpha))
                 - (1.0 + alpha) / alpha * np.sum(fv ** alpha * gv)
                 + np.sum(gv ** (1.0 + alpha)) / alpha)
