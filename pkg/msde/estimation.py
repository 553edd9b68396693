"""
.. module:: estimation
   :platform: Unix, MacOSX
   :synopsis: objective, gradient and multi-start solver for the minimum
              S-divergence estimator, plus (alpha, lambda) grids

"""
import enum
import logging
import dataclasses
import multiprocessing as mp
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .divergence import DivergenceParams, PmfVector, Regime, _power_kernel
from .exceptions import (DomainError, EmptyDataset, NonConvergence,
                         TruncationError, UndefinedDivergence)
from .models import DEFAULT_POLICY, TruncationPolicy

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Observed counts at strictly increasing support points."""
    points: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if points.shape != counts.shape or points.ndim != 1:
            raise DomainError("points and counts must be vectors of equal length")
        if np.any(np.diff(points) <= 0):
            raise DomainError("support points must be strictly increasing")
        if np.any(counts < 0):
            raise DomainError("counts must be nonnegative")
        if counts.sum() < 1:
            raise EmptyDataset("frequency table holds no observation")
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def from_pairs(cls, pairs):
        """Build from (x, count) pairs; duplicate x are summed, zero counts dropped."""
        total = {}
        for x, count in pairs:
            if count < 0:
                raise DomainError("negative count {} at x={}".format(count, x))
            total[int(x)] = total.get(int(x), 0) + int(count)
        keys = sorted(k for k, v in total.items() if v > 0)
        return cls(np.array(keys, dtype=np.int64), np.array([total[k] for k in keys], dtype=np.int64))

    @classmethod
    def from_observations(cls, values):
        values = np.asarray(values, dtype=np.int64)
        if values.size == 0:
            raise EmptyDataset("no observation")
        points, counts = np.unique(values, return_counts=True)
        return cls(points, counts)

    def __eq__(self, other):
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return "FrequencyTable(n={}, entries={})".format(self.n, self.entries)

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def entries(self):
        return [(int(x), int(c)) for x, c in zip(self.points, self.counts)]

    @property
    def max_point(self):
        return int(self.points[-1])

    def relative_frequency(self, x):
        return self.to_pmf().on(x)

    def mean(self):
        return float(np.dot(self.points, self.counts) / self.n)

    def to_pmf(self):
        return PmfVector.from_frequencies(self.points, self.counts)

    def exclude(self, values):
        """Copy without the given support points."""
        keep = ~np.isin(self.points, list(values))
        return FrequencyTable(self.points[keep], self.counts[keep])


@dataclasses.dataclass
class SeedTrace:
    seed: float
    theta: float
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    reason: str = ""


@dataclasses.dataclass
class FitResult:
    theta_hat: float
    objective: float
    grad_norm: float
    iterations: int
    seeds_tried: int
    converged: bool
    std_error: Optional[float] = None
    model: str = ""
    alpha: float = float("nan")
    lam: float = float("nan")
    trace: List[SeedTrace] = dataclasses.field(default_factory=list)


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    gtol: float = 1e-9
    max_iter: int = 200
    max_step: float = 2.0
    fd_step: float = 1e-5
    policy: TruncationPolicy = DEFAULT_POLICY


def as_pmf(data):
    if isinstance(data, PmfVector):
        return data
    if isinstance(data, FrequencyTable):
        return data.to_pmf()
    raise DomainError("expected a FrequencyTable or PmfVector, got {}".format(type(data).__name__))


def _support(model, pmf, theta, policy):
    policy = (policy or DEFAULT_POLICY).with_data_max(pmf.max_point)
    return model.support(theta, policy)


def _check_admissible(r, params, points):
    if (params.A <= 0 or params.regime is Regime.A_LIMIT_ZERO) and np.any(r == 0):
        cell = int(points[np.flatnonzero(r == 0)[0]])
        raise UndefinedDivergence(
            "{} is inadmissible: empty cell at x={} with A={:g}".format(params, cell, params.A),
            cell=cell, alpha=params.alpha, lam=params.lam)


def _prepare(data, model, theta, params, policy, support):
    pmf = as_pmf(data)
    model.check_theta(theta)
    if pmf.min_point < model.support_origin:
        raise DomainError("observation {} below support origin of {}".format(pmf.min_point, model.name))
    x = _support(model, pmf, theta, policy) if support is None else np.asarray(support)
    r = pmf.on(x)
    _check_admissible(r, params, x)
    return x, model.log_pmf(theta, x), r


def _objective(logf, r, params):
    a1 = 1.0 + params.alpha
    A, B = params.A, params.B
    pos = r > 0
    with np.errstate(over='ignore'):
        fa = np.exp(a1 * logf)
        if params.regime is Regime.B_LIMIT_ZERO:
            value = fa.sum() / a1 - np.sum(r[pos] ** a1 * logf[pos])
        elif params.regime is Regime.A_LIMIT_ZERO:
            value = np.sum(fa * (logf - np.log(r))) - fa.sum() / a1
        else:
            cross = np.exp(B * logf[pos] + A * np.log(r[pos])).sum()
            value = fa.sum() / A - a1 / (A * B) * cross
    return float(value / a1)


def _gradient_cells(logf, r, u, params):
    """Cells of -K(delta) f^(1+alpha) u, delta = r / f - 1."""
    a1 = 1.0 + params.alpha
    A, B = params.A, params.B
    pos = r > 0
    with np.errstate(over='ignore', invalid='ignore'):
        fa = np.exp(a1 * logf)
        kf = np.empty(r.shape)
        if params.regime is Regime.A_LIMIT_ZERO:
            kf = fa * (np.log(r) - logf)
        else:
            kf[~pos] = -fa[~pos] / A
            lr = np.log(r[pos])
            lt = lr - logf[pos]
            direct = (np.exp(A * lr + B * logf[pos]) - fa[pos]) / A
            kernel = fa[pos] * _power_kernel(lt, A)
            kf[pos] = np.where(A * lt > 1.0, direct, kernel)
    return -kf * u


def objective_Hn(data, model, theta, params, policy=None, support=None):
    """H_n(theta), the theta-dependent part of S(r_n, f_theta) divided by 1 + alpha.

    Args:
        data: FrequencyTable or PmfVector holding r_n.
        model: ModelSpec.
        theta: parameter value strictly inside the parameter space.
        params: DivergenceParams.
        policy: TruncationPolicy for the model tail.
        support: explicit summation grid, overriding ``policy``.

    Raises:
        UndefinedDivergence: (alpha, lambda) inadmissible for this data.
    """
    x, logf, r = _prepare(data, model, theta, params, policy, support)
    return _objective(logf, r, params)


def gradient_Hn(data, model, theta, params, policy=None, support=None):
    """dH_n/dtheta = -sum_x K(delta_n(x)) f^(1+alpha)(x) u(x)."""
    x, logf, r = _prepare(data, model, theta, params, policy, support)
    return float(np.sum(_gradient_cells(logf, r, model.score(theta, x, 1), params)))


class _Problem:
    """H_n and its slope on the solver's unconstrained scale."""

    def __init__(self, pmf, model, params, policy):
        self.pmf = pmf
        self.model = model
        self.params = params
        self.policy = policy.with_data_max(pmf.max_point)

    def support(self, theta):
        return self.model.support(theta, self.policy)

    def value(self, theta, x=None):
        try:
            if x is None:
                x = self.support(theta)
            logf = self.model.log_pmf(theta, x)
        except (DomainError, TruncationError):
            return np.inf
        value = _objective(logf, self.pmf.on(x), self.params)
        return value if np.isfinite(value) else np.inf

    def slope(self, theta, x):
        """(dH/dtheta, sum of |cells|)."""
        cells = _gradient_cells(self.model.log_pmf(theta, x), self.pmf.on(x),
                                self.model.score(theta, x, 1), self.params)
        return float(np.sum(cells)), float(np.sum(np.abs(cells)))

    def eta_slope(self, eta, x):
        theta = self.model.from_unconstrained(eta)
        try:
            g, _ = self.slope(theta, x)
        except (DomainError, TruncationError):
            return np.nan
        return g * self.model.jacobian(theta)


def _newton(problem, seed, options):
    """Safeguarded Newton on eta with a finite-difference second derivative."""
    model = problem.model
    eta = model.to_unconstrained(seed)
    theta = model.from_unconstrained(eta)
    h = problem.value(theta)
    if not np.isfinite(h):
        return SeedTrace(seed, theta, h, np.inf, 0, False, "objective not finite at seed")
    g_theta, scale, it = np.inf, 1.0, 0
    for it in range(1, options.max_iter + 1):
        x = problem.support(theta)
        g_theta, scale = problem.slope(theta, x)
        if not np.isfinite(g_theta):
            return SeedTrace(seed, theta, h, np.inf, it, False, "gradient not finite")
        if abs(g_theta) <= options.gtol * max(scale, 1e-300):
            return SeedTrace(seed, theta, h, abs(g_theta), it, True)
        g = g_theta * model.jacobian(theta)
        e = options.fd_step * max(1.0, abs(eta))
        curvature = (problem.eta_slope(eta + e, x) - problem.eta_slope(eta - e, x)) / (2.0 * e)
        if np.isfinite(curvature) and curvature > 0:
            step = -g / curvature
        else:
            step = -np.sign(g) * options.max_step
        step = float(np.clip(step, -options.max_step, options.max_step))
        if np.isfinite(curvature) and curvature > 0 and abs(step) <= 1e-6:
            eta = eta + step
            theta = model.from_unconstrained(eta)
            h = problem.value(theta)
            continue
        t = 1.0
        accepted = False
        while abs(t * step) > 1e-15 * max(1.0, abs(eta)):
            cand = eta + t * step
            theta_c = model.from_unconstrained(cand)
            h_c = problem.value(theta_c)
            if np.isfinite(h_c) and h_c <= h + 1e-4 * t * step * g:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            logger.debug("seed %g: line search stalled at theta=%g", seed, theta)
            return SeedTrace(seed, theta, h, abs(g_theta), it, False, "line search stalled")
        eta, theta, h = cand, theta_c, h_c
    x = problem.support(theta)
    g_theta, scale = problem.slope(theta, x)
    converged = abs(g_theta) <= options.gtol * max(scale, 1e-300)
    return SeedTrace(seed, theta, h, abs(g_theta), it, converged,
                     "" if converged else "iteration limit")


def seed_set(model, pmf):
    """Deterministic multi-start seeds, duplicates removed."""
    seeds = [model.closed_form_mle(pmf)]
    if np.count_nonzero(pmf.masses) > 1:
        seeds.append(model.closed_form_mle(pmf.without_max()))
    seeds.append(model.median_matching_estimate(pmf))
    seeds.extend(model.seed_grid(pmf))
    unique = []
    for s in seeds:
        if all(abs(model.to_unconstrained(s) - model.to_unconstrained(u)) > 1e-9 for u in unique):
            unique.append(float(s))
    return unique


def fit(data, model, params, options=None):
    """Minimum S-divergence estimate of theta.

    Every seed of :func:`seed_set` is polished by a safeguarded Newton
    iteration; the converged result with the lowest H_n wins.

    Raises:
        UndefinedDivergence: (alpha, lambda) inadmissible for the data.
        NonConvergence: no seed met the gradient tolerance.
    """
    options = options or SolverOptions()
    pmf = as_pmf(data)
    seeds = seed_set(model, pmf)
    # admissibility does not depend on theta beyond the support it spans
    _prepare(pmf, model, seeds[0], params, options.policy, None)
    problem = _Problem(pmf, model, params, options.policy)
    trace = []
    for seed in seeds:
        result = _newton(problem, seed, options)
        logger.debug("seed %.6g -> theta %.10g, H %.10g, converged %s %s", seed, result.theta,
                     result.objective, result.converged, result.reason)
        trace.append(result)
    done = [t for t in trace if t.converged]
    if not done:
        raise NonConvergence("no seed converged for {} with {}".format(model.name, params), trace)
    best = min(done, key=lambda t: t.objective)
    return FitResult(theta_hat=best.theta, objective=best.objective, grad_norm=best.grad_norm,
                     iterations=sum(t.iterations for t in trace), seeds_tried=len(trace),
                     converged=True, model=model.name, alpha=params.alpha, lam=params.lam,
                     trace=trace)


def best_fitting_parameter(g, model, params, options=None):
    """theta^g: minimizer of S(g, f_theta) for a known density g."""
    return fit(g, model, params, options)


class CellState(enum.Enum):
    OK = "ok"
    INADMISSIBLE = "inadmissible"
    NONCONVERGENCE = "nonconvergence"


@dataclasses.dataclass
class GridCell:
    lam: float
    alpha: float
    state: CellState
    fit: Optional[FitResult] = None
    message: str = ""

    @property
    def theta_hat(self):
        return self.fit.theta_hat if self.fit is not None else None


@dataclasses.dataclass
class GridResult:
    """Fits laid out with lambda along rows and alpha along columns."""
    model: str
    lambdas: Tuple[float, ...]
    alphas: Tuple[float, ...]
    cells: List[List[GridCell]]

    def cell(self, lam, alpha):
        return self.cells[self.lambdas.index(lam)][self.alphas.index(alpha)]

    def estimates(self):
        return [[c.theta_hat for c in row] for row in self.cells]


def _fit_cell(data, model, lam, alpha, options):
    params = DivergenceParams(alpha, lam)
    try:
        return GridCell(lam, alpha, CellState.OK, fit(data, model, params, options))
    except UndefinedDivergence as err:
        logger.info("cell %s inadmissible: %s", params, err)
        return GridCell(lam, alpha, CellState.INADMISSIBLE, message=str(err))
    except NonConvergence as err:
        logger.info("cell %s did not converge", params)
        best = min(err.trace, key=lambda t: t.grad_norm) if err.trace else None
        return GridCell(lam, alpha, CellState.NONCONVERGENCE, message="{} (closest theta {})".format(
            err, None if best is None else best.theta))


def fit_grid(data, model, alphas, lambdas, options=None, jobs=1, progress=False):
    """Fit every (lambda, alpha) cell; per-cell failures become cell states.

    Args:
        jobs (int): worker processes; cells are placed by index so the result
            does not depend on scheduling.
    """
    if not alphas or not lambdas:
        raise DomainError("alpha and lambda grids must be nonempty")
    for lam in lambdas:
        for alpha in alphas:
            DivergenceParams(alpha, lam)
    options = options or SolverOptions()
    tasks = [(lam, alpha) for lam in lambdas for alpha in alphas]
    if jobs > 1:
        pool = mp.Pool(jobs)
        pending = [pool.apply_async(_fit_cell, args=(data, model, lam, alpha, options)) for lam, alpha in tasks]
        pool.close()
        flat = [p.get() for p in tqdm(pending, desc="grid cells", disable=not progress)]
        pool.join()
    else:
        flat = [_fit_cell(data, model, lam, alpha, options)
                for lam, alpha in tqdm(tasks, desc="grid cells", disable=not progress)]
    width = len(alphas)
    rows = [flat[i * width:(i + 1) * width] for i in range(len(lambdas))]
    return GridResult(model.name, tuple(lambdas), tuple(alphas), rows)


__all__ = [
    'FrequencyTable', 'FitResult', 'SeedTrace', 'SolverOptions', 'CellState', 'GridCell',
    'GridResult', 'objective_Hn', 'gradient_Hn', 'fit', 'fit_grid', 'best_fitting_parameter',
    'seed_set', 'as_pmf',
]
