"""
.. module:: simulation
   :platform: Unix, MacOSX
   :synopsis: Monte Carlo replicates of the minimum S-divergence estimator
              under clean or point-mass contaminated sampling

Replicate i draws its dataset from a generator seeded with the i-th child of
``SeedSequence(plan.seed)``, so a plan gives the same datasets whatever the
number of worker processes and whatever lambda is fitted.

"""
import logging
import dataclasses
import multiprocessing as mp
from typing import Optional, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from .asymptotics import contaminated_sandwich, sandwich_variance
from .divergence import DivergenceParams, PmfVector
from .estimation import FrequencyTable, SolverOptions, fit
from .exceptions import (DegenerateInformation, DomainError, NonConvergence, SimulationError,
                         TruncationError, UndefinedDivergence)
from .models import DEFAULT_POLICY, get_model

logger = logging.getLogger(__name__)

NORMALITY_LEVEL = 0.01
# normaltest needs a reasonable number of points for its skew/kurtosis statistics
NORMALITY_MIN_SAMPLES = 20

SUCCESS = "success"
INADMISSIBLE = "inadmissible"
NONCONVERGENCE = "nonconvergence"


@dataclasses.dataclass(frozen=True)
class SimPlan:
    model: str
    theta_true: float
    n: int
    replicates: int
    alpha: float
    lam: float
    epsilon: float = 0.0
    location: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        spec = get_model(self.model)
        spec.check_theta(self.theta_true)
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer, got {!r}".format(self.n))
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise DomainError("replicates must be a positive integer, got {!r}".format(self.replicates))
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError("epsilon must lie in [0, 1), got {!r}".format(self.epsilon))
        if self.epsilon > 0:
            if self.location is None:
                raise DomainError("contaminated plan needs a location")
            spec.check_support(self.location)
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError("seed must be a nonnegative integer, got {!r}".format(self.seed))
        DivergenceParams(self.alpha, self.lam)

    @property
    def params(self):
        return DivergenceParams(self.alpha, self.lam)

    @property
    def model_spec(self):
        return get_model(self.model)

    @property
    def contaminated(self):
        return self.epsilon > 0

    def with_lambda(self, lam):
        return dataclasses.replace(self, lam=lam)


@dataclasses.dataclass(frozen=True)
class SimReport:
    plan: SimPlan
    replicates: int
    successes: int
    inadmissible: int
    nonconvergence: int
    mean_theta_hat: float
    sd_theta_hat: float
    empirical_var_scaled: float
    theoretical_sandwich: Optional[float]
    theta_target: float
    normality_stat: Optional[float]
    normality_pvalue: Optional[float]
    normality_pass: Optional[bool]
    estimates: Tuple[float, ...] = ()

    @property
    def failure_count(self):
        return self.inadmissible + self.nonconvergence

    @property
    def variance_ratio(self):
        if self.theoretical_sandwich is None or not np.isfinite(self.empirical_var_scaled):
            return None
        return self.empirical_var_scaled / self.theoretical_sandwich


def mixture_pmf(model, theta, epsilon, location, policy=None):
    """(1 - epsilon) f_theta + epsilon * point mass at ``location``."""
    clean = PmfVector.from_model(model, theta, (policy or DEFAULT_POLICY).with_data_max(location))
    if epsilon == 0:
        return clean
    point = PmfVector(int(location), np.ones(1))
    return clean.mixture(point, epsilon)


def draw_dataset(plan, rng, policy=None):
    """One dataset of size plan.n; contaminated draws land on plan.location."""
    model = plan.model_spec
    n_bad = int(rng.binomial(plan.n, plan.epsilon)) if plan.contaminated else 0
    values = np.empty(plan.n, dtype=np.int64)
    if n_bad < plan.n:
        values[:plan.n - n_bad] = model.draw(plan.theta_true, plan.n - n_bad, rng, policy)
    values[plan.n - n_bad:] = plan.location if n_bad else 0
    return FrequencyTable.from_observations(values)


def replicate_seeds(seed, replicates):
    return np.random.SeedSequence(seed).spawn(replicates)


def _run_replicate(plan, seed, options):
    rng = np.random.default_rng(seed)
    data = draw_dataset(plan, rng, options.policy)
    try:
        return SUCCESS, fit(data, plan.model_spec, plan.params, options).theta_hat
    except UndefinedDivergence:
        return INADMISSIBLE, None
    except (NonConvergence, TruncationError):
        return NONCONVERGENCE, None


def _theoretical(plan, options):
    """(target theta, sandwich variance) or (target, None) when it does not exist."""
    model = plan.model_spec
    try:
        if not plan.contaminated:
            return plan.theta_true, sandwich_variance(model, plan.theta_true, plan.alpha, options.policy)
        g = mixture_pmf(model, plan.theta_true, plan.epsilon, plan.location, options.policy)
        return contaminated_sandwich(g, model, plan.params, options)
    except (DegenerateInformation, UndefinedDivergence, NonConvergence) as err:
        logger.info("no theoretical sandwich for plan: %s", err)
        return plan.theta_true, None


def run_plan(plan, options=None, jobs=1, progress=False):
    """Fit ``plan.replicates`` independent datasets and summarize theta_hat.

    Raises:
        SimulationError: no replicate produced an estimate.
    """
    options = options or SolverOptions()
    seeds = replicate_seeds(plan.seed, plan.replicates)
    if jobs > 1:
        pool = mp.Pool(jobs)
        pending = [pool.apply_async(_run_replicate, args=(plan, s, options)) for s in seeds]
        pool.close()
        outcomes = [p.get() for p in tqdm(pending, desc="replicates", disable=not progress)]
        pool.join()
    else:
        outcomes = [_run_replicate(plan, s, options)
                    for s in tqdm(seeds, desc="replicates", disable=not progress)]

    states = [state for state, _ in outcomes]
    estimates = np.array([theta for state, theta in outcomes if state == SUCCESS], dtype=float)
    n_inadmissible = states.count(INADMISSIBLE)
    n_nonconvergence = states.count(NONCONVERGENCE)
    if n_inadmissible or n_nonconvergence:
        logger.info("%d inadmissible and %d non-converged replicates out of %d",
                    n_inadmissible, n_nonconvergence, plan.replicates)
    if estimates.size == 0:
        raise SimulationError("all {} replicates failed ({} inadmissible, {} non-converged)".format(
            plan.replicates, n_inadmissible, n_nonconvergence))

    mean = float(np.mean(estimates))
    if estimates.size > 1:
        sd = float(np.std(estimates, ddof=1))
    else:
        sd = float("nan")
    target, sandwich = _theoretical(plan, options)

    stat = pvalue = passed = None
    if estimates.size >= NORMALITY_MIN_SAMPLES and sd > 0:
        result = stats.normaltest((estimates - mean) / sd)
        stat, pvalue = float(result.statistic), float(result.pvalue)
        passed = pvalue >= NORMALITY_LEVEL

    return SimReport(plan=plan, replicates=plan.replicates, successes=int(estimates.size),
                     inadmissible=n_inadmissible, nonconvergence=n_nonconvergence,
                     mean_theta_hat=mean, sd_theta_hat=sd, empirical_var_scaled=plan.n * sd * sd,
                     theoretical_sandwich=sandwich, theta_target=float(target),
                     normality_stat=stat, normality_pvalue=pvalue, normality_pass=passed,
                     estimates=tuple(float(v) for v in estimates))


@dataclasses.dataclass(frozen=True)
class LambdaVerdict:
    lambdas: Tuple[float, ...]
    variances: Tuple[float, ...]
    means: Tuple[float, ...]
    max_difference: float
    noise_band: float
    agree: bool
    reports: Tuple[SimReport, ...] = ()


def lambda_independence_check(model, theta, n, R, alpha, lambdas, seed, epsilon=0.0, location=None,
                              options=None, jobs=1, progress=False):
    """Compare the scaled variance of theta_hat across lambdas on shared datasets.

    The band is three standard errors of a variance estimate,
    3 sqrt(2 / (R - 1)) times the mean of the variances.
    """
    if not lambdas:
        raise DomainError("need at least one lambda")
    name = model if isinstance(model, str) else model.name
    base = SimPlan(name, theta, n, R, alpha, lambdas[0], epsilon, location, seed)
    reports = [run_plan(base.with_lambda(lam), options, jobs, progress) for lam in lambdas]
    variances = tuple(r.empirical_var_scaled for r in reports)
    if len(reports) == 1:
        return LambdaVerdict(tuple(lambdas), variances, (reports[0].mean_theta_hat,), 0.0,
                             float("inf"), True, tuple(reports))
    if R < 2:
        raise DomainError("comparing variances needs at least two replicates")
    diffs = [abs(a - b) for i, a in enumerate(variances) for b in variances[i + 1:]]
    band = float(3.0 * np.sqrt(2.0 / (R - 1)) * np.mean(variances))
    max_diff = float(max(diffs))
    return LambdaVerdict(tuple(lambdas), variances, tuple(r.mean_theta_hat for r in reports),
                         max_diff, band, bool(max_diff <= band), tuple(reports))
