"""
.. module:: models
   :platform: Unix, MacOSX
   :synopsis: discrete parametric model families with log-space densities,
              score derivatives, tail truncation and inversion sampling

"""
import logging
import dataclasses

import numpy as np
from scipy import special

from .exceptions import DomainError, TruncationError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TruncationPolicy:
    """Where to cut an infinite support.

    The truncation point T is the smallest integer with
    sum_{x <= T} f(x) >= 1 - mass_tolerance and T >= data_max. Series run
    a little further, to :meth:`ModelSpec.series_point`.
    """
    mass_tolerance: float = 1e-12
    hard_cap: int = 10 ** 6
    data_max: int = 0

    def __post_init__(self):
        if not 0 < self.mass_tolerance < 1:
            raise DomainError("mass_tolerance must lie in (0, 1)")
        if self.hard_cap < 1:
            raise DomainError("hard_cap must be positive")

    def with_data_max(self, data_max):
        return dataclasses.replace(self, data_max=max(int(data_max), self.data_max))


DEFAULT_POLICY = TruncationPolicy()


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


class ModelSpec:
    """A scalar-parameter family on the integers {support_origin, ...}.

    Subclasses supply ``log_pmf``, ``_score`` (orders 1 to 3), ``survival``
    and the reparameterization to an unconstrained scale. Everything else
    (truncated series, sampling, seeds) is generic.
    """
    name = None
    param_space = (-np.inf, np.inf)
    support_origin = 0

    def __repr__(self):
        return "{}()".format(type(self).__name__)

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))

    # -- domain checks ---------------------------------------------------

    def check_theta(self, theta):
        lower, upper = self.param_space
        if not (np.isfinite(theta) and lower < theta < upper):
            raise DomainError("theta={!r} outside the open parameter space ({}, {}) of {}".format(
                theta, lower, upper, self.name))

    def check_support(self, x):
        if np.any(np.asarray(x) < self.support_origin):
            raise DomainError("support point below origin {} of {}".format(self.support_origin, self.name))

    # -- densities and scores --------------------------------------------

    def log_pmf(self, theta, x):
        raise NotImplementedError

    def pmf(self, theta, x):
        return _scalar_or_array(np.exp(self.log_pmf(theta, x)), x)

    def _score(self, theta, x, order):
        raise NotImplementedError

    def score(self, theta, x, order=1):
        """order-th derivative of ln f_theta(x) in theta."""
        if order not in (1, 2, 3):
            raise DomainError("score order must be 1, 2 or 3, got {!r}".format(order))
        self.check_theta(theta)
        self.check_support(x)
        return _scalar_or_array(self._score(theta, np.asarray(x, dtype=float), order), x)

    def survival(self, theta, t):
        """P(X > t)."""
        raise NotImplementedError

    def fisher_closed_form(self, theta):
        return None

    def fisher_information(self, theta, policy=None):
        self.check_theta(theta)
        closed = self.fisher_closed_form(theta)
        if closed is not None:
            return closed
        return self.fisher_information_series(theta, policy)

    def fisher_information_series(self, theta, policy=None):
        x = self.support(theta, policy)
        u = self._score(theta, x, 1)
        return float(np.sum(u * u * np.exp(self.log_pmf(theta, x))))

    # closed-form asymptotic terms, when a family has them

    def closed_form_J(self, theta, alpha):
        return None

    def closed_form_V(self, theta, alpha):
        return None

    def closed_form_xi(self, theta, alpha):
        return None

    # -- truncation --------------------------------------------------------

    def _first_below(self, theta, start, cap, tail, tol):
        """First k in [start, cap] with tail(theta, k) <= tol, else None."""
        width = 64
        while start <= cap:
            stop = min(start + width, cap)
            ks = np.arange(start, stop + 1)
            hit = np.flatnonzero(tail(theta, ks) <= tol)
            if hit.size:
                return int(ks[hit[0]])
            start = stop + 1
            width *= 2
        return None

    def truncation_point(self, theta, policy=None):
        """Smallest T meeting ``policy``; see :class:`TruncationPolicy`."""
        policy = policy or DEFAULT_POLICY
        self.check_theta(theta)
        tol = policy.mass_tolerance
        cap = policy.hard_cap
        start = max(self.support_origin, int(policy.data_max))
        if start > cap:
            raise TruncationError("data maximum {} exceeds hard cap {}".format(start, cap),
                                  achieved_mass=float("nan"), cap=cap)
        found = self._first_below(theta, start, cap, self.survival, tol)
        if found is not None:
            return found
        achieved = 1.0 - float(self.survival(theta, cap))
        raise TruncationError(
            "{}(theta={!r}) needs more than {} support points for tolerance {}".format(
                self.name, theta, cap, tol),
            achieved_mass=achieved, cap=cap)

    def score_tail(self, theta, t):
        """P(X > t) times the largest of u(t)^2, |u_2(t)| and 1."""
        t = np.asarray(t, dtype=float)
        u = self._score(theta, t, 1)
        weight = np.maximum(u * u, np.abs(self._score(theta, t, 2)))
        return self.survival(theta, t) * np.maximum(weight, 1.0)

    def series_point(self, theta, policy=None):
        """Last support point of the summation range.

        Starts at :meth:`truncation_point` and moves out until
        :meth:`score_tail` is also below the mass tolerance, so that
        score-weighted sums (Fisher information, J, V) lose no more than
        the tolerance in their tails.
        """
        policy = policy or DEFAULT_POLICY
        start = self.truncation_point(theta, policy)
        cap = policy.hard_cap
        found = self._first_below(theta, start, cap, self.score_tail, policy.mass_tolerance)
        if found is not None:
            return found
        raise TruncationError(
            "{}(theta={!r}) score-weighted tail exceeds {} at hard cap {}".format(
                self.name, theta, policy.mass_tolerance, cap),
            achieved_mass=1.0 - float(self.survival(theta, cap)), cap=cap)

    def support(self, theta, policy=None):
        return np.arange(self.support_origin, self.series_point(theta, policy) + 1)

    # -- sampling ----------------------------------------------------------

    def draw(self, theta, n, seed=None, policy=None):
        """n i.i.d. draws by inversion of the truncated cdf."""
        if n < 1:
            raise DomainError("sample size must be >= 1, got {!r}".format(n))
        x = self.support(theta, policy)
        cdf = np.cumsum(np.exp(self.log_pmf(theta, x)))
        rng = np.random.default_rng(seed)
        idx = np.searchsorted(cdf, rng.random(int(n)), side="right")
        return x[np.minimum(idx, x.size - 1)]

    def sample(self, theta, n, seed=None, policy=None):
        from .estimation import FrequencyTable
        return FrequencyTable.from_observations(self.draw(theta, n, seed, policy))

    # -- solver plumbing ---------------------------------------------------

    def to_unconstrained(self, theta):
        raise NotImplementedError

    def from_unconstrained(self, eta):
        raise NotImplementedError

    def jacobian(self, theta):
        """d theta / d eta at theta."""
        raise NotImplementedError

    def clip(self, theta, margin=1e-8):
        lower, upper = self.param_space
        if np.isfinite(lower):
            theta = max(theta, lower + margin)
        if np.isfinite(upper):
            theta = min(theta, upper - margin)
        return theta

    def closed_form_mle(self, pmf):
        raise NotImplementedError

    def median_matching_estimate(self, pmf):
        raise NotImplementedError

    def seed_grid(self, pmf):
        """Five points spread evenly over the unconstrained scale."""
        raise NotImplementedError


class Poisson(ModelSpec):
    """Poisson(theta) on {0, 1, 2, ...}."""
    name = "poisson"
    param_space = (0.0, np.inf)
    support_origin = 0

    def log_pmf(self, theta, x):
        self.check_theta(theta)
        self.check_support(x)
        x = np.asarray(x, dtype=float)
        return x * np.log(theta) - theta - special.gammaln(x + 1.0)

    def _score(self, theta, x, order):
        if order == 1:
            return x / theta - 1.0
        if order == 2:
            return -x / theta ** 2
        return 2.0 * x / theta ** 3

    def survival(self, theta, t):
        return special.pdtrc(np.asarray(t, dtype=float), theta)

    def fisher_closed_form(self, theta):
        return 1.0 / theta

    def to_unconstrained(self, theta):
        return float(np.log(theta))

    def from_unconstrained(self, eta):
        return float(np.exp(eta))

    def jacobian(self, theta):
        return theta

    def closed_form_mle(self, pmf):
        return self.clip(pmf.mean())

    def median_matching_estimate(self, pmf):
        # median of Poisson(theta) is close to theta + 1/3
        m = pmf.median()
        if m == 0:
            return float(np.log(2.0))
        return self.clip(m - 1.0 / 3.0)

    def seed_grid(self, pmf):
        return list(np.geomspace(0.05, max(2.0, float(pmf.max_point)), 5))


class Geometric(ModelSpec):
    """Geometric(theta), number of trials to the first success, on {1, 2, ...}."""
    name = "geometric"
    param_space = (0.0, 1.0)
    support_origin = 1

    def log_pmf(self, theta, x):
        self.check_theta(theta)
        self.check_support(x)
        x = np.asarray(x, dtype=float)
        return np.log(theta) + (x - 1.0) * np.log1p(-theta)

    def _score(self, theta, x, order):
        if order == 1:
            return 1.0 / theta - (x - 1.0) / (1.0 - theta)
        if order == 2:
            return -1.0 / theta ** 2 - (x - 1.0) / (1.0 - theta) ** 2
        return 2.0 / theta ** 3 - 2.0 * (x - 1.0) / (1.0 - theta) ** 3

    def survival(self, theta, t):
        t = np.asarray(t, dtype=float)
        return np.exp(np.maximum(t - self.support_origin + 1.0, 0.0) * np.log1p(-theta))

    def fisher_closed_form(self, theta):
        return 1.0 / (theta ** 2 * (1.0 - theta))

    @staticmethod
    def _t(theta, a):
        return -np.expm1((1.0 + a) * np.log1p(-theta))

    def _curvature(self, theta, a):
        # sum_x u^2 f^(1+a); the denominator carries t^3
        t = self._t(theta, a)
        num = t * t - theta * (theta + 2.0) * t + 2.0 * theta ** 2
        return theta ** (a - 1.0) * num / ((1.0 - theta) ** 2 * t ** 3)

    def closed_form_J(self, theta, alpha):
        return float(self._curvature(theta, alpha))

    def closed_form_xi(self, theta, alpha):
        t = self._t(theta, alpha)
        return float(theta ** alpha * (-np.expm1(alpha * np.log1p(-theta))) / t ** 2)

    def closed_form_V(self, theta, alpha):
        return float(self._curvature(theta, 2.0 * alpha) - self.closed_form_xi(theta, alpha) ** 2)

    def to_unconstrained(self, theta):
        return float(special.logit(theta))

    def from_unconstrained(self, eta):
        return float(special.expit(eta))

    def jacobian(self, theta):
        return theta * (1.0 - theta)

    def closed_form_mle(self, pmf):
        return self.clip(1.0 / pmf.mean())

    def median_matching_estimate(self, pmf):
        m = max(pmf.median(), 1)
        return self.clip(1.0 - 2.0 ** (-1.0 / m))

    def seed_grid(self, pmf):
        return [float(v) for v in special.expit(np.linspace(-4.0, 4.0, 5))]


MODELS = {
    'poisson': Poisson(),
    'geometric': Geometric(),
}


def get_model(name):
    try:
        return MODELS[name.lower()]
    except (KeyError, AttributeError):
        raise DomainError("unknown model {!r}; choose from {}".format(name, ", ".join(MODELS)))


def pmf(model, theta, x):
    return model.pmf(theta, x)


def score(model, theta, x, order=1):
    return model.score(theta, x, order)


def fisher_information(model, theta):
    return model.fisher_information(theta)


def truncation_point(model, theta, policy=None):
    return model.truncation_point(theta, policy)


def sample(model, theta, n, seed, policy=None):
    """n draws aggregated into a FrequencyTable, reproducible from ``seed``."""
    return model.sample(theta, n, seed, policy)
