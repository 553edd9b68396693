"""
.. module:: asymptotics
   :platform: Unix, MacOSX
   :synopsis: curvature, score variance and sandwich variance of the minimum
              S-divergence estimator, standard errors and relative efficiency

In the model case the asymptotic variance of sqrt(n)(theta_hat - theta) is
J^-1 V J^-1 with

    J  = sum u^2 f^(1+alpha)
    xi = sum u f^(1+alpha)
    V  = sum u^2 f^(1+2 alpha) - xi^2

none of which depends on lambda.

"""
import logging
import warnings
import dataclasses

import numpy as np

from .divergence import PmfVector, Regime
from .exceptions import DegenerateInformation, DomainError, UndefinedDivergence, CrossCheckWarning
from .models import DEFAULT_POLICY

logger = logging.getLogger(__name__)

CROSS_CHECK_RTOL = 1e-8


def _check_alpha(alpha):
    if not (np.isfinite(alpha) and alpha >= 0):
        raise DomainError("alpha must be finite and nonnegative, got {!r}".format(alpha))


def _model_terms(model, theta, policy):
    model.check_theta(theta)
    x = model.support(theta, policy or DEFAULT_POLICY)
    return model.log_pmf(theta, x), model.score(theta, x, 1)


def _cross_check(name, model, theta, alpha, series, closed, scale):
    """Warn when a series and its closed form disagree.

    ``scale`` is the sum of absolute terms behind ``series``; it sets the
    absolute floor, so a closed form of exactly zero is met by a series
    that cancels to rounding.
    """
    if closed is None:
        return
    if not np.isclose(series, closed, rtol=CROSS_CHECK_RTOL, atol=CROSS_CHECK_RTOL * scale):
        warnings.warn("{} of {}(theta={!r}) at alpha={!r}: series {!r} vs closed form {!r}".format(
            name, model.name, theta, alpha, series, closed), CrossCheckWarning)


def model_J(model, theta, alpha, policy=None):
    """J_alpha = sum u^2 f^(1+alpha) over the truncated support."""
    _check_alpha(alpha)
    logf, u = _model_terms(model, theta, policy)
    terms = u * u * np.exp((1.0 + alpha) * logf)
    value = float(np.sum(terms))
    _cross_check("J", model, theta, alpha, value, model.closed_form_J(theta, alpha), value)
    return value


def model_xi(model, theta, alpha, policy=None):
    _check_alpha(alpha)
    logf, u = _model_terms(model, theta, policy)
    terms = u * np.exp((1.0 + alpha) * logf)
    value = float(np.sum(terms))
    _cross_check("xi", model, theta, alpha, value, model.closed_form_xi(theta, alpha),
                 float(np.sum(np.abs(terms))))
    return value


def model_V(model, theta, alpha, policy=None):
    """V_alpha = sum u^2 f^(1+2 alpha) - xi^2."""
    _check_alpha(alpha)
    logf, u = _model_terms(model, theta, policy)
    xi = np.sum(u * np.exp((1.0 + alpha) * logf))
    second = float(np.sum(u * u * np.exp((1.0 + 2.0 * alpha) * logf)))
    value = float(second - xi * xi)
    _cross_check("V", model, theta, alpha, value, model.closed_form_V(theta, alpha), second)
    return value


def _sandwich(J, V):
    if not (np.isfinite(J) and J > 0):
        raise DegenerateInformation("J={!r} is not positive".format(J))
    return V / (J * J)


def sandwich_variance(model, theta, alpha, policy=None):
    """J^-1 V J^-1, the asymptotic variance of sqrt(n)(theta_hat - theta)."""
    return _sandwich(model_J(model, theta, alpha, policy), model_V(model, theta, alpha, policy))


def are(model, theta, alpha, policy=None):
    """Asymptotic relative efficiency against the MLE, in percent."""
    fisher = model.fisher_information(theta, policy)
    return 100.0 / fisher / sandwich_variance(model, theta, alpha, policy)


@dataclasses.dataclass(frozen=True)
class AsymptoticReport:
    model: str
    theta: float
    alpha: float
    J: float
    V: float
    xi: float
    sandwich: float
    fisher: float
    are_percent: float


def asymptotic_report(model, theta, alpha, policy=None):
    J = model_J(model, theta, alpha, policy)
    V = model_V(model, theta, alpha, policy)
    sandwich = _sandwich(J, V)
    fisher = model.fisher_information(theta, policy)
    return AsymptoticReport(model.name, float(theta), float(alpha), J, V,
                            model_xi(model, theta, alpha, policy), sandwich, fisher,
                            100.0 / fisher / sandwich)


def are_table(model, thetas, alphas, policy=None):
    """ARE percentages with one row per theta and one column per alpha."""
    return [[are(model, theta, alpha, policy) for alpha in alphas] for theta in thetas]


def general_Jg_Vg(g, model, theta_g, params, policy=None):
    """J_g and V_g of the estimating equation at a true density ``g``.

    J_g is minus the theta-derivative of sum K(delta) f^(1+alpha) u, i.e.

        J_g = sum u^2 K'(delta) f^alpha g
              - sum K(delta) f^(1+alpha) ((1 + alpha) u^2 + u')

    and V_g = sum (K'(delta) f^alpha u)^2 g - (sum K'(delta) f^alpha u g)^2,
    with delta = g / f - 1. Using K'(delta) f^alpha g = g^A f^B keeps every
    term in log space. At g = f_theta both collapse to the model-case J and V.

    Raises:
        UndefinedDivergence: A <= 0 and g vanishes somewhere on the support.
    """
    if not isinstance(g, PmfVector):
        raise DomainError("g must be a PmfVector")
    if g.min_point < model.support_origin:
        raise DomainError("g puts mass below the support origin of {}".format(model.name))
    policy = (policy or DEFAULT_POLICY).with_data_max(g.max_point)
    x = model.support(theta_g, policy)
    a1 = 1.0 + params.alpha
    A = 0.0 if params.regime is Regime.A_LIMIT_ZERO else params.A
    B = params.B
    logf = model.log_pmf(theta_g, x)
    u = model.score(theta_g, x, 1)
    u2 = model.score(theta_g, x, 2)
    gv = g.on(x)
    pos = gv > 0
    if A <= 0 and not np.all(pos):
        cell = int(x[np.flatnonzero(~pos)[0]])
        raise UndefinedDivergence("J_g undefined for {}: g=0 at x={}".format(params, cell),
                                  cell=cell, alpha=params.alpha, lam=params.lam)

    with np.errstate(over='ignore', divide='ignore'):
        logg = np.log(gv)
        fa = np.exp(a1 * logf)
        # K'(delta) f^alpha g and (K'(delta) f^alpha)^2 g; both vanish where g = 0 when A > 0
        w = np.where(pos, np.exp(A * logg + B * logf), 0.0)
        w2 = np.where(pos, np.exp((2.0 * A - 1.0) * logg + 2.0 * B * logf), 0.0)
        if A == 0.0:
            kf = fa * (logg - logf)
        else:
            lt = logg - logf
            z = np.expm1(A * lt)
            kf = np.where(pos, fa * z / A, -fa / A)
    J = float(np.sum(u * u * w) - np.sum(kf * (a1 * u * u + u2)))
    mean_score = np.sum(u * w)
    V = float(np.sum(u * u * w2) - mean_score * mean_score)
    return J, V


def contaminated_sandwich(g, model, params, options=None):
    """(theta^g, J_g^-1 V_g J_g^-1) for a known true density ``g``."""
    from .estimation import best_fitting_parameter, SolverOptions

    options = options or SolverOptions()
    theta_g = best_fitting_parameter(g, model, params, options).theta_hat
    J, V = general_Jg_Vg(g, model, theta_g, params, options.policy)
    return theta_g, _sandwich(J, V)


def std_error(fit, data, model, alpha, policy=None):
    """sqrt(J^-1 V J^-1 / n) evaluated at theta_hat."""
    if not fit.converged:
        raise DomainError("standard error needs a converged fit")
    return float(np.sqrt(sandwich_variance(model, fit.theta_hat, alpha, policy) / data.n))
