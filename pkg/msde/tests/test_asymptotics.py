import warnings
from unittest import TestCase

import numpy as np
from numpy.testing import assert_allclose
from scipy import special

from msde.asymptotics import (are, are_table, asymptotic_report, contaminated_sandwich, general_Jg_Vg, model_J,
                              model_V, model_xi, sandwich_variance, std_error)
from msde.divergence import DivergenceParams, PmfVector
from msde.estimation import FitResult, FrequencyTable
from msde.exceptions import CrossCheckWarning, DegenerateInformation, DomainError, UndefinedDivergence
from msde.models import Geometric, Poisson
from msde.simulation import mixture_pmf

ARE_ALPHAS = [0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 1.0]

POISSON_ARE = {
    2: [100, 99.62, 98.77, 93.06, 86.15, 79.55, 71.17],
    3: [100, 99.66, 98.82, 92.86, 85.18, 77.42, 68.22],
    5: [100, 99.61, 98.80, 92.38, 84.19, 76.96, 66.47],
    10: [100, 99.66, 98.75, 92.07, 83.86, 76.07, 65.69],
    15: [100, 99.66, 98.83, 92.09, 83.76, 75.71, 65.59],
}

GEOMETRIC_ARE = {
    0.1: [100, 99.10, 96.78, 81.93, 68.42, 59.24, 51.06],
    0.2: [100, 99.10, 96.79, 82.01, 68.59, 59.49, 51.45],
    0.5: [100, 99.14, 96.92, 82.90, 70.37, 62.19, 55.64],
    0.7: [100, 99.21, 97.19, 84.71, 73.98, 67.54, 63.61],
    0.9: [100, 99.43, 98.03, 90.04, 84.07, 81.56, 82.15],
}


class TestEfficiencyTables(TestCase):
    def test_geometric(self):
        thetas = sorted(GEOMETRIC_ARE)
        table = are_table(Geometric(), thetas, ARE_ALPHAS)
        for theta, row in zip(thetas, table):
            assert_allclose(row, GEOMETRIC_ARE[theta], atol=0.10)

    def test_poisson(self):
        # the printed Poisson rows drift from the exact sums by up to about 0.4
        thetas = sorted(POISSON_ARE)
        table = are_table(Poisson(), thetas, ARE_ALPHAS)
        for theta, row in zip(thetas, table):
            assert_allclose(row, POISSON_ARE[theta], atol=0.5)

    def test_decreasing_in_alpha(self):
        for model, theta in ((Poisson(), 4.0), (Geometric(), 0.3)):
            values = [are(model, theta, alpha) for alpha in ARE_ALPHAS]
            self.assertTrue(all(a > b for a, b in zip(values, values[1:])), values)


class TestModelCase(TestCase):
    def test_alpha_zero_is_fisher(self):
        for model, theta in ((Poisson(), 3.0), (Geometric(), 0.4)):
            fisher = model.fisher_information(theta)
            self.assertAlmostEqual(model_J(model, theta, 0.0), fisher, places=9)
            self.assertAlmostEqual(model_V(model, theta, 0.0), fisher, places=9)
            self.assertAlmostEqual(model_xi(model, theta, 0.0), 0.0, places=9)
            self.assertAlmostEqual(sandwich_variance(model, theta, 0.0), 1.0 / fisher, places=9)
            self.assertAlmostEqual(are(model, theta, 0.0), 100.0, places=6)

    def test_poisson_against_explicit_series(self):
        theta, alpha = 2.5, 0.4
        x = np.arange(0, 200)
        logf = x * np.log(theta) - theta - special.gammaln(x + 1)
        u = x / theta - 1.0
        J = np.sum(u ** 2 * np.exp((1 + alpha) * logf))
        xi = np.sum(u * np.exp((1 + alpha) * logf))
        V = np.sum(u ** 2 * np.exp((1 + 2 * alpha) * logf)) - xi ** 2
        self.assertAlmostEqual(model_J(Poisson(), theta, alpha), J, places=12)
        self.assertAlmostEqual(model_xi(Poisson(), theta, alpha), xi, places=12)
        self.assertAlmostEqual(model_V(Poisson(), theta, alpha), V, places=12)

    def test_geometric_closed_forms_agree(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", CrossCheckWarning)
            for theta in (0.02, 0.1, 0.5, 0.9):
                for alpha in (0.0, 0.3, 1.0):
                    asymptotic_report(Geometric(), theta, alpha)

    def test_xi_vanishes_at_alpha_zero(self):
        for model, theta in ((Poisson(), 0.4), (Poisson(), 10.0), (Geometric(), 0.02), (Geometric(), 0.4)):
            self.assertLessEqual(abs(model_xi(model, theta, 0.0)), 1e-10, (model, theta))

    def test_poisson_fisher_series(self):
        self.assertLessEqual(abs(Poisson().fisher_information_series(10.0) - 0.1), 1e-10)

    def test_report(self):
        report = asymptotic_report(Poisson(), 5.0, 0.5)
        self.assertEqual(report.model, "poisson")
        self.assertAlmostEqual(report.sandwich, report.V / report.J ** 2)
        self.assertAlmostEqual(report.are_percent, 100.0 / (report.fisher * report.sandwich))

    def test_bad_alpha(self):
        with self.assertRaises(DomainError):
            model_J(Poisson(), 1.0, -0.5)
        with self.assertRaises(DomainError):
            model_V(Poisson(), -1.0, 0.5)


class TestGeneralCase(TestCase):
    def test_collapses_at_model(self):
        for model, theta in ((Poisson(), 3.0), (Geometric(), 0.35)):
            g = PmfVector.from_model(model, theta)
            for alpha, lam in ((0.3, -0.5), (0.5, 1.0), (0.0, 0.0), (0.7, 2.0)):
                J, V = general_Jg_Vg(g, model, theta, DivergenceParams(alpha, lam))
                assert_allclose(J, model_J(model, theta, alpha), rtol=1e-10)
                assert_allclose(V, model_V(model, theta, alpha), rtol=1e-10, atol=1e-14)

    def test_depends_on_lambda_under_contamination(self):
        g = mixture_pmf(Poisson(), 3.0, 0.1, 15)
        J1, _ = general_Jg_Vg(g, Poisson(), 3.0, DivergenceParams(0.3, -0.5))
        J2, _ = general_Jg_Vg(g, Poisson(), 3.0, DivergenceParams(0.3, 0.5))
        self.assertGreater(abs(J1 - J2), 1e-3)

    def test_matches_derivative_of_estimating_equation(self):
        from msde.estimation import gradient_Hn
        data = FrequencyTable.from_pairs([(0, 23), (1, 7), (2, 3), (9, 1)])
        g = data.to_pmf()
        params = DivergenceParams(0.4, 0.6)
        theta, h = 0.8, 1e-5
        slope = (gradient_Hn(data, Poisson(), theta + h, params)
                 - gradient_Hn(data, Poisson(), theta - h, params)) / (2 * h)
        J, _ = general_Jg_Vg(g, Poisson(), theta, params)
        assert_allclose(slope, J, rtol=1e-5)

    def test_zero_cells_need_positive_A(self):
        g = PmfVector(0, np.array([0.5, 0.5]))
        with self.assertRaises(UndefinedDivergence):
            general_Jg_Vg(g, Poisson(), 1.0, DivergenceParams(0.0, -1.0))
        general_Jg_Vg(g, Poisson(), 1.0, DivergenceParams(0.5, -0.5))

    def test_contaminated_sandwich_at_model(self):
        g = PmfVector.from_model(Poisson(), 4.0)
        theta_g, sandwich = contaminated_sandwich(g, Poisson(), DivergenceParams(0.5, 0.5))
        self.assertAlmostEqual(theta_g, 4.0, places=6)
        assert_allclose(sandwich, sandwich_variance(Poisson(), 4.0, 0.5), rtol=1e-6)


class TestStandardError(TestCase):
    def test_mle_standard_error(self):
        data = FrequencyTable.from_pairs([(1, 50), (3, 50)])
        result = FitResult(theta_hat=2.0, objective=0.0, grad_norm=0.0, iterations=1, seeds_tried=1,
                           converged=True)
        self.assertAlmostEqual(std_error(result, data, Poisson(), 0.0), np.sqrt(2.0 / 100), places=9)

    def test_needs_converged_fit(self):
        data = FrequencyTable.from_pairs([(1, 5)])
        result = FitResult(theta_hat=2.0, objective=0.0, grad_norm=1.0, iterations=1, seeds_tried=1,
                           converged=False)
        with self.assertRaises(DomainError):
            std_error(result, data, Poisson(), 0.0)

    def test_degenerate_curvature(self):
        from msde.asymptotics import _sandwich
        with self.assertRaises(DegenerateInformation):
            _sandwich(0.0, 1.0)
        with self.assertRaises(DegenerateInformation):
            _sandwich(float("nan"), 1.0)
