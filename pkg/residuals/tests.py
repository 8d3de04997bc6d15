import numpy as np
import pytest
import scipy.linalg
from rest_framework.renderers import JSONRenderer

from regression.factories import RegressionSpecFactory
from regression.services import TuckerRegressionService
from simulation.domain import ArrayNormalSpec
from simulation.services import SimulationService
from tensors.exceptions import DimensionMismatchError, InvalidDataError, NotPositiveSemidefiniteError

from .serializers import BiplotSerializer, SeparableCorrelationSetSerializer
from .services import ResidualAnalysisService, covariance_to_correlation


def _off_diagonal(matrix):
    return matrix[~np.eye(matrix.shape[0], dtype=bool)]


class TestResidualsFromFit:
    def test_matches_subtraction(self, rng):
        x, y = rng.standard_normal((30, 3, 2)), rng.standard_normal((30, 2))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(2, 2, 2)))
        residuals = ResidualAnalysisService.residuals_from_fit(fit, x, y).data
        np.testing.assert_allclose(residuals, y - TuckerRegressionService.predict(fit, x).data, rtol=0, atol=0)

    def test_perfect_fit_leaves_nothing(self, rng):
        x = rng.standard_normal((40, 3))
        y = x @ rng.standard_normal((3, 2)) + 1.5
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(3, 2)))
        residuals = ResidualAnalysisService.residuals_from_fit(fit, x, y).data
        np.testing.assert_allclose(residuals, 0.0, atol=1e-10)

    def test_shape_mismatch(self, rng):
        x, y = rng.standard_normal((20, 3)), rng.standard_normal((20, 2))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(1, 1)))
        with pytest.raises(DimensionMismatchError):
            ResidualAnalysisService.residuals_from_fit(fit, x, rng.standard_normal((20, 3)))


class TestFlipFlop:
    def test_independent_noise_has_no_correlation(self):
        e = np.random.default_rng(1).standard_normal((20000, 4, 3))
        result = ResidualAnalysisService.flip_flop(e)
        assert result.converged
        assert result.modes == (1, 2)
        for corr in result.correlations:
            assert np.max(np.abs(_off_diagonal(corr))) < 0.05

    def test_recovers_autoregressive_correlations(self):
        spec = ArrayNormalSpec(shape=(10000, 4, 3), rhos=(0.0, 0.9, 0.5), seed=11)
        e = SimulationService.generate_array_normal(spec)
        result = ResidualAnalysisService.flip_flop(e)
        assert result.converged
        for mode in (1, 2):
            np.testing.assert_allclose(result.correlation(mode), spec.covariance(mode), atol=0.1)

    def test_invariant_to_scale(self, rng):
        e = SimulationService.generate_array_normal(ArrayNormalSpec(shape=(200, 4, 3), rhos=(0.0, 0.6, 0.3), seed=2)).data
        base = ResidualAnalysisService.flip_flop(e)
        scaled = ResidualAnalysisService.flip_flop(37.5 * e)
        for a, b in zip(base.correlations, scaled.correlations):
            np.testing.assert_allclose(a, b, atol=1e-8)

    def test_correlations_are_valid(self, rng):
        result = ResidualAnalysisService.flip_flop(rng.standard_normal((50, 5, 4, 2)))
        for corr in result.correlations:
            np.testing.assert_array_equal(np.diag(corr), 1.0)
            np.testing.assert_array_equal(corr, corr.T)
            assert np.all(np.abs(corr) <= 1.0)
            assert np.linalg.eigvalsh(corr)[0] > -1e-10

    def test_size_one_mode_is_trivial(self, rng):
        result = ResidualAnalysisService.flip_flop(rng.standard_normal((30, 1, 4)))
        np.testing.assert_array_equal(result.correlation(1), [[1.0]])
        assert result.correlation(2).shape == (4, 4)

    def test_sample_mode_is_left_out_by_default(self, rng):
        result = ResidualAnalysisService.flip_flop(rng.standard_normal((6, 5, 4)))
        assert result.modes == (1, 2)
        with pytest.raises(ValueError):
            result.correlation(0)

    def test_sample_mode_on_request(self, rng):
        result = ResidualAnalysisService.flip_flop(rng.standard_normal((6, 5, 4)), include_sample_mode=True)
        assert result.modes == (0, 1, 2)
        assert result.correlation(0).shape == (6, 6)

    def test_undersampled_mode_gets_jitter(self, rng):
        result = ResidualAnalysisService.flip_flop(rng.standard_normal((2, 8)), max_iters=5)
        assert result.jittered == (1,)
        np.testing.assert_array_equal(np.diag(result.correlation(1)), 1.0)

    def test_rejects_non_finite(self, rng):
        e = rng.standard_normal((10, 3, 2))
        e[4, 1, 0] = np.nan
        with pytest.raises(InvalidDataError):
            ResidualAnalysisService.flip_flop(e)

    def test_stops_at_max_iters(self):
        spec = ArrayNormalSpec(shape=(50, 4, 3), rhos=(0.0, 0.8, 0.6), seed=3)
        result = ResidualAnalysisService.flip_flop(SimulationService.generate_array_normal(spec), max_iters=1, tol=1e-14)
        assert not result.converged
        assert result.iterations == 1
        assert len(result.change_trace) == 1

    def test_serializer_output(self, rng):
        result = ResidualAnalysisService.flip_flop(rng.standard_normal((40, 3, 2)), labels=[['a', 'b', 'c'], ['u', 'v']])
        data = SeparableCorrelationSetSerializer(result).data
        assert data['modes'] == [1, 2]
        assert data['correlations'][0][1][1] == 1.0
        assert result.mode_labels(2) == ('u', 'v')
        assert len(result.matrix_rows(1)) == 9
        assert JSONRenderer().render(data)


class TestCorrelationPca:
    def test_identity(self):
        biplot = ResidualAnalysisService.correlation_pca(np.eye(5))
        np.testing.assert_allclose(biplot.eigenvalues, 1.0)
        np.testing.assert_allclose(biplot.explained_variance, 0.2)

    def test_rank_one(self):
        biplot = ResidualAnalysisService.correlation_pca(np.ones((4, 4)))
        assert biplot.explained_variance[0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(biplot.loadings[:, 0], 1.0, atol=1e-12)

    def test_blocks_cluster(self):
        corr = scipy.linalg.block_diag(*[np.array([[1.0, 0.9], [0.9, 1.0]])] * 2)
        loadings = ResidualAnalysisService.correlation_pca(corr, labels=['a', 'b', 'c', 'd']).loadings
        within = max(np.linalg.norm(loadings[0] - loadings[1]), np.linalg.norm(loadings[2] - loadings[3]))
        between = min(np.linalg.norm(loadings[i] - loadings[j]) for i in (0, 1) for j in (2, 3))
        assert within < between

    def test_ordering_signs_and_reconstruction(self, rng):
        a = rng.standard_normal((6, 40))
        corr = covariance_to_correlation(np.cov(a))
        biplot = ResidualAnalysisService.correlation_pca(corr)
        assert np.all(np.diff(biplot.eigenvalues) <= 0)
        for k in range(2):
            column = biplot.loadings[:, k]
            assert column[np.argmax(np.abs(column))] > 0
        tail = np.sqrt(np.sum(biplot.eigenvalues[2:] ** 2))
        assert np.linalg.norm(corr - biplot.loadings @ biplot.loadings.T) <= tail + 1e-10

    def test_rows_and_serializer(self):
        biplot = ResidualAnalysisService.correlation_pca(np.eye(3), labels=['x', 'y', 'z'], mode=2)
        rows = biplot.rows()
        assert [row['label'] for row in rows] == ['x', 'y', 'z']
        assert set(rows[0]) == {'label', 'pc1', 'pc2', 'mode'}
        assert BiplotSerializer(biplot).data['labels'] == ['x', 'y', 'z']

    def test_not_positive_semidefinite(self):
        corr = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
        with pytest.raises(NotPositiveSemidefiniteError):
            ResidualAnalysisService.correlation_pca(corr)

    def test_not_square(self):
        with pytest.raises(DimensionMismatchError):
            ResidualAnalysisService.correlation_pca(np.ones((2, 3)))
