import json
import math
from dataclasses import asdict

import numpy as np
import pytest
from rest_framework.renderers import JSONRenderer

from regression.factories import RegressionSpecFactory
from tensors.codec import to_base64
from tensors.exceptions import (
    DimensionMismatchError, InsufficientSamplesError, InvalidGridError, NoViableCellError,
)

from .domain import SelectionCell, symmetric_rank_grid, uniform_rank_grid
from .serializers import SelectionReportSerializer
from .services import ModelSelectionService, bic
from .tasks import evaluate_grid_cell


@pytest.fixture
def eager_celery():
    from config.celery import app
    # Settings come from Django under the CELERY namespace, so set the namespaced key
    app.conf.CELERY_TASK_ALWAYS_EAGER = True
    yield app
    app.conf.CELERY_TASK_ALWAYS_EAGER = False


def _low_rank_problem(seed, samples=40):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((4, 2))
    v = rng.standard_normal((3, 1))
    w = rng.standard_normal((3, 2))
    core = rng.standard_normal((2, 1, 2))
    slope = np.einsum('abc,ia,jb,kc->ijk', core, u, v, w)
    x = rng.standard_normal((samples, 4, 3))
    y = np.tensordot(x, slope, axes=2)
    return x, y


def _common_factor_panel(seed, periods=150, phi=0.1, loading_sd=0.5, scale=0.3):
    """6 x 19 panel: a weakly persistent common factor plus idiosyncratic noise"""
    rng = np.random.default_rng(seed)
    loadings = loading_sd * rng.standard_normal((6, 19))
    factor = np.zeros(periods)
    for t in range(1, periods):
        factor[t] = phi * factor[t - 1] + rng.standard_normal()
    panel = factor[:, None, None] * loadings + rng.standard_normal((periods, 6, 19))
    return scale * panel


class TestBic:
    def test_zero_log_term(self):
        assert bic(100.0, 100, 10) == pytest.approx(10 * math.log(100), abs=1e-12)
        assert bic(100.0, 100, 10) == pytest.approx(46.0517, abs=1e-4)

    def test_strictly_increasing_in_parameter_count(self):
        values = [bic(3.7, 50, w) for w in range(1, 20)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_matches_hand_computation(self, rng):
        for _ in range(100):
            ssr, u, w = float(rng.uniform(0.1, 1e4)), int(rng.integers(2, 10000)), int(rng.integers(1, 500))
            expected = u * math.log(ssr / u) + w * math.log(u)
            assert abs(bic(ssr, u, w) - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_perfect_fit_is_negative_infinity(self):
        assert bic(0.0, 10, 3) == -math.inf

    def test_single_data_point(self):
        with pytest.raises(InsufficientSamplesError):
            bic(1.0, 1, 1)


class TestRankGrids:
    def test_symmetric_grid(self):
        assert symmetric_rank_grid([[1, 2], [3]]) == [(1, 3, 1, 3), (2, 3, 2, 3)]

    def test_uniform_grid(self):
        assert uniform_rank_grid([1, 2], 3) == [(1, 1, 1), (2, 2, 2)]


class TestGridSearch:
    def test_single_cell(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        report = ModelSelectionService.grid_search(x, y, [(2, 1)], [0.5])
        assert len(report.cells) == 1
        assert report.best == 0
        assert report.best_fit is not None
        assert report.best_cell.w == report.best_fit.parameter_count

    def test_cells_share_the_base_seed(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        report = ModelSelectionService.grid_search(
            x, y, [(1, 1), (2, 2)], [0.0, 1.0], base_spec=RegressionSpecFactory(seed=9)
        )
        assert {cell.fit.spec.seed for cell in report.cells} == {9}
        assert [(cell.rank, cell.lam) for cell in report.cells] == [
            ((1, 1), 0.0), ((1, 1), 1.0), ((2, 2), 0.0), ((2, 2), 1.0)
        ]

    def test_train_ssr_grows_with_shrinkage(self, rng):
        x = rng.standard_normal((100, 4))
        y = x @ rng.standard_normal((4, 3)) + rng.standard_normal((100, 3))
        report = ModelSelectionService.grid_search(
            x, y, [(4, 3)], [0.0, 10.0, 1e6], base_spec=RegressionSpecFactory(regularize_core=True)
        )
        ssrs = [cell.ssr for cell in report.cells]
        assert ssrs[0] <= ssrs[1] * (1 + 1e-10)
        assert ssrs[1] <= ssrs[2] * (1 + 1e-10)

    def test_best_ignores_enumeration_order(self, rng):
        x = rng.standard_normal((40, 3, 2))
        y = np.tensordot(x, rng.standard_normal((3, 2, 2)), axes=2) + rng.standard_normal((40, 2))
        ranks = [(1, 1, 1), (2, 1, 2), (3, 2, 2)]
        lambdas = [0.0, 0.5, 5.0]
        forward = ModelSelectionService.grid_search(x, y, ranks, lambdas)
        backward = ModelSelectionService.grid_search(x, y, ranks[::-1], lambdas[::-1])
        assert forward.best_cell.rank == backward.best_cell.rank
        assert forward.best_cell.lam == backward.best_cell.lam

    def test_exact_fits_tie_and_the_smaller_model_wins(self):
        x, y = _low_rank_problem(0)
        spec = RegressionSpecFactory(init='hosvd')
        report = ModelSelectionService.grid_search(x, y, [(3, 3, 3), (2, 1, 2)], [0.0], base_spec=spec)
        assert all(cell.perfect_fit for cell in report.cells)
        assert all(cell.bic == -math.inf for cell in report.cells)
        assert report.best_cell.rank == (2, 1, 2)
        assert 'tied' in report.tie_break_note

    def test_noise_free_data_selects_true_rank(self):
        hits = 0
        for seed in range(20):
            x, y = _low_rank_problem(seed)
            report = ModelSelectionService.grid_search(
                x, y, [(1, 1, 1), (2, 1, 2), (2, 2, 2), (3, 3, 3)], [0.0],
                base_spec=RegressionSpecFactory(init='hosvd', seed=seed),
            )
            hits += report.best_cell.rank == (2, 1, 2)
        assert hits >= 19

    def test_failed_cells_are_skipped(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        report = ModelSelectionService.grid_search(x, y, [(5, 1), (2, 1)], [0.0])
        assert report.cells[0].failed
        assert 'Rank' in report.cells[0].error
        assert report.best_cell.rank == (2, 1)
        assert len(report.failed_cells) == 1

    def test_all_cells_failing(self, rng):
        with pytest.raises(NoViableCellError):
            ModelSelectionService.grid_search(rng.standard_normal((30, 3)), rng.standard_normal((30, 2)), [(5, 1)], [0.0])

    def test_empty_grid(self, rng):
        with pytest.raises(InvalidGridError):
            ModelSelectionService.grid_search(rng.standard_normal((30, 3)), rng.standard_normal((30, 2)), [], [0.0])

    def test_negative_lambda(self, rng):
        with pytest.raises(InvalidGridError):
            ModelSelectionService.grid_search(rng.standard_normal((30, 3)), rng.standard_normal((30, 2)), [(1, 1)], [-1.0])

    def test_holdout_scoring_uses_predictions(self, rng):
        slope = rng.standard_normal((3, 2))
        x, x_val = rng.standard_normal((50, 3)), rng.standard_normal((20, 3))
        y = x @ slope + rng.standard_normal((50, 2))
        y_val = x_val @ slope + rng.standard_normal((20, 2))
        report = ModelSelectionService.grid_search(x, y, [(3, 2)], [0.0], scoring='holdout', x_val=x_val, y_val=y_val)
        cell = report.best_cell
        predictions = cell.fit.intercept.data + x_val @ cell.fit.coefficient.slope
        assert cell.u == 40
        assert cell.ssr == pytest.approx(np.sum((y_val - predictions) ** 2), rel=1e-12)
        assert cell.bic == pytest.approx(bic(cell.ssr, 40, cell.w), rel=1e-12)

    def test_sample_count_as_data_points(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        report = ModelSelectionService.grid_search(x, y, [(1, 1)], [0.0], u_mode='samples')
        assert report.best_cell.u == 30

    def test_holdout_shape_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            ModelSelectionService.grid_search(
                rng.standard_normal((30, 3)), rng.standard_normal((30, 2)), [(1, 1)], [0.0],
                scoring='holdout', x_val=rng.standard_normal((10, 4)), y_val=rng.standard_normal((10, 2)),
            )

    @pytest.mark.slow
    def test_macro_style_panel_selects_rank_one_with_the_strongest_shrinkage(self):
        """150 x 6 x 19 lagged panel scored on its last 50 periods; 5 panels rather than one"""
        lambdas = [0.0, 0.5, 1.0, 2.5, 5.0]
        hits = 0
        for seed in range(5):
            panel = _common_factor_panel(seed)
            report = ModelSelectionService.grid_search(
                panel[:99], panel[1:100], symmetric_rank_grid([[1, 2], [1, 2]]), lambdas,
                scoring='holdout', x_val=panel[99:149], y_val=panel[100:150],
                base_spec=RegressionSpecFactory(init='hosvd', seed=seed),
            )
            best = report.best_cell
            hits += best.rank == (1, 1, 1, 1) and best.lam == max(lambdas)
        assert hits >= 3


@pytest.mark.django_db
class TestDistributedCells:
    def test_task_scores_a_cell(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        spec = RegressionSpecFactory(tucker_rank=(2, 1), seed=4)
        record = evaluate_grid_cell({'x': to_base64(x), 'y': to_base64(y), 'index': 3, 'spec': asdict(spec)})
        local = ModelSelectionService.evaluate_cell(3, x, y, spec)
        assert record['index'] == 3
        assert record['rank'] == [2, 1]
        assert record['bic'] == local.bic
        assert SelectionCell.from_record(record).w == local.w

    def test_group_dispatch_matches_in_process(self, rng, eager_celery):
        x = rng.standard_normal((30, 3, 2))
        y = rng.standard_normal((30, 2))
        ranks, lambdas = [(1, 1, 1), (2, 2, 1)], [0.0, 1.0]
        local = ModelSelectionService.grid_search(x, y, ranks, lambdas, jobs=1)
        remote = ModelSelectionService.grid_search(x, y, ranks, lambdas, jobs=2)
        assert [c.bic for c in remote.cells] == [c.bic for c in local.cells]
        assert remote.best == local.best
        assert remote.best_fit is not None


class TestReportSerializer:
    def test_non_finite_bic_renders_as_null(self):
        x, y = _low_rank_problem(1)
        report = ModelSelectionService.grid_search(x, y, [(2, 1, 2)], [0.0], base_spec=RegressionSpecFactory(init='hosvd'))
        document = json.loads(JSONRenderer().render(SelectionReportSerializer(report).data))
        assert document['best']['bic'] is None
        assert document['best']['perfect_fit'] is True
        assert len(document['cells']) == 1
        assert document['failed_count'] == 0

    def test_rows_name_input_and_output_ranks(self, rng):
        report = ModelSelectionService.grid_search(rng.standard_normal((30, 3)), rng.standard_normal((30, 2)), [(2, 1)], [0.5])
        row = report.rows()[0]
        assert row['f1'] == 2 and row['g1'] == 1
        assert row['lambda'] == 0.5
        assert row['best'] is True
