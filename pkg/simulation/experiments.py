"""Coefficient-recovery and collinear-regression experiments."""
import logging
import math
from dataclasses import replace
from math import prod
from typing import Callable, Optional, Sequence

import numpy as np
from django.conf import settings

from regression.domain import RegressionSpec
from selection.domain import symmetric_rank_grid
from selection.services import ModelSelectionService
from tensors.dense import DenseTensor
from tensors.exceptions import InvalidScenarioError

from .domain import CollinearityResult, CollinearityStudy, CollinearRegressionScenario, RecoveryCell, RecoveryReport
from .services import SimulationService, replicate_seed

logger = logging.getLogger(__name__)

MACRO_LAMBDAS = (0.0, 0.5, 1.0, 5.0, 50.0)
MACRO_RANKS = symmetric_rank_grid([[1, 2, 3], [1, 2, 3, 4]])


def run_recovery_experiment(true_b, n_samples: int, noise_sd: float, rank_grid: Sequence[Sequence[int]],
                            n_input_modes: int = 1, lambdas: Sequence[float] = (0.0,), seed: Optional[int] = None,
                            base_spec: Optional[RegressionSpec] = None) -> RecoveryReport:
    """
    Regress on i.i.d. regressors through a known coefficient and score every rank

    The first ``n_input_modes`` modes of ``true_b`` are regressor modes, the rest
    response modes. Each cell reports BIC, parameter compression and the
    relative reconstruction error of the coefficient.
    """
    true_b = DenseTensor.coerce(true_b)
    if true_b.order < 2:
        raise InvalidScenarioError(f"Coefficient needs order >= 2, got {true_b.order}")
    if not 1 <= n_input_modes < true_b.order:
        raise InvalidScenarioError(f"n_input_modes must lie in [1, {true_b.order - 1}], got {n_input_modes}")
    if noise_sd < 0 or n_samples < 2:
        raise InvalidScenarioError(f"Need noise_sd >= 0 and n_samples >= 2, got {noise_sd} and {n_samples}")

    seed = settings.DEFAULT_SEED if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    input_shape, output_shape = true_b.shape[:n_input_modes], true_b.shape[n_input_modes:]
    x = rng.standard_normal((n_samples,) + input_shape)
    inputs = list(range(1, n_input_modes + 1))
    y = np.tensordot(x, true_b.data, axes=(inputs, list(range(n_input_modes))))
    y = y + noise_sd * rng.standard_normal((n_samples,) + output_shape)

    base_spec = base_spec or RegressionSpec(tucker_rank=tuple(rank_grid[0]), seed=seed)
    selection = ModelSelectionService.grid_search(x, y, rank_grid, lambdas, base_spec=base_spec)

    true_norm = float(np.linalg.norm(true_b.data))
    cells = []
    for cell in selection.cells:
        if cell.failed:
            cells.append(RecoveryCell(rank=cell.rank, lam=cell.lam, bic=math.nan, ssr=math.nan, w=0,
                                      compression=math.nan, relative_error=math.nan, converged=False,
                                      status='failed'))
            continue
        error = float(np.linalg.norm(cell.fit.coefficient.slope - true_b.data)) / true_norm
        cells.append(RecoveryCell(
            rank=cell.rank,
            lam=cell.lam,
            bic=cell.bic,
            ssr=cell.ssr,
            w=cell.w,
            compression=1.0 - cell.w / prod(true_b.shape),
            relative_error=error,
            converged=cell.converged,
        ))

    best = cells[selection.best]
    logger.info(
        f"Recovery experiment selected rank {list(best.rank)}: compression {best.compression:.1%}, "
        f"relative error {best.relative_error:.3g}"
    )
    return RecoveryReport(
        cells=tuple(cells),
        best=selection.best,
        coefficient_shape=true_b.shape,
        n_input_modes=n_input_modes,
        selection=selection,
        estimate=selection.best_fit.coefficient.reconstruct(),
    )


def run_collinearity_experiment(scenario: CollinearRegressionScenario, rank_grid: Sequence[Sequence[int]],
                                lambda_grid: Sequence[float], base_spec: Optional[RegressionSpec] = None,
                                jobs: int = 1) -> CollinearityResult:
    """Fit on one draw, score every (rank, lambda) cell by BIC on a fresh draw with the same B"""
    slope = SimulationService.true_coefficient(scenario)
    train_rng, holdout_rng = [np.random.default_rng(s) for s in np.random.SeedSequence([scenario.seed, 1]).spawn(2)]
    train = SimulationService.draw_dataset(scenario, slope, train_rng)
    holdout = SimulationService.draw_dataset(scenario, slope, holdout_rng, kappa=train.kappa)

    base_spec = base_spec or RegressionSpec(tucker_rank=tuple(rank_grid[0]), seed=scenario.seed)
    report = ModelSelectionService.grid_search(
        train.x, train.y, rank_grid, lambda_grid, scoring='holdout',
        x_val=holdout.x, y_val=holdout.y, base_spec=base_spec, jobs=jobs,
    )
    return CollinearityResult(
        scenario=scenario,
        report=report,
        kappa=train.kappa,
        realized_snr=train.realized_snr,
        holdout_energy=float(np.sum(holdout.y.data ** 2)),
    )


def run_collinearity_study(snr: float, seeds: int, rank_grid: Sequence[Sequence[int]] = MACRO_RANKS,
                           lambda_grid: Sequence[float] = MACRO_LAMBDAS, seed: Optional[int] = None,
                           scenario_factory: Callable[[float, int], CollinearRegressionScenario] = None,
                           base_spec: Optional[RegressionSpec] = None, jobs: int = 1) -> CollinearityStudy:
    """Repeat the collinearity experiment over independent replicate seeds"""
    if seeds < 1:
        raise InvalidScenarioError(f"Need at least one replicate, got {seeds}")
    seed = settings.DEFAULT_SEED if seed is None else seed
    scenario_factory = scenario_factory or CollinearRegressionScenario.macro_design

    results = []
    for index in range(seeds):
        scenario = scenario_factory(snr, replicate_seed(seed, index))
        spec = replace(base_spec, seed=scenario.seed) if base_spec is not None else None
        result = run_collinearity_experiment(scenario, rank_grid, lambda_grid, base_spec=spec, jobs=jobs)
        logger.info(f"Replicate {index + 1}/{seeds} (SNR {snr}) selected (f, g, lambda) = {result.selected}")
        results.append(result)
    return CollinearityStudy(snr=snr, results=tuple(results))
