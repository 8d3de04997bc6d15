import logging
from typing import Optional, Sequence

import numpy as np

from tensors.algebra import frobenius_norm, multi_mode_dot_array, tucker_reconstruct
from tensors.dense import DenseTensor
from tensors.exceptions import InvalidDataError, InvalidScenarioError

from .domain import ArrayNormalSpec, CollinearRegressionScenario, SimulatedDataset

logger = logging.getLogger(__name__)


def replicate_seed(seed: int, index: int) -> int:
    """Independent child seed for replicate ``index`` of a run seeded with ``seed``"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


class SimulationService:
    """Synthetic designs: array-normal regressors, Tucker coefficients and SNR control"""

    @staticmethod
    def generate_array_normal(spec: ArrayNormalSpec, rng: Optional[np.random.Generator] = None) -> DenseTensor:
        """X = Z x_0 L_0 x_1 L_1 ..., with L_k the lower Cholesky factor of Sigma_k"""
        rng = rng if rng is not None else np.random.default_rng(spec.seed)
        z = rng.standard_normal(spec.shape)
        roots = [np.linalg.cholesky(spec.covariance(mode)) if spec.rhos[mode] > 0 else None
                 for mode in range(len(spec.shape))]
        return DenseTensor(multi_mode_dot_array(z, roots, range(len(spec.shape))))

    @staticmethod
    def scale_to_snr(signal, noise, target: float) -> float:
        """kappa such that ||kappa * signal||^2 / ||noise||^2 == target"""
        if not target > 0:
            raise InvalidScenarioError(f"Target SNR must be > 0, got {target}")
        signal_norm, noise_norm = frobenius_norm(signal), frobenius_norm(noise)
        if noise_norm == 0:
            raise InvalidDataError("Noise has zero norm; SNR is undefined")
        if signal_norm == 0:
            raise InvalidDataError("Signal has zero norm; no scaling reaches the target SNR")
        return float(np.sqrt(target * noise_norm ** 2 / signal_norm ** 2))

    @staticmethod
    def random_tucker_tensor(shape: Sequence[int], rank: Sequence[int], rng: np.random.Generator) -> DenseTensor:
        """Standard-normal core and factors"""
        core = rng.standard_normal(tuple(rank))
        factors = [rng.standard_normal((s, r)) for s, r in zip(shape, rank)]
        return tucker_reconstruct(core, factors)

    @staticmethod
    def smooth_pattern(height: int = 60, width: int = 48, channels: int = 3, blobs: int = 3,
                       rng: Optional[np.random.Generator] = None) -> DenseTensor:
        """
        Low-frequency picture-like coefficient

        Each channel is a weighted sum of the same separable Gaussian blobs, so
        the pattern has multilinear rank at most (blobs, blobs, min(blobs, channels)).
        """
        rng = rng if rng is not None else np.random.default_rng(0)
        rows, cols = np.arange(height), np.arange(width)
        row_profiles, col_profiles = [], []
        for _ in range(blobs):
            center_r, center_c = rng.uniform(0.2, 0.8) * height, rng.uniform(0.2, 0.8) * width
            spread_r, spread_c = rng.uniform(0.12, 0.3) * height, rng.uniform(0.12, 0.3) * width
            row_profiles.append(np.exp(-0.5 * ((rows - center_r) / spread_r) ** 2))
            col_profiles.append(np.exp(-0.5 * ((cols - center_c) / spread_c) ** 2))
        weights = rng.uniform(0.5, 1.5, size=(blobs, channels)) * rng.choice([-1.0, 1.0], size=(blobs, channels))
        pattern = np.einsum('kh,kw,kc->hwc', np.array(row_profiles), np.array(col_profiles), weights)
        return DenseTensor(pattern)

    @staticmethod
    def true_coefficient(scenario: CollinearRegressionScenario) -> DenseTensor:
        """The scenario's B; fixed by its seed so every dataset drawn from it shares B"""
        rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 0]))
        return SimulationService.random_tucker_tensor(
            scenario.input_shape + scenario.output_shape, scenario.true_rank, rng
        )

    @staticmethod
    def draw_dataset(scenario: CollinearRegressionScenario, slope: DenseTensor, rng: np.random.Generator,
                     kappa: Optional[float] = None) -> SimulatedDataset:
        """
        Y = <X, kappa * B> + E with array-normal X and standard-normal E

        kappa is solved from the target SNR unless given (holdout draws reuse
        the training kappa).
        """
        x = SimulationService.generate_array_normal(scenario.array_normal, rng)
        n_inputs = len(scenario.input_shape)
        signal = np.tensordot(x.data, slope.data, axes=(list(range(1, n_inputs + 1)), list(range(n_inputs))))
        noise = rng.standard_normal((scenario.samples,) + scenario.output_shape)
        if kappa is None:
            kappa = SimulationService.scale_to_snr(signal, noise, scenario.snr)
        realized = float(np.sum((kappa * signal) ** 2) / np.sum(noise ** 2))
        return SimulatedDataset(
            x=x,
            y=DenseTensor(kappa * signal + noise),
            slope=DenseTensor(kappa * slope.data),
            kappa=kappa,
            realized_snr=realized,
        )
