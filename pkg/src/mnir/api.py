"""One-call pipeline from counts and factors to a fitted model."""

from __future__ import annotations

from .corpus import SparseCounts, Vocabulary
from .model import FactorMatrix, PriorSpec, collapse, per_document
from .solver import MnirFit, SolverConfig, fit


def mnir_fit(
    counts: SparseCounts,
    factors: FactorMatrix,
    prior: PriorSpec | None = None,
    config: SolverConfig | None = None,
    standardize_factors: bool = True,
    pool: bool = True,
    vocabulary: Vocabulary | None = None,
) -> MnirFit:
    """Fit MNIR from document counts and response factors.

    Factor columns are standardized to unit variance by default (coefficient
    penalties then act on a common scale); documents sharing a factor level
    are pooled unless ``pool=False``.
    """
    prior = prior or PriorSpec()
    config = config or SolverConfig(prior=prior)
    if config.prior != prior:
        config = SolverConfig(prior=prior, tol=config.tol,
                              max_sweeps=config.max_sweeps,
                              delta_init=config.delta_init,
                              delta_floor=config.delta_floor,
                              kkt_tol=config.kkt_tol,
                              shuffle_seed=config.shuffle_seed)
    standardization = None
    if standardize_factors:
        mean = factors.values.mean(axis=0)
        sd = factors.values.std(axis=0)
        factors = factors.standardized()
        standardization = {"mean": mean.tolist(), "sd": sd.tolist()}
    data = collapse(counts, factors) if pool else per_document(counts, factors)
    result = fit(data, config)
    result.factor_names = list(factors.names)
    result.factor_standardization = standardization
    result.vocabulary = tuple(vocabulary.tokens) if vocabulary is not None else None
    return result
