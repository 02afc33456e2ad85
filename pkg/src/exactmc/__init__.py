"""Perfect sampling for geometrically ergodic Markov chains.

Combines a regenerative split-chain simulator, computable geometric tail
bounds on regeneration times, a rejection sampler for the mixture index,
and a smoothed Bernoulli factory into an exact i.i.d. sampler for the
stationary distribution; ships three fully worked example chains.
"""

from .bounds import (
    DriftSpec,
    TailBound,
    beta_star,
    big_M,
    d_n,
    D_total,
    make_tail_bound,
    scale_a,
)
from .factory import (
    FactoryParams,
    FactoryResult,
    curvature_bound,
    initial_power,
    run_factory,
    target_f,
)
from .model_gibbs import GibbsModel
from .model_mh import MhExpModel
from .model_ranef import RanefModel, StyreneData, styrene_dataset
from .regen import RegenerativeKernel, TourResult, draw_from_Qn, draw_tau
from .sampler import (
    DrawRecord,
    SamplerConfig,
    coin_large_a,
    coin_small_a,
    exact_draw,
    propose_T,
    uniform_ergodic_draw,
)

__version__ = "0.1.0"

__all__ = [
    "DriftSpec", "TailBound", "beta_star", "big_M", "d_n", "D_total",
    "make_tail_bound", "scale_a",
    "FactoryParams", "FactoryResult", "curvature_bound", "initial_power",
    "run_factory", "target_f",
    "GibbsModel", "MhExpModel", "RanefModel", "StyreneData",
    "styrene_dataset",
    "RegenerativeKernel", "TourResult", "draw_from_Qn", "draw_tau",
    "DrawRecord", "SamplerConfig", "coin_large_a", "coin_small_a",
    "exact_draw", "propose_T", "uniform_ergodic_draw",
    "__version__",
]
