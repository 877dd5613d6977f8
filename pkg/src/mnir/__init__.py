"""Multinomial inverse regression for text.

Token counts are regressed onto document sentiment through a logistic
multinomial whose loadings carry gamma-lasso priors; the fitted loadings
project each document's token frequencies to low-dimensional
sufficient-reduction scores, which feed ordinary forward regressions.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    EmptyVocabularyError,
    SparseCounts,
    TokenizerConfig,
    Vocabulary,
    count,
    frequency_lift,
    tokenize,
    top_lift,
)
from .model import (  # noqa: F401
    CollapsedData,
    FactorMatrix,
    PriorSpec,
    collapse,
    collapsed_re_prior,
    neg_log_lik,
    per_document,
)
from .solver import (  # noqa: F401
    MnirFit,
    SolverConfig,
    fit,
    kkt_check,
)
from .reduction import SrScores, sr_scores  # noqa: F401
from .forward import (  # noqa: F401
    ForwardFit,
    SeparationError,
    fit_linear,
    fit_logistic,
    fit_polr,
    predict,
)
from .pls import PlsFit, pls_fit, slant_index  # noqa: F401
from .api import mnir_fit  # noqa: F401
