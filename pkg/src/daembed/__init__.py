"""Domain-adapted word embeddings from generic and domain-specific vectors."""

from .adapt import (
    AdaptConfig,
    DaCombiner,
    DomainAdapter,
    SelectionReport,
    adapt,
    build_da_table,
    combination_objective,
    combine,
    concsvd,
    solve_combination_weights,
)
from .cca import CcaModel, LinearCCA, cca_fit, cca_fit_pairs, cca_project
from .embeddings import (
    AlignedPairSet,
    EmbeddingTable,
    Vocabulary,
    intersect,
    load_embeddings,
    save_embeddings,
)
from .evaluation import (
    DocumentEncoder,
    EvalReport,
    L2LogisticRegression,
    LabeledDataset,
    cross_validate,
    encode_documents,
    load_dataset,
    metrics,
    stratified_folds,
    train_logreg,
)
from .exceptions import (
    AlignmentError,
    ConfigError,
    DaembedError,
    DimensionError,
    NumericalError,
    ParseError,
)
from .kcca import (
    KccaModel,
    KernelCCA,
    KernelConfig,
    gaussian_gram,
    kcca_fit,
    kcca_fit_pairs,
    kcca_project,
    median_bandwidth,
)
from .lsa import LSAEmbedder, build_term_doc, lsa_train, tokenize

__version__ = "0.1.0"
