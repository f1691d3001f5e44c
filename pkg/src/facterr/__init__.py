"""Fine-grained factual error detection for dialogue summary sentences.

A toolkit for sentence-level multi-label factual error classification:
an unsupervised likelihood-ranking detector, synthetic corruption for
weakly supervised training data, adapters for external detector outputs,
detector ensembles, and the cross-validated evaluation protocol.
"""
from .core import (
    Dialogue,
    ErrorClass,
    GoldAnnotation,
    LabeledSpan,
    PredictionSet,
    SummarySentence,
    Utterance,
    Verifiability,
    normalize_labels,
)
from .dataset import Corpus, DialogueExample, corpus_stats, kfold_split, load_corpus, save_corpus
from .lingo import (
    AnnotatorProvider,
    CandidateSpan,
    SpanOfInterest,
    generate_candidates,
    identify_sois,
    map_role_to_class,
)
from .metrics import cohens_kappa, crossval_aggregate, evaluate
from .morph import match_verb_form
from .ranker import (
    MockScorer,
    RankerConfig,
    RankResult,
    SequenceScorer,
    detect,
    rank_soi,
    score_sentence,
    tune_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatorProvider",
    "CandidateSpan",
    "Corpus",
    "Dialogue",
    "DialogueExample",
    "ErrorClass",
    "GoldAnnotation",
    "LabeledSpan",
    "MockScorer",
    "PredictionSet",
    "RankResult",
    "RankerConfig",
    "SequenceScorer",
    "SpanOfInterest",
    "SummarySentence",
    "Utterance",
    "Verifiability",
    "cohens_kappa",
    "corpus_stats",
    "crossval_aggregate",
    "detect",
    "evaluate",
    "generate_candidates",
    "identify_sois",
    "kfold_split",
    "load_corpus",
    "map_role_to_class",
    "match_verb_form",
    "normalize_labels",
    "rank_soi",
    "save_corpus",
    "score_sentence",
    "tune_threshold",
]
