"""Set-to-set evaluation and dataset tooling for open-vocabulary video relation triplets."""

__version__ = "0.1.0"

from .assignment import BACKEND, Assignment, brute_force_assignment, solve_max_assignment
from .dataset import AnnotationRecord, compute_stats, load_annotations, split_report
from .embeddings import (EmbeddingProvider, HashedNgramProvider, PrecomputedProvider,
                         RemoteProvider, build_similarity_matrix, cosine_similarity,
                         embed_batch, hashed_ngram_embed)
from .metrics import (MatchedPair, MetricReport, bleu_corpus, cider_corpus, meteor_corpus,
                      ngram_profile)
from .scoring import ScoringConfig, explain_matching, score_corpus, score_video
from .triplets import (SerializationConfig, Triplet, TripletSet, normalize_text,
                       parse_triplet_sequence, serialize_triplet_set, triplet_to_sentence)

__all__ = [
    "BACKEND", "Assignment", "brute_force_assignment", "solve_max_assignment",
    "AnnotationRecord", "compute_stats", "load_annotations", "split_report",
    "EmbeddingProvider", "HashedNgramProvider", "PrecomputedProvider", "RemoteProvider",
    "build_similarity_matrix", "cosine_similarity", "embed_batch", "hashed_ngram_embed",
    "MatchedPair", "MetricReport", "bleu_corpus", "cider_corpus", "meteor_corpus",
    "ngram_profile", "ScoringConfig", "explain_matching", "score_corpus", "score_video",
    "SerializationConfig", "Triplet", "TripletSet", "normalize_text", "parse_triplet_sequence",
    "serialize_triplet_set", "triplet_to_sentence",
]
