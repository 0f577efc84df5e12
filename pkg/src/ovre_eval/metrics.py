"""Caption metrics over (candidate, single reference) token pairs.

Each reference has exactly one candidate.  An empty candidate stands for an
unmatched ground-truth triplet and scores zero everywhere.  Scores are
reported on a x100 scale.

BLEU is pooled at corpus level: clipped n-gram counts and lengths are summed
over all pairs before the geometric mean and brevity penalty, so the pooled
statistics form a monoid (:class:`BleuStats` supports ``+``).
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from .errors import EmptyCorpus, FileUnreadable, SchemaError

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
CIDER_SIGMA = 6.0
CIDER_MAX_N = 4


@dataclass(frozen=True)
class MatchedPair:
    candidate: tuple[str, ...]
    reference: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidate", tuple(self.candidate))
        object.__setattr__(self, "reference", tuple(self.reference))
        if not self.reference:
            raise SchemaError("reference must be non-empty")

    @classmethod
    def from_text(cls, candidate: str, reference: str) -> "MatchedPair":
        return cls(tuple(candidate.split()), tuple(reference.split()))

    @property
    def is_padding(self) -> bool:
        return not self.candidate


def ngram_profile(tokens: Sequence[str], max_n: int) -> dict[int, Counter]:
    """Sliding-window n-gram counts for orders ``1..max_n``."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    tokens = tuple(tokens)
    return {n: Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))
            for n in range(1, max_n + 1)}


def _require_pairs(pairs) -> list[MatchedPair]:
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("no pairs to score")
    return pairs


# -- BLEU --------------------------------------------------------------------

@dataclass(frozen=True)
class BleuStats:
    max_n: int
    correct: tuple[int, ...]
    guess: tuple[int, ...]
    cand_len: int
    ref_len: int

    @classmethod
    def of_pair(cls, pair: MatchedPair, max_n: int = 3) -> "BleuStats":
        cand = ngram_profile(pair.candidate, max_n)
        ref = ngram_profile(pair.reference, max_n)
        correct = tuple(sum(min(c, ref[n][g]) for g, c in cand[n].items())
                        for n in range(1, max_n + 1))
        guess = tuple(max(0, len(pair.candidate) - n + 1) for n in range(1, max_n + 1))
        return cls(max_n, correct, guess, len(pair.candidate), len(pair.reference))

    def __add__(self, other: "BleuStats") -> "BleuStats":
        if self.max_n != other.max_n:
            raise ValueError("cannot merge BLEU stats of different orders")
        return BleuStats(self.max_n,
                         tuple(a + b for a, b in zip(self.correct, other.correct)),
                         tuple(a + b for a, b in zip(self.guess, other.guess)),
                         self.cand_len + other.cand_len, self.ref_len + other.ref_len)

    def score(self, n: int | None = None) -> float:
        """B@n on the 0..100 scale, no smoothing."""
        n = self.max_n if n is None else n
        if not 1 <= n <= self.max_n:
            raise ValueError(f"order {n} outside 1..{self.max_n}")
        log_p = 0.0
        for k in range(n):
            if self.correct[k] == 0 or self.guess[k] == 0:
                return 0.0
            log_p += math.log(self.correct[k] / self.guess[k])
        bp = 1.0 if self.cand_len >= self.ref_len else math.exp(1.0 - self.ref_len / self.cand_len)
        return 100.0 * bp * math.exp(log_p / n)


def bleu_stats(pairs: Iterable[MatchedPair], max_n: int = 3) -> BleuStats:
    total = BleuStats(max_n, (0,) * max_n, (0,) * max_n, 0, 0)
    for p in pairs:
        total = total + BleuStats.of_pair(p, max_n)
    return total


def bleu_corpus(pairs: Iterable[MatchedPair], max_n: int = 3) -> float:
    if not 1 <= max_n <= 3:
        raise ValueError("max_n must be in 1..3")
    return bleu_stats(_require_pairs(pairs), max_n).score(max_n)


# -- CIDEr-D -----------------------------------------------------------------

def document_frequency(references: Iterable[Sequence[str]], max_n: int = CIDER_MAX_N) -> Counter:
    df: Counter = Counter()
    for ref in references:
        for counts in ngram_profile(ref, max_n).values():
            df.update(counts.keys())
    return df


class CiderD:
    """CIDEr-D with IDF taken from the reference side of one evaluation.

    Every reference sentence is one IDF document.  ``score_pair`` returns
    the usual value (order-averaged clipped TF-IDF cosine times 10);
    ``scale`` converts corpus means to the reported scale.
    """

    def __init__(self, references: Iterable[Sequence[str]], max_n: int = CIDER_MAX_N,
                 sigma: float = CIDER_SIGMA):
        refs = [tuple(r) for r in references]
        self.max_n = max_n
        self.sigma = sigma
        self.n_docs = len(refs)
        self.df = document_frequency(refs, max_n)
        self.log_n_docs = math.log(float(max(1, self.n_docs)))

    def idf(self, ngram: tuple[str, ...]) -> float:
        return self.log_n_docs - math.log(max(1.0, float(self.df.get(ngram, 0))))

    def _vector(self, tokens):
        vecs = []
        norms = []
        for n, counts in ngram_profile(tokens, self.max_n).items():
            vec = {g: tf * self.idf(g) for g, tf in counts.items()}
            vecs.append(vec)
            norms.append(math.sqrt(math.fsum(w * w for w in vec.values())))
        return vecs, norms

    def score_pair(self, pair: MatchedPair) -> float:
        if not pair.candidate:
            return 0.0
        vh, nh = self._vector(pair.candidate)
        vr, nr = self._vector(pair.reference)
        delta = len(pair.candidate) - len(pair.reference)
        penalty = math.exp(-(delta * delta) / (2.0 * self.sigma ** 2))
        per_order = []
        for k in range(self.max_n):
            if nh[k] == 0.0 or nr[k] == 0.0:
                per_order.append(0.0)
                continue
            dot = math.fsum(min(w, vr[k].get(g, 0.0)) * vr[k].get(g, 0.0) for g, w in vh[k].items())
            per_order.append(penalty * dot / (nh[k] * nr[k]))
        return 10.0 * math.fsum(per_order) / self.max_n


def cider_corpus(pairs: Iterable[MatchedPair], sigma: float = CIDER_SIGMA,
                 scale: float = 100.0) -> float:
    """Mean CIDEr-D over pairs, multiplied by ``scale`` (reported x100)."""
    pairs = _require_pairs(pairs)
    scorer = CiderD([p.reference for p in pairs], sigma=sigma)
    return scale * math.fsum(scorer.score_pair(p) for p in pairs) / len(pairs)


# -- METEOR ------------------------------------------------------------------

@lru_cache(maxsize=None)
def _stemmer():
    from nltk.stem.porter import PorterStemmer
    return PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=200_000)
def porter_stem(word: str) -> str:
    return _stemmer().stem(word)


class Lexicon:
    """Symmetric synonym table for the optional METEOR synonym stage."""

    def __init__(self, synonyms: dict[str, Iterable[str]] | None = None):
        self._syn: dict[str, set[str]] = {}
        for word, syns in (synonyms or {}).items():
            for s in syns:
                self._syn.setdefault(word, set()).add(s)
                self._syn.setdefault(s, set()).add(word)

    @classmethod
    def load(cls, path) -> "Lexicon":
        table: dict[str, list[str]] = {}
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise FileUnreadable(f"cannot read lexicon {path}: {exc.strerror or exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    word, syns = obj["word"], obj["synonyms"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise SchemaError(f"{path}:{lineno}: bad lexicon record ({exc})") from exc
                if not isinstance(word, str) or not isinstance(syns, list):
                    raise SchemaError(f"{path}:{lineno}: bad lexicon record")
                table.setdefault(word, []).extend(syns)
        return cls(table)

    def are_synonyms(self, a: str, b: str) -> bool:
        return b in self._syn.get(a, ())

    def __len__(self):
        return len(self._syn)


MatchFn = Callable[[str, str], bool]


def meteor_stages(lexicon: Lexicon | None = None) -> list[tuple[str, MatchFn]]:
    stages: list[tuple[str, MatchFn]] = [
        ("exact", lambda a, b: a == b),
        ("stem", lambda a, b: porter_stem(a) == porter_stem(b)),
    ]
    if lexicon is not None:
        stages.append(("synonym", lexicon.are_synonyms))
    return stages


def align(candidate: Sequence[str], reference: Sequence[str],
          stages: Sequence[tuple[str, MatchFn]]) -> list[tuple[int, int]]:
    """Greedy staged unigram alignment.

    Each stage only sees tokens left unmatched by earlier stages.  A
    candidate token prefers the reference slot right after its left
    neighbour's match (keeps chunks long), otherwise the leftmost slot.
    """
    cand_to_ref: dict[int, int] = {}
    ref_used = [False] * len(reference)
    for _, match in stages:
        for i, tok in enumerate(candidate):
            if i in cand_to_ref:
                continue
            options = [j for j, r in enumerate(reference) if not ref_used[j] and match(tok, r)]
            if not options:
                continue
            prev = cand_to_ref.get(i - 1)
            j = prev + 1 if prev is not None and prev + 1 in options else options[0]
            cand_to_ref[i] = j
            ref_used[j] = True
    return sorted(cand_to_ref.items())


def count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_pair(pair: MatchedPair, stages=None, alpha: float = METEOR_ALPHA,
                beta: float = METEOR_BETA, gamma: float = METEOR_GAMMA) -> float:
    """METEOR of one pair on the 0..1 scale."""
    if not pair.candidate:
        return 0.0
    alignment = align(pair.candidate, pair.reference, stages or meteor_stages())
    m = len(alignment)
    if m == 0:
        return 0.0
    precision = m / len(pair.candidate)
    recall = m / len(pair.reference)
    f_mean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = gamma * (count_chunks(alignment) / m) ** beta
    return f_mean * (1.0 - penalty)


def meteor_corpus(pairs: Iterable[MatchedPair], lexicon: Lexicon | None = None) -> float:
    pairs = _require_pairs(pairs)
    stages = meteor_stages(lexicon)
    return 100.0 * math.fsum(meteor_pair(p, stages) for p in pairs) / len(pairs)


# -- report ------------------------------------------------------------------

@dataclass
class MetricReport:
    bleu1: float
    bleu2: float
    bleu3: float
    cider: float
    meteor: float
    n_pairs: int
    n_zero_padded: int
    provider_kind: str
    n_videos: int = 0
    n_unmatched_pred: int = 0
    meteor_stages: list[str] = field(default_factory=lambda: ["exact", "stem"])
    cider_idf_source: str = "evaluation-references"
    provider: dict = field(default_factory=dict)
    config_digest: str = ""
    per_video: list[dict] | None = None

    HEADLINE = ("bleu1", "bleu2", "bleu3", "cider", "meteor")

    def headline(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.HEADLINE}

    def to_dict(self, include_per_video: bool = False) -> dict:
        d = asdict(self)
        if not include_per_video:
            d.pop("per_video")
        return d

    def to_json(self, include_per_video: bool = False) -> str:
        return json.dumps(self.to_dict(include_per_video), sort_keys=True, indent=2)

    def summary(self) -> str:
        return "  ".join(f"{label} {getattr(self, key):6.2f}" for label, key in
                         zip(("B@1", "B@2", "B@3", "CIDEr", "METEOR"), self.HEADLINE))


def corpus_metrics(pairs: Sequence[MatchedPair], lexicon: Lexicon | None = None,
                   sigma: float = CIDER_SIGMA) -> dict[str, float]:
    pairs = _require_pairs(pairs)
    stats = bleu_stats(pairs, 3)
    return {
        "bleu1": stats.score(1),
        "bleu2": stats.score(2),
        "bleu3": stats.score(3),
        "cider": cider_corpus(pairs, sigma=sigma),
        "meteor": meteor_corpus(pairs, lexicon),
    }
