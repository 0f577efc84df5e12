"""End-to-end set-to-set scoring of predicted triplet sets.

Per video: embed the triplet sentences, build the prediction x ground-truth
cosine matrix, solve the maximum-weight assignment and turn it into
(candidate, reference) pairs.  Every ground-truth triplet yields exactly one
pair; unmatched ones get an empty candidate and therefore score zero.
Surplus predictions are left out of the metric pools and only counted.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .assignment import Assignment, solve_max_assignment
from .embeddings import EmbeddingProvider, HashedNgramProvider, build_similarity_matrix
from .errors import DuplicateVideoId, EmptyCorpus, EmptyGroundTruth, OvreError, VideoIdMismatch
from .metrics import (CIDER_SIGMA, CiderD, Lexicon, MatchedPair, MetricReport, bleu_stats,
                      meteor_pair, meteor_stages)
from .triplets import DEFAULT_CONFIG, SerializationConfig, TripletSet, triplet_to_sentence

log = logging.getLogger(__name__)

UNMATCHED_PREDICTION_POLICIES = ("drop",)


@dataclass
class ScoringConfig:
    provider: EmbeddingProvider = field(default_factory=HashedNgramProvider)
    serialization: SerializationConfig = DEFAULT_CONFIG
    unmatched_prediction_policy: str = "drop"
    per_video_breakdown: bool = False
    # optional "{subject} ... {object}" format for the embedded text only
    template: str | None = None
    lexicon: Lexicon | None = None
    cider_sigma: float = CIDER_SIGMA
    workers: int = 1
    fail_fast: bool = True

    def __post_init__(self):
        if self.unmatched_prediction_policy not in UNMATCHED_PREDICTION_POLICIES:
            raise ValueError(f"unsupported unmatched_prediction_policy "
                             f"{self.unmatched_prediction_policy!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def stage_names(self) -> list[str]:
        return [name for name, _ in meteor_stages(self.lexicon)]

    def digest(self) -> str:
        doc = {
            "provider": self.provider.describe(),
            "serialization": asdict(self.serialization),
            "unmatched_prediction_policy": self.unmatched_prediction_policy,
            "template": self.template,
            "meteor_stages": self.stage_names(),
            "lexicon_size": len(self.lexicon) if self.lexicon is not None else 0,
            "cider_sigma": self.cider_sigma,
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class VideoScore:
    video_id: str
    assignment: Assignment
    matched_pairs: list[MatchedPair]
    n_unmatched_gt: int
    n_unmatched_pred: int
    similarity: np.ndarray
    pred_sentences: list[str]
    gt_sentences: list[str]

    @property
    def n_matched(self) -> int:
        return len(self.assignment.pairs)


def score_video(pred: TripletSet, gt: TripletSet, cfg: ScoringConfig) -> VideoScore:
    if pred.video_id != gt.video_id:
        raise VideoIdMismatch(f"prediction {pred.video_id!r} vs ground truth {gt.video_id!r}")
    if not gt.triplets:
        raise EmptyGroundTruth(f"video {gt.video_id!r} has no ground-truth triplets")
    # canonical order, so that tie-breaking (lowest index wins) cannot depend
    # on how the triplets happened to be listed
    pred_t, gt_t = sorted(pred.triplets), sorted(gt.triplets)
    S = build_similarity_matrix(pred_t, gt_t, cfg.provider, cfg.template)
    assignment = solve_max_assignment(S)
    pred_sent = [triplet_to_sentence(t) for t in pred_t]
    gt_sent = [triplet_to_sentence(t) for t in gt_t]
    pairs = [MatchedPair(pred_t[i].tokens, gt_t[j].tokens) for i, j in assignment.pairs]
    matched_gt = {j for _, j in assignment.pairs}
    pairs += [MatchedPair((), t.tokens) for j, t in enumerate(gt_t) if j not in matched_gt]
    return VideoScore(gt.video_id, assignment, pairs,
                      n_unmatched_gt=len(gt_t) - len(assignment),
                      n_unmatched_pred=len(pred_t) - len(assignment),
                      similarity=S, pred_sentences=pred_sent, gt_sentences=gt_sent)


def _index_by_id(sets: Sequence[TripletSet], what: str) -> dict[str, TripletSet]:
    out: dict[str, TripletSet] = {}
    for s in sets:
        if s.video_id in out:
            raise DuplicateVideoId(f"duplicate video_id {s.video_id!r} in {what}")
        out[s.video_id] = s
    return out


_worker_cfg: ScoringConfig | None = None


def _init_worker(cfg: ScoringConfig) -> None:
    global _worker_cfg
    _worker_cfg = cfg


def _score_chunk_in_worker(jobs):
    return _score_chunk(jobs, _worker_cfg)


def _score_chunk(jobs, cfg: ScoringConfig):
    results = []
    for pred, gt in jobs:
        try:
            results.append(score_video(pred, gt, cfg))
        except OvreError as exc:
            if cfg.fail_fast:
                raise
            results.append(exc)
    return results


def score_videos(preds: Sequence[TripletSet], gts: Sequence[TripletSet],
                 cfg: ScoringConfig) -> list[VideoScore]:
    """Score each ground-truth video (sorted by id); missing predictions count as empty."""
    gt_by_id = _index_by_id(gts, "ground truth")
    pred_by_id = _index_by_id(preds, "predictions")
    unknown = sorted(set(pred_by_id) - set(gt_by_id))
    if unknown:
        raise VideoIdMismatch(f"{len(unknown)} predicted video(s) absent from ground truth, "
                              f"e.g. {unknown[0]!r}")
    jobs = [(pred_by_id.get(vid, TripletSet(vid)), gt_by_id[vid]) for vid in sorted(gt_by_id)]

    remote = cfg.provider.kind == "remote-service"
    if remote:
        # one batched pass up front: fewer round trips, and failures surface
        # before any per-video work
        texts = {triplet_to_sentence(t, cfg.template) for p, g in jobs for t in (*p, *g)}
        cfg.provider.embed(sorted(texts))

    if cfg.workers > 1 and len(jobs) > 1:
        size = max(1, math.ceil(len(jobs) / (cfg.workers * 4)))
        chunks = [jobs[i:i + size] for i in range(0, len(jobs), size)]
        if remote:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                parts = list(pool.map(lambda c: _score_chunk(c, cfg), chunks))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker,
                                     initargs=(cfg,)) as pool:
                parts = list(pool.map(_score_chunk_in_worker, chunks))
        results = [r for part in parts for r in part]
    else:
        results = _score_chunk(jobs, cfg)

    scores = []
    for (_, gt), res in zip(jobs, results):
        if isinstance(res, Exception):
            log.warning("skipping video %s: %s", gt.video_id, res)
        else:
            scores.append(res)
    return scores


def _video_breakdown(vs: VideoScore, cider: CiderD, stages) -> dict:
    pairs = vs.matched_pairs
    stats = bleu_stats(pairs, 3)
    sims = [float(vs.similarity[i, j]) for i, j in vs.assignment.pairs]
    return {
        "video_id": vs.video_id,
        "n_gt": len(vs.gt_sentences),
        "n_pred": len(vs.pred_sentences),
        "n_matched": vs.n_matched,
        "n_unmatched_gt": vs.n_unmatched_gt,
        "n_unmatched_pred": vs.n_unmatched_pred,
        "mean_similarity": math.fsum(sims) / len(sims) if sims else None,
        "bleu1": stats.score(1),
        "bleu2": stats.score(2),
        "bleu3": stats.score(3),
        "cider": 100.0 * math.fsum(cider.score_pair(p) for p in pairs) / len(pairs),
        "meteor": 100.0 * math.fsum(meteor_pair(p, stages) for p in pairs) / len(pairs),
        "matches": [{"pred": vs.pred_sentences[i], "gt": vs.gt_sentences[j],
                     "similarity": float(vs.similarity[i, j])}
                    for i, j in sorted(vs.assignment.pairs, key=lambda ij: ij[1])],
    }


def report_from_scores(scores: Sequence[VideoScore], cfg: ScoringConfig,
                       n_skipped: int = 0) -> MetricReport:
    pairs = [p for vs in scores for p in vs.matched_pairs]
    if not pairs:
        raise EmptyCorpus("no ground-truth triplets to score")
    stages = meteor_stages(cfg.lexicon)
    cider = CiderD([p.reference for p in pairs], sigma=cfg.cider_sigma)
    stats = bleu_stats(pairs, 3)
    report = MetricReport(
        bleu1=stats.score(1),
        bleu2=stats.score(2),
        bleu3=stats.score(3),
        cider=100.0 * math.fsum(cider.score_pair(p) for p in pairs) / len(pairs),
        meteor=100.0 * math.fsum(meteor_pair(p, stages) for p in pairs) / len(pairs),
        n_pairs=len(pairs),
        n_zero_padded=sum(p.is_padding for p in pairs),
        provider_kind=cfg.provider.kind,
        n_videos=len(scores),
        n_unmatched_pred=sum(vs.n_unmatched_pred for vs in scores),
        meteor_stages=[name for name, _ in stages],
        provider=cfg.provider.describe(),
        config_digest=cfg.digest(),
    )
    if n_skipped:
        log.warning("%d video(s) skipped", n_skipped)
    if cfg.per_video_breakdown:
        report.per_video = [_video_breakdown(vs, cider, stages) for vs in scores]
    return report


def score_corpus(preds: Sequence[TripletSet], gts: Sequence[TripletSet],
                 cfg: ScoringConfig | None = None) -> MetricReport:
    cfg = cfg or ScoringConfig()
    scores = score_videos(preds, gts, cfg)
    return report_from_scores(scores, cfg, n_skipped=len({g.video_id for g in gts}) - len(scores))


def matching_rows(vs: VideoScore) -> list[tuple[str, str, float | None, bool]]:
    """(pred, gt, similarity, matched) rows, most similar first.

    Unmatched predictions are shown next to their most similar ground truth;
    zero-padded ground truths have an empty prediction and no similarity.
    """
    rows = []
    matched = vs.assignment.pred_to_gt()
    for i, sent in enumerate(vs.pred_sentences):
        if i in matched:
            j = matched[i]
            rows.append((i, j, sent, vs.gt_sentences[j], float(vs.similarity[i, j]), True))
        elif vs.gt_sentences:
            j = int(np.argmax(vs.similarity[i]))
            rows.append((i, j, sent, vs.gt_sentences[j], float(vs.similarity[i, j]), False))
    matched_gt = set(matched.values())
    for j, sent in enumerate(vs.gt_sentences):
        if j not in matched_gt:
            rows.append((len(vs.pred_sentences), j, "", sent, None, False))
    rows.sort(key=lambda r: (r[4] is None, -(r[4] or 0.0), r[0], r[1]))
    return [r[2:] for r in rows]


def explain_matching(vs: VideoScore) -> str:
    rows = matching_rows(vs)
    header = ("prediction", "ground truth", "sim", "matched")
    body = [(p, g, "" if s is None else f"{s:.4f}", "yes" if m else "no") for p, g, s, m in rows]
    widths = [max(len(str(r[k])) for r in [header] + body) for k in range(4)]
    lines = [f"video {vs.video_id}"]
    for r in [header] + body:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines)
