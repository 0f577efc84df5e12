"""Moments-OVRE style annotation files: loading, validation and statistics.

One JSON object per line::

    {"video_id": "...", "split": "train", "action_labels": ["falling"],
     "triplets": [{"subject": "monitor", "predicate": "smashed on", "object": "man"}]}

Sequence files hold ``{"video_id": ..., "sequence": "a , b , c <triplet> ..."}``
per line instead; :func:`load_triplet_sets` accepts either layout.
"""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import FileUnreadable, InvalidTriplet, SchemaError
from .triplets import (DEFAULT_CONFIG, FIELDS, SerializationConfig, Triplet, TripletSet,
                       normalize_text, parse_segments, serialize_triplets)

SPLITS = ("train", "test")

# counts reported for the released dataset
RELEASED_TOTALS = {"n_videos": 186_943, "n_triplets": 399_576, "train": 178_480, "test": 8_463}


@dataclass(frozen=True)
class AnnotationRecord:
    video_id: str
    split: str
    action_labels: tuple[str, ...]
    triplets: tuple[Triplet, ...]

    def to_triplet_set(self) -> TripletSet:
        return TripletSet(self.video_id, self.triplets)

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "split": self.split,
                "action_labels": list(self.action_labels),
                "triplets": [t.as_dict() for t in self.triplets]}


@dataclass(frozen=True)
class LineDiagnostic:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


def _iter_json_lines(path) -> Iterator[tuple[int, object, str | None]]:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        try:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line), None
                except json.JSONDecodeError as exc:
                    yield lineno, None, f"invalid JSON ({exc.msg})"
        except UnicodeDecodeError as exc:
            raise FileUnreadable(f"{path} is not valid UTF-8: {exc}") from exc


def _parse_triplet_dicts(items, cfg: SerializationConfig) -> tuple[Triplet, ...]:
    if not isinstance(items, list):
        raise SchemaError("'triplets' must be a list")
    out = []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaError(f"triplet {k}: expected an object")
        missing = [f for f in FIELDS if f not in item]
        if missing:
            raise SchemaError(f"triplet {k}: missing {', '.join(missing)} "
                              f"(got {sum(f in item for f in FIELDS)} of 3 fields)")
        values = [item[f] for f in FIELDS]
        if not all(isinstance(v, str) for v in values):
            raise SchemaError(f"triplet {k}: fields must be strings")
        try:
            out.append(Triplet(*(normalize_text(v, cfg) for v in values)))
        except InvalidTriplet as exc:
            raise SchemaError(f"triplet {k}: {exc}") from None
    return tuple(out)


def _video_id(obj) -> str:
    vid = obj.get("video_id")
    if not isinstance(vid, str) or not vid:
        raise SchemaError("'video_id' must be a non-empty string")
    return vid


def parse_record(obj, cfg: SerializationConfig = DEFAULT_CONFIG) -> AnnotationRecord:
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object")
    vid = _video_id(obj)
    split = obj.get("split")
    if split not in SPLITS:
        raise SchemaError(f"'split' must be one of {SPLITS}, got {split!r}")
    labels = obj.get("action_labels")
    if not isinstance(labels, list) or not all(isinstance(a, str) and a.strip() for a in labels):
        raise SchemaError("'action_labels' must be a list of non-empty strings")
    if not labels:
        raise SchemaError("empty action_labels")
    if "triplets" not in obj:
        raise SchemaError("missing 'triplets'")
    triplets = _parse_triplet_dicts(obj["triplets"], cfg)
    if not triplets:
        raise SchemaError("empty triplets")
    return AnnotationRecord(vid, split, tuple(labels), triplets)


def load_annotations(path, *, strict: bool = False,
                     cfg: SerializationConfig = DEFAULT_CONFIG
                     ) -> tuple[list[AnnotationRecord], list[LineDiagnostic]]:
    """Read an annotation JSONL file.

    Malformed lines are skipped and reported with their line number; in
    strict mode the first one raises :class:`SchemaError`.
    """
    records: list[AnnotationRecord] = []
    diagnostics: list[LineDiagnostic] = []
    seen: dict[str, int] = {}
    for lineno, obj, error in _iter_json_lines(path):
        try:
            if error:
                raise SchemaError(error)
            rec = parse_record(obj, cfg)
            if rec.video_id in seen:
                raise SchemaError(f"duplicate video_id {rec.video_id!r} "
                                  f"(lines {seen[rec.video_id]} and {lineno})")
        except SchemaError as exc:
            if strict:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            diagnostics.append(LineDiagnostic(lineno, str(exc)))
            continue
        seen[rec.video_id] = lineno
        records.append(rec)
    return records, diagnostics


def load_triplet_sets(path, *, cfg: SerializationConfig = DEFAULT_CONFIG,
                      allow_empty: bool = True
                      ) -> tuple[list[TripletSet], list[LineDiagnostic], list[LineDiagnostic]]:
    """Read triplet sets from an annotation or sequence JSONL file.

    Returns ``(sets, errors, warnings)``.  Errors are lines that could not
    be used (bad JSON, wrong layout, duplicate ids); warnings are malformed
    segments dropped from otherwise usable sequence lines.
    """
    sets: list[TripletSet] = []
    errors: list[LineDiagnostic] = []
    warnings: list[LineDiagnostic] = []
    seen: dict[str, int] = {}
    for lineno, obj, error in _iter_json_lines(path):
        try:
            if error:
                raise SchemaError(error)
            if not isinstance(obj, dict):
                raise SchemaError("expected a JSON object")
            vid = _video_id(obj)
            if "sequence" in obj:
                if not isinstance(obj["sequence"], str):
                    raise SchemaError("'sequence' must be a string")
                triplets, diags = parse_segments(obj["sequence"], cfg)
                warnings.extend(LineDiagnostic(lineno, str(d)) for d in diags)
            elif "triplets" in obj:
                triplets = _parse_triplet_dicts(obj["triplets"], cfg)
            else:
                raise SchemaError("record has neither 'triplets' nor 'sequence'")
            if not triplets and not allow_empty:
                raise SchemaError("empty triplets")
            if vid in seen:
                raise SchemaError(f"duplicate video_id {vid!r} (lines {seen[vid]} and {lineno})")
        except SchemaError as exc:
            errors.append(LineDiagnostic(lineno, str(exc)))
            continue
        seen[vid] = lineno
        sets.append(TripletSet(vid, tuple(triplets)))
    return sets, errors, warnings


# -- conversion --------------------------------------------------------------

def record_to_sequence_line(rec: AnnotationRecord, cfg: SerializationConfig = DEFAULT_CONFIG) -> dict:
    out = {"video_id": rec.video_id, "sequence": serialize_triplets(rec.triplets, cfg)}
    # carried along so that sequence -> jsonl is lossless
    out["split"] = rec.split
    out["action_labels"] = list(rec.action_labels)
    return out


def sequence_line_to_record(obj, cfg: SerializationConfig = DEFAULT_CONFIG,
                            strict: bool = True) -> tuple[AnnotationRecord, list[str]]:
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object")
    seq = obj.get("sequence")
    if not isinstance(seq, str):
        raise SchemaError("'sequence' must be a string")
    triplets, diags = parse_segments(seq, cfg, strict=strict)
    record = parse_record({
        "video_id": obj.get("video_id"),
        "split": obj.get("split", "test"),
        "action_labels": obj.get("action_labels", ["unknown"]),
        "triplets": [t.as_dict() for t in triplets],
    }, cfg)
    return record, [str(d) for d in diags]


# -- statistics --------------------------------------------------------------

def _phrase(tokens) -> str:
    return " ".join(tokens)


@dataclass
class StatsAccumulator:
    """Mergeable partial counts; ``a + b`` is commutative and associative."""

    n_videos: int = 0
    n_triplets: int = 0
    per_video: Counter = field(default_factory=Counter)
    predicates: Counter = field(default_factory=Counter)
    subjects: Counter = field(default_factory=Counter)
    objects: Counter = field(default_factory=Counter)
    action_predicate: Counter = field(default_factory=Counter)

    def add(self, rec: AnnotationRecord, cfg: SerializationConfig = DEFAULT_CONFIG) -> None:
        self.n_videos += 1
        self.n_triplets += len(rec.triplets)
        self.per_video[len(rec.triplets)] += 1
        for t in rec.triplets:
            pred = _phrase(normalize_text(_phrase(t.predicate), cfg))
            self.predicates[pred] += 1
            self.subjects[_phrase(t.subject)] += 1
            self.objects[_phrase(t.object)] += 1
            for action in rec.action_labels:
                self.action_predicate[(action, pred)] += 1

    def __add__(self, other: "StatsAccumulator") -> "StatsAccumulator":
        return StatsAccumulator(
            self.n_videos + other.n_videos, self.n_triplets + other.n_triplets,
            self.per_video + other.per_video, self.predicates + other.predicates,
            self.subjects + other.subjects, self.objects + other.objects,
            self.action_predicate + other.action_predicate)

    def finish(self) -> "DatasetStats":
        return DatasetStats(
            n_videos=self.n_videos,
            n_triplets=self.n_triplets,
            triplets_per_video=dict(sorted(self.per_video.items())),
            relation_frequency=sorted(self.predicates.items(), key=lambda kv: (-kv[1], kv[0])),
            subject_vocab_size=len(self.subjects),
            object_vocab_size=len(self.objects),
            bipartite_weights=sorted(self.action_predicate.items(),
                                     key=lambda kv: (-kv[1], kv[0])),
        )


@dataclass
class DatasetStats:
    n_videos: int
    n_triplets: int
    triplets_per_video: dict[int, int]
    relation_frequency: list[tuple[str, int]]
    subject_vocab_size: int
    object_vocab_size: int
    bipartite_weights: list[tuple[tuple[str, str], int]]

    def top_relations(self, k: int) -> list[tuple[str, int]]:
        return self.relation_frequency[:max(0, k)]

    def bipartite_for(self, action: str, k: int | None = None) -> list[tuple[str, int]]:
        rows = [(p, c) for (a, p), c in self.bipartite_weights if a == action]
        return rows if k is None else rows[:k]

    def to_dict(self, top_k: int | None = None) -> dict:
        rel = self.relation_frequency if top_k is None else self.top_relations(top_k)
        return {
            "n_videos": self.n_videos,
            "n_triplets": self.n_triplets,
            "triplets_per_video": {str(k): v for k, v in self.triplets_per_video.items()},
            "relation_frequency": [{"predicate": p, "count": c} for p, c in rel],
            "n_distinct_predicates": len(self.relation_frequency),
            "subject_vocab_size": self.subject_vocab_size,
            "object_vocab_size": self.object_vocab_size,
            "bipartite_weights": [{"action": a, "predicate": p, "count": c}
                                  for (a, p), c in self.bipartite_weights],
        }


def compute_stats(records: Iterable[AnnotationRecord],
                  cfg: SerializationConfig = DEFAULT_CONFIG) -> DatasetStats:
    acc = StatsAccumulator()
    for rec in records:
        acc.add(rec, cfg)
    return acc.finish()


@dataclass
class SplitReport:
    counts: dict[str, int]
    leaked: list[str]

    @property
    def has_leakage(self) -> bool:
        return bool(self.leaked)

    def to_dict(self) -> dict:
        return {"counts": self.counts, "leaked_video_ids": self.leaked}


def split_report(records: Sequence[AnnotationRecord]) -> SplitReport:
    counts = {s: 0 for s in SPLITS}
    by_id: dict[str, set[str]] = {}
    for rec in records:
        counts[rec.split] = counts.get(rec.split, 0) + 1
        by_id.setdefault(rec.video_id, set()).add(rec.split)
    leaked = sorted(vid for vid, splits in by_id.items() if len(splits) > 1)
    return SplitReport(counts, leaked)


def write_relations_csv(stats: DatasetStats, path, top_k: int | None = None) -> None:
    rows = stats.relation_frequency if top_k is None else stats.top_relations(top_k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "predicate", "count"])
        for rank, (pred, count) in enumerate(rows, 1):
            w.writerow([rank, pred, count])


def write_bipartite_csv(stats: DatasetStats, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["action", "predicate", "count"])
        for (action, pred), count in stats.bipartite_weights:
            w.writerow([action, pred, count])


def sample_fixture_path() -> Path:
    """Bundled 50-record annotation sample."""
    return Path(__file__).with_name("data") / "sample_annotations.jsonl"
