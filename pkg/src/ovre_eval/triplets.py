"""Relation triplets and their linear ``<triplet>``-separated text form.

A video is annotated with an unordered multiset of
``<subject, predicate, object>`` triplets.  For sequence models the set is
linearised as::

    cat , push , monitor <triplet> monitor , smashed on , man

Fields are joined by a field delimiter and triplets by a separator token,
both surrounded by single spaces.  :func:`parse_triplet_sequence` is the
lenient inverse used on raw model output.
"""
from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DelimiterCollision, InvalidTriplet, MalformedSegment

TokenSequence = tuple[str, ...]

FIELDS = ("subject", "predicate", "object")


@dataclass(frozen=True)
class SerializationConfig:
    triplet_separator: str = "<triplet>"
    field_delimiter: str = ","
    lowercase: bool = True
    strip_punctuation: bool = False

    def __post_init__(self):
        for name in ("triplet_separator", "field_delimiter"):
            value = getattr(self, name)
            if not value:
                raise ValueError(f"{name} must be a non-empty string")
            if any(ch.isspace() for ch in value):
                raise ValueError(f"{name} must not contain whitespace: {value!r}")
        if self.triplet_separator == self.field_delimiter:
            raise ValueError("triplet_separator and field_delimiter must differ")

    @property
    def delimiters(self) -> tuple[str, str]:
        return (self.triplet_separator, self.field_delimiter)


DEFAULT_CONFIG = SerializationConfig()


def _strip_punct(token: str) -> str:
    return "".join(ch for ch in token if not unicodedata.category(ch).startswith("P"))


def normalize_text(raw: str, cfg: SerializationConfig = DEFAULT_CONFIG) -> TokenSequence:
    """Split ``raw`` into normalised word tokens.

    Text is brought to NFC, optionally lowercased and optionally stripped of
    Unicode punctuation; tokens emptied by stripping are dropped.
    """
    text = unicodedata.normalize("NFC", raw)
    if cfg.lowercase:
        text = unicodedata.normalize("NFC", text.lower())
    tokens = text.split()
    if cfg.strip_punctuation:
        tokens = [t for t in map(_strip_punct, tokens) if t]
    return tuple(tokens)


@dataclass(frozen=True, order=True)
class Triplet:
    """One ``<subject, predicate, object>`` relation as token tuples."""

    subject: TokenSequence
    predicate: TokenSequence
    object: TokenSequence

    def __post_init__(self):
        for name in FIELDS:
            value = getattr(self, name)
            if isinstance(value, str):
                raise TypeError(f"{name} must be a token sequence, not str; use Triplet.from_text")
            value = tuple(value)
            object.__setattr__(self, name, value)
            if not value:
                raise InvalidTriplet(f"empty {name} field")
            for tok in value:
                if not tok or any(ch.isspace() for ch in tok):
                    raise InvalidTriplet(f"bad token {tok!r} in {name} field")

    @classmethod
    def from_text(cls, subject: str, predicate: str, obj: str,
                  cfg: SerializationConfig = DEFAULT_CONFIG) -> "Triplet":
        return cls(normalize_text(subject, cfg), normalize_text(predicate, cfg),
                   normalize_text(obj, cfg))

    @property
    def fields(self) -> tuple[TokenSequence, TokenSequence, TokenSequence]:
        return (self.subject, self.predicate, self.object)

    @property
    def tokens(self) -> TokenSequence:
        return self.subject + self.predicate + self.object

    def normalized(self, cfg: SerializationConfig = DEFAULT_CONFIG) -> "Triplet":
        return Triplet(*(normalize_text(" ".join(f), cfg) for f in self.fields))

    def as_dict(self) -> dict[str, str]:
        return {name: " ".join(f) for name, f in zip(FIELDS, self.fields)}

    def __str__(self):
        return "<" + ", ".join(" ".join(f) for f in self.fields) + ">"


@dataclass(frozen=True, eq=False)
class TripletSet:
    """Triplets of one video.  Equality ignores storage order (multiset)."""

    video_id: str
    triplets: tuple[Triplet, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise ValueError("video_id must be a non-empty string")
        object.__setattr__(self, "triplets", tuple(self.triplets))

    def __len__(self):
        return len(self.triplets)

    def __iter__(self):
        return iter(self.triplets)

    def counts(self) -> Counter:
        return Counter(self.triplets)

    def __eq__(self, other):
        if not isinstance(other, TripletSet):
            return NotImplemented
        return self.video_id == other.video_id and self.counts() == other.counts()

    def __hash__(self):
        return hash((self.video_id, frozenset(self.counts().items())))

    def normalized(self, cfg: SerializationConfig = DEFAULT_CONFIG) -> "TripletSet":
        return TripletSet(self.video_id, tuple(t.normalized(cfg) for t in self.triplets))


@dataclass(frozen=True)
class Diagnostic:
    index: int
    reason: str
    text: str = ""

    def __str__(self):
        return f"segment {self.index}: {self.reason}"


def _check_collision(tokens: Iterable[str], cfg: SerializationConfig) -> None:
    for tok in tokens:
        for delim in cfg.delimiters:
            if delim in tok:
                raise DelimiterCollision(f"token {tok!r} contains delimiter {delim!r}")


def serialize_triplets(triplets: Sequence[Triplet], cfg: SerializationConfig = DEFAULT_CONFIG) -> str:
    field_join = f" {cfg.field_delimiter} "
    parts = []
    for t in triplets:
        _check_collision(t.tokens, cfg)
        parts.append(field_join.join(" ".join(f) for f in t.fields))
    return f" {cfg.triplet_separator} ".join(parts)


def serialize_triplet_set(tset: TripletSet, cfg: SerializationConfig = DEFAULT_CONFIG) -> str:
    """Canonical sequence form of ``tset`` (storage order is kept)."""
    return serialize_triplets(tset.triplets, cfg)


def parse_segments(text: str, cfg: SerializationConfig = DEFAULT_CONFIG, *,
                   strict: bool = False) -> tuple[list[Triplet], list[Diagnostic]]:
    triplets: list[Triplet] = []
    diagnostics: list[Diagnostic] = []
    if not text.strip():
        return triplets, diagnostics

    for index, segment in enumerate(text.split(cfg.triplet_separator)):
        reason = None
        fields = segment.split(cfg.field_delimiter)
        if not segment.strip():
            reason = "empty segment"
        elif len(fields) != 3:
            reason = f"expected 3 fields, got {len(fields)}"
        else:
            normed = [normalize_text(f, cfg) for f in fields]
            empty = [name for name, f in zip(FIELDS, normed) if not f]
            if empty:
                reason = f"empty {'/'.join(empty)} field"
            else:
                triplets.append(Triplet(*normed))
        if reason is not None:
            if strict:
                raise MalformedSegment(index, reason)
            diagnostics.append(Diagnostic(index, reason, segment.strip()))
    return triplets, diagnostics


def parse_triplet_sequence(text: str, cfg: SerializationConfig = DEFAULT_CONFIG, *,
                           video_id: str = "sequence",
                           strict: bool = False) -> tuple[TripletSet, list[Diagnostic]]:
    """Parse a linearised triplet sequence.

    In lenient mode (the default) this never raises: malformed segments are
    skipped and reported.  With ``strict=True`` the first malformed segment
    raises :class:`MalformedSegment`.
    """
    triplets, diagnostics = parse_segments(text, cfg, strict=strict)
    return TripletSet(video_id, tuple(triplets)), diagnostics


def triplet_to_sentence(t: Triplet, template: str | None = None) -> str:
    """Plain-text form used for embedding and n-gram scoring.

    ``template`` may reference ``{subject}``, ``{predicate}`` and ``{object}``.
    """
    if template is None:
        return " ".join(t.tokens)
    return template.format(**t.as_dict())
