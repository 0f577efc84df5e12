"""``ovre`` command line: validate, stats, score, convert.

Exit codes: 0 success, 2 I/O (and usage) errors, 3 embedding provider
failure, 4 schema violations.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import (compute_stats, load_annotations, load_triplet_sets, parse_record,
                      record_to_sequence_line, sequence_line_to_record, split_report,
                      write_bipartite_csv, write_relations_csv)
from .embeddings import make_provider
from .errors import FileUnreadable, OvreError, ProviderError, SchemaError
from .metrics import Lexicon
from .scoring import ScoringConfig, explain_matching, report_from_scores, score_videos
from .triplets import SerializationConfig

EXIT_OK = 0
EXIT_IO = 2
EXIT_PROVIDER = 3
EXIT_SCHEMA = 4

log = logging.getLogger("ovre")

# option defaults; None in argparse means "not given on the command line"
DEFAULTS = {
    "strict": False,
    "top_k": 25,
    "provider": "hashed",
    "dim": 256,
    "seed": 0,
    "retries": 3,
    "backoff": 0.1,
    "timeout": 30.0,
    "workers": os.cpu_count() or 1,
    "triplet_separator": "<triplet>",
    "field_delimiter": ",",
    "lowercase": True,
    "strip_punctuation": False,
    "skip_errors": False,
    "explain": 0,
}


def _load_config_file(path) -> dict:
    import yaml

    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise FileUnreadable(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise SchemaError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict) or any(isinstance(v, (dict, list)) for v in doc.values()):
        raise SchemaError(f"config {path} must be a flat mapping of option names to values")
    return {str(k).replace("-", "_"): v for k, v in doc.items()}


def resolve_options(args: argparse.Namespace) -> argparse.Namespace:
    """Merge defaults < config file < command-line flags."""
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = vars(args).copy()
    for key, default in DEFAULTS.items():
        if key in merged and merged[key] is None:
            merged[key] = file_values.get(key, default)
    for key, value in file_values.items():
        if key in merged and merged[key] is None:
            merged[key] = value
    if "endpoint" in merged and not merged["endpoint"]:
        merged["endpoint"] = os.environ.get("OVRE_EMBED_ENDPOINT")
    return argparse.Namespace(**merged)


def _serialization(opts) -> SerializationConfig:
    return SerializationConfig(opts.triplet_separator, opts.field_delimiter,
                               bool(opts.lowercase), bool(opts.strip_punctuation))


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- validate ----------------------------------------------------------------

def cmd_validate(opts) -> int:
    cfg = _serialization(opts)
    try:
        records, diagnostics = load_annotations(opts.annotations, cfg=cfg)
    except FileUnreadable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    splits = split_report(records)
    for d in diagnostics:
        print(f"{opts.annotations}:{d}")
    for vid in splits.leaked:
        print(f"{opts.annotations}: video_id {vid!r} appears in more than one split")
    n_bad = len(diagnostics) + len(splits.leaked)
    print(f"{len(records)} valid record(s), {n_bad} violation(s)")
    if opts.strict:
        return EXIT_SCHEMA if n_bad else EXIT_OK
    # lenient: only a file without a single usable record is fatal
    return EXIT_SCHEMA if diagnostics and not records else EXIT_OK


# -- stats -------------------------------------------------------------------

def cmd_stats(opts) -> int:
    cfg = _serialization(opts)
    try:
        records, diagnostics = load_annotations(opts.annotations, cfg=cfg, strict=opts.strict)
    except FileUnreadable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    for d in diagnostics:
        print(f"warning: {opts.annotations}:{d}", file=sys.stderr)
    stats = compute_stats(records, cfg)
    splits = split_report(records)
    top_k = max(0, int(opts.top_k))
    doc = stats.to_dict(top_k=top_k)
    doc["splits"] = splits.to_dict()
    doc["n_skipped_lines"] = len(diagnostics)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    try:
        if opts.out:
            _write_text(opts.out, text)
        if opts.csv_dir:
            Path(opts.csv_dir).mkdir(parents=True, exist_ok=True)
            write_relations_csv(stats, Path(opts.csv_dir) / "relations.csv", top_k)
            write_bipartite_csv(stats, Path(opts.csv_dir) / "bipartite.csv")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not opts.out:
        sys.stdout.write(text)
    else:
        print(f"videos {stats.n_videos}  triplets {stats.n_triplets}  "
              + "  ".join(f"{k} {v}" for k, v in splits.counts.items()))
        for rank, (pred, count) in enumerate(stats.top_relations(top_k), 1):
            print(f"{rank:4d}  {count:8d}  {pred}")
    return EXIT_OK


# -- score -------------------------------------------------------------------

def _score_histograms(per_video: list[dict], bins: int = 10) -> list[list]:
    rows = []
    for metric, hi in (("bleu1", 100.0), ("meteor", 100.0), ("cider", 1000.0)):
        counts = [0] * bins
        for v in per_video:
            k = min(bins - 1, max(0, int(v[metric] / hi * bins)))
            counts[k] += 1
        for k, c in enumerate(counts):
            rows.append([metric, k * hi / bins, (k + 1) * hi / bins, c])
    return rows


def cmd_score(opts) -> int:
    if opts.provider in ("precomputed", "precomputed-file") and not opts.embeddings_file:
        print("error: --provider precomputed requires --embeddings-file", file=sys.stderr)
        return EXIT_IO
    if opts.provider in ("remote", "remote-service") and not opts.endpoint:
        print("error: --provider remote requires --endpoint or OVRE_EMBED_ENDPOINT", file=sys.stderr)
        return EXIT_IO
    if int(opts.workers) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_IO
    ser = _serialization(opts)
    try:
        gts, gt_errors, gt_warnings = load_triplet_sets(opts.gt, cfg=ser, allow_empty=False)
        preds, pred_errors, pred_warnings = load_triplet_sets(opts.pred, cfg=ser)
        lexicon = Lexicon.load(opts.lexicon) if opts.lexicon else None
    except FileUnreadable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    for name, path, diags in (("ground truth", opts.gt, gt_errors + gt_warnings),
                              ("prediction", opts.pred, pred_errors + pred_warnings)):
        for d in diags:
            print(f"warning: {name} {path}:{d}", file=sys.stderr)
    if gt_errors or pred_errors or gt_warnings:
        print("error: input files do not match the expected schema", file=sys.stderr)
        return EXIT_SCHEMA

    try:
        provider = make_provider(opts.provider, dimension=int(opts.dim), seed=int(opts.seed),
                                 embeddings_file=opts.embeddings_file, endpoint=opts.endpoint,
                                 retries=int(opts.retries), backoff=float(opts.backoff),
                                 timeout=float(opts.timeout))
        cfg = ScoringConfig(provider=provider, serialization=ser,
                            per_video_breakdown=bool(opts.per_video or opts.plot_csv),
                            template=opts.template, lexicon=lexicon,
                            workers=int(opts.workers), fail_fast=not opts.skip_errors)
        scores = score_videos(preds, gts, cfg)
        report = report_from_scores(scores, cfg, n_skipped=len(gts) - len(scores))
    except ProviderError as exc:
        print(f"error: embedding provider failed: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except FileUnreadable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SchemaError, OvreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    try:
        if opts.out:
            _write_text(opts.out, report.to_json() + "\n")
        if opts.per_video:
            _write_text(opts.per_video, "".join(json.dumps(v, sort_keys=True) + "\n"
                                                for v in report.per_video))
        if opts.plot_csv:
            Path(opts.plot_csv).parent.mkdir(parents=True, exist_ok=True)
            with open(opts.plot_csv, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["metric", "bin_low", "bin_high", "n_videos"])
                w.writerows(_score_histograms(report.per_video))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    for vs in scores[:max(0, int(opts.explain))]:
        print(explain_matching(vs))
        print()
    print(f"videos {report.n_videos}  pairs {report.n_pairs}  zero-padded {report.n_zero_padded}  "
          f"surplus predictions {report.n_unmatched_pred}  provider {report.provider_kind}")
    print(report.summary())
    return EXIT_OK


# -- convert -----------------------------------------------------------------

def cmd_convert(opts) -> int:
    cfg = _serialization(opts)
    out_lines = []
    n_bad = 0
    try:
        with open(opts.input, encoding="utf-8") as fh:
            lines = fh.readlines()
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {opts.input}: {exc}", file=sys.stderr)
        return EXIT_IO
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if opts.from_format == "jsonl":
                rec = parse_record(obj, cfg)
            else:
                rec, _ = sequence_line_to_record(obj, cfg, strict=True)
        except (ValueError, SchemaError) as exc:
            print(f"{opts.input}:line {lineno}: {exc}", file=sys.stderr)
            n_bad += 1
            continue
        if opts.to_format == "jsonl":
            out_lines.append(json.dumps(rec.to_dict(), ensure_ascii=False))
        else:
            try:
                out_lines.append(json.dumps(record_to_sequence_line(rec, cfg), ensure_ascii=False))
            except SchemaError as exc:
                print(f"{opts.input}:line {lineno}: {exc}", file=sys.stderr)
                n_bad += 1
    text = "".join(l + "\n" for l in out_lines)
    try:
        if opts.out:
            _write_text(opts.out, text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_SCHEMA if n_bad else EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat YAML/JSON file of option values (flags win)")
    p.add_argument("--triplet-separator", default=None)
    p.add_argument("--field-delimiter", default=None)
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--strip-punctuation", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ovre", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an annotation JSONL file")
    p.add_argument("annotations")
    p.add_argument("--strict", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="dataset statistics and plot-ready tables")
    p.add_argument("annotations")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--out", help="write statistics JSON here (default: stdout)")
    p.add_argument("--csv-dir", help="write relations.csv and bipartite.csv here")
    p.add_argument("--strict", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("score", help="score predictions against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--provider", choices=["hashed", "precomputed", "remote"], default=None)
    p.add_argument("--embeddings-file")
    p.add_argument("--endpoint", help="embedding service base URL (env OVRE_EMBED_ENDPOINT)")
    p.add_argument("--retries", type=int, default=None)
    p.add_argument("--backoff", type=float, default=None, help="first retry delay in seconds")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--dim", type=int, default=None, help="hashed provider dimension")
    p.add_argument("--seed", type=int, default=None, help="hashed provider seed")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--template", help="embedding text template, e.g. '{subject} {predicate} {object}'")
    p.add_argument("--lexicon", help="synonym lexicon JSONL for METEOR")
    p.add_argument("--per-video", help="write per-video breakdown JSONL here")
    p.add_argument("--plot-csv", help="write per-video score histograms CSV here")
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--explain", type=int, default=None, help="print matching tables for N videos")
    p.add_argument("--skip-errors", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("convert", help="convert between annotation JSONL and sequence JSONL")
    p.add_argument("input")
    p.add_argument("--from", dest="from_format", choices=["jsonl", "sequence"], required=True)
    p.add_argument("--to", dest="to_format", choices=["jsonl", "sequence"], required=True)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(args)
        _serialization(opts)
    except FileUnreadable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return opts.func(opts)


if __name__ == "__main__":
    sys.exit(main())
