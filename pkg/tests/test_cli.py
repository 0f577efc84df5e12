import csv
import json

import pytest

from ovre_eval.cli import main
from ovre_eval.dataset import load_triplet_sets
from ovre_eval.embeddings import hashed_ngram_embed
from ovre_eval.triplets import triplet_to_sentence
from stub_service import closed_port_url, embedding_service


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def score_json(capsys, tmp_path, *argv, name="report.json"):
    out = tmp_path / name
    code, _, err = run(capsys, "score", *argv, "--workers", 1, "--out", out)
    return code, (json.loads(out.read_text()) if code == 0 else None), err


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


class TestValidate:
    def test_clean(self, capsys, sample_path):
        code, out, _ = run(capsys, "validate", sample_path, "--strict")
        assert code == 0 and "50 valid record(s), 0 violation(s)" in out

    def test_two_field_triplet(self, capsys, tmp_path, sample_path):
        lines = sample_path.read_text().splitlines()
        bad = json.loads(lines[6])
        del bad["triplets"][0]["object"]
        lines[6] = json.dumps(bad)
        path = tmp_path / "bad.jsonl"
        path.write_text("\n".join(lines) + "\n")
        code, out, _ = run(capsys, "validate", path, "--strict")
        assert code == 4
        assert "line 7: triplet 0: missing object (got 2 of 3 fields)" in out
        code, _, _ = run(capsys, "validate", path)
        assert code == 0

    def test_nothing_usable(self, capsys, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text("{oops\n")
        assert run(capsys, "validate", path)[0] == 4

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", tmp_path / "missing.jsonl")
        assert code == 2 and "cannot read" in err


class TestStats:
    @pytest.mark.parametrize("k", [25, 3, 0])
    def test_top_k(self, capsys, sample_path, k):
        code, out, _ = run(capsys, "stats", sample_path, "--top-k", k)
        doc = json.loads(out)
        assert code == 0
        assert len(doc["relation_frequency"]) == min(k, 12)
        assert (doc["n_videos"], doc["n_triplets"]) == (50, 95)
        assert doc["splits"]["counts"] == {"train": 40, "test": 10}

    def test_csv_outputs(self, capsys, tmp_path, sample_path):
        code, out, _ = run(capsys, "stats", sample_path, "--top-k", 5, "--csv-dir", tmp_path,
                           "--out", tmp_path / "stats.json")
        assert code == 0 and out.startswith("videos 50  triplets 95")
        rows = list(csv.reader(open(tmp_path / "relations.csv")))
        assert rows[1] == ["1", "hold", "25"] and len(rows) == 6
        assert (tmp_path / "bipartite.csv").read_text().startswith("action,predicate,count\n")

    def test_missing(self, capsys, tmp_path):
        assert run(capsys, "stats", tmp_path / "nope")[0] == 2


class TestScore:
    def test_perfect(self, capsys, tmp_path, sample_path):
        code, rep, _ = score_json(capsys, tmp_path, sample_path, sample_path)
        assert code == 0
        assert (rep["bleu1"], rep["bleu2"], rep["bleu3"]) == (100.0, 100.0, 100.0)
        assert rep["n_zero_padded"] == 0 and rep["n_pairs"] == 95

    def test_empty_predictions(self, capsys, tmp_path, toy_gt_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        code, rep, _ = score_json(capsys, tmp_path, empty, toy_gt_path)
        assert code == 0
        assert [rep[k] for k in ("bleu1", "bleu2", "bleu3", "cider", "meteor")] == [0.0] * 5
        assert rep["n_zero_padded"] == 8

    def test_summary_line(self, capsys, toy_pred_path, toy_gt_path):
        code, out, _ = run(capsys, "score", toy_pred_path, toy_gt_path, "--workers", 1,
                           "--explain", 1)
        assert code == 0
        assert "surplus predictions 1" in out and "B@1  24.26" in out
        assert "video v1" in out

    def test_precomputed_equals_hashed(self, capsys, tmp_path, toy_pred_path, toy_gt_path):
        texts = {triplet_to_sentence(t) for p in (toy_pred_path, toy_gt_path)
                 for s in load_triplet_sets(p)[0] for t in s}
        emb = write_jsonl(tmp_path / "emb.jsonl", [
            {"text": t, "vector": list(hashed_ngram_embed(t, 256, 0))} for t in sorted(texts)])
        _, hashed, _ = score_json(capsys, tmp_path, toy_pred_path, toy_gt_path, name="a.json")
        code, pre, _ = score_json(capsys, tmp_path, toy_pred_path, toy_gt_path,
                                  "--provider", "precomputed", "--embeddings-file", emb,
                                  name="b.json")
        assert code == 0
        assert pre["provider_kind"] == "precomputed-file"
        for k in ("bleu1", "bleu2", "bleu3", "cider", "meteor", "n_zero_padded"):
            assert pre[k] == hashed[k]

    def test_precomputed_missing_text(self, capsys, tmp_path, toy_pred_path, toy_gt_path):
        emb = write_jsonl(tmp_path / "emb.jsonl", [{"text": "cat push monitor", "vector": [1.0, 0.0]}])
        code, _, err = run(capsys, "score", toy_pred_path, toy_gt_path, "--workers", 1,
                           "--provider", "precomputed", "--embeddings-file", emb)
        assert code == 3 and "no vector" in err

    def test_precomputed_file_missing(self, capsys, tmp_path, toy_pred_path, toy_gt_path):
        code, _, _ = run(capsys, "score", toy_pred_path, toy_gt_path, "--provider", "precomputed",
                         "--embeddings-file", tmp_path / "nope.jsonl")
        assert code == 2

    def test_remote_ok(self, capsys, tmp_path, toy_pred_path, toy_gt_path):
        _, local, _ = score_json(capsys, tmp_path, toy_pred_path, toy_gt_path,
                                 "--dim", 32, "--seed", 7, name="a.json")
        with embedding_service("ok", dim=32) as (server, url):
            code, rep, _ = score_json(capsys, tmp_path, toy_pred_path, toy_gt_path,
                                      "--provider", "remote", "--endpoint", url, name="b.json")
        assert code == 0 and rep["provider_kind"] == "remote-service"
        assert server.hits == 1
        for k in ("bleu1", "cider", "meteor", "n_zero_padded"):
            assert rep[k] == local[k]

    def test_remote_down(self, capsys, toy_pred_path, toy_gt_path):
        with embedding_service("error") as (server, url):
            code, _, err = run(capsys, "score", toy_pred_path, toy_gt_path, "--provider", "remote",
                               "--endpoint", url, "--retries", 2, "--backoff", 0, "--workers", 1)
        assert code == 3
        assert server.hits == 3
        assert "after 2 retries" in err

    def test_remote_refused(self, capsys, toy_pred_path, toy_gt_path):
        code, _, err = run(capsys, "score", toy_pred_path, toy_gt_path, "--provider", "remote",
                           "--endpoint", closed_port_url(), "--retries", 1, "--backoff", 0)
        assert code == 3 and "after 1 retries" in err

    def test_endpoint_from_env(self, capsys, tmp_path, monkeypatch, toy_pred_path, toy_gt_path):
        with embedding_service("ok") as (server, url):
            monkeypatch.setenv("OVRE_EMBED_ENDPOINT", url)
            code, rep, _ = score_json(capsys, tmp_path, toy_pred_path, toy_gt_path,
                                      "--provider", "remote")
        assert code == 0 and server.hits == 1

    def test_remote_without_endpoint(self, capsys, monkeypatch, toy_pred_path, toy_gt_path):
        monkeypatch.delenv("OVRE_EMBED_ENDPOINT", raising=False)
        assert run(capsys, "score", toy_pred_path, toy_gt_path, "--provider", "remote")[0] == 2

    def test_unknown_prediction_video(self, capsys, tmp_path, toy_gt_path):
        pred = write_jsonl(tmp_path / "p.jsonl", [{"video_id": "zzz", "sequence": "a , b , c"}])
        code, _, err = run(capsys, "score", pred, toy_gt_path, "--workers", 1)
        assert code == 4 and "absent from ground truth" in err

    def test_malformed_ground_truth(self, capsys, tmp_path, toy_pred_path):
        gt = tmp_path / "gt.jsonl"
        gt.write_text('{"video_id": "v1", "triplets": []}\n')
        assert run(capsys, "score", toy_pred_path, gt)[0] == 4

    def test_per_video_and_plot(self, capsys, tmp_path, toy_pred_path, toy_gt_path):
        code, _, _ = run(capsys, "score", toy_pred_path, toy_gt_path, "--workers", 1,
                         "--per-video", tmp_path / "pv.jsonl", "--plot-csv", tmp_path / "h.csv")
        assert code == 0
        rows = [json.loads(l) for l in (tmp_path / "pv.jsonl").read_text().splitlines()]
        assert [r["video_id"] for r in rows] == ["v1", "v2", "v3"]
        hist = list(csv.reader(open(tmp_path / "h.csv")))
        assert sum(int(r[3]) for r in hist[1:] if r[0] == "meteor") == 3


class TestConfig:
    def test_file_then_flags(self, capsys, tmp_path, sample_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("top_k: 2\n")
        code, out, _ = run(capsys, "stats", sample_path, "--config", cfg)
        assert code == 0 and len(json.loads(out)["relation_frequency"]) == 2
        code, out, _ = run(capsys, "stats", sample_path, "--config", cfg, "--top-k", 4)
        assert len(json.loads(out)["relation_frequency"]) == 4

    def test_json_config(self, capsys, tmp_path, toy_pred_path, toy_gt_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"dim": 32, "seed": 7, "workers": 1}))
        code, rep, _ = score_json(capsys, tmp_path, toy_pred_path, toy_gt_path, "--config", cfg)
        assert code == 0 and rep["provider"]["dimension"] == 32

    def test_nested_config_rejected(self, capsys, tmp_path, sample_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("score:\n  dim: 3\n")
        assert run(capsys, "stats", sample_path, "--config", cfg)[0] == 4

    def test_missing_config(self, capsys, tmp_path, sample_path):
        assert run(capsys, "stats", sample_path, "--config", tmp_path / "nope.yaml")[0] == 2

    def test_bad_delimiters(self, capsys, sample_path):
        assert run(capsys, "stats", sample_path, "--field-delimiter", "<triplet>")[0] == 2


class TestConvert:
    def test_round_trip(self, capsys, tmp_path, sample_path):
        seq = tmp_path / "seq.jsonl"
        back = tmp_path / "back.jsonl"
        assert run(capsys, "convert", sample_path, "--from", "jsonl", "--to", "sequence",
                   "--out", seq)[0] == 0
        assert run(capsys, "convert", seq, "--from", "sequence", "--to", "jsonl",
                   "--out", back)[0] == 0
        a = [json.loads(l) for l in sample_path.read_text().splitlines()]
        b = [json.loads(l) for l in back.read_text().splitlines()]
        assert a == b

    def test_malformed_line(self, capsys, tmp_path):
        src = write_jsonl(tmp_path / "s.jsonl", [
            {"video_id": "v1", "sequence": "a , b , c"},
            {"video_id": "v2", "sequence": "a , b"},
        ])
        code, out, err = run(capsys, "convert", src, "--from", "sequence", "--to", "jsonl")
        assert code == 4
        assert "line 2" in err and "expected 3 fields, got 2" in err
        assert len(out.splitlines()) == 1


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["score"])
    assert exc.value.code == 2
