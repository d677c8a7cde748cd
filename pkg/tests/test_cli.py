import json
from pathlib import Path

import pytest

from filingrisk.cli import main
from filingrisk.labeling import read_labeled_records
from filingrisk.llm import build_prompt, prompt_key


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Small synthetic corpus taken through every stage once."""
    out = tmp_path_factory.mktemp("pipeline")
    assert run("--seed", 5, "--out", out, "synth", "--n", 1500, "--neg-per-pos", 25) == 0
    assert (
        run("--seed", 5, "--out", out, "ingest", "--corpus", out / "corpus.jsonl") == 0
    )
    assert (
        run(
            "--seed", 5, "--out", out, "link",
            "--corpus", out / "corpus.jsonl",
            "--fundamentals", out / "fundamentals.csv",
        )
        == 0
    )
    assert (
        run(
            "--seed", 5, "--out", out, "label",
            "--corpus", out / "corpus.jsonl",
            "--fundamentals", out / "fundamentals.csv",
            "--linked", out / "linked.jsonl",
            "--calendar", out / "bankruptcies.csv",
            "--deflator", out / "deflator.csv",
        )
        == 0
    )
    assert run("--seed", 5, "--out", out, "split", "--labeled", out / "labeled.jsonl") == 0
    assert run("--seed", 5, "--out", out, "featurize", "--labeled", out / "labeled.jsonl") == 0
    return out


class TestPipelineStages:
    def test_stage_outputs_exist(self, pipeline_dir):
        for name in (
            "corpus.jsonl", "linked.jsonl", "labeled.jsonl", "split_summary.json",
            "features.csv", "texts.jsonl", "manifest_synth.json", "manifest_label.json",
        ):
            assert (pipeline_dir / name).exists(), name

    def test_split_summary_has_full_train(self, pipeline_dir):
        summary = json.loads((pipeline_dir / "split_summary.json").read_text())
        assert summary["full_train"]["n"] == summary["train"]["n"] + summary["validation"]["n"]

    def test_stats_command(self, pipeline_dir, tmp_path):
        assert (
            run("--seed", 5, "--out", tmp_path, "stats", "--corpus", pipeline_dir / "corpus.jsonl")
            == 0
        )
        stats = json.loads((tmp_path / "stats.json").read_text())
        assert stats["n_filings"] == 1500
        assert (tmp_path / "state_counts.csv").exists()

    def test_train_score_ensemble_evaluate(self, pipeline_dir):
        out = pipeline_dir
        assert (
            run(
                "--seed", 5, "--out", out, "train", "--family", "gbt",
                "--features", out / "features.csv",
                "--params", '{"n_trees": 20}',
            )
            == 0
        )
        assert (
            run(
                "--seed", 5, "--out", out, "train", "--family", "tfidf",
                "--texts", out / "texts.jsonl",
                "--params", '{"epochs": 150}',
            )
            == 0
        )
        for family, source_flag, source in (
            ("gbt", "--features", out / "features.csv"),
            ("tfidf", "--texts", out / "texts.jsonl"),
        ):
            for split_name in ("validation", "test"):
                assert (
                    run(
                        "--seed", 5, "--out", out, "score",
                        "--model", out / f"model_{family}.json",
                        source_flag, source, "--split", split_name,
                    )
                    == 0
                )
        assert (
            run(
                "--seed", 5, "--out", out, "ensemble",
                "--val-scores-1", out / "scores_gbt_validation.csv",
                "--val-scores-2", out / "scores_tfidf_validation.csv",
                "--test-scores-1", out / "scores_gbt_test.csv",
                "--test-scores-2", out / "scores_tfidf_test.csv",
                "--labeled", out / "labeled.jsonl",
            )
            == 0
        )
        assert (out / "meta.json").exists()
        assert (
            run(
                "--seed", 5, "--out", out / "eval", "evaluate",
                "--scores", out / "scores_ensemble_test.csv",
                "--labeled", out / "labeled.jsonl",
                "--split", "test",
            )
            == 0
        )
        metrics = (out / "eval" / "metrics.csv").read_text()
        assert metrics.count("\n") == 2  # header + one model row
        assert (
            run(
                "--seed", 5, "--out", out / "report", "report",
                "--scores", f"gbt={out / 'scores_gbt_test.csv'}",
                "--scores", f"ensemble={out / 'scores_ensemble_test.csv'}",
                "--labeled", out / "labeled.jsonl",
                "--split", "test",
            )
            == 0
        )
        assert (out / "report" / "cap.svg").exists()

    def test_file_stages_match_in_process_scoring(self, pipeline_dir):
        import numpy as np

        from filingrisk import features
        from filingrisk.models import model_from_payload, read_scores

        out = pipeline_dir
        envelope = json.loads((out / "model_gbt.json").read_text())
        ids, matrix, _, splits = features.read_feature_csv(out / "features.csv")
        mask = np.array([s == "test" for s in splits])
        expected = model_from_payload(envelope["model"]).score(matrix[mask])
        got_ids, got_scores = read_scores(out / "scores_gbt_test.csv")
        assert got_ids == [i for i, keep in zip(ids, mask) if keep]
        assert np.array_equal(got_scores, expected)

    def test_tune_uses_config_grid(self, pipeline_dir, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text(
            "seed: 5\n"
            "grids:\n"
            "  gbt:\n"
            "    n_trees: [4, 8]\n"
            "    max_depth: [2]\n",
            encoding="utf-8",
        )
        assert (
            run(
                "--config", config, "--out", tmp_path, "tune", "--family", "gbt",
                "--features", pipeline_dir / "features.csv",
            )
            == 0
        )
        best = json.loads((tmp_path / "best_params_gbt.json").read_text())
        assert best["params"]["n_trees"] in (4, 8)
        results = json.loads((tmp_path / "tuning_gbt.json").read_text())
        assert len(results) == 2

    def test_ensemble_rejects_leaky_scores(self, pipeline_dir, tmp_path):
        out = pipeline_dir
        leaky = tmp_path / "leaky.csv"
        leaky.write_bytes((out / "scores_gbt_validation.csv").read_bytes())
        (tmp_path / "leaky.meta.json").write_text(
            json.dumps({"trained_on": ["train", "validation"], "scored_split": "validation"})
        )
        code = run(
            "--seed", 5, "--out", tmp_path, "ensemble",
            "--val-scores-1", leaky,
            "--val-scores-2", out / "scores_tfidf_validation.csv",
            "--test-scores-1", out / "scores_gbt_test.csv",
            "--test-scores-2", out / "scores_tfidf_test.csv",
            "--labeled", out / "labeled.jsonl",
        )
        assert code == 2

    def test_llm_collect_and_eval_via_replay(self, pipeline_dir, tmp_path):
        out = pipeline_dir
        rows = [
            json.loads(line)
            for line in (out / "texts.jsonl").read_text().splitlines()
            if line.strip()
        ]
        test_rows = [r for r in rows if r["split"] == "test"]
        replay = tmp_path / "replay.jsonl"
        with replay.open("w", encoding="utf-8") as handle:
            for i, row in enumerate(test_rows):
                prompt = build_prompt(row["text"], 3500)
                score = 9 if "chapter 11" in row["text"].lower() else (i % 5) + 1
                handle.write(
                    json.dumps(
                        {"prompt_sha256": prompt_key(prompt), "response": f"Summary.\nSCORE: {score}"}
                    )
                    + "\n"
                )
        assert (
            run(
                "--seed", 5, "--out", tmp_path, "llm-collect",
                "--texts", out / "texts.jsonl", "--split", "test",
                "--replay", replay,
            )
            == 0
        )
        records = [
            json.loads(line)
            for line in (tmp_path / "llm_records.jsonl").read_text().splitlines()
        ]
        assert len(records) == len(test_rows)
        assert all(r["status"] == "ok" for r in records)
        assert (
            run(
                "--seed", 5, "--out", tmp_path, "llm-eval",
                "--records", tmp_path / "llm_records.jsonl",
                "--texts", out / "texts.jsonl",
                "--n-shuffles", 10,
            )
            == 0
        )
        metrics = json.loads((tmp_path / "llm_metrics.json").read_text())
        assert set(metrics) >= {"roc_auc", "ap", "cap_ratio"}


class TestBoundaryFixtures:
    def test_label_assigns_boundary_splits(self, tmp_path):
        dates = ["2011-12-31", "2012-01-01", "2015-12-31", "2016-01-01"]
        corpus_lines = []
        fundamentals_lines = ["cik,company_name,fiscal_year_end,source_form,AT"]
        for i, day in enumerate(dates):
            fye = f"{int(day[:4]) - 1}-12-31"
            record = {
                "cik": str(i),
                "company": f"Boundary {i} Corp",
                "filing_date": day,
                "fiscal_year_end": fye,
                "sic": 2000,
            }
            record.update({f"item_{n}": "" for n in range(1, 16)})
            corpus_lines.append(json.dumps(record))
            fundamentals_lines.append(f"{i},Boundary {i} Corp,{fye},10-K,1e12")
        (tmp_path / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n")
        (tmp_path / "fundamentals.csv").write_text("\n".join(fundamentals_lines) + "\n")
        (tmp_path / "calendar.csv").write_text("company_key,bankruptcy_date\n")

        assert (
            run(
                "--seed", 1, "--out", tmp_path, "link",
                "--corpus", tmp_path / "corpus.jsonl",
                "--fundamentals", tmp_path / "fundamentals.csv",
            )
            == 0
        )
        assert (
            run(
                "--seed", 1, "--out", tmp_path, "label",
                "--corpus", tmp_path / "corpus.jsonl",
                "--fundamentals", tmp_path / "fundamentals.csv",
                "--linked", tmp_path / "linked.jsonl",
                "--calendar", tmp_path / "calendar.csv",
            )
            == 0
        )
        rows = read_labeled_records(tmp_path / "labeled.jsonl")
        by_cik = {r["cik"]: r["split"] for r in rows}
        assert by_cik == {"0": "train", "1": "validation", "2": "validation", "3": "test"}

    def test_evaluate_four_row_fixture(self, tmp_path):
        labeled_lines = []
        scores_lines = ["record_id,score"]
        for i, (score, label) in enumerate(zip([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])):
            record_id = f"{i}|2017-03-01"
            labeled_lines.append(
                json.dumps(
                    {
                        "record_id": record_id,
                        "qualified": True,
                        "label": bool(label),
                        "split": "test",
                    }
                )
            )
            scores_lines.append(f"{record_id},{score}")
        (tmp_path / "labeled.jsonl").write_text("\n".join(labeled_lines) + "\n")
        (tmp_path / "scores.csv").write_text("\n".join(scores_lines) + "\n")
        assert (
            run(
                "--seed", 1, "--out", tmp_path, "evaluate",
                "--scores", tmp_path / "scores.csv",
                "--labeled", tmp_path / "labeled.jsonl",
            )
            == 0
        )
        metrics = (tmp_path / "metrics.csv").read_text()
        assert ",0.750000," in metrics


class TestErrors:
    def test_missing_seed_is_config_error(self, tmp_path):
        assert run("--out", tmp_path, "synth", "--n", 10) == 1

    def test_unknown_option_is_usage_error(self, tmp_path):
        assert run("--seed", 1, "--out", tmp_path, "synth", "--bogus") == 1

    def test_unreadable_scores_is_data_error(self, tmp_path):
        (tmp_path / "scores.csv").write_text("record_id,score\nmissing|x,0.5\n")
        (tmp_path / "labeled.jsonl").write_text(
            json.dumps(
                {"record_id": "other", "qualified": True, "label": False, "split": "test"}
            )
            + "\n"
        )
        code = run(
            "--seed", 1, "--out", tmp_path, "evaluate",
            "--scores", tmp_path / "scores.csv",
            "--labeled", tmp_path / "labeled.jsonl",
        )
        assert code == 2


class TestDeterminism:
    def test_rerun_produces_identical_manifests_and_outputs(self, tmp_path):
        first = tmp_path / "one"
        second = tmp_path / "two"
        for out in (first, second):
            assert run("--seed", 9, "--out", out, "synth", "--n", 400, "--neg-per-pos", 20) == 0
            assert run("--seed", 9, "--out", out, "ingest", "--corpus", out / "corpus.jsonl") == 0
        for name in ("manifest_synth.json", "manifest_ingest.json", "corpus.jsonl",
                     "fundamentals.csv", "bankruptcies.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
