"""
Tests for the command-line front end and its exit codes
"""

import json

import pytest

from src.annotation_model.corpus_io import read_corpus, read_samples, write_samples
from src.annotation_model.schemas import Provenance, SampleCorpus, SampleSet
from src.cli.main import main
from src.evaluation.accuracy import silver_ground_truth


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in ("LANDMARK_UQ_OUTPUT_DIR", "LANDMARK_UQ_LOG_LEVEL", "LANDMARK_UQ_SEED"):
        monkeypatch.delenv(key, raising=False)


@pytest.fixture
def simulated(tmp_path):
    """Small synthetic study written through the CLI"""
    code = main(["simulate", "--out", str(tmp_path), "--scans", "6", "--raters", "4",
                 "--mc-samples", "5", "--seed", "3"])
    assert code == 0
    return tmp_path, tmp_path / "simulated"


def _strategy_flags(directory):
    flags = []
    for name in ("averaging", "random_sampling", "deep_ensembles"):
        flags += ["--strategy", f"{name}={directory / f'samples_{name}.jsonl'}"]
    return flags


def test_simulate_writes_corpus_and_samples(simulated):
    _, sim_dir = simulated
    names = sorted(p.name for p in sim_dir.iterdir())
    assert names == [
        "annotations.jsonl",
        "samples_averaging.jsonl",
        "samples_deep_ensembles.jsonl",
        "samples_random_sampling.jsonl",
    ]
    assert read_corpus(sim_dir / "annotations.jsonl").summary()["scans"] == 6


def test_analysis_commands(simulated):
    out, sim_dir = simulated
    corpus = ["--corpus", str(sim_dir / "annotations.jsonl"), "--out", str(out)]
    assert main(["variability"] + corpus) == 0
    assert main(["uncertainty"] + corpus + _strategy_flags(sim_dir)) == 0
    assert main(["evaluate"] + corpus + _strategy_flags(sim_dir) + ["--folds", "3"]) == 0
    assert main(["correlate"] + corpus + _strategy_flags(sim_dir) + ["--bin-size", "3"]) == 0

    for name in ("variability", "uncertainty", "evaluation", "correlation"):
        assert (out / f"{name}.json").exists()
    evaluation = json.loads((out / "evaluation.json").read_text())
    assert evaluation["metadata"]["n_folds"] == 3
    assert [row["strategy"] for row in evaluation["tables"]["accuracy"]] == [
        "averaging", "random_sampling", "deep_ensembles"
    ]


def test_evaluate_ground_truth_predictions(simulated):
    out, sim_dir = simulated
    corpus = read_corpus(sim_dir / "annotations.jsonl")
    truth = silver_ground_truth(corpus)
    samples = SampleCorpus.from_sets(
        [SampleSet(scan, lm, Provenance.MC_DROPOUT, ((point, None),)) for (scan, lm), point in truth.items()],
        "averaging",
    )
    path = write_samples(samples, out / "perfect.jsonl")

    code = main(["evaluate", "--corpus", str(sim_dir / "annotations.jsonl"), "--out", str(out),
                 "--strategy", f"averaging={path}"])
    assert code == 0
    row = json.loads((out / "evaluation.json").read_text())["tables"]["accuracy"][0]
    assert row["mre_mm"] == 0.0
    assert row["sdr_2mm"] == 100.0
    assert row["sdr_4mm"] == 100.0


def test_schedule_and_plot(simulated):
    out, sim_dir = simulated
    corpus = ["--corpus", str(sim_dir / "annotations.jsonl"), "--out", str(out)]
    assert main(["schedule"] + corpus + ["--iterations", "3"]) == 0
    records = [json.loads(line) for line in (out / "schedule.jsonl").read_text().splitlines()]
    assert len(records) == 3 * 6 * 5
    assert set(records[0]) == {"iteration", "scan_id", "landmark_id", "rater_id"}

    assert main(["schedule"] + corpus + ["--iterations", "3", "--fold", "1"]) == 0
    assert len((out / "schedule_fold1.jsonl").read_text().splitlines()) < len(records)

    assert main(["plot"] + corpus + ["--scan", "scan_000", "--landmark", "0", "--landmark", "2"]) == 0
    assert sorted(p.name for p in (out / "plots").iterdir()) == ["scan_000_lm0.svg", "scan_000_lm2.svg"]
    assert main(["plot"] + corpus + ["--scan", "no_such_scan"]) == 2


def test_import_and_reimport(tmp_path, capsys):
    source = tmp_path / "isbi"
    for rater in ("senior", "junior"):
        (source / rater).mkdir(parents=True)
        for scan in ("001", "002"):
            lines = "".join(f"{100 + i},{200 + i}\n" for i in range(19))
            (source / rater / f"{scan}.txt").write_text(lines + "1\n2\n")
    out = tmp_path / "out"

    assert main(["import", str(source), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "records=76" in printed
    assert "scans=2" in printed

    first = out / "annotations.jsonl"
    again = out / "again.jsonl"
    assert main(["import", str(first), "--out", str(out), "--output", str(again)]) == 0
    assert first.read_bytes() == again.read_bytes()


def test_usage_errors_exit_one(tmp_path):
    assert main(["no-such-command"]) == 1
    assert main(["variability", "--out", str(tmp_path)]) == 1
    assert main(["evaluate", "--thresholds", "2,x"]) == 1
    assert main(["evaluate", "--strategy", "majority=x.jsonl"]) == 1
    assert main(["evaluate", "--strategy", "no-equals-sign"]) == 1


def test_data_errors_exit_two(tmp_path, simulated):
    (tmp_path / "empty").mkdir()
    assert main(["import", str(tmp_path / "empty"), "--out", str(tmp_path)]) == 2
    assert main(["variability", "--corpus", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path)]) == 2

    _, sim_dir = simulated
    corpus = ["--corpus", str(sim_dir / "annotations.jsonl"), "--out", str(tmp_path)]
    assert main(["evaluate"] + corpus + _strategy_flags(sim_dir) + ["--folds", "50"]) == 2


def test_simulate_with_heatmap_decoding(tmp_path):
    code = main(["simulate", "--out", str(tmp_path), "--space", "downsampled", "--scans", "2", "--landmarks", "2",
                 "--raters", "3", "--mc-samples", "3", "--heatmap-sigma", "2.0"])
    assert code == 0
    samples = read_samples(tmp_path / "simulated" / "samples_random_sampling.jsonl")
    for sample_set in samples:
        for point, value in sample_set.samples:
            assert point.x == int(point.x) and point.y == int(point.y)
            assert 0.0 <= value <= 1.0


def test_badly_typed_config_value_exits_one(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("thresholds_mm: [a]\n")
    assert main(["variability", "--config", str(config), "--out", str(tmp_path)]) == 1
