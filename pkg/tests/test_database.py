import json

import pytest

from subscode.config.settings import load_pipeline_config
from subscode.database import RunLedger
from subscode.services.manifest import config_hash, file_digest, manifest_path, recorded_stage, write_manifest


@pytest.fixture
def database_url(tmp_path):
    return f"sqlite:///{tmp_path / 'runs.db'}"


def test_ledger_records_runs_and_artifacts(database_url, tmp_path):
    artifact = tmp_path / "vocab.tsv"
    artifact.write_text("<unk>\t0\n", encoding="utf-8")

    ledger = RunLedger(database_url)
    run = ledger.start_run("vocab", "abc123", seed=1)
    assert run.status == "running"
    ledger.add_artifact(run.id, "output", artifact, file_digest(artifact), 8)
    finished = ledger.finish_run(run.id)

    assert finished.status == "completed"
    assert finished.duration_seconds is not None and finished.duration_seconds >= 0
    assert [a.path for a in finished.artifacts] == [str(artifact)]
    ledger.close()


def test_ledger_queries(database_url):
    ledger = RunLedger(database_url)
    first = ledger.start_run("clean", "h1")
    second = ledger.start_run("vocab", "h2")
    third = ledger.start_run("vocab", "h1")

    assert [r.id for r in ledger.get_runs()] == [third.id, second.id, first.id]
    assert [r.id for r in ledger.get_runs(limit=1)] == [third.id]
    assert [r.id for r in ledger.find_runs_by_config_hash("h1")] == [first.id, third.id]
    assert ledger.finish_run(9999) is None
    ledger.close()


def test_ledger_rejects_unknown_role(database_url, tmp_path):
    ledger = RunLedger(database_url)
    run = ledger.start_run("vocab", "h")
    with pytest.raises(ValueError):
        ledger.add_artifact(run.id, "scratch", tmp_path / "x", "0" * 64)
    ledger.close()


def test_manifest_contents(tmp_path):
    config = load_pipeline_config()
    source, output = tmp_path / "in.txt", tmp_path / "out.txt"
    source.write_text("a b\n", encoding="utf-8")
    output.write_text("b a\n", encoding="utf-8")

    path = write_manifest(output, "clean", config, [source], [output])
    assert path == manifest_path(output)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    assert manifest["stage"] == "clean"
    assert manifest["config_hash"] == config_hash(config)
    assert manifest["inputs"] == {str(source): file_digest(source)}
    assert manifest["outputs"] == {str(output): file_digest(output)}
    assert list(manifest) == sorted(manifest)


def test_config_hash_tracks_values():
    assert config_hash(load_pipeline_config()) == config_hash(load_pipeline_config())
    assert config_hash(load_pipeline_config()) != config_hash(load_pipeline_config(overrides={"sample.S": "5"}))


def test_recorded_stage_writes_manifest_and_ledger(database_url, tmp_path):
    config = load_pipeline_config()
    source, output = tmp_path / "in.txt", tmp_path / "out.txt"
    source.write_text("x\n", encoding="utf-8")

    with recorded_stage("clean", config, database_url=database_url) as record:
        record.read(source)
        output.write_text("x\n", encoding="utf-8")
        record.wrote(output)

    assert manifest_path(output).exists()
    ledger = RunLedger(database_url)
    (run,) = ledger.get_runs()
    assert run.command == "clean"
    assert run.status == "completed"
    assert sorted(a.role for a in run.artifacts) == ["input", "output"]
    ledger.close()


def test_recorded_stage_marks_failures(database_url, tmp_path):
    config = load_pipeline_config()
    output = tmp_path / "out.txt"

    with pytest.raises(RuntimeError):
        with recorded_stage("train", config, database_url=database_url) as record:
            record.wrote(output)
            raise RuntimeError("boom")

    assert not manifest_path(output).exists()
    ledger = RunLedger(database_url)
    (run,) = ledger.get_runs()
    assert run.status == "failed"
    assert run.error == "boom"
    ledger.close()


def test_recorded_stage_without_ledger(tmp_path):
    config = load_pipeline_config()
    output = tmp_path / "out.txt"
    with recorded_stage("clean", config, database_url="") as record:
        output.write_text("x\n", encoding="utf-8")
        record.wrote(output)
    assert manifest_path(output).exists()
