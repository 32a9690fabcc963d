import asyncio

from utils.run_ledger import RunLedger, RunManifest


def _manifest():
    manifest = RunManifest(command="experiment", config_path="/tmp/run.json",
                           resolved_config={"gamma": 2.0, "d": 1}, base_seed=5, input_hash="abc")
    manifest.record({"/tmp/out/a.csv": "11", "/tmp/out/summary.json": "22"})
    manifest.finish(1)
    return manifest


def test_manifest_roundtrip(tmp_path):
    ledger = RunLedger(str(tmp_path / "db" / "runs.db"))
    manifest = _manifest()
    assert asyncio.run(ledger.save(manifest))
    loaded = asyncio.run(ledger.get(manifest.run_id))
    assert loaded == manifest
    assert asyncio.run(ledger.recent()) == [manifest.run_id]


def test_unknown_run(tmp_path):
    ledger = RunLedger(str(tmp_path / "runs.db"))
    assert asyncio.run(ledger.get("missing")) is None


def test_save_failure_is_reported_not_raised(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    ledger = RunLedger(str(blocker / "runs.db"))
    assert asyncio.run(ledger.save(_manifest())) is False


def test_manifest_timestamps():
    manifest = _manifest()
    assert manifest.exit_code == 1
    assert manifest.finished_at >= manifest.started_at
    assert manifest.to_dict()["outputs"]["/tmp/out/a.csv"] == "11"
