"""
Run bookkeeping: per-output manifest files and the optional run ledger.
"""

import hashlib
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Optional, Union

from subscode.config.settings import PipelineConfig, settings
from subscode.database import RunLedger

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def file_digest(path: PathLike, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: PipelineConfig) -> str:
    return hashlib.sha256(config.canonical().encode("utf-8")).hexdigest()


def manifest_path(output: PathLike) -> Path:
    return Path(f"{output}.manifest.json")


def write_manifest(
    output: PathLike,
    stage: str,
    config: PipelineConfig,
    inputs: Iterable[PathLike],
    outputs: Iterable[PathLike],
    seed: Optional[int] = None,
) -> Path:
    """Write <output>.manifest.json with the config hash and the digest of every file."""
    manifest = {
        "stage": stage,
        "version": settings.VERSION,
        "config_hash": config_hash(config),
        "seed": config.seed if seed is None else seed,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p): file_digest(p) for p in outputs},
    }
    path = manifest_path(output)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _ledger(database_url: Optional[str]):
    if not database_url:
        return None
    try:
        return RunLedger(database_url)
    except Exception as e:
        logger.warning(f"⚠️ Run ledger unavailable ({e}); continuing without it")
        return None


class StageRecord:
    """Files a running stage reads and writes, collected for the manifest and the ledger."""

    def __init__(self, stage: str, config: PipelineConfig):
        self.stage = stage
        self.config = config
        self.inputs = []
        self.outputs = []

    def read(self, *paths: PathLike):
        self.inputs.extend(p for p in paths if p is not None)

    def wrote(self, *paths: PathLike):
        self.outputs.extend(p for p in paths if p is not None)


@contextmanager
def recorded_stage(stage: str, config: PipelineConfig, database_url: Optional[str] = None):
    """
    Wrap one pipeline stage

    On success every output gets a manifest; with a ledger configured the run
    and its files are stored too. Ledger errors are logged, never raised.
    """
    record = StageRecord(stage, config)
    ledger = _ledger(settings.DATABASE_URL if database_url is None else database_url)
    run = None
    if ledger is not None:
        try:
            run = ledger.start_run(stage, config_hash(config), config.seed)
        except Exception as e:
            logger.warning(f"⚠️ Could not record run start: {e}")

    try:
        yield record
    except BaseException as e:
        if run is not None:
            try:
                ledger.finish_run(run.id, status="failed", error=str(e))
            except Exception as ledger_error:
                logger.warning(f"⚠️ Could not record run failure: {ledger_error}")
        if ledger is not None:
            ledger.close()
        raise

    for output in record.outputs:
        write_manifest(output, stage, config, record.inputs, [output])
    if run is not None:
        try:
            for role, paths in (("input", record.inputs), ("output", record.outputs)):
                for p in paths:
                    ledger.add_artifact(run.id, role, p, file_digest(p), os.path.getsize(p))
            ledger.finish_run(run.id, status="completed")
        except Exception as e:
            logger.warning(f"⚠️ Could not record run completion: {e}")
    if ledger is not None:
        ledger.close()
