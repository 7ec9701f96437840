"""Run manifests: what a command was asked to do, precisely enough to redo it."""

import hashlib
import logging
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List

from pydantic import BaseModel, ConfigDict

_logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def tool_version() -> str:
    try:
        return version("mfract")
    except PackageNotFoundError:
        return "0+unknown"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest(BaseModel):
    """
    Record of one command invocation.

    Attributes:
        command: Subcommand name.
        options: Every option with environment and default values filled in.
        config: Resolved configuration models, dumped per analysis.
        input_hashes: sha256 of each input file, keyed by the path as given.
        version: Package version that produced the outputs.
        seed: Seed used for every seeded draw.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: str
    options: Dict[str, Any]
    config: Dict[str, Any]
    input_hashes: Dict[str, str]
    version: str
    seed: int

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2) + "\n")
        _logger.debug("wrote manifest %s", path)
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"manifest {path} does not exist")
        return cls.model_validate_json(path.read_text())

    def changed_inputs(self) -> List[str]:
        """Inputs that are missing or whose contents no longer match."""
        changed = []
        for name, expected in self.input_hashes.items():
            if not Path(name).is_file() or sha256_file(name) != expected:
                changed.append(name)
        return changed
