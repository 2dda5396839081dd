import hashlib
import logging
from pathlib import Path
from typing import Iterable, List, Union

from src.config import VALID_EXTENSIONS
from src.errors import ValidationError

logger = logging.getLogger(__name__)


def calculate_file_hash(file_path: Union[str, Path]) -> str:
    """
    Reads file in chunks to calculate MD5 hash efficiently.
    Identifies a trace in the evaluation ledger independent of its path.
    """
    hasher = hashlib.md5()
    try:
        with open(file_path, "rb") as f:
            # Read in 64kb chunks
            for chunk in iter(lambda: f.read(65536), b""):
                hasher.update(chunk)
    except OSError as e:
        raise ValidationError(f"cannot hash {file_path}: {e}")
    return hasher.hexdigest()


def scan_traces(paths: Iterable[Union[str, Path]]) -> List[Path]:
    """
    Expands the given files and directories into trace files:
    files are taken as-is, directories are walked recursively for trace extensions.
    Order is stable (sorted within each directory argument).
    """
    found: List[Path] = []
    for root in map(Path, paths):
        if root.is_file():
            found.append(root)
            continue
        if not root.is_dir():
            raise ValidationError(f"trace path not found: {root}")

        logger.info("Scanning: %s", root)
        matches = sorted(
            p for p in root.rglob("*")
            # Filter by extension (case-insensitive)
            if p.is_file() and p.suffix.lower() in VALID_EXTENSIONS
        )
        if not matches:
            logger.warning("No traces found under %s", root)
        found.extend(matches)
    return found
