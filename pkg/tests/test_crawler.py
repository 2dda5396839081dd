import hashlib

import pytest

from src.crawler import calculate_file_hash, scan_traces
from src.errors import ValidationError


def test_hash_matches_md5(tmp_path):
    path = tmp_path / "trace.jsonl"
    content = b'{"t_ms":0}\n' * 10000
    path.write_bytes(content)
    assert calculate_file_hash(path) == hashlib.md5(content).hexdigest()


def test_hash_of_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        calculate_file_hash(tmp_path / "absent.jsonl")


def test_scan_walks_directories(tmp_path):
    (tmp_path / "runs" / "day2").mkdir(parents=True)
    for name in ("runs/b.jsonl", "runs/a.JSONL", "runs/day2/c.jsonl", "runs/notes.txt", "single.log"):
        (tmp_path / name).write_text("")
    found = scan_traces([tmp_path / "single.log", tmp_path / "runs"])
    assert [p.relative_to(tmp_path).as_posix() for p in found] == [
        "single.log", "runs/a.JSONL", "runs/b.jsonl", "runs/day2/c.jsonl",
    ]


def test_scan_rejects_missing_paths(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        scan_traces([tmp_path / "nowhere"])
