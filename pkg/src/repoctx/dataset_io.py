"""Stack-Repo style dataset files.

Layout::

    <root>/<split>/<repo>/...source tree...
    <root>/<split>/<repo>/hole_and_context_<kind>.json

Each ``hole_and_context_<kind>.json`` is newline-delimited JSON, one hole per
line, with keys in the order ``location``, ``hole``, ``surrounding``,
``repo_contexts``. ``location.col`` is a UTF-8 byte offset into the line.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from repoctx.hole_gen import SPLITS

KINDS = ("PP", "BM25", "RandomNN")
SCHEMA_VERSION = 1
META_FILE = "stack_repo_meta.json"


class DatasetError(ValueError):
    pass


@dataclass
class HoleRecord:
    file: str
    line: int
    col: int
    hole: str
    surrounding: str
    repo_contexts: list[str] = field(default_factory=list)
    repo_id: str = field(default="", compare=False)

    @property
    def hole_id(self) -> str:
        return f"{self.repo_id}/{self.file}:{self.line}:{self.col}"

    def to_json(self) -> str:
        obj = {
            "location": {"file": self.file, "line": self.line, "col": self.col},
            "hole": self.hole,
            "surrounding": self.surrounding,
            "repo_contexts": list(self.repo_contexts),
        }
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_obj(cls, obj) -> "HoleRecord":
        if not isinstance(obj, dict):
            raise DatasetError("record is not a JSON object")
        for key in ("location", "hole", "surrounding", "repo_contexts"):
            if key not in obj:
                raise DatasetError(f"missing key {key!r}")
        loc = obj["location"]
        if not isinstance(loc, dict) or any(k not in loc for k in ("file", "line", "col")):
            raise DatasetError("location needs file, line and col")
        if not isinstance(obj["repo_contexts"], list) or not all(isinstance(x, str) for x in obj["repo_contexts"]):
            raise DatasetError("repo_contexts must be a list of strings")
        if not isinstance(loc["line"], int) or not isinstance(loc["col"], int):
            raise DatasetError("line and col must be integers")
        return cls(loc["file"], loc["line"], loc["col"], obj["hole"], obj["surrounding"], obj["repo_contexts"])


def byte_col(line: str, char_col: int) -> int:
    return len(line[:char_col].encode("utf-8"))


def char_col(line: str, byte_offset: int) -> int:
    return len(line.encode("utf-8")[:byte_offset].decode("utf-8", errors="strict"))


def context_file(repo_dir, kind: str) -> Path:
    if kind not in KINDS:
        raise DatasetError(f"unknown context kind {kind!r}; expected one of {', '.join(KINDS)}")
    return Path(repo_dir) / f"hole_and_context_{kind}.json"


def write_records(path, records) -> int:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            n = 0
            for rec in records:
                fh.write(rec.to_json())
                fh.write("\n")
                n += 1
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc
    return n


def write_dataset(repo_dir, records, kind: str) -> Path:
    """Write one repo's records for `kind`; returns the file written."""
    path = context_file(repo_dir, kind)
    write_records(path, records)
    return path


def read_records(path, repo_id: str = "") -> list[HoleRecord]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.endswith("\n"):
                raise DatasetError(f"{path}:{lineno}: truncated line (no newline terminator)")
            if not raw.strip():
                raise DatasetError(f"{path}:{lineno}: empty line")
            try:
                rec = HoleRecord.from_obj(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            rec.repo_id = repo_id
            out.append(rec)
    return out


def repo_dirs(split_dir) -> list[Path]:
    split_dir = Path(split_dir)
    if not split_dir.is_dir():
        return []
    return sorted(p for p in split_dir.iterdir() if p.is_dir())


def read_dataset(split_dir, kind: str) -> list[HoleRecord]:
    """All records of one split, repo by repo in name order."""
    out = []
    for repo in repo_dirs(split_dir):
        path = context_file(repo, kind)
        if path.exists():
            out.extend(read_records(path, repo.name))
    return out


def write_meta(root) -> None:
    meta = {"format": "stack-repo-ndjson", "schema_version": SCHEMA_VERSION, "kinds": list(KINDS)}
    Path(root).mkdir(parents=True, exist_ok=True)
    Path(root, META_FILE).write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


@dataclass
class SplitStats:
    n_repos: int = 0
    n_files: int = 0
    n_holes: int = 0
    missing: bool = False


def _count_lines(path: Path) -> int:
    with open(path, "rb") as fh:
        return sum(1 for _ in fh)


def stats(dataset_root) -> dict[str, SplitStats]:
    """Per-split repo, .java file and hole counts.

    Hole counts come from the first context file present per repo (all kinds
    share the same holes). Missing splits are zeros with ``missing`` set.
    """
    root = Path(dataset_root)
    out = {}
    for split in SPLITS:
        split_dir = root / split
        if not split_dir.is_dir():
            out[split] = SplitStats(missing=True)
            continue
        s = SplitStats()
        for repo in repo_dirs(split_dir):
            s.n_repos += 1
            for _, _, files in os.walk(repo):
                s.n_files += sum(1 for f in files if f.endswith(".java"))
            for kind in KINDS:
                path = context_file(repo, kind)
                if path.exists():
                    s.n_holes += _count_lines(path)
                    break
        out[split] = s
    return out


def format_stats(table: dict[str, SplitStats]) -> str:
    rows = ["split\tn_repos\tn_files\tn_holes\tmissing"]
    for split, s in table.items():
        rows.append(f"{split}\t{s.n_repos}\t{s.n_files}\t{s.n_holes}\t{int(s.missing)}")
    return "\n".join(rows) + "\n"
