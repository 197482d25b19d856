"""Target holes, surrounding contexts and repository splits."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from repoctx.javalex import CODE
from repoctx.repo_model import RepoIndex, SourceFile

DELIMITERS = frozenset('.()[] {},:";')
DEFAULT_CAP = 10000
SPLITS = ("train", "val", "test")


def delimiter_tokenize(line: str, keep_space: bool = False) -> list[tuple[str, int]]:
    """Split a line at Java delimiter characters.

    Every delimiter except the space is emitted as its own token; spaces
    only separate (unless `keep_space`). Offsets index into `line`.
    """
    out: list[tuple[str, int]] = []
    start = 0
    for i, c in enumerate(line):
        if c in DELIMITERS:
            if i > start:
                out.append((line[start:i], start))
            if c != " " or keep_space:
                out.append((c, i))
            start = i + 1
    if start < len(line):
        out.append((line[start:], start))
    return out


@dataclass(frozen=True)
class TargetHole:
    repo_id: str
    rel_path: str
    line_idx: int
    char_start: int
    hole_str: str
    surrounding_context: str

    @property
    def hole_id(self) -> str:
        return f"{self.repo_id}/{self.rel_path}:{self.line_idx}:{self.char_start}"


def derive_seed(*parts) -> int:
    h = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "little")


def make_hole(line: str, line_idx: int, rng: random.Random) -> tuple[int, str] | None:
    tokens = delimiter_tokenize(line)
    if not tokens:
        return None
    _, start = tokens[rng.randrange(len(tokens))]
    return start, line[start:]


def surrounding_context(file: SourceFile, line_idx: int, char_start: int, lines_above: int = 2, lines_below: int = 2) -> str:
    lines = file.lines
    above = lines[max(0, line_idx - lines_above) : line_idx]
    below = lines[line_idx + 1 : line_idx + 1 + lines_below]
    prefix = lines[line_idx][:char_start]
    parts = above + ([prefix] if prefix else []) + below
    return "\n".join(parts)


def holes_for_file(index: RepoIndex, rel_path: str, seed: int) -> list[TargetHole]:
    sf, facts = index.files[rel_path]
    rng = random.Random(derive_seed(seed, index.repo_id, rel_path))
    holes = []
    for idx, kind in enumerate(facts.line_mask):
        if kind != CODE:
            continue
        line = sf.line(idx)
        made = make_hole(line, idx, rng)
        if made is None:
            continue
        col, hole_str = made
        holes.append(TargetHole(index.repo_id, rel_path, idx, col, hole_str, surrounding_context(sf, idx, col)))
    return holes


def generate_holes(index: RepoIndex, seed: int = 0, cap: int | None = DEFAULT_CAP) -> list[TargetHole]:
    """One hole per code line of every file, capped by a seeded uniform subset."""
    if cap is not None and cap < 1:
        raise ValueError("cap must be >= 1")
    holes = [h for rel in index.files for h in holes_for_file(index, rel, seed)]
    if cap is not None and len(holes) > cap:
        rng = random.Random(derive_seed(seed, index.repo_id, "cap"))
        keep = sorted(rng.sample(range(len(holes)), cap))
        holes = [holes[i] for i in keep]
    return holes


class SplitError(ValueError):
    pass


def split_repos(file_counts: dict[str, int], seed: int = 0, min_files: int = 20) -> dict[str, str]:
    """Assign eligible repos to train/val/test in a 2:1:1 ratio.

    Leftover repos (count not divisible by 4) go to train, then val,
    alternating.
    """
    eligible = sorted(r for r, n in file_counts.items() if n >= min_files)
    if len(eligible) < 4:
        raise SplitError(f"need at least 4 repos with >= {min_files} files, got {len(eligible)}")
    random.Random(derive_seed(seed, "split")).shuffle(eligible)
    base, rem = divmod(len(eligible), 4)
    n_train, n_val = 2 * base, base
    for k in range(rem):
        if k % 2 == 0:
            n_train += 1
        else:
            n_val += 1
    out = {}
    for i, repo in enumerate(eligible):
        out[repo] = "train" if i < n_train else "val" if i < n_train + n_val else "test"
    return dict(sorted(out.items()))
