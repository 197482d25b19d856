"""End-to-end dataset construction and re-packing."""

from __future__ import annotations

import dataclasses
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from repoctx import dataset_io
from repoctx.dataset_io import KINDS, HoleRecord
from repoctx.hole_gen import DEFAULT_CAP, SPLITS, TargetHole, generate_holes, split_repos
from repoctx.packing import PackedExample, PackingConfig, RepoContext, pack
from repoctx.prompt_proposals import PPC, PromptProposal, prior_ppc, ranked_ppcs
from repoctx.repo_model import RepoIndex, scan_repo
from repoctx.retrieval import BM25Index, bm25_index, bm25_rank, random_nn

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuildConfig:
    packing: PackingConfig = PackingConfig()
    kinds: tuple[str, ...] = KINDS
    seed: int = 0
    cap: int | None = DEFAULT_CAP
    split_caps: dict[str, int] = field(default_factory=dict)
    ranking: tuple[PromptProposal, ...] | None = None
    min_files: int = 20
    chunk_lines: int = 10
    n_candidates: int = 512
    jobs: int = 1


def candidate_ppcs(kind: str, hole: TargetHole, index: RepoIndex, cfg: BuildConfig, bm25: BM25Index | None = None) -> list[PPC]:
    """Ranked candidate contexts for one hole under a retrieval kind.

    Retrieval kinds also carry the prior context so prior-last packing works.
    """
    if kind == "PP":
        ranking = list(cfg.ranking) if cfg.ranking is not None else None
        return ranked_ppcs(hole, index, ranking)
    prior = prior_ppc(hole, index.source(hole.rel_path))
    if kind == "BM25":
        files = bm25_rank(hole, index, bm25=bm25)
        out = [PPC(f"bm25/{sf.rel_path}", index.source(sf.rel_path).content, (sf.rel_path,)) for sf in files]
    elif kind == "RandomNN":
        k = min(cfg.packing.n_contexts, cfg.n_candidates)
        hits = random_nn(hole, index, k=k, chunk_lines=cfg.chunk_lines, n_candidates=cfg.n_candidates, seed=cfg.seed)
        out = [PPC(f"random_nn/{c.chunk_id}", c.text, (c.rel_path,)) for c, _ in hits]
    else:
        raise dataset_io.DatasetError(f"unknown context kind {kind!r}")
    return out + [prior]


def packing_for(kind: str, packing: PackingConfig) -> PackingConfig:
    # retrieval contexts carry no rule prefixes, only the hole_context one
    return packing if kind == "PP" else dataclasses.replace(packing, prefixes=False)


def to_record(hole: TargetHole, index: RepoIndex, packed: PackedExample | None) -> HoleRecord:
    line = index.source(hole.rel_path).line(hole.line_idx)
    return HoleRecord(
        file=hole.rel_path,
        line=hole.line_idx,
        col=dataset_io.byte_col(line, hole.char_start),
        hole=hole.hole_str,
        surrounding=hole.surrounding_context,
        repo_contexts=[rc.formatted_text for rc in packed.rcs] if packed else [],
        repo_id=hole.repo_id,
    )


def pack_hole(kind: str, hole: TargetHole, index: RepoIndex, cfg: BuildConfig, bm25: BM25Index | None = None) -> PackedExample:
    ppcs = candidate_ppcs(kind, hole, index, cfg, bm25)
    return pack(hole, ppcs, packing_for(kind, cfg.packing))


def build_repo(repo_root, repo_id: str, out_dir, cfg: BuildConfig, cap: int | None) -> int:
    """Copy one repo's tree into `out_dir` and write one context file per kind."""
    index = scan_repo(repo_root, repo_id)
    out_dir = Path(out_dir)
    shutil.copytree(repo_root, out_dir, dirs_exist_ok=True)
    if index.skipped:
        (out_dir / "skipped.txt").write_text("".join(p + "\n" for p in index.skipped), encoding="utf-8")
    holes = generate_holes(index, cfg.seed, cap)
    bm25 = bm25_index(index) if "BM25" in cfg.kinds else None
    for kind in cfg.kinds:
        records = [to_record(h, index, pack_hole(kind, h, index, cfg, bm25)) for h in holes]
        dataset_io.write_dataset(out_dir, records, kind)
    return len(holes)


def _build_job(args):
    return build_repo(*args)


def plan_splits(corpus_root, cfg: BuildConfig) -> dict[str, list[tuple[str, Path]]]:
    """Use an existing train/val/test layout if present, else split repos 2:1:1."""
    root = Path(corpus_root)
    if not root.is_dir():
        raise dataset_io.DatasetError(f"corpus root not found: {root}")
    if any((root / s).is_dir() for s in SPLITS):
        return {s: [(p.name, p) for p in dataset_io.repo_dirs(root / s)] for s in SPLITS}
    repos = {p.name: p for p in dataset_io.repo_dirs(root)}
    counts = {name: sum(1 for _ in p.rglob("*.java")) for name, p in repos.items()}
    assignment = split_repos(counts, cfg.seed, cfg.min_files)
    plan: dict[str, list[tuple[str, Path]]] = {s: [] for s in SPLITS}
    for name, split in assignment.items():
        plan[split].append((name, repos[name]))
    return plan


def build_dataset(corpus_root, out_root, cfg: BuildConfig) -> dict[str, dataset_io.SplitStats]:
    plan = plan_splits(corpus_root, cfg)
    jobs = []
    for split, repos in plan.items():
        cap = cfg.split_caps.get(split, cfg.cap)
        for repo_id, path in repos:
            jobs.append((path, repo_id, Path(out_root, split, repo_id), cfg, cap))
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            list(pool.map(_build_job, jobs))
    else:
        for job in jobs:
            _build_job(job)
    dataset_io.write_meta(out_root)
    return dataset_io.stats(out_root)


# ------------------------------------------------------------ reloading


def record_to_hole(rec: HoleRecord, index: RepoIndex) -> TargetHole:
    line = index.source(rec.file).line(rec.line)
    return TargetHole(rec.repo_id, rec.file, rec.line, dataset_io.char_col(line, rec.col), rec.hole, rec.surrounding)


def _rc_name(text: str, kind: str) -> str:
    first = text.split("\n", 1)[0]
    if first.startswith("rule_name: "):
        return first[len("rule_name: ") :]
    return kind


def load_examples(dataset_root, split: str, kind: str) -> list[PackedExample]:
    """Records of one split as packed examples, with the source file text attached."""
    split_dir = Path(dataset_root, split)
    out = []
    for repo in dataset_io.repo_dirs(split_dir):
        path = dataset_io.context_file(repo, kind)
        if not path.exists():
            continue
        texts: dict[str, str] = {}
        for rec in dataset_io.read_records(path, repo.name):
            if rec.file not in texts:
                texts[rec.file] = (repo / rec.file).read_text(encoding="utf-8")
            line = texts[rec.file].split("\n")[rec.line]
            hole = TargetHole(repo.name, rec.file, rec.line, dataset_io.char_col(line, rec.col), rec.hole, rec.surrounding)
            rcs = [RepoContext(i, _rc_name(t, kind), "", t, 0) for i, t in enumerate(rec.repo_contexts)]
            out.append(PackedExample(hole, rcs, rec.hole, texts[rec.file]))
    return out


def repack(dataset_root, split: str, kind: str, cfg: BuildConfig) -> list[PackedExample]:
    """Re-pack the holes of an existing dataset split under a new packing config."""
    out = []
    for repo in dataset_io.repo_dirs(Path(dataset_root, split)):
        path = dataset_io.context_file(repo, kind)
        if not path.exists():
            continue
        index = scan_repo(repo, repo.name)
        bm25 = bm25_index(index) if kind == "BM25" else None
        for rec in dataset_io.read_records(path, repo.name):
            hole = record_to_hole(rec, index)
            ex = pack_hole(kind, hole, index, cfg, bm25)
            ex.file_text = index.source(hole.rel_path).content
            out.append(ex)
    return out
