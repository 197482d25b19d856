"""One test per acceptance criterion; each records a PASS/FAIL line."""

import hashlib
import math
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from repoctx import dataset_io, pipeline
from repoctx.cli import main
from repoctx.eval_harness import OracleCopy, evaluate, success_stderr
from repoctx.fid.model import Batch, ModelConfig, forward, init_params, loss, loss_and_grad
from repoctx.fid.train import FidProvider, synthetic_holes, to_toy, train, vocab_for
from repoctx.hole_gen import generate_holes
from repoctx.packing import PAD, PackingConfig, chunk_ppc, count_tokens, pack
from repoctx.prompt_proposals import POST, PRIOR, PPC, ranked_ppcs
from repoctx.repo_model import scan_repo
from repoctx.retrieval import BM25Index


@contextmanager
def criterion(n: int, title: str, limit: float | None = None):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE[n] = f"criterion {n:2d} FAIL  {title}: {type(exc).__name__}"
        print(ACCEPTANCE[n])
        raise
    elapsed = time.perf_counter() - start
    ok = limit is None or elapsed < limit
    budget = f" (limit {limit:g} s)" if limit else ""
    ACCEPTANCE[n] = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title} [{elapsed:.2f} s{budget}]"
    print(ACCEPTANCE[n])
    assert ok, f"took {elapsed:.2f} s, limit {limit} s"


def all_holes(mini_root):
    out = []
    for split in dataset_io.SPLITS:
        for repo in dataset_io.repo_dirs(mini_root / split):
            index = scan_repo(repo, repo.name)
            out += [(h, index) for h in generate_holes(index, 0)]
    return out


def test_c01_chunk_formula():
    rng = random.Random(2024)
    pairs = [(rng.randint(0, 4000), rng.randint(1, 1024)) for _ in range(200)]
    with criterion(1, "chunk count is ceil(L/l) with full chunks but the last", limit=1.0):
        for L, l in pairs:
            chunks = chunk_ppc(PPC("p", " ".join(["tok"] * L)), l)
            assert len(chunks) == math.ceil(L / l)
            assert all(count_tokens(c) == l for c in chunks[:-1])
            if chunks:
                assert 1 <= count_tokens(chunks[-1]) <= l


def test_c02_strategy_semantics(mini_root):
    holes = all_holes(mini_root)
    assert len(holes) >= 300
    with criterion(2, f"strategy semantics on {len(holes)} mini-corpus holes", limit=10.0):
        for hole, index in holes:
            ppcs = ranked_ppcs(hole, index)
            non_empty = [p for p in ppcs if p.text]
            prior = next(p for p in ppcs if p.name == PRIOR)
            for n, l in ((8, 64), (32, 768)):
                t_rank = pack(hole, ppcs, PackingConfig("t_rank", n, l))
                assert [rc.ppc_name for rc in t_rank.rcs if rc.ppc_name != PAD] == [p.name for p in non_empty[:n]]
                t_rand = pack(hole, ppcs, PackingConfig("t_rand", n, l))
                assert sorted(rc.formatted_text for rc in t_rand.rcs) == sorted(rc.formatted_text for rc in t_rank.rcs)
                last = pack(hole, ppcs, PackingConfig("nt_prior_last", n, l))
                if prior.text:
                    real = [rc for rc in last.rcs if rc.ppc_name != PAD]
                    assert real[-1].ppc_name == PRIOR and prior.text.endswith(real[-1].chunk_text)
                for ex in (t_rank, t_rand, last):
                    assert len(ex.rcs) == n and all(rc.chunk_token_count <= l for rc in ex.rcs)


def test_c03_bm25_oracle():
    docs = {
        "d1": "auth token auth".split(),
        "d2": "token refresh".split(),
        "d3": "user name".split(),
        "d4": "auth user token token".split(),
        "d5": "cache".split(),
    }
    with criterion(3, "BM25 matches the hand-computed table"):
        k1, b = 1.5, 0.75
        N = len(docs)
        avgdl = sum(map(len, docs.values())) / N
        query = ["auth", "token"]
        expected = {}
        for key, doc in docs.items():
            total = 0.0
            for term in query:
                df = sum(term in d for d in docs.values())
                idf = math.log((N - df + 0.5) / (df + 0.5) + 1)
                tf = doc.count(term)
                total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(doc) / avgdl))
            expected[key] = total
        got = BM25Index(docs).scores(query)
        assert all(abs(got[k] - expected[k]) < 1e-9 for k in docs)
        assert got["d3"] == 0.0 and got["d5"] == 0.0


def test_c04_dataset_round_trip(built_dataset, manifest):
    with criterion(4, "built records read back exactly; counts match the manifest"):
        cfg = pipeline.BuildConfig()
        for split, info in manifest["splits"].items():
            for repo_dir in dataset_io.repo_dirs(built_dataset / split):
                index = scan_repo(repo_dir, repo_dir.name)
                holes = generate_holes(index, cfg.seed, cfg.cap)
                bm25 = pipeline.bm25_index(index)
                for kind in dataset_io.KINDS:
                    expected = [pipeline.to_record(h, index, pipeline.pack_hole(kind, h, index, cfg, bm25)) for h in holes]
                    path = dataset_io.context_file(repo_dir, kind)
                    assert dataset_io.read_records(path, repo_dir.name) == expected
                    assert dataset_io.read_dataset(built_dataset / split, kind) == expected
                    assert path.read_bytes().count(b"\n") == len(holes) == info["n_code_lines"]
        table = dataset_io.stats(built_dataset)
        for split, info in manifest["splits"].items():
            s = table[split]
            assert (s.n_repos, s.n_files, s.n_holes) == (len(info["repos"]), info["n_files"], info["n_code_lines"])


def test_c05_eval_sanity(built_dataset):
    with criterion(5, "oracle scores 1 with stderr 0; stderr formula reproduces ±0.12 and ±0.45"):
        result, _ = evaluate(OracleCopy(), pipeline.load_examples(built_dataset, "test", "PP"))
        assert (result.success_rate, result.stderr) == (1.0, 0.0)
        assert abs(success_stderr(0.5020, 159822) - 0.00125) < 5e-4
        assert abs(success_stderr(0.5297, 12500) - 0.0045) < 5e-4


def test_c06_gradient_check():
    cfg = ModelConfig(vocab_size=11, d_model=8, n_heads=2, d_ff=16, max_rc_tokens=8, n_contexts=2, max_target_tokens=8)
    rng = np.random.default_rng(6)
    mask = np.ones((2, 2, 8), dtype=bool)
    mask[0, 1, 5:] = False
    tgt_mask = np.ones((2, 5), dtype=bool)
    tgt_mask[1, 3:] = False
    batch = Batch(rng.integers(0, 11, (2, 2, 8)), mask, rng.integers(0, 11, (2, 5)), rng.integers(0, 11, (2, 5)), tgt_mask)
    params = init_params(cfg, 6, std=0.3)
    eps = 1e-5
    with criterion(6, "analytic gradient matches central differences (rel < 1e-4)", limit=60.0):
        _, grads = loss_and_grad(params, cfg, batch)
        worst, count = 0.0, 0
        for name, value in params.items():
            flat, analytic = value.reshape(-1), grads[name].reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + eps
                up = loss(params, cfg, batch)
                flat[j] = orig - eps
                down = loss(params, cfg, batch)
                flat[j] = orig
                num = (up - down) / (2 * eps)
                worst = max(worst, abs(num - analytic[j]) / max(abs(num), abs(analytic[j]), 1e-6))
                count += 1
        print(f"checked {count} coordinates, worst relative error {worst:.2e}")
        assert worst < 1e-4


def test_c07_permutations():
    rng = np.random.default_rng(7)
    N, L = 4, 8
    ids = rng.integers(0, 17, (2, N, L))
    mask = np.ones((2, N, L), dtype=bool)
    mask[1, 2, 4:] = False
    tgt = rng.integers(0, 17, (2, 6))
    perms = [rng.permutation(N) for _ in range(50)]

    def shuffled(p):
        return Batch(ids[:, p], mask[:, p], tgt, tgt, np.ones((2, 6), dtype=bool))

    with criterion(7, "order-blind without the cross bias, order-aware with it"):
        blind = ModelConfig(vocab_size=17, d_model=8, d_ff=16, max_rc_tokens=L, n_contexts=N, cross_position_bias=False)
        params = init_params(blind, 7, std=0.1)
        base = forward(params, blind, shuffled(np.arange(N)))
        assert max(np.abs(forward(params, blind, shuffled(p)) - base).max() for p in perms) < 1e-8
        aware = ModelConfig(vocab_size=17, d_model=8, d_ff=16, max_rc_tokens=L, n_contexts=N)
        params = init_params(aware, 7, std=0.1)
        base = forward(params, aware, shuffled(np.arange(N)))
        assert max(np.abs(forward(params, aware, shuffled(p)) - base).max() for p in perms) > 1e-6


@pytest.mark.slow
def test_c08_overfit(mini_root):
    with criterion(8, "toy model memorises 50 real holes (>= 95% exact match)", limit=600.0):
        packed = synthetic_holes(mini_root, n=50, seed=0, n_contexts=4, context_len=32)
        vocab = vocab_for(packed)
        cfg = ModelConfig(vocab_size=len(vocab), d_model=64, d_ff=128, n_contexts=4, max_rc_tokens=64)
        toys = [to_toy(p, vocab, cfg) for p in packed]
        result = train(toys, cfg, vocab, steps=300, seed=0)
        fit, _ = evaluate(FidProvider(result.params, cfg, vocab), packed)
        print(f"exact match {fit.summary()} after {len(result.losses)} steps, final loss {result.losses[-1]:.4f}")
        assert fit.success_rate >= 0.95


def test_c09_ablation_hooks(mini_root):
    holes = all_holes(mini_root)
    with criterion(9, "repeat_single and include_surrounding=false on the mini-corpus"):
        for hole, index in holes:
            ppcs = ranked_ppcs(hole, index)
            for strategy in ("t_rank", "nt_rank"):
                ex = pack(hole, ppcs, PackingConfig(strategy, 8, 64, repeat_single=POST))
                assert len(ex.rcs) == 8 and {rc.ppc_name for rc in ex.rcs} == {POST}
            ex = pack(hole, ppcs, PackingConfig("nt_prior_last", 8, 64, include_surrounding=False))
            assert all("hole_context:" not in rc.formatted_text for rc in ex.rcs)


def _hash_tree(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c10_cli_determinism(tmp_path, mini_root, capsys):
    def run_all(out: Path) -> dict[str, str]:
        ds = out / "ds"
        commands = [
            ["scan", mini_root, "--out", out / "scan.tsv"],
            ["holes", mini_root, "--out", out / "holes.ndjson"],
            ["build-dataset", mini_root, ds, "--n", "8", "--l", "128", "--jobs", "2"],
            ["pack", ds, "--strategy", "t-rand", "--out", out / "pack.ndjson"],
            ["eval", ds, "--provider", "oracle-copy", "--provider", "post-first-line", "--out", out / "eval"],
            ["train-toy", ds, out / "model", "--limit", "5", "--steps", "4", "--n", "8", "--l", "128", "--d-model", "8", "--d-ff", "8", "--max-rc-tokens", "16"],
            ["stats", ds, "--out", out / "stats"],
        ]
        stdout = []
        for argv in commands:
            assert main([str(a) for a in argv]) == 0, argv[0]
            stdout.append(capsys.readouterr().out)
        (out / "stdout.txt").write_text("\n".join(stdout))
        return _hash_tree(out)

    with criterion(10, "every CLI command reruns byte-identically"):
        first = run_all(tmp_path / "a")
        second = run_all(tmp_path / "b")
        assert len(first) > 40 and first == second
