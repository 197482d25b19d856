import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from repoctx import dataset_io
from repoctx.cli import main, read_config

SUBCOMMANDS = ["scan", "holes", "build-dataset", "pack", "eval", "train-toy", "stats"]


def tree_hash(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_help_exists(command, capsys, monkeypatch):
    monkeypatch.setenv("COLUMNS", "200")
    assert main([command, "--help"]) == 0
    text = capsys.readouterr().out
    assert "--seed" in text and "(default: 0)" in text
    if command in ("build-dataset", "pack", "eval"):
        assert "(default: nt-prior-last)" in text
        assert "(default: 32)" in text and "(default: 768)" in text


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "stats", "x", "--bogus")
    assert code == 1 and "usage:" in err


def test_bad_strategy_is_usage_error(capsys, mini_root, tmp_path):
    code, _, err = run(capsys, "build-dataset", mini_root, tmp_path / "o", "--strategy", "t-best")
    assert code == 1 and "unknown strategy" in err


def test_missing_dataset_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "stats", tmp_path / "nope")
    assert code == 2 and "not found" in err


def test_corrupt_dataset_is_data_error(capsys, tmp_path):
    repo = tmp_path / "ds" / "test" / "r"
    repo.mkdir(parents=True)
    (repo / "hole_and_context_PP.json").write_text("{not json\n")
    code, _, err = run(capsys, "eval", tmp_path / "ds")
    assert code == 2 and "hole_and_context_PP.json:1" in err


def test_stats_matches_manifest(capsys, built_dataset, manifest):
    code, out, _ = run(capsys, "stats", built_dataset)
    assert code == 0
    rows = [line.split("\t") for line in out.splitlines()[1:]]
    got = {r[0]: (int(r[1]), int(r[2]), int(r[3])) for r in rows}
    assert got == {s: (len(i["repos"]), i["n_files"], i["n_code_lines"]) for s, i in manifest["splits"].items()}


def test_eval_oracle_and_report(capsys, built_dataset, tmp_path):
    code, out, _ = run(capsys, "eval", built_dataset, "--provider", "oracle-copy", "--provider", "post-first-line", "--out", tmp_path / "r")
    assert code == 0
    lines = out.splitlines()
    assert lines[1].split("\t")[:4] == ["oracle-copy", "140", "140", "1.0000"]
    assert lines[1].split("\t")[4] == "0.0000"
    assert (tmp_path / "r" / "results.tsv").read_text() == out
    assert (tmp_path / "r" / "success_rate.png").read_bytes()[:4] == b"\x89PNG"
    assert len((tmp_path / "r" / "outcomes_oracle-copy.ndjson").read_text().splitlines()) == 140


def test_config_file_and_flag_precedence(capsys, tmp_path, built_dataset):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# packing\nstrategy = t-rank\nn = 3\nl = 16\nsplit = val\nkind = bm25\n")
    assert read_config(cfg)["strategy"] == "t-rank"
    code, out, _ = run(capsys, "pack", built_dataset, "--config", cfg)
    assert code == 0
    first = json.loads(out.splitlines()[0])
    assert len(first["repo_contexts"]) == 3 and all(rc["tokens"] <= 16 for rc in first["repo_contexts"])
    code, out, _ = run(capsys, "pack", built_dataset, "--config", cfg, "--n", "5")
    assert code == 0 and len(json.loads(out.splitlines()[0])["repo_contexts"]) == 5


def test_config_unknown_key(capsys, tmp_path, built_dataset):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = red\n")
    code, _, err = run(capsys, "stats", built_dataset, "--config", cfg)
    assert code == 1 and "colour" in err


def test_scan_and_holes(capsys, mini_root, manifest):
    code, out, _ = run(capsys, "scan", mini_root)
    assert code == 0
    total = sum(i["n_files"] for i in manifest["splits"].values())
    assert len([r for r in out.splitlines() if not r.startswith("#")]) == total + 1
    code, out, _ = run(capsys, "holes", mini_root, "--cap", "5")
    assert code == 0 and len(out.splitlines()) == 15
    assert {"hole_id", "location", "hole", "surrounding"} <= set(json.loads(out.splitlines()[0]))


def test_build_dataset_tree_and_determinism(tmp_path, mini_root, capsys):
    args = ["build-dataset", mini_root, None, "--strategy", "nt-prior-last", "--n", "32", "--l", "768"]
    hashes = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        args[2] = tmp_path / name
        assert run(capsys, *args, "--jobs", jobs)[0] == 0
        hashes.append(tree_hash(tmp_path / name))
    assert hashes[0] == hashes[1] == hashes[2]
    for split in dataset_io.SPLITS:
        for repo in dataset_io.repo_dirs(tmp_path / "a" / split):
            assert sorted(p.name for p in repo.glob("hole_and_context_*.json")) == [
                "hole_and_context_BM25.json",
                "hole_and_context_PP.json",
                "hole_and_context_RandomNN.json",
            ]


def test_train_toy_smoke(tmp_path, built_dataset, capsys):
    out = tmp_path / "m"
    argv = ["train-toy", built_dataset, out, "--limit", "4", "--steps", "3", "--d-model", "8", "--d-ff", "8", "--max-rc-tokens", "8"]
    code, stdout, _ = run(capsys, *argv)
    assert code == 0 and stdout.startswith("examples\tsteps\tfinal_loss")
    assert {"params.bin", "params.json", "loss.csv", "loss.png", "summary.tsv"} <= {p.name for p in out.iterdir()}
    first = tree_hash(out)
    assert run(capsys, *argv)[0] == 0
    assert tree_hash(out) == first
    code, stdout, _ = run(capsys, "eval", built_dataset, "--split", "train", "--repack", "--n", "4", "--l", "32", "--provider", f"fid:{out}")
    assert code == 0 and stdout.splitlines()[1].startswith(f"fid:{out}\t136\t")


def test_console_script_entry_point(built_dataset):
    proc = subprocess.run([sys.executable, "-m", "repoctx.cli", "stats", str(built_dataset)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("split\t")
