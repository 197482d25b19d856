import json
from pathlib import Path

import pytest

import repoctx
from repoctx import pipeline
from repoctx.repo_model import scan_repo

MINI = Path(repoctx.__file__).parent / "data" / "mini_corpus"
FIXTURES = Path(__file__).parent / "fixtures"
REPOS = {"billing": MINI / "train" / "billing", "geo": MINI / "val" / "geo", "tasks": MINI / "test" / "tasks"}


@pytest.fixture(scope="session")
def mini_root() -> Path:
    return MINI


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((FIXTURES / "mini_corpus_manifest.json").read_text())


@pytest.fixture(scope="session")
def indices():
    return {name: scan_repo(path, name) for name, path in REPOS.items()}


@pytest.fixture(scope="session")
def billing(indices):
    return indices["billing"]


@pytest.fixture(scope="session")
def built_dataset(tmp_path_factory):
    """The mini-corpus built once with default settings."""
    out = tmp_path_factory.mktemp("dataset") / "stack_repo"
    pipeline.build_dataset(MINI, out, pipeline.BuildConfig())
    return out


def make_repo(root: Path, files: dict[str, str]) -> Path:
    for rel, text in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return root


# acceptance criteria report their verdicts here; printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
