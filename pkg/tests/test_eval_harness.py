import json
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from repoctx import pipeline
from repoctx.eval_harness import (
    EvalResult,
    FunctionProvider,
    OracleCopy,
    PostFirstLine,
    Replay,
    evaluate,
    exact_match,
    make_provider,
    success_stderr,
    write_outcomes,
)
from repoctx.hole_gen import TargetHole
from repoctx.packing import PackedExample


def example(i: int, target: str) -> PackedExample:
    return PackedExample(TargetHole("r", "A.java", i, 0, target, ""), [], target)


TOY = [example(i, f"tok{i}();") for i in range(10)]


def test_exact_match_rules():
    assert exact_match("foo(bar);\n// next", "foo(bar);")
    assert not exact_match("foo(bar)", "foo(bar);")
    assert exact_match("foo(bar); ", "foo(bar);")
    assert exact_match("foo(bar);", "foo(bar);  ")
    assert not exact_match("foo(bar); ", "foo(bar);", strict=True)
    assert not exact_match(" foo(bar);", "foo(bar);")


def test_oracle_scores_one():
    result, outcomes = evaluate(OracleCopy(), TOY)
    assert (result.success_rate, result.stderr) == (1.0, 0.0)
    assert all(o.success for o in outcomes)


def test_stderr_cross_checks():
    assert abs(success_stderr(0.5020, 159822) - 0.00125) < 5e-4
    assert abs(success_stderr(0.5297, 12500) - 0.0045) < 5e-4
    # in percentage points: 0.1251 against the reported 0.12, 0.4464 against 0.45
    assert abs(100 * success_stderr(0.5020, 159822) - 0.12) < 0.01
    assert abs(100 * success_stderr(0.5297, 12500) - 0.45) < 0.01


@given(st.integers(1, 10_000))
def test_stderr_bounds(n):
    assert success_stderr(0.0, n) == success_stderr(1.0, n) == 0.0
    ps = [i / 20 for i in range(21)]
    assert max(ps, key=lambda p: success_stderr(p, n)) == 0.5


def test_stderr_needs_positive_n():
    with pytest.raises(ValueError):
        success_stderr(0.5, 0)


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        evaluate(OracleCopy(), [])


def test_replay_half_correct(tmp_path):
    path = tmp_path / "preds.ndjson"
    rows = [{"hole_id": ex.hole_id, "prediction": ex.target if i % 2 else "wrong"} for i, ex in enumerate(TOY)]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    result, _ = evaluate(make_provider(f"replay:{path}"), TOY)
    assert result.success_rate == 0.5
    assert result.stderr == pytest.approx(0.158, abs=5e-4)
    assert result.summary() == "50.00 ± 15.81 (5/10)"


def test_replay_missing_key_counts_as_failure(tmp_path):
    path = tmp_path / "preds.ndjson"
    path.write_text(json.dumps({"hole_id": TOY[0].hole_id, "prediction": TOY[0].target}) + "\n")
    result, outcomes = evaluate(Replay(path), TOY)
    assert (result.n, result.successes) == (10, 1)
    assert outcomes[1].error and "KeyError" in outcomes[1].error


def test_provider_exception_is_logged_failure(caplog):
    def flaky(ex):
        if ex.hole.line_idx % 3 == 0:
            raise RuntimeError("boom")
        return ex.target

    result, outcomes = evaluate(FunctionProvider("flaky", flaky), TOY)
    assert result.successes == 6
    assert "boom" in caplog.text
    assert sum(o.error is not None for o in outcomes) == 4


@given(st.permutations(range(10)), st.integers(1, 4))
def test_order_independent(perm, jobs):
    provider = FunctionProvider("half", lambda ex: ex.target if ex.hole.line_idx < 4 else "")
    base, _ = evaluate(provider, TOY)
    shuffled, _ = evaluate(provider, [TOY[i] for i in perm], jobs=jobs)
    assert shuffled == base == EvalResult(10, 4)


def test_outcomes_ndjson(tmp_path):
    _, outcomes = evaluate(OracleCopy(), TOY[:3])
    write_outcomes(tmp_path / "o.ndjson", outcomes)
    rows = [json.loads(line) for line in (tmp_path / "o.ndjson").read_text().splitlines()]
    assert [r["hole_id"] for r in rows] == [ex.hole_id for ex in TOY[:3]]
    assert all(r["success"] for r in rows)


def test_unknown_provider():
    with pytest.raises(ValueError, match="unknown provider"):
        make_provider("gpt")


def _independent_post_first_line(dataset_root, split) -> tuple[int, int]:
    """Recompute the next-line baseline straight from the NDJSON and sources."""
    hits = total = 0
    for repo in sorted(p for p in (dataset_root / split).iterdir() if p.is_dir()):
        with open(repo / "hole_and_context_PP.json", encoding="utf-8") as fh:
            for raw in fh:
                obj = json.loads(raw)
                lines = (repo / obj["location"]["file"]).read_text(encoding="utf-8").split("\n")
                nxt = obj["location"]["line"] + 1
                pred = lines[nxt] if nxt < len(lines) else ""
                hits += pred.rstrip() == obj["hole"].rstrip()
                total += 1
    return hits, total


def test_post_first_line_golden(built_dataset):
    examples = pipeline.load_examples(built_dataset, "test", "PP")
    result, _ = evaluate(PostFirstLine(), examples)
    assert (result.successes, result.n) == _independent_post_first_line(built_dataset, "test")
    assert (result.successes, result.n) == (10, 140)


def test_oracle_on_built_dataset(built_dataset):
    for split in ("train", "val", "test"):
        result, _ = evaluate(OracleCopy(), pipeline.load_examples(built_dataset, split, "BM25"))
        assert result.success_rate == 1.0


def test_random_provider_rate_matches_count():
    rng = random.Random(0)
    flips = {ex.hole_id: rng.random() < 0.3 for ex in TOY}
    result, _ = evaluate(FunctionProvider("coin", lambda ex: ex.target if flips[ex.hole_id] else "x"), TOY)
    k = sum(flips.values())
    assert result.success_rate == k / 10
    assert result.stderr == pytest.approx(math.sqrt((k / 10) * (1 - k / 10) / 10))
