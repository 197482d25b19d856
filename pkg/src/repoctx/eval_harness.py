"""Exact-match evaluation of completion providers."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol

from repoctx.packing import PackedExample

log = logging.getLogger(__name__)

MAX_NEW_TOKENS = 128


class CompletionProvider(Protocol):
    name: str

    def complete(self, packed: PackedExample) -> str: ...


@dataclass(frozen=True)
class EvalResult:
    n: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.n if self.n else 0.0

    @property
    def stderr(self) -> float:
        return success_stderr(self.success_rate, self.n)

    def summary(self) -> str:
        return f"{100 * self.success_rate:.2f} ± {100 * self.stderr:.2f} ({self.successes}/{self.n})"


def success_stderr(p: float, n: int) -> float:
    """Standard error of a success rate p over n Bernoulli trials."""
    if n <= 0:
        raise ValueError("n must be positive")
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def predicted_hole(prediction: str) -> str:
    return prediction.split("\n", 1)[0]


def exact_match(prediction: str, target: str, strict: bool = False) -> bool:
    pred = predicted_hole(prediction)
    if strict:
        return pred.encode("utf-8") == target.encode("utf-8")
    return pred.rstrip() == target.rstrip()


@dataclass(frozen=True)
class Outcome:
    hole_id: str
    prediction: str
    target: str
    success: bool
    error: str | None = None

    def to_json(self) -> str:
        obj = {"hole_id": self.hole_id, "prediction": self.prediction, "target": self.target, "success": self.success}
        if self.error is not None:
            obj["error"] = self.error
        return json.dumps(obj, ensure_ascii=False)


def _score_one(provider: CompletionProvider, ex: PackedExample, strict: bool) -> Outcome:
    try:
        pred = provider.complete(ex)
    except Exception as exc:  # noqa: BLE001 - a failing provider counts as a miss
        log.warning("provider %s failed on %s: %s", getattr(provider, "name", provider), ex.hole_id, exc)
        return Outcome(ex.hole_id, "", ex.target, False, f"{type(exc).__name__}: {exc}")
    if not isinstance(pred, str):
        return Outcome(ex.hole_id, "", ex.target, False, "non-string completion")
    return Outcome(ex.hole_id, pred, ex.target, exact_match(pred, ex.target, strict))


def evaluate(
    provider: CompletionProvider,
    dataset: Iterable[PackedExample],
    strict: bool = False,
    jobs: int = 1,
) -> tuple[EvalResult, list[Outcome]]:
    examples = list(dataset)
    if not examples:
        raise ValueError("cannot evaluate an empty dataset")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda ex: _score_one(provider, ex, strict), examples))
    else:
        outcomes = [_score_one(provider, ex, strict) for ex in examples]
    return EvalResult(len(outcomes), sum(o.success for o in outcomes)), outcomes


def write_outcomes(path, outcomes: list[Outcome]) -> None:
    Path(path).write_text("".join(o.to_json() + "\n" for o in outcomes), encoding="utf-8")


# ------------------------------------------------------------ providers


class OracleCopy:
    name = "oracle-copy"

    def complete(self, packed: PackedExample) -> str:
        return packed.target


class PostFirstLine:
    """Predicts the line after the hole line (the first line of the post context)."""

    name = "post-first-line"

    def complete(self, packed: PackedExample) -> str:
        if packed.file_text is None:
            raise ValueError("example carries no source text")
        lines = packed.file_text.split("\n")
        nxt = packed.hole.line_idx + 1
        return lines[nxt] if nxt < len(lines) else ""


class Replay:
    """Predictions read from an NDJSON file of ``{hole_id, prediction}`` objects."""

    name = "replay"

    def __init__(self, path):
        self.predictions: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                if not raw.strip():
                    continue
                obj = json.loads(raw)
                if "hole_id" not in obj or "prediction" not in obj:
                    raise ValueError(f"{path}:{lineno}: expected hole_id and prediction")
                self.predictions[obj["hole_id"]] = obj["prediction"]

    def complete(self, packed: PackedExample) -> str:
        try:
            return self.predictions[packed.hole_id]
        except KeyError:
            raise KeyError(f"no replayed prediction for {packed.hole_id}") from None


class FunctionProvider:
    def __init__(self, name: str, fn: Callable[[PackedExample], str]):
        self.name = name
        self.fn = fn

    def complete(self, packed: PackedExample) -> str:
        return self.fn(packed)


def builtin_providers() -> dict[str, Callable[..., CompletionProvider]]:
    return {"oracle-copy": OracleCopy, "post-first-line": PostFirstLine, "replay": Replay}


def make_provider(spec: str) -> CompletionProvider:
    """Build a provider from `name` or `name:arg` (e.g. ``replay:preds.ndjson``)."""
    name, _, arg = spec.partition(":")
    if name == "fid":
        from repoctx.fid.train import FidProvider

        return FidProvider.load(arg)
    factories = builtin_providers()
    if name not in factories:
        raise ValueError(f"unknown provider {name!r}; expected one of {', '.join([*factories, 'fid'])}")
    return factories[name](arg) if arg else factories[name]()
