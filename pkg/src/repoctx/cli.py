"""``repoctx`` command line.

Exit codes: 0 success, 1 usage error, 2 data error. Every command takes
``--seed`` and ``--config FILE`` (``key = value`` lines naming long options,
overridden by flags given on the command line).
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from repoctx import dataset_io, pipeline
from repoctx.dataset_io import KINDS
from repoctx.eval_harness import evaluate, make_provider, write_outcomes
from repoctx.hole_gen import DEFAULT_CAP, SPLITS, derive_seed, generate_holes
from repoctx.javalex import CODE
from repoctx.packing import STRATEGIES, PackingConfig
from repoctx.prompt_proposals import load_ranking
from repoctx.repo_model import scan_repo

log = logging.getLogger("repoctx")

_KIND_ALIASES = {"pp": "PP", "bm25": "BM25", "random_nn": "RandomNN", "randomnn": "RandomNN"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _Help(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def _kind(text: str) -> str:
    key = text.strip().lower().replace("-", "_")
    if key not in _KIND_ALIASES:
        raise argparse.ArgumentTypeError(f"unknown kind {text!r}; choose from pp, bm25, random_nn")
    return _KIND_ALIASES[key]


def _kinds(text: str) -> tuple[str, ...]:
    return tuple(_kind(t) for t in text.split(",") if t.strip())


def _strategy(text: str) -> str:
    name = text.strip().lower().replace("-", "_")
    if name not in STRATEGIES:
        raise argparse.ArgumentTypeError(f"unknown strategy {text!r}; choose from {', '.join(s.replace('_', '-') for s in STRATEGIES)}")
    return name


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# ------------------------------------------------------------ output helpers


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _packing(args) -> PackingConfig:
    return PackingConfig(
        strategy=args.strategy,
        n_contexts=args.n,
        context_len=args.l,
        include_surrounding=not args.no_surrounding,
        repeat_single=args.repeat_single,
        seed=args.seed,
    )


def _repo_roots(root: Path, corpus: bool) -> list[Path]:
    if any((root / s).is_dir() for s in SPLITS):
        return [repo for s in SPLITS for repo in dataset_io.repo_dirs(root / s)]
    return dataset_io.repo_dirs(root) if corpus else [root]


# ------------------------------------------------------------ commands


def cmd_scan(args) -> int:
    rows = ["repo\tfile\tlines\tcode_lines\tmethods\timports"]
    skipped = []
    totals = [0, 0, 0]
    for repo in _repo_roots(Path(args.root), args.corpus):
        index = scan_repo(repo, repo.name, jobs=args.jobs)
        for rel in index.paths:
            sf, facts = index.files[rel]
            code = sum(1 for m in facts.line_mask if m == CODE)
            rows.append(f"{repo.name}\t{rel}\t{len(sf.line_spans)}\t{code}\t{len(facts.method_spans)}\t{len(index.import_edges[rel])}")
            totals[0] += 1
            totals[1] += len(sf.line_spans)
            totals[2] += code
        skipped += [f"{repo.name}\t{p}" for p in index.skipped]
    rows.append(f"# files={totals[0]} lines={totals[1]} code_lines={totals[2]} skipped={len(skipped)}")
    rows += [f"# skipped\t{s}" for s in skipped]
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def cmd_holes(args) -> int:
    lines = []
    for repo in _repo_roots(Path(args.root), args.corpus):
        index = scan_repo(repo, repo.name, jobs=args.jobs)
        for h in generate_holes(index, args.seed, args.cap):
            rec = pipeline.to_record(h, index, None)
            obj = {"hole_id": rec.hole_id, "location": {"file": rec.file, "line": rec.line, "col": rec.col}, "hole": rec.hole, "surrounding": rec.surrounding}
            lines.append(json.dumps(obj, ensure_ascii=False))
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


def cmd_build_dataset(args) -> int:
    ranking = tuple(load_ranking(args.ranking)) if args.ranking else None
    split_caps = {s: getattr(args, f"cap_{s}") for s in SPLITS if getattr(args, f"cap_{s}") is not None}
    cfg = pipeline.BuildConfig(
        packing=_packing(args),
        kinds=args.kinds,
        seed=args.seed,
        cap=args.cap,
        split_caps=split_caps,
        ranking=ranking,
        min_files=args.min_files,
        jobs=args.jobs,
    )
    table = pipeline.build_dataset(args.root, args.out, cfg)
    sys.stdout.write(dataset_io.format_stats(table))
    return 0


def _packed_json(ex) -> str:
    obj = {
        "hole_id": ex.hole_id,
        "target": ex.target,
        "repo_contexts": [
            {"slot": rc.slot_index, "rule_name": rc.ppc_name, "tokens": rc.chunk_token_count, "text": rc.formatted_text} for rc in ex.rcs
        ],
    }
    return json.dumps(obj, ensure_ascii=False)


def cmd_pack(args) -> int:
    cfg = pipeline.BuildConfig(packing=_packing(args), seed=args.seed)
    examples = pipeline.repack(args.dataset, args.split, args.kind, cfg)
    _emit("".join(_packed_json(ex) + "\n" for ex in examples), args.out)
    return 0


def _examples(args):
    if args.repack:
        cfg = pipeline.BuildConfig(packing=_packing(args), seed=args.seed)
        return pipeline.repack(args.dataset, args.split, args.kind, cfg)
    return pipeline.load_examples(args.dataset, args.split, args.kind)


def cmd_eval(args) -> int:
    examples = _examples(args)
    if not examples:
        raise dataset_io.DatasetError(f"no {args.kind} records in split {args.split!r} of {args.dataset}")
    rows = ["provider\tn\tsuccesses\tsuccess_rate\tstderr"]
    results = {}
    out = Path(args.out) if args.out else None
    for spec in args.provider:
        provider = make_provider(spec)
        result, outcomes = evaluate(provider, examples, strict=args.strict_bytes, jobs=args.jobs)
        results[spec] = result
        rows.append(f"{spec}\t{result.n}\t{result.successes}\t{result.success_rate:.4f}\t{result.stderr:.4f}")
        if out:
            safe = spec.replace("/", "_").replace(":", "_")
            out.mkdir(parents=True, exist_ok=True)
            write_outcomes(out / f"outcomes_{safe}.ndjson", outcomes)
    table = "\n".join(rows) + "\n"
    sys.stdout.write(table)
    if out:
        from repoctx import plots

        (out / "results.tsv").write_text(table, encoding="utf-8")
        plots.success_rates(results, out / "success_rate.png")
    return 0


def cmd_train_toy(args) -> int:
    from repoctx import plots
    from repoctx.eval_harness import FunctionProvider
    from repoctx.fid.model import ModelConfig
    from repoctx.fid.train import greedy_decode, save, to_toy, train, vocab_for

    cfg = pipeline.BuildConfig(packing=_packing(args), seed=args.seed)
    examples = pipeline.repack(args.dataset, args.split, args.kind, cfg)
    if not examples:
        raise dataset_io.DatasetError(f"no {args.kind} records in split {args.split!r} of {args.dataset}")
    if args.limit and len(examples) > args.limit:
        rng = random.Random(derive_seed(args.seed, "train_toy"))
        examples = [examples[i] for i in sorted(rng.sample(range(len(examples)), args.limit))]
    vocab = vocab_for(examples)
    mcfg = ModelConfig(
        vocab_size=len(vocab),
        d_model=args.d_model,
        n_heads=args.heads,
        n_enc_layers=args.enc_layers,
        n_dec_layers=args.dec_layers,
        d_ff=args.d_ff,
        max_rc_tokens=args.max_rc_tokens,
        n_contexts=args.n,
        cross_position_bias=not args.no_cross_bias,
    )
    toys = [to_toy(ex, vocab, mcfg) for ex in examples]
    result = train(toys, mcfg, vocab, args.steps, lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    out = save(args.out, result.params, mcfg, vocab, result.losses)
    plots.loss_curve(result.losses, out / "loss.png")

    decoded = dict(zip((ex.hole_id for ex in examples), greedy_decode(result.params, mcfg, vocab, toys)))
    fit, _ = evaluate(FunctionProvider("fid", lambda ex: decoded[ex.hole_id].text), examples)
    final = result.losses[-1] if result.losses else float("nan")
    summary = f"examples\tsteps\tfinal_loss\ttrain_success_rate\n{len(examples)}\t{args.steps}\t{final:.6f}\t{fit.success_rate:.4f}\n"
    (out / "summary.tsv").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return 0


def cmd_stats(args) -> int:
    root = Path(args.dataset)
    if not root.is_dir():
        raise dataset_io.DatasetError(f"dataset root not found: {root}")
    table = dataset_io.stats(root)
    text = dataset_io.format_stats(table)
    sys.stdout.write(text)
    if args.out:
        from repoctx import plots

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.tsv").write_text(text, encoding="utf-8")
        plots.corpus_stats(table, out / "stats.png")
    return 0


# ------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="single seed behind all randomness")
    p.add_argument("--jobs", type=_positive, default=1, help="worker count; never changes outputs")
    p.add_argument("--config", metavar="FILE", help="key = value defaults, overridden by flags")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _packing_flags(p: argparse.ArgumentParser, n: int = 32, l: int = 768) -> None:
    g = p.add_argument_group("packing")
    g.add_argument("--strategy", type=_strategy, default="nt-prior-last", help="t-rank, t-rand, nt-rank or nt-prior-last")
    g.add_argument("--n", type=_positive, default=n, help="number of repo contexts N")
    g.add_argument("--l", type=_positive, default=l, help="tokens per repo context l")
    g.add_argument("--no-surrounding", action="store_true", help="drop the hole_context segment from every context")
    g.add_argument("--repeat-single", metavar="PROPOSAL", help="fill all N contexts from one proposal, e.g. current/post_lines")


def _split_kind(p: argparse.ArgumentParser, split: str) -> None:
    p.add_argument("--split", choices=SPLITS, default=split, help="dataset split")
    p.add_argument("--kind", type=_kind, default="PP", help="context kind: pp, bm25 or random_nn")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repoctx", description="Repository-context datasets, packing and evaluation for code completion.", formatter_class=_Help)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("scan", help="index summary of a repo or corpus", formatter_class=_Help)
    p.add_argument("root", help="repo directory, or a corpus with train/val/test splits")
    p.add_argument("--corpus", action="store_true", help="treat each subdirectory of ROOT as a repo")
    p.add_argument("--out", help="write the TSV here instead of stdout")
    _common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("holes", help="target holes as NDJSON", formatter_class=_Help)
    p.add_argument("root", help="repo directory, or a corpus with train/val/test splits")
    p.add_argument("--corpus", action="store_true", help="treat each subdirectory of ROOT as a repo")
    p.add_argument("--cap", type=_positive, default=DEFAULT_CAP, help="max holes per repo")
    p.add_argument("--out", help="write NDJSON here instead of stdout")
    _common(p)
    p.set_defaults(func=cmd_holes)

    p = sub.add_parser("build-dataset", help="write a Stack-Repo style dataset tree", formatter_class=_Help)
    p.add_argument("root", help="corpus root: train/val/test subdirs, or repo dirs to split 2:1:1")
    p.add_argument("out", help="output dataset root")
    p.add_argument("--kinds", type=_kinds, default=KINDS, help="comma list of pp, bm25, random_nn")
    p.add_argument("--cap", type=_positive, default=DEFAULT_CAP, help="max holes per repo")
    for s in SPLITS:
        p.add_argument(f"--cap-{s}", type=_positive, default=None, help=f"hole cap override for {s} repos")
    p.add_argument("--min-files", type=_positive, default=20, help="min .java files per repo when splitting")
    p.add_argument("--ranking", metavar="FILE", help="prompt proposal ranking, one name per line")
    _packing_flags(p)
    _common(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("pack", help="re-pack a dataset split as NDJSON", formatter_class=_Help)
    p.add_argument("dataset", help="dataset root")
    _split_kind(p, "test")
    p.add_argument("--out", help="write NDJSON here instead of stdout")
    _packing_flags(p)
    _common(p)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("eval", help="exact-match success rate of providers", formatter_class=_Help)
    p.add_argument("dataset", help="dataset root")
    p.add_argument("--provider", action="append", help="oracle-copy, post-first-line, replay:FILE or fid:DIR (repeatable)")
    _split_kind(p, "test")
    p.add_argument("--strict-bytes", action="store_true", help="compare bytes without trimming trailing whitespace")
    p.add_argument("--repack", action="store_true", help="re-pack with the packing flags instead of reading stored contexts")
    p.add_argument("--out", help="directory for results.tsv, per-provider outcomes and success_rate.png")
    _packing_flags(p)
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-toy", help="train the toy fusion-in-decoder model", formatter_class=_Help)
    p.add_argument("dataset", help="dataset root")
    p.add_argument("out", help="directory for params, loss.csv and loss.png")
    _split_kind(p, "train")
    p.add_argument("--limit", type=int, default=50, help="examples to train on (0 = all)")
    p.add_argument("--steps", type=int, default=400, help="optimizer steps")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    p.add_argument("--batch-size", type=_positive, default=10, help="examples per step")
    p.add_argument("--d-model", type=_positive, default=64, help="model width")
    p.add_argument("--d-ff", type=_positive, default=128, help="feed-forward width")
    p.add_argument("--heads", type=_positive, default=2, help="attention heads")
    p.add_argument("--enc-layers", type=_positive, default=1, help="encoder layers")
    p.add_argument("--dec-layers", type=_positive, default=1, help="decoder layers")
    p.add_argument("--max-rc-tokens", type=_positive, default=64, help="model tokens kept from the end of each context")
    p.add_argument("--no-cross-bias", action="store_true", help="disable the learned bias over context positions")
    _packing_flags(p, n=4, l=32)
    _common(p)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("stats", help="per-split repo, file and hole counts", formatter_class=_Help)
    p.add_argument("dataset", help="dataset root")
    p.add_argument("--out", help="directory for stats.tsv and stats.png")
    _common(p)
    p.set_defaults(func=cmd_stats)
    return parser


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip().strip('"')
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    overrides = {}
    for key, value in read_config(args.config).items():
        action = actions.get(key)
        if action is None or key in ("config", "func", "help"):
            raise UsageError(f"{args.config}: unknown option {key!r} for {args.command}")
        if action.nargs == 0:
            overrides[key] = _bool(value)
        elif isinstance(action, argparse._AppendAction):  # noqa: SLF001
            overrides[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            overrides[key] = value
    sub.set_defaults(**overrides)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"repoctx: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"repoctx: error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help, or a usage error already printed by the parser
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "eval" and not args.provider:
        args.provider = ["oracle-copy"]
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"repoctx: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except (ValueError, KeyError, OSError) as exc:
        print(f"repoctx: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
