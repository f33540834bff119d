"""``lexeval`` command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Settings resolve as flags > ``--config`` JSON file > built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from lexeval import __version__
from lexeval.annotate import AnnotationError, WordAnnotation, group_by_document, write_annotations
from lexeval.assess.features import level_proportions
from lexeval.assess.svr import SvrParams
from lexeval.experiments import (
    ExperimentConfig,
    ExperimentError,
    RUNNERS,
    Session,
    annotate_corpus,
    essay_features,
    load_documents,
    load_essay_corpus,
)
from lexeval.annotate import read_annotations
from lexeval.levels import SCORED_LABELS
from lexeval.lexicon import LexiconError, lexicon_stats, parse_lexicon, sample_lexicon
from lexeval.llm.backends import API_KEY_ENV, BackendConfig, BackendError
from lexeval.metrics import MetricError, evaluate_words
from lexeval.report import FORMATS, atomic_write, dumps, emit_report, render_html
from lexeval.textproc import AnalyzerError, GoldFormatError, read_gold_corpus

log = logging.getLogger("lexeval")

BACKEND_KINDS = {
    "http": "http_openai_compatible",
    "mock-uniform": "mock_uniform",
    "mock-positional": "mock_positional",
    "mock-oracle": "mock_oracle",
}

DEFAULTS = {
    "lexicon": None,
    "inputs": [],
    "gold": None,
    "pred": None,
    "scores": None,
    "method": "llm",
    "model": "",
    "api_base": "https://api.openai.com/v1",
    "backend": "http",
    "permutations": None,
    "context": "sentence",
    "label_style": "number",
    "seed": 0,
    "cache": None,
    "jobs": 4,
    "out": "lexeval_out",
    "format": "json,tsv",
    "keep_partial": False,
    "buckets": "3,4,5,6",
    "denominator": "words",
    "include_na": False,
    "folds": 5,
    "stratify": False,
    "words": "",
    "top_words": 2,
    "unit": "occurrence",
    "thresholds": "B2,B1,A2",
    "analyzer": "rule",
    "top_logprobs": 20,
    "results": None,
    "stats": False,
}


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunManifest:
    command_line: list[str]
    command: str
    config_hash: str
    seed: int
    lexicon_version: str
    backend: str
    cache_hits: int
    cache_misses: int
    started: str
    finished: str
    tool_version: str = __version__
    outputs: list[str] = dataclasses.field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        atomic_write(path, dumps(dataclasses.asdict(self)))
        return path


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


# -- argument parsing ------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults stay None so that config-file values can fill unset flags
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--lexicon", help="lexicon JSONL (default: bundled sample)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", help=f"comma-separated subset of {','.join(FORMATS)}")
    p.add_argument("--jobs", type=int)
    p.add_argument("--show-config", action="store_true", help="print resolved settings and exit")
    p.add_argument("--analyzer", choices=["rule", "spacy"])


def _add_backend(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", help="llm, pos or random (comma-separated where several are accepted)")
    p.add_argument("--backend", choices=sorted(BACKEND_KINDS))
    p.add_argument("--model")
    p.add_argument("--api-base", dest="api_base")
    p.add_argument("--permutations", help="full, none or sample:N")
    p.add_argument("--context", choices=["sentence", "essay"])
    p.add_argument("--labels", dest="label_style", choices=["number", "letter"])
    p.add_argument("--cache", help="response cache file (JSONL)")
    p.add_argument("--top-logprobs", dest="top_logprobs", type=int)


def _add_essay(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scores", help="TSV: doc_id plus score columns (optional essay_level, split)")
    p.add_argument("--denominator", choices=["words", "content"])
    p.add_argument("--include-na", dest="include_na", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexeval", description="CEFR vocabulary profiling and evaluation")
    parser.add_argument("--version", action="version", version=f"lexeval {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a lexicon and write it in normalised form")
    _add_common(p)
    p.add_argument("--stats", action="store_const", const=True, help="also report polysemy statistics")

    p = sub.add_parser("stats", help="lexicon statistics")
    _add_common(p)

    p = sub.add_parser("annotate", help="label every token of the input documents")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--in", dest="inputs", action="append", help="text, gold TSV, JSONL corpus or directory")
    p.add_argument("--keep-partial", dest="keep_partial", action="store_const", const=True)

    p = sub.add_parser("eval-words", help="word-level accuracy and per-level F1 against gold")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--gold", help="gold TSV corpus")
    p.add_argument("--pred", help="annotations JSONL to score (otherwise annotate with --method)")

    p = sub.add_parser("semantic-eval", help="sense identification accuracy per meaning-count bucket")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--buckets", help="comma-separated meaning counts")

    p = sub.add_parser("essay-features", help="per-essay level proportions and composite")
    _add_common(p)
    _add_backend(p)
    _add_essay(p)
    p.add_argument("--in", dest="inputs", action="append")

    p = sub.add_parser("essay-eval", help="naive and SVR correlation with essay scores")
    _add_common(p)
    _add_backend(p)
    _add_essay(p)
    p.add_argument("--in", dest="inputs", action="append")
    p.add_argument("--folds", type=int)
    p.add_argument("--stratify", action="store_const", const=True)

    p = sub.add_parser("distribution", help="cumulative level curves and AUC eCDF per essay level")
    _add_common(p)
    _add_backend(p)
    _add_essay(p)
    p.add_argument("--in", dest="inputs", action="append")

    p = sub.add_parser("consistency", help="level-or-above consistency for frequent ambiguous words")
    _add_common(p)
    _add_backend(p)
    _add_essay(p)
    p.add_argument("--in", dest="inputs", action="append")
    p.add_argument("--words", help="comma-separated target lemmas")
    p.add_argument("--top-words", dest="top_words", type=int)
    p.add_argument("--unit", choices=["occurrence", "essay"])
    p.add_argument("--thresholds", help="comma-separated levels")

    p = sub.add_parser("report", help="re-render a results.json file")
    _add_common(p)
    p.add_argument("--results", help="results.json from an earlier run")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from None
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"unknown keys in config file: {unknown}")
        settings.update(file_cfg)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            settings[key] = value
    return settings


def _split(value: str | Sequence[str]) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _backend_config(s: dict) -> BackendConfig:
    return BackendConfig(
        kind=BACKEND_KINDS[s["backend"]],
        model_id=s["model"],
        api_base=s["api_base"],
        top_logprobs_limit=int(s["top_logprobs"]),
        parallelism=int(s["jobs"]),
    )


def _check_backend(s: dict, methods: Sequence[str]) -> None:
    if "llm" not in methods or s["backend"] != "http":
        return
    if not s["model"]:
        raise UsageError("the http backend needs --model (or use --backend mock-uniform|mock-positional|mock-oracle)")
    if not os.environ.get(API_KEY_ENV):
        raise UsageError(
            f"the http backend needs an API key: export {API_KEY_ENV}=... "
            "(or choose a mock backend with --backend mock-oracle)"
        )


def _check_methods(methods: Sequence[str]) -> None:
    bad = [m for m in methods if m not in ("llm", "pos", "random")]
    if bad or not methods:
        raise UsageError(f"--method must be llm, pos or random (got {bad or methods})")


def experiment_config(experiment: str, s: dict, corpus: Sequence[str] = ()) -> ExperimentConfig:
    return ExperimentConfig(
        experiment=experiment,
        lexicon=s["lexicon"],
        corpus=tuple(corpus),
        scores=s["scores"],
        methods=tuple(_split(s["method"])),
        backend=_backend_config(s),
        permutations=s["permutations"],
        seed=int(s["seed"]),
        buckets=tuple(int(b) for b in _split(s["buckets"])),
        context=s["context"],
        label_style=s["label_style"],
        analyzer=s["analyzer"],
        denominator=s["denominator"],
        include_na=bool(s["include_na"]),
        folds=int(s["folds"]),
        stratify=bool(s["stratify"]),
        svr=SvrParams(),
        thresholds=tuple(_split(s["thresholds"])),
        consistency_unit=s["unit"],
        words=tuple(_split(s["words"])),
        top_words=int(s["top_words"]),
        keep_partial=bool(s["keep_partial"]),
        out_dir=s["out"],
        jobs=int(s["jobs"]),
        cache=s["cache"],
    )


def _guard_inputs(out_dir: Path, inputs: Sequence[str | None]) -> None:
    """Refuse to run when an output directory would overwrite an input."""
    out = out_dir.resolve()
    for path in inputs:
        if path and Path(path).resolve().parent == out and Path(path).name in (
            "results.json", "manifest.json", "annotations.jsonl", "features.jsonl", "report.html", "lexicon.jsonl"
        ):
            raise UsageError(f"output directory {out_dir} would overwrite input {path}")


# -- commands --------------------------------------------------------------------


def _formats(s: dict) -> list[str]:
    fmts = _split(s["format"])
    bad = [f for f in fmts if f not in FORMATS]
    if bad:
        raise UsageError(f"unknown --format value(s) {bad}; choose from {','.join(FORMATS)}")
    return fmts


def _lexicon(s: dict):
    return parse_lexicon(s["lexicon"]) if s["lexicon"] else sample_lexicon()


def _stats_results(lex) -> dict:
    st = lexicon_stats(lex)
    return {
        "meta": {"lexicon_version": lex.version, "tool_version": __version__},
        "entries": st.entry_count,
        "unique_words": st.unique_word_count,
        "polysemy_histogram": {str(k): v for k, v in st.polysemy_histogram.items()},
        "ambiguous_percent_by_pos": st.ambiguous_fraction_by_pos,
        "ambiguous_percent_by_word": st.ambiguous_fraction_by_word,
        "tables": {"polysemy": {"columns": ["meanings", "percent_of_words"], "rows": [list(r) for r in st.table_rows()]}},
        "plots": {},
    }


def _print_stats(results: dict) -> None:
    for k, v in results["tables"]["polysemy"]["rows"]:
        print(f"{k}\t{v:.2f}%")
    print(f"ambiguous by PoS: {results['ambiguous_percent_by_pos']:.2f}%")
    print(f"ambiguous words: {results['ambiguous_percent_by_word']:.2f}%")


def cmd_ingest(s: dict, out: Path):
    lex = _lexicon(s)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "lexicon.jsonl", lex.to_jsonl())
    heads = len({e.head.lower() for e in lex.entries})
    if s["stats"] and len(lex):
        results = _stats_results(lex)
    else:
        results = {
            "meta": {"lexicon_version": lex.version, "tool_version": __version__},
            "entries": len(lex),
            "unique_words": heads,
            "tables": {},
            "plots": {},
        }
    print(f"{len(lex)} entries, {heads} unique words (version {lex.version})")
    if "polysemy_histogram" in results:
        _print_stats(results)
    return results, lex.version, None


def cmd_stats(s: dict, out: Path):
    lex = _lexicon(s)
    results = _stats_results(lex)
    _print_stats(results)
    return results, lex.version, None


def cmd_annotate(s: dict, out: Path):
    if not s["inputs"]:
        raise UsageError("annotate needs --in")
    methods = _split(s["method"])
    if len(methods) != 1:
        raise UsageError("annotate takes exactly one --method")
    cfg = experiment_config("wordlevel", s, s["inputs"])
    cfg.validate_paths()
    session = Session(cfg)
    docs = load_documents(cfg.corpus, session)
    try:
        anns = annotate_corpus(docs, methods[0], session)
    except AnnotationError as exc:
        if s["keep_partial"]:
            out.mkdir(parents=True, exist_ok=True)
            write_annotations(exc.partial, out / "annotations.partial.jsonl")
            log.error("partial annotations written to %s", out / "annotations.partial.jsonl")
        raise
    out.mkdir(parents=True, exist_ok=True)
    write_annotations(anns, out / "annotations.jsonl")
    counts: dict[str, int] = {}
    for a in anns:
        counts[a.label] = counts.get(a.label, 0) + 1
    results = {
        "meta": session.meta(cfg.permutations or "none" if methods[0] == "llm" else None),
        "documents": len(docs),
        "tokens": len(anns),
        "label_counts": dict(sorted(counts.items())),
        "tables": {"label_counts": {"columns": ["label", "count"], "rows": [[k, v] for k, v in sorted(counts.items())]}},
        "plots": {},
    }
    return results, session.lexicon.version, session


def _align(docs, anns: list[WordAnnotation]):
    by_pos = {(a.doc_id, a.sentence_index, a.token_index): a for a in anns}
    pred, gold, amb = [], [], []
    for d in docs:
        for si, ti, _tok in d.tokens():
            key = (d.doc_id, si, ti)
            if key not in by_pos:
                raise ExperimentError(f"no prediction for {d.doc_id}[{si}:{ti}]")
            a = by_pos[key]
            pred.append(a.label)
            gold.append(d.gold_labels[si][ti])
            amb.append(a.ambiguity)
    return pred, gold, amb


def cmd_eval_words(s: dict, out: Path):
    if not s["gold"]:
        raise UsageError("eval-words needs --gold")
    if s["pred"]:
        docs = read_gold_corpus(s["gold"])
        anns = read_annotations(s["pred"])
        pred, gold, amb = _align(docs, anns)
        report = evaluate_words(pred, gold, amb).to_dict()
        methods = sorted({a.method for a in anns}) or ["pred"]
        name = methods[0] if len(methods) == 1 else "pred"
        acc = report["accuracy"]
        f1_rows = [
            [name, split, lab, report["per_label"][split][lab]["f1"], report["per_label"][split][lab]["support"]]
            for split in ("ambiguous", "non_ambiguous", "all")
            for lab in SCORED_LABELS
        ]
        results = {
            "meta": {"gold": os.path.basename(s["gold"]), "pred": os.path.basename(s["pred"]), "tool_version": __version__},
            "methods": {name: report},
            "tables": {
                "word_accuracy": {
                    "columns": ["method", "ambiguous", "non_ambiguous", "all"],
                    "rows": [[name, acc["ambiguous"], acc["non_ambiguous"], acc["all"]]],
                },
                "per_level_f1": {"columns": ["method", "split", "label", "f1", "support"], "rows": f1_rows},
            },
            "plots": {},
        }
        return results, "", None
    methods = _split(s["method"])
    _check_methods(methods)
    _check_backend(s, methods)
    cfg = experiment_config("wordlevel", s, [s["gold"]])
    cfg.validate_paths()
    session = Session(cfg)
    return RUNNERS["wordlevel"](cfg, session), session.lexicon.version, session


def _run_experiment(name: str, s: dict, corpus: Sequence[str]):
    cfg = experiment_config(name, s, corpus)
    cfg.validate_paths()
    session = Session(cfg)
    return RUNNERS[name](cfg, session), session.lexicon.version, session


def cmd_semantic(s: dict, out: Path):
    _check_backend(s, ["llm"])
    return _run_experiment("semantic", s, ())


def _essay_inputs(s: dict) -> list[str]:
    if not s["inputs"]:
        raise UsageError("this command needs --in (annotations JSONL or documents)")
    return s["inputs"]


def cmd_essay_features(s: dict, out: Path):
    inputs = _essay_inputs(s)
    cfg = experiment_config("essay", s, inputs)
    cfg.validate_paths()
    session = Session(cfg)
    corpus = load_essay_corpus(session)
    feats = essay_features(corpus, cfg.denominator)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "features.jsonl", "".join(dumps(f.to_record()).replace("\n", "") + "\n" for f in feats))
    from lexeval.levels import LEVEL_LABELS

    rows = [[f.doc_id, *f.proportions, f.na_proportion, f.denominator, f.composite] for f in feats]
    results = {
        "meta": session.meta(cfg.permutations if cfg.methods[0] == "llm" else None),
        "documents": len(feats),
        "tables": {
            "features": {"columns": ["doc_id", *LEVEL_LABELS, "N/A", "denominator", "composite"], "rows": rows}
        },
        "plots": {},
    }
    return results, session.lexicon.version, session


def cmd_essay_eval(s: dict, out: Path):
    return _run_experiment("essay", s, _essay_inputs(s))


def cmd_distribution(s: dict, out: Path):
    return _run_experiment("distribution", s, _essay_inputs(s))


def cmd_consistency(s: dict, out: Path):
    return _run_experiment("consistency", s, _essay_inputs(s))


def cmd_report(s: dict, out: Path):
    if not s["results"]:
        raise UsageError("report needs --results")
    with open(s["results"], encoding="utf-8") as fh:
        results = json.load(fh)
    return results, results.get("meta", {}).get("lexicon_version", ""), None


COMMANDS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "annotate": cmd_annotate,
    "eval-words": cmd_eval_words,
    "semantic-eval": cmd_semantic,
    "essay-features": cmd_essay_features,
    "essay-eval": cmd_essay_eval,
    "distribution": cmd_distribution,
    "consistency": cmd_consistency,
    "report": cmd_report,
}

_NEEDS_LLM_CHECK = {"annotate", "essay-features", "essay-eval", "distribution", "consistency"}


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = _now()
    try:
        s = resolve_settings(args)
        if args.show_config:
            print(json.dumps({k: s[k] for k in sorted(s)}, indent=2, default=str))
            return 0
        fmts = _formats(s)
        if args.command in _NEEDS_LLM_CHECK or args.command == "semantic-eval":
            methods = ["llm"] if args.command == "semantic-eval" else _split(s["method"])
            _check_methods(methods)
            _check_backend(s, methods)
        out = Path(s["out"])
        _guard_inputs(out, [s["lexicon"], s["gold"], s["pred"], s["scores"], s["results"], *(s["inputs"] or [])])
        results, lex_version, session = COMMANDS[args.command](s, out)
        written = emit_report(results, out, fmts)
        if args.command == "annotate":
            written.insert(0, out / "annotations.jsonl")
        elif args.command == "essay-features":
            written.insert(0, out / "features.jsonl")
        elif args.command == "ingest":
            written.insert(0, out / "lexicon.jsonl")
        counts = session.cache_counts() if session else {"hits": 0, "misses": 0}
        meta = results.get("meta", {})
        RunManifest(
            command_line=["lexeval", *argv],
            command=args.command,
            config_hash=meta.get("config_hash", ""),
            seed=int(s["seed"]),
            lexicon_version=lex_version,
            backend=meta.get("backend", ""),
            cache_hits=counts["hits"],
            cache_misses=counts["misses"],
            started=started,
            finished=_now(),
            outputs=[str(p.relative_to(out)) for p in written],
        ).write(out)
        return 0
    except UsageError as exc:
        print(f"lexeval: error: {exc}", file=sys.stderr)
        return 2
    except (
        AnnotationError, BackendError, ExperimentError, LexiconError, GoldFormatError, AnalyzerError,
        MetricError, OSError, ValueError, KeyError,
    ) as exc:
        print(f"lexeval: {args.command} failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
