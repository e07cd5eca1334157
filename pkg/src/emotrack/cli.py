"""Command-line pipeline with persisted intermediate artifacts.

Stages mirror the processing order (ingest, coref, roles, infer,
calibrate, classify, evaluate) and communicate only through line-record
files in the output directory, so the expensive inference stage runs
once and everything downstream iterates offline.  Exit codes: 0 success,
2 missing predecessor artifact, 3 backend transport failure, 4 input
validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, engine, evalkit
from .backend import (
    Backend,
    BackendError,
    CachingBackend,
    FixtureBackend,
    InferenceCache,
    RemoteBackend,
    SyntheticOracleBackend,
    TransportError,
)
from .coref import RuleBasedResolver, load_entity_features, resolve_corpus
from .corpus import CorpusImportError, import_corpus, load_corpus, save_corpus, validate_corpus
from .records import RecordError, make_header, read_records, write_records
from .rolelab import (
    DEFAULT_PATTERNS,
    assign_roles,
    load_patterns,
    parse_conllu,
    roles_from_records,
    roles_to_records,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISSING_ARTIFACT = 2
EXIT_BACKEND_FAILURE = 3
EXIT_VALIDATION = 4


class MissingArtifactError(Exception):
    def __init__(self, path):
        super().__init__(str(path))
        self.path = Path(path)


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    return path


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(_require(path), "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _effective(args, key, default=None):
    """Option precedence: explicit flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return args.config_data.get(key, default)


def build_backend(spec: str, cache_path=None, corpus=None, roles=None,
                  remote_options: dict | None = None) -> Backend:
    """Construct a backend from its spec string.

    ``synthetic`` (gold-derived oracle over the given corpus and roles),
    ``fixture:<path>`` or ``remote:<url>``; a cache path wraps the result
    in a read-through persistent cache.
    """
    if spec == "synthetic":
        if corpus is None or roles is None:
            raise ValueError("synthetic backend needs a corpus and role assignments")
        built: Backend = SyntheticOracleBackend(corpus, roles)
    elif spec.startswith("fixture:"):
        built = FixtureBackend.from_file(_require(spec.split(":", 1)[1]))
    elif spec.startswith("remote:"):
        options = remote_options or {}
        built = RemoteBackend(
            spec.split(":", 1)[1],
            timeout=float(options.get("timeout", 10.0)),
            retries=int(options.get("retries", 3)),
            backoff=float(options.get("backoff", 0.5)),
            # pinning the identity lets a warm cache serve fully offline
            identity=options.get("identity"),
        )
    else:
        raise ValueError(f"unknown backend spec {spec!r}")
    if cache_path:
        built = CachingBackend(built, InferenceCache(cache_path))
    return built


def _out_dir(args) -> Path:
    out = Path(_effective(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# stage implementations

def cmd_ingest(args) -> int:
    out = _out_dir(args)
    releases = [_require(p) for p in args.release]
    corpus = import_corpus(
        releases,
        aggregation=_effective(args, "aggregation", "majority"),
        column_mapping=args.config_data.get("column_mapping"),
        annotator_count=int(args.config_data.get("annotator_count", 3)),
        line_index_base=int(args.config_data.get("line_index_base", 1)),
    )
    violations = validate_corpus(corpus)
    if violations:
        for v in violations:
            print(f"invalid: {v.story_id} [{v.locus}] {v.message}", file=sys.stderr)
        return EXIT_VALIDATION
    save_corpus(corpus, out / "corpus.jsonl", extra_header={"releases": [p.name for p in releases]})
    print(f"wrote {out / 'corpus.jsonl'} ({len(corpus.stories)} stories, "
          f"{len(corpus.annotations)} annotations)")
    return EXIT_OK


def cmd_coref(args) -> int:
    out = _out_dir(args)
    corpus = load_corpus(_require(_effective(args, "corpus", out / "corpus.jsonl")))
    features_path = _effective(args, "features")
    features = load_entity_features(_require(features_path)) if features_path else {}
    resolver = RuleBasedResolver()
    resolved, flags = resolve_corpus(corpus, features, resolver)
    pronouns = sorted(resolver.rules)
    save_corpus(resolved, out / "corpus.resolved.jsonl", extra_header={"pronoun_targets": pronouns})
    write_records(
        out / "coref_flags.jsonl",
        (
            {
                "kind": "coref_flag",
                "story_id": f.story_id,
                "line_index": f.line_index,
                "pronoun": f.pronoun,
                "word_position": f.word_position,
                "reason": f.reason,
                "resolved_to": f.resolved_to,
            }
            for f in flags
        ),
        header=make_header("coref_flags", {"pronoun_targets": pronouns}, pronoun_targets=pronouns),
    )
    print(f"wrote {out / 'corpus.resolved.jsonl'} ({len(flags)} flags)")
    return EXIT_OK


def cmd_roles(args) -> int:
    out = _out_dir(args)
    corpus = load_corpus(_require(_effective(args, "corpus", out / "corpus.resolved.jsonl")))
    conllu = _require(_effective(args, "conllu", out / "parses.conllu"))
    patterns_path = _effective(args, "patterns")
    patterns = load_patterns(_require(patterns_path)) if patterns_path else DEFAULT_PATTERNS
    graphs = parse_conllu(conllu)
    rosters = {sid: story.characters for sid, story in corpus.stories.items()}
    assignments = assign_roles(graphs, rosters, patterns)
    table = {rel: role.value for rel, role in patterns.items()}
    write_records(
        out / "roles.jsonl",
        roles_to_records(assignments),
        header=make_header("roles", {"patterns": table}, patterns=table),
    )
    print(f"wrote {out / 'roles.jsonl'} ({len(assignments)} assignments)")
    return EXIT_OK


def _read_roles(path):
    _, body = read_records(path)
    return roles_from_records(body)


def cmd_infer(args) -> int:
    out = _out_dir(args)
    corpus = load_corpus(_require(_effective(args, "corpus", out / "corpus.resolved.jsonl")))
    roles = _read_roles(_require(_effective(args, "roles", out / "roles.jsonl")))
    spec = _effective(args, "backend", "synthetic")
    built = build_backend(
        spec,
        _effective(args, "cache"),
        corpus=corpus,
        roles=roles,
        remote_options=args.config_data.get("remote", {}),
    )
    backend_id = built.identity()  # doubles as a reachability check for remote backends
    workers = int(_effective(args, "workers", 1))
    include_current = bool(_effective(args, "include_current_effect", False))
    table, errors = engine.score_pairs(
        corpus, roles, built, workers=workers, include_current_effect=include_current
    )
    semantic = {
        "backend": backend_id,
        "include_current_effect": include_current,
        "dictionary": engine.DEFAULT_EMOTION_WORDS,
    }
    table.save(
        out / "scores.jsonl",
        config=semantic,
        backend=backend_id,
        include_current_effect=include_current,
        dictionary=engine.DEFAULT_EMOTION_WORDS,
    )
    if errors:
        write_records(
            out / "infer_errors.jsonl",
            (
                {
                    "kind": "error",
                    "story_id": e.story_id,
                    "line_index": e.line_index,
                    "character": e.character,
                    "message": e.message,
                }
                for e in errors
            ),
            header=make_header("infer_errors", semantic),
        )
        print(f"{len(errors)} pairs failed; manifest at {out / 'infer_errors.jsonl'}", file=sys.stderr)
        if not len(table):
            return EXIT_BACKEND_FAILURE
    print(f"wrote {out / 'scores.jsonl'} ({len(table)} pairs)")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    out = _out_dir(args)
    scores_path = _require(_effective(args, "scores", out / "scores.jsonl"))
    scores_header, _ = read_records(scores_path)
    table = engine.ScoreTable.load(scores_path)
    corpus = load_corpus(_require(_effective(args, "corpus", out / "corpus.resolved.jsonl")))
    split = _effective(args, "train_split")
    if split:
        filtered = engine.ScoreTable()
        for entry in table:
            if corpus.stories[entry.story_id].split == split:
                filtered.add(entry)
        table = filtered
    mode = _effective(args, "mode", "few-shot")
    quantile = _effective(args, "quantile", "complement")
    if mode == "zero-shot":
        thresholds = engine.calibrate_zero_shot(table, corpus=corpus, quantile_mode=quantile)
    elif mode == "few-shot":
        grid = args.config_data.get("grid") or engine.DEFAULT_THRESHOLD_GRID
        thresholds = engine.calibrate_few_shot(table, corpus, grid=grid)
    else:
        raise ValueError(f"unknown calibration mode {mode!r}")
    backend_id = (scores_header or {}).get("backend", "unknown")
    thresholds.save(
        out / "thresholds.jsonl",
        config={"mode": mode, "quantile": quantile, "train_split": split or ""},
        backend=backend_id,
        dictionary=engine.DEFAULT_EMOTION_WORDS,
        train_split=split or "",
    )
    print(f"wrote {out / 'thresholds.jsonl'} (mode={thresholds.mode})")
    return EXIT_OK


def cmd_classify(args) -> int:
    out = _out_dir(args)
    table = engine.ScoreTable.load(_require(_effective(args, "scores", out / "scores.jsonl")))
    thresholds_path = _require(_effective(args, "thresholds", out / "thresholds.jsonl"))
    thresholds_header, _ = read_records(thresholds_path)
    thresholds = engine.ThresholdSet.load(thresholds_path)
    thresholds.validate()
    backend_id = (thresholds_header or {}).get("backend", "unknown")
    predictions = engine.classify_table(table, thresholds)
    write_records(
        out / "predictions.jsonl",
        engine.predictions_to_records(predictions),
        header=make_header(
            "predictions",
            {"mode": thresholds.mode, "backend": backend_id},
            mode=thresholds.mode,
            backend=backend_id,
        ),
    )
    print(f"wrote {out / 'predictions.jsonl'} ({len(predictions)} pairs)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    predictions_path = _require(_effective(args, "predictions", out / "predictions.jsonl"))
    predictions_header, body = read_records(predictions_path)
    predictions = engine.predictions_from_records(body)
    corpus = load_corpus(_require(_effective(args, "corpus", out / "corpus.resolved.jsonl")))
    include_absent = bool(_effective(args, "include_absent", False))
    predictions_header = predictions_header or {}
    report = evalkit.evaluate(
        predictions,
        corpus,
        include_absent=include_absent,
        config_echo={
            "include_absent": include_absent,
            "predictions": Path(predictions_path).name,
            "thresholds_mode": predictions_header.get("mode", "unknown"),
            "backend": predictions_header.get("backend", "unknown"),
            "tool_version": __version__,
        },
    )
    report.save(out / "report.jsonl", out / "report.txt")
    print(report.to_text())
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring

def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--out", help="artifact directory (default: current directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emotrack",
        description="character-centered emotion tracking pipeline",
    )
    parser.add_argument("--version", action="version", version=f"emotrack {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="import a release into the canonical corpus")
    _add_common(p)
    p.add_argument("--release", action="append", required=True, help="release CSV (repeatable)")
    p.add_argument("--aggregation", choices=("majority", "any", "all"))
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("coref", help="resolve pronouns into character names")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--features", help="entity feature sidecar (gender/number)")
    p.set_defaults(func=cmd_coref)

    p = subs.add_parser("roles", help="assign per-event character roles from CoNLL-U parses")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--conllu")
    p.add_argument("--patterns", help="relation->role table file")
    p.set_defaults(func=cmd_roles)

    p = subs.add_parser("infer", help="score every role-assigned pair through the backend")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--roles")
    p.add_argument("--backend", help="synthetic | fixture:<path> | remote:<url>")
    p.add_argument("--cache", help="persistent inference cache path")
    p.add_argument("--workers", type=int)
    p.add_argument("--include-current-effect", dest="include_current_effect", action="store_const", const=True)
    p.set_defaults(func=cmd_infer)

    p = subs.add_parser("calibrate", help="calibrate per-(emotion, role) thresholds")
    _add_common(p)
    p.add_argument("--scores")
    p.add_argument("--corpus")
    p.add_argument("--mode", choices=("zero-shot", "few-shot"))
    p.add_argument("--quantile", choices=("literal", "complement"))
    p.add_argument("--train-split", dest="train_split", help="restrict calibration to this split")
    p.set_defaults(func=cmd_calibrate)

    p = subs.add_parser("classify", help="apply thresholds to scores")
    _add_common(p)
    p.add_argument("--scores")
    p.add_argument("--thresholds")
    p.set_defaults(func=cmd_classify)

    p = subs.add_parser("evaluate", help="score predictions against gold labels")
    _add_common(p)
    p.add_argument("--predictions")
    p.add_argument("--corpus")
    p.add_argument("--include-absent", dest="include_absent", action="store_const", const=True)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_data = _load_config_file(getattr(args, "config", None))
        return args.func(args)
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc.path}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except TransportError as exc:
        print(f"backend transport failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND_FAILURE
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND_FAILURE
    except (CorpusImportError, RecordError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
