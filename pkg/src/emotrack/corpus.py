"""Canonical story/annotation data model and corpus import.

A corpus holds stories (ordered event lines plus a character roster) and
gold emotion annotations per (line, character) pair.  External releases
in the StoryCommonsense style (one CSV row per line-character pair with
per-emotion annotator vote counts) are imported through a configurable
column mapping; the canonical on-disk form is the line-record format of
:mod:`emotrack.records` with record kinds ``story``, ``line`` and
``annotation``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .records import make_header, read_records, write_records

log = logging.getLogger(__name__)

PLUTCHIK_EMOTIONS = (
    "surprise",
    "disgust",
    "sadness",
    "joy",
    "anger",
    "fear",
    "trust",
    "anticipation",
)

AGGREGATION_RULES = ("majority", "any", "all")

# Canonical field -> source column for StoryCommonsense-style CSV releases.
DEFAULT_COLUMN_MAPPING = {
    "story_id": "storyid",
    "line_index": "linenum",
    "character": "char",
    "text": "sentence",
    "votes": "plutchik",
    "split": "partition",
}


class CorpusImportError(ValueError):
    """Raised when a release file cannot be imported; names file and line."""

    def __init__(self, source: str, line_no: int, message: str):
        super().__init__(f"{source}:{line_no}: {message}")
        self.source = source
        self.line_no = line_no


@dataclass(frozen=True)
class EventLine:
    index: int
    text: str
    resolved_text: str = ""


@dataclass(frozen=True)
class Story:
    story_id: str
    lines: tuple[EventLine, ...]
    characters: frozenset[str]
    split: str = ""

    def line_text(self, index: int) -> str:
        """Text used downstream: resolved when available, raw otherwise."""
        line = self.lines[index]
        return line.resolved_text or line.text


@dataclass(frozen=True)
class GoldAnnotation:
    story_id: str
    line_index: int
    character: str
    annotator_votes: dict[str, int]
    annotator_count: int
    gold_set: frozenset[str]


@dataclass
class Corpus:
    stories: dict[str, Story] = field(default_factory=dict)
    annotations: dict[tuple[str, int, str], GoldAnnotation] = field(default_factory=dict)
    aggregation: str = "majority"

    def pairs(self):
        return sorted(self.annotations)

    def gold(self, story_id: str, line_index: int, character: str) -> frozenset[str] | None:
        ann = self.annotations.get((story_id, line_index, character))
        return ann.gold_set if ann is not None else None


def aggregate_votes(votes: dict[str, int], annotators: int, rule: str) -> frozenset[str]:
    """Derive the gold emotion set from per-emotion vote counts."""
    if rule not in AGGREGATION_RULES:
        raise ValueError(f"unknown aggregation rule {rule!r}")
    if rule == "majority":
        needed = math.ceil(annotators / 2) if annotators > 0 else 1
    elif rule == "any":
        needed = 1
    else:
        needed = max(annotators, 1)
    return frozenset(e for e, n in votes.items() if n >= needed)


def _parse_vote_cell(cell: str, source: str, line_no: int) -> dict[str, int]:
    """Parse a release vote cell such as ``["joy:3", "trust:1"]``.

    An empty cell or empty list means no votes.  Emotion names are
    lowercased; counts must be non-negative integers.
    """
    cell = cell.strip()
    if not cell or cell in ("[]", "{}"):
        return {}
    try:
        entries = json.loads(cell)
    except json.JSONDecodeError:
        # tolerate single-quoted lists emitted by some exports
        try:
            entries = json.loads(cell.replace("'", '"'))
        except json.JSONDecodeError as exc:
            raise CorpusImportError(source, line_no, f"unparseable vote cell {cell!r}") from exc
    if isinstance(entries, dict):
        items = entries.items()
    elif isinstance(entries, list):
        items = []
        for entry in entries:
            if not isinstance(entry, str) or ":" not in entry:
                raise CorpusImportError(source, line_no, f"bad vote entry {entry!r}")
            name, _, count = entry.rpartition(":")
            items.append((name, count))
    else:
        raise CorpusImportError(source, line_no, f"bad vote cell {cell!r}")
    votes: dict[str, int] = {}
    for name, count in items:
        name = str(name).strip().lower()
        try:
            n = int(count)
        except (TypeError, ValueError) as exc:
            raise CorpusImportError(source, line_no, f"bad vote count for {name!r}") from exc
        if n < 0:
            raise CorpusImportError(source, line_no, f"negative vote count for {name!r}")
        if n > 0:
            votes[name] = votes.get(name, 0) + n
    unknown = set(votes) - set(PLUTCHIK_EMOTIONS)
    if unknown:
        raise CorpusImportError(source, line_no, f"unknown emotions {sorted(unknown)}")
    return votes


def import_corpus(
    release_files,
    aggregation: str = "majority",
    column_mapping: dict[str, str] | None = None,
    annotator_count: int = 3,
    line_index_base: int = 1,
) -> Corpus:
    """Import one or more release CSV files into a canonical corpus.

    Rows sharing (story, line) must agree on the sentence text; line
    indices are rebased to 0 and must be contiguous per story.  Rows with
    the same (story, line, character) merge their votes (later files may
    add annotators).
    """
    if aggregation not in AGGREGATION_RULES:
        raise ValueError(f"unknown aggregation rule {aggregation!r}")
    mapping = dict(DEFAULT_COLUMN_MAPPING)
    if column_mapping:
        mapping.update(column_mapping)

    if isinstance(release_files, (str, Path)):
        release_files = [release_files]

    texts: dict[tuple[str, int], str] = {}
    rosters: dict[str, set[str]] = {}
    splits: dict[str, str] = {}
    votes: dict[tuple[str, int, str], dict[str, int]] = {}

    for path in release_files:
        source = str(path)
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise CorpusImportError(source, 1, "empty file")
            required = [mapping[f] for f in ("story_id", "line_index", "character", "text", "votes")]
            missing = [c for c in required if c not in reader.fieldnames]
            if missing:
                raise CorpusImportError(source, 1, f"missing columns {missing}")
            for row in reader:
                line_no = reader.line_num
                sid = (row[mapping["story_id"]] or "").strip()
                if not sid:
                    raise CorpusImportError(source, line_no, "empty story id")
                try:
                    idx = int(row[mapping["line_index"]]) - line_index_base
                except (TypeError, ValueError) as exc:
                    raise CorpusImportError(source, line_no, "non-integer line number") from exc
                if idx < 0:
                    raise CorpusImportError(source, line_no, f"line number below base {line_index_base}")
                char = (row[mapping["character"]] or "").strip()
                if not char:
                    raise CorpusImportError(source, line_no, "empty character name")
                text = (row[mapping["text"]] or "").strip()
                if not text:
                    raise CorpusImportError(source, line_no, "empty sentence text")
                prev = texts.get((sid, idx))
                if prev is not None and prev != text:
                    raise CorpusImportError(source, line_no, f"conflicting text for {sid} line {idx}")
                texts[(sid, idx)] = text
                rosters.setdefault(sid, set()).add(char)
                split_col = mapping.get("split")
                if split_col and split_col in row and row[split_col]:
                    splits[sid] = row[split_col].strip()
                row_votes = _parse_vote_cell(row[mapping["votes"]] or "", source, line_no)
                slot = votes.setdefault((sid, idx, char), {})
                for name, n in row_votes.items():
                    slot[name] = slot.get(name, 0) + n

    corpus = Corpus(aggregation=aggregation)
    for sid in sorted(rosters):
        indices = sorted(i for (s, i) in texts if s == sid)
        if indices != list(range(len(indices))):
            raise CorpusImportError(sid, 0, f"line indices not contiguous: {indices}")
        lines = tuple(EventLine(index=i, text=texts[(sid, i)]) for i in indices)
        corpus.stories[sid] = Story(
            story_id=sid,
            lines=lines,
            characters=frozenset(rosters[sid]),
            split=splits.get(sid, ""),
        )
    for (sid, idx, char), v in sorted(votes.items()):
        corpus.annotations[(sid, idx, char)] = GoldAnnotation(
            story_id=sid,
            line_index=idx,
            character=char,
            annotator_votes=dict(sorted(v.items())),
            annotator_count=annotator_count,
            gold_set=aggregate_votes(v, annotator_count, aggregation),
        )
    return corpus


@dataclass(frozen=True)
class Violation:
    story_id: str
    locus: str
    message: str


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Report every type-invariant violation; empty list means valid."""
    out: list[Violation] = []
    for sid, story in corpus.stories.items():
        if not story.lines:
            out.append(Violation(sid, "story", "story has no lines"))
        indices = [l.index for l in story.lines]
        if indices != list(range(len(indices))):
            out.append(Violation(sid, "lines", f"line indices not contiguous from 0: {indices}"))
        for line in story.lines:
            if not line.text:
                out.append(Violation(sid, f"line {line.index}", "empty text"))
        lowered = [c.lower() for c in story.characters]
        if len(set(lowered)) != len(lowered):
            out.append(Violation(sid, "characters", "duplicate character name (case-insensitive)"))
        if any(not c for c in story.characters):
            out.append(Violation(sid, "characters", "empty character name"))
    for (sid, idx, char), ann in corpus.annotations.items():
        story = corpus.stories.get(sid)
        if story is None:
            out.append(Violation(sid, f"annotation {idx}/{char}", "unknown story"))
            continue
        if idx < 0 or idx >= len(story.lines):
            out.append(Violation(sid, f"annotation {idx}/{char}", "line index out of range"))
        if char not in story.characters:
            out.append(Violation(sid, f"annotation {idx}/{char}", "unknown character"))
        bad = ann.gold_set - set(PLUTCHIK_EMOTIONS)
        if bad:
            out.append(Violation(sid, f"annotation {idx}/{char}", f"emotions outside the label set: {sorted(bad)}"))
        expected = aggregate_votes(ann.annotator_votes, ann.annotator_count, corpus.aggregation)
        if expected != ann.gold_set:
            out.append(Violation(sid, f"annotation {idx}/{char}", "gold set inconsistent with votes"))
    return out


def corpus_records(corpus: Corpus):
    """Canonical record stream, sorted for byte-identical exports."""
    for sid in sorted(corpus.stories):
        story = corpus.stories[sid]
        yield {
            "kind": "story",
            "story_id": sid,
            "characters": sorted(story.characters),
            "split": story.split,
        }
        for line in story.lines:
            yield {
                "kind": "line",
                "story_id": sid,
                "index": line.index,
                "text": line.text,
                "resolved_text": line.resolved_text,
            }
    for key in sorted(corpus.annotations):
        ann = corpus.annotations[key]
        yield {
            "kind": "annotation",
            "story_id": ann.story_id,
            "line_index": ann.line_index,
            "character": ann.character,
            "votes": ann.annotator_votes,
            "annotators": ann.annotator_count,
            "gold": sorted(ann.gold_set),
        }


def save_corpus(corpus: Corpus, path, extra_header: dict | None = None) -> None:
    header = make_header("corpus", {"aggregation": corpus.aggregation}, aggregation=corpus.aggregation)
    if extra_header:
        header.update(extra_header)
    write_records(path, corpus_records(corpus), header=header)


def load_corpus(path) -> Corpus:
    """Load a canonical corpus file.

    Annotations referencing an unknown story or character are rejected
    and logged; loading continues (matching importer error policy).
    """
    header, body = read_records(path)
    aggregation = (header or {}).get("aggregation", "majority")
    corpus = Corpus(aggregation=aggregation)
    rosters: dict[str, frozenset[str]] = {}
    splits: dict[str, str] = {}
    lines: dict[str, dict[int, EventLine]] = {}
    pending_annotations = []
    for rec in body:
        kind = rec.get("kind")
        if kind == "story":
            sid = rec["story_id"]
            rosters[sid] = frozenset(rec.get("characters", []))
            splits[sid] = rec.get("split", "")
        elif kind == "line":
            sid = rec["story_id"]
            lines.setdefault(sid, {})[int(rec["index"])] = EventLine(
                index=int(rec["index"]),
                text=rec["text"],
                resolved_text=rec.get("resolved_text", ""),
            )
        elif kind == "annotation":
            pending_annotations.append(rec)
        else:
            log.warning("ignoring record of unknown kind %r", kind)
    for sid in sorted(rosters):
        story_lines = tuple(lines.get(sid, {})[i] for i in sorted(lines.get(sid, {})))
        corpus.stories[sid] = Story(
            story_id=sid,
            lines=story_lines,
            characters=rosters[sid],
            split=splits.get(sid, ""),
        )
    for rec in pending_annotations:
        sid = rec["story_id"]
        char = rec["character"]
        story = corpus.stories.get(sid)
        if story is None or char not in story.characters:
            log.warning("rejecting annotation for unknown character %r in story %r", char, sid)
            continue
        votes = {k: int(v) for k, v in rec.get("votes", {}).items()}
        corpus.annotations[(sid, int(rec["line_index"]), char)] = GoldAnnotation(
            story_id=sid,
            line_index=int(rec["line_index"]),
            character=char,
            annotator_votes=dict(sorted(votes.items())),
            annotator_count=int(rec.get("annotators", 3)),
            gold_set=frozenset(rec.get("gold", [])),
        )
    return corpus


def with_resolved_line(story: Story, index: int, resolved_text: str) -> Story:
    new_lines = tuple(
        replace(l, resolved_text=resolved_text) if l.index == index else l for l in story.lines
    )
    return replace(story, lines=new_lines)


_POSSESSIVE_RE = re.compile(r"(?:'s|')$", re.IGNORECASE)


def strip_possessive(token: str) -> str:
    return _POSSESSIVE_RE.sub("", token)
