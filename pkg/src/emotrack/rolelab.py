"""Dependency-pattern role labeling over CoNLL-U parses.

Consumes pre-parsed Universal Dependencies graphs of resolved story
lines and assigns each roster character a per-event role (Actor or
Object) through a fixed, non-lexicalized relation->role table.  The
engine never inspects lemmas except to match roster character names
against argument token spans.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import strip_possessive

log = logging.getLogger(__name__)


class Role(enum.Enum):
    ACTOR = "Actor"
    OBJECT = "Object"


# Relation labels that count as predicate arguments.  Dependents outside
# this set (expl, det, nmod:poss, ...) are never arguments.
DEFAULT_PATTERNS: dict[str, Role] = {
    "nsubj": Role.ACTOR,
    "obl:agent": Role.ACTOR,
    "obj": Role.OBJECT,
    "iobj": Role.OBJECT,
    "nsubj:pass": Role.OBJECT,
    # obl maps to Object; only roster characters receive roles, which is
    # what restricts this to animate participants.
    "obl": Role.OBJECT,
}

# Clause relations through which a subject is inherited when the embedded
# predicate has none of its own (raising / shared-subject coordination).
SUBJECT_INHERIT_RELATIONS = frozenset({"xcomp", "ccomp", "conj"})

AUX_RELATIONS = frozenset({"aux", "aux:pass", "cop"})


class ConlluParseError(ValueError):
    def __init__(self, source: str, line_no: int, message: str):
        super().__init__(f"{source}:{line_no}: {message}")
        self.source = source
        self.line_no = line_no


@dataclass(frozen=True)
class Token:
    tid: int  # 1-based position within the sentence
    form: str
    lemma: str
    upos: str
    head: int  # 0 = root
    deprel: str


@dataclass
class DepGraph:
    sent_id: str
    tokens: list[Token]
    _children: dict[int, list[Token]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for tok in self.tokens:
            self._children.setdefault(tok.head, []).append(tok)

    def children(self, tok: Token) -> list[Token]:
        return self._children.get(tok.tid, [])

    def token(self, tid: int) -> Token:
        return self.tokens[tid - 1]

    def subtree_ids(self, tok: Token) -> list[int]:
        out = [tok.tid]
        stack = [tok]
        while stack:
            for child in self.children(stack.pop()):
                out.append(child.tid)
                stack.append(child)
        return sorted(out)

    def story_line(self) -> tuple[str, int] | None:
        """Split a ``<story>:<line>`` sentence id."""
        sid, sep, line = self.sent_id.rpartition(":")
        if not sep:
            return None
        try:
            return sid, int(line)
        except ValueError:
            return None


def _validate_graph(sent_id, tokens, source, line_no):
    roots = [t for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise ConlluParseError(source, line_no, f"sentence {sent_id!r} has {len(roots)} roots, expected 1")
    n = len(tokens)
    for tok in tokens:
        if tok.head < 0 or tok.head > n:
            raise ConlluParseError(source, line_no, f"head {tok.head} out of range in {sent_id!r}")
    # cycle check: walking heads from any token must reach the root
    for tok in tokens:
        seen = set()
        cur = tok
        while cur.head != 0:
            if cur.tid in seen:
                raise ConlluParseError(source, line_no, f"head cycle at token {cur.tid} in {sent_id!r}")
            seen.add(cur.tid)
            cur = tokens[cur.head - 1]


def parse_conllu(source) -> list[DepGraph]:
    """Parse CoNLL-U text or a file path into dependency graphs.

    Multiword-token ranges (``1-2``) and empty nodes (``1.1``) are
    skipped; ``# sent_id = ...`` comments name the sentence.
    """
    if isinstance(source, Path) or (
        isinstance(source, str) and source and "\n" not in source and Path(source).is_file()
    ):
        name = str(source)
        text = Path(source).read_text(encoding="utf-8")
    else:
        name = "<conllu>"
        text = source

    graphs: list[DepGraph] = []
    tokens: list[Token] = []
    sent_id = ""
    block_start = 1

    def flush(line_no):
        nonlocal tokens, sent_id
        if tokens:
            _validate_graph(sent_id or f"sentence-{len(graphs) + 1}", tokens, name, line_no)
            graphs.append(DepGraph(sent_id=sent_id or f"sentence-{len(graphs) + 1}", tokens=tokens))
        tokens = []
        sent_id = ""

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush(line_no)
            block_start = line_no + 1
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                if key.strip() == "sent_id":
                    sent_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(name, line_no, f"expected 10 columns, got {len(cols)}")
        tid_field = cols[0]
        if "-" in tid_field or "." in tid_field:
            continue  # multiword range / empty node
        try:
            tid = int(tid_field)
        except ValueError as exc:
            raise ConlluParseError(name, line_no, f"non-integer token id {tid_field!r}") from exc
        try:
            head = int(cols[6])
        except ValueError as exc:
            raise ConlluParseError(name, line_no, f"non-integer head {cols[6]!r}") from exc
        tokens.append(Token(tid=tid, form=cols[1], lemma=cols[2], upos=cols[3], head=head, deprel=cols[7]))
    flush(len(text.splitlines()) or block_start)
    return graphs


@dataclass(frozen=True)
class Predicate:
    head: Token
    arguments: tuple[tuple[Token, str], ...]  # (argument token, relation label)


def _is_predicate(tok: Token, graph: DepGraph) -> bool:
    if tok.upos == "VERB" and tok.deprel not in AUX_RELATIONS:
        return True
    return any(c.deprel == "cop" for c in graph.children(tok))


def _with_conjuncts(graph: DepGraph, tok: Token):
    out = [tok]
    stack = [tok]
    while stack:
        for child in graph.children(stack.pop()):
            if child.deprel == "conj":
                out.append(child)
                stack.append(child)
    return out


def _inherited_subjects(graph: DepGraph, pred: Token, patterns) -> list[tuple[Token, str]]:
    cur = pred
    seen = set()
    while cur.deprel in SUBJECT_INHERIT_RELATIONS and cur.head != 0 and cur.tid not in seen:
        seen.add(cur.tid)
        parent = graph.token(cur.head)
        subjects = [
            (c, c.deprel)
            for c in graph.children(parent)
            if c.deprel in ("nsubj", "nsubj:pass") and c.deprel in patterns
        ]
        if subjects:
            return subjects
        cur = parent
    return []


def extract_predicates(graph: DepGraph, patterns: dict[str, Role] | None = None) -> list[Predicate]:
    """List each predicate with its core/oblique arguments.

    Arguments are the direct dependents bearing a relation from the
    pattern table, expanded across coordination; predicates lacking a
    subject of their own inherit one along xcomp/ccomp/conj chains.
    """
    patterns = patterns if patterns is not None else DEFAULT_PATTERNS
    out = []
    for tok in graph.tokens:
        if not _is_predicate(tok, graph):
            continue
        args: list[tuple[Token, str]] = []
        has_subject = False
        for dep in graph.children(tok):
            if dep.deprel not in patterns:
                continue
            if dep.deprel in ("nsubj", "nsubj:pass"):
                has_subject = True
            for conjunct in _with_conjuncts(graph, dep):
                args.append((conjunct, dep.deprel))
        if not has_subject:
            for subj, rel in _inherited_subjects(graph, tok, patterns):
                for conjunct in _with_conjuncts(graph, subj):
                    args.append((conjunct, rel))
        out.append(Predicate(head=tok, arguments=tuple(args)))
    return out


@dataclass(frozen=True)
class RoleAssignment:
    story_id: str
    line_index: int
    character: str
    role: Role


def _name_words(name: str) -> tuple[str, ...]:
    return tuple(strip_possessive(w).lower() for w in name.split())


def _norm_form(form: str) -> str:
    return strip_possessive(form).lower()


def _matches_character(graph: DepGraph, arg: Token, char_words: tuple[str, ...]) -> bool:
    if len(char_words) == 1:
        return _norm_form(arg.form) == char_words[0]
    if _norm_form(arg.form) not in char_words:
        return False
    span = [_norm_form(graph.token(i).form) for i in graph.subtree_ids(arg)]
    n = len(char_words)
    return any(tuple(span[i : i + n]) == char_words for i in range(len(span) - n + 1))


def assign_roles(
    graphs,
    rosters: dict[str, frozenset[str]] | frozenset[str],
    patterns: dict[str, Role] | None = None,
) -> list[RoleAssignment]:
    """Assign per-(line, character) roles from dependency patterns.

    ``rosters`` maps story id to its character set (or is a single
    roster applied to every sentence).  A character matching both an
    Actor and an Object argument keeps Actor.
    """
    patterns = patterns if patterns is not None else DEFAULT_PATTERNS
    out: list[RoleAssignment] = []
    for graph in graphs:
        located = graph.story_line()
        if located is None:
            log.warning("sentence %r has no <story>:<line> id; skipped", graph.sent_id)
            continue
        sid, line_index = located
        roster = rosters.get(sid, frozenset()) if isinstance(rosters, dict) else rosters
        if not roster:
            continue
        assigned: dict[str, Role] = {}
        for predicate in extract_predicates(graph, patterns):
            for arg, rel in predicate.arguments:
                role = patterns.get(rel)
                if role is None:
                    continue
                for name in roster:
                    if _matches_character(graph, arg, _name_words(name)):
                        prev = assigned.get(name)
                        if prev is None or (prev is Role.OBJECT and role is Role.ACTOR):
                            assigned[name] = role
        for name in sorted(assigned):
            out.append(RoleAssignment(sid, line_index, name, assigned[name]))
    return sorted(out, key=lambda r: (r.story_id, r.line_index, r.character))


def load_patterns(path) -> dict[str, Role]:
    """Read a pattern table: one ``<relation> <Actor|Object>`` per line."""
    patterns: dict[str, Role] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected '<relation> <role>'")
        rel, role = parts
        try:
            patterns[rel] = Role(role)
        except ValueError as exc:
            raise ValueError(f"{path}:{line_no}: unknown role {role!r}") from exc
    return patterns


@dataclass(frozen=True)
class RoleMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool

    # published reference for this labeling step, shown for context only
    REFERENCE = (89.0, 63.5, 74.1)


def _role_key_map(assignments):
    out = {}
    for a in assignments:
        out[(a.story_id, a.line_index, a.character)] = a.role
    return out


def evaluate_roles(predicted, gold) -> RoleMetrics:
    """Precision/recall/F1 for the Actor class.

    Raises if the two assignment sets cover disjoint (story, line)
    spaces, which indicates mismatched inputs.
    """
    pred_map = _role_key_map(predicted)
    gold_map = _role_key_map(gold)
    if pred_map and gold_map:
        pred_lines = {(s, l) for (s, l, _) in pred_map}
        gold_lines = {(s, l) for (s, l, _) in gold_map}
        if not (pred_lines & gold_lines):
            raise ValueError("predicted and gold assignments cover disjoint (story, line) spaces")
    pred_actors = {k for k, r in pred_map.items() if r is Role.ACTOR}
    gold_actors = {k for k, r in gold_map.items() if r is Role.ACTOR}
    tp = len(pred_actors & gold_actors)
    degenerate = not pred_actors or not gold_actors
    precision = tp / len(pred_actors) if pred_actors else 0.0
    recall = tp / len(gold_actors) if gold_actors else 0.0
    denom = 2 * tp + len(pred_actors - gold_actors) + len(gold_actors - pred_actors)
    f1 = (2 * tp / denom) if denom else 0.0
    return RoleMetrics(precision=precision, recall=recall, f1=f1, degenerate=degenerate)


def roles_to_records(assignments):
    for a in assignments:
        yield {
            "kind": "role",
            "story_id": a.story_id,
            "line_index": a.line_index,
            "character": a.character,
            "role": a.role.value,
        }


def roles_from_records(records) -> list[RoleAssignment]:
    out = []
    for rec in records:
        if rec.get("kind") != "role":
            continue
        out.append(
            RoleAssignment(
                story_id=rec["story_id"],
                line_index=int(rec["line_index"]),
                character=rec["character"],
                role=Role(rec["role"]),
            )
        )
    return out
