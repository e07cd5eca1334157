"""Deterministic synthetic story bundles for closure experiments.

Generates small five-line stories from fixed sentence templates with one
female and one male character each, together with everything the
pipeline stages need: gold annotations (votes), an entity-feature
sidecar, CoNLL-U parses of the resolved lines, and ground-truth role
assignments.  Line texts are globally unique so the gold-derived oracle
backend can key its answers on them.

Run as a module to write a bundle to disk::

    python -m emotrack.synthetic OUTDIR --stories 50 --seed 7
"""

from __future__ import annotations

import argparse
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import PLUTCHIK_EMOTIONS, Corpus, EventLine, GoldAnnotation, Story, aggregate_votes, save_corpus
from .coref import EntityFeatures
from .records import make_header, write_records
from .rolelab import Role, RoleAssignment

FEMALE_NAMES = ("Mia", "Ana", "Lena", "Rosa", "Ivy")
MALE_NAMES = ("Tom", "Ben", "Omar", "Luis", "Finn")
SVO_VERBS = ("greeted", "thanked", "praised", "hugged", "helped")
PASSIVE_VERBS = ("praised", "helped", "hugged")
WALK_VERBS = ("walked", "hurried")
PLACES = ("market", "park", "store")
THINGS = ("bread", "coffee", "apples")


@dataclass
class SyntheticBundle:
    corpus: Corpus                      # raw texts, pronouns unresolved
    resolved_corpus: Corpus             # what correct coref should yield
    roles: list[RoleAssignment]         # ground-truth role per pair
    features: dict[str, EntityFeatures]
    conllu: str                         # parses of the resolved lines
    annotator_count: int = 3

    def write(self, outdir) -> dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": outdir / "corpus.jsonl",
            "features": outdir / "features.jsonl",
            "conllu": outdir / "parses.conllu",
            "roles": outdir / "roles_gold.jsonl",
        }
        save_corpus(self.corpus, paths["corpus"])
        write_records(
            paths["features"],
            (
                {
                    "kind": "features",
                    "character": name,
                    "gender": feats.gender,
                    "number": feats.number,
                }
                for name, feats in sorted(self.features.items())
            ),
            header=make_header("features", {}),
        )
        paths["conllu"].write_text(self.conllu, encoding="utf-8")
        write_records(
            paths["roles"],
            (
                {
                    "kind": "role",
                    "story_id": a.story_id,
                    "line_index": a.line_index,
                    "character": a.character,
                    "role": a.role.value,
                }
                for a in self.roles
            ),
            header=make_header("roles", {}),
        )
        return paths


@dataclass
class _Line:
    text: str
    resolved: str
    conllu_rows: list[tuple]  # (form, lemma, upos, head, deprel)
    roles: dict[str, Role] = field(default_factory=dict)


def _row(form, lemma, upos, head, deprel):
    return (form, lemma, upos, head, deprel)


def _svo(subj, verb, obj):
    rows = [
        _row(subj, subj, "PROPN", 2, "nsubj"),
        _row(verb, verb, "VERB", 0, "root"),
        _row(obj, obj, "PROPN", 2, "obj"),
        _row(".", ".", "PUNCT", 2, "punct"),
    ]
    return f"{subj} {verb} {obj} .", rows


def _passive(subj, verb, agent):
    rows = [
        _row(subj, subj, "PROPN", 3, "nsubj:pass"),
        _row("was", "be", "AUX", 3, "aux:pass"),
        _row(verb, verb, "VERB", 0, "root"),
        _row("by", "by", "ADP", 5, "case"),
        _row(agent, agent, "PROPN", 3, "obl:agent"),
        _row(".", ".", "PUNCT", 3, "punct"),
    ]
    return f"{subj} was {verb} by {agent} .", rows


def _walk(subj, verb, place):
    rows = [
        _row(subj, subj, "PROPN", 2, "nsubj"),
        _row(verb, verb, "VERB", 0, "root"),
        _row("to", "to", "ADP", 4, "case"),
        _row(place, place, "NOUN", 2, "obl"),
        _row(".", ".", "PUNCT", 2, "punct"),
    ]
    return f"{subj} {verb} to {place} .", rows


def _buy(subj, thing):
    rows = [
        _row(subj, subj, "PROPN", 2, "nsubj"),
        _row("bought", "buy", "VERB", 0, "root"),
        _row(thing, thing, "NOUN", 2, "obj"),
        _row(".", ".", "PUNCT", 2, "punct"),
    ]
    return f"{subj} bought {thing} .", rows


def _make_line(rng, t, story_idx, female, male) -> _Line:
    """Build one story line; line 0 always mentions both characters so a
    later pronoun has an antecedent of either gender."""
    choices = ["svo", "passive", "walk", "buy"]
    if t > 0:
        choices.append("pronoun_svo")
    shape = "svo" if t == 0 else rng.choice(choices)
    actor, other = (female, male) if rng.random() < 0.5 else (male, female)
    mark = f"_{story_idx}_{t}"
    if shape == "svo":
        verb = SVO_VERBS[(story_idx + t) % len(SVO_VERBS)]
        text, rows = _svo(actor, verb, other)
        return _Line(text, text, rows, {actor: Role.ACTOR, other: Role.OBJECT})
    if shape == "pronoun_svo":
        verb = SVO_VERBS[(story_idx + t) % len(SVO_VERBS)]
        pronoun = "She" if actor == female else "He"
        resolved, rows = _svo(actor, verb, other)
        text = f"{pronoun} {verb} {other} ."
        return _Line(text, resolved, rows, {actor: Role.ACTOR, other: Role.OBJECT})
    if shape == "passive":
        verb = PASSIVE_VERBS[(story_idx + t) % len(PASSIVE_VERBS)]
        text, rows = _passive(other, verb, actor)
        return _Line(text, text, rows, {actor: Role.ACTOR, other: Role.OBJECT})
    if shape == "walk":
        verb = WALK_VERBS[(story_idx + t) % len(WALK_VERBS)]
        place = rng.choice(PLACES) + mark
        text, rows = _walk(actor, verb, place)
        return _Line(text, text, rows, {actor: Role.ACTOR})
    thing = rng.choice(THINGS) + mark
    text, rows = _buy(actor, thing)
    return _Line(text, text, rows, {actor: Role.ACTOR})


def _draw_gold(rng) -> frozenset[str]:
    size = rng.choice((1, 1, 2, 2, 3))
    return frozenset(rng.sample(PLUTCHIK_EMOTIONS, size))


def generate_bundle(n_stories: int = 50, seed: int = 7, annotator_count: int = 3) -> SyntheticBundle:
    rng = random.Random(seed)
    corpus = Corpus(aggregation="majority")
    resolved = Corpus(aggregation="majority")
    roles: list[RoleAssignment] = []
    features: dict[str, EntityFeatures] = {}
    conllu_chunks: list[str] = []
    gold: dict[tuple[str, int, str], frozenset[str]] = {}
    seen_texts: set[str] = set()

    for s in range(n_stories):
        sid = f"story{s:03d}"
        female = f"{FEMALE_NAMES[s % len(FEMALE_NAMES)]}{s}"
        male = f"{MALE_NAMES[s % len(MALE_NAMES)]}{s}"
        features[female] = EntityFeatures(gender="f", number="sg")
        features[male] = EntityFeatures(gender="m", number="sg")
        lines = []
        for t in range(5):
            line = _make_line(rng, t, s, female, male)
            if line.resolved in seen_texts:
                raise AssertionError(f"duplicate synthetic line text {line.resolved!r}")
            seen_texts.add(line.resolved)
            lines.append(line)
            for char, role in line.roles.items():
                roles.append(RoleAssignment(sid, t, char, role))
            rows = [f"# sent_id = {sid}:{t}", f"# text = {line.resolved}"]
            for i, (form, lemma, upos, head, deprel) in enumerate(line.conllu_rows, start=1):
                rows.append(f"{i}\t{form}\t{lemma}\t{upos}\t_\t_\t{head}\t{deprel}\t_\t_")
            conllu_chunks.append("\n".join(rows) + "\n")
        roster = frozenset({female, male})
        corpus.stories[sid] = Story(
            sid, tuple(EventLine(t, lines[t].text) for t in range(5)), roster, split="train"
        )
        resolved.stories[sid] = Story(
            sid,
            tuple(EventLine(t, lines[t].text, resolved_text=lines[t].resolved) for t in range(5)),
            roster,
            split="train",
        )
        for t in range(5):
            for char in sorted(roster):
                gold[(sid, t, char)] = _draw_gold(rng)

    # every (emotion, role) cell needs at least one positive so the
    # few-shot sweep has signal everywhere
    role_pairs = {(a.story_id, a.line_index, a.character): a.role for a in roles}
    for emotion in PLUTCHIK_EMOTIONS:
        for role in Role:
            if not any(
                emotion in gold[key] for key, r in role_pairs.items() if r is role
            ):
                key = sorted(k for k, r in role_pairs.items() if r is role)[0]
                gold[key] = gold[key] | {emotion}

    for key in sorted(gold):
        votes = {e: annotator_count for e in sorted(gold[key])}
        for c in (corpus, resolved):
            c.annotations[key] = GoldAnnotation(
                story_id=key[0],
                line_index=key[1],
                character=key[2],
                annotator_votes=votes,
                annotator_count=annotator_count,
                gold_set=aggregate_votes(votes, annotator_count, "majority"),
            )

    return SyntheticBundle(
        corpus=corpus,
        resolved_corpus=resolved,
        roles=sorted(roles, key=lambda a: (a.story_id, a.line_index, a.character)),
        features=features,
        conllu="\n".join(conllu_chunks),
        annotator_count=annotator_count,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write a synthetic story bundle")
    parser.add_argument("outdir")
    parser.add_argument("--stories", type=int, default=50)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    bundle = generate_bundle(n_stories=args.stories, seed=args.seed)
    paths = bundle.write(args.outdir)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
