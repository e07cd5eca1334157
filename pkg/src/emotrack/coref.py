"""Rule-based pronoun resolution.

Substitutes target pronouns with the most recent compatible character
mention, scanning backwards across lines and left-to-right within a
line.  Compatibility is gender/number agreement against an optional
per-character feature table (unknown features act as wildcards).  The
resolver is deliberately simple and auditable; a heavier resolver can be
plugged in behind the same interface.
"""

from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from .corpus import Corpus, Story, strip_possessive, with_resolved_line
from .records import read_records

WORD_RE = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)?|[0-9]+")

# Possessive mode: "always" appends 's, "never" substitutes the bare name,
# "next_word" treats the pronoun as possessive only when a word follows it
# (the best that can be done for "her" without a parse).
@dataclass(frozen=True)
class PronounRule:
    form: str
    gender: str | None = None  # m | f | n | None (any)
    number: str | None = None  # sg | pl | None (any)
    possessive: str = "never"  # always | never | next_word
    plural_fallback: bool = False


DEFAULT_PRONOUN_RULES = (
    PronounRule("he", gender="m", number="sg"),
    PronounRule("him", gender="m", number="sg"),
    PronounRule("his", gender="m", number="sg", possessive="always"),
    PronounRule("she", gender="f", number="sg"),
    PronounRule("her", gender="f", number="sg", possessive="next_word"),
    PronounRule("it", gender="n", number="sg"),
    PronounRule("its", gender="n", number="sg", possessive="always"),
    PronounRule("they", number="pl", plural_fallback=True),
)

REQUIRED_TARGETS = frozenset({"he", "his", "they", "him"})


def validate_rules(rules) -> None:
    forms = {r.form.lower() for r in rules}
    missing = REQUIRED_TARGETS - forms
    if missing:
        raise ValueError(f"pronoun rule set must cover {sorted(missing)}")


@dataclass(frozen=True)
class EntityFeatures:
    gender: str | None = None
    number: str | None = None


def load_entity_features(path) -> dict[str, EntityFeatures]:
    """Read the per-character feature sidecar (line records)."""
    _, body = read_records(path)
    out: dict[str, EntityFeatures] = {}
    for rec in body:
        if rec.get("kind", "features") != "features":
            continue
        out[rec["character"]] = EntityFeatures(
            gender=rec.get("gender") or None,
            number=rec.get("number") or None,
        )
    return out


@dataclass(frozen=True)
class CorefFlag:
    story_id: str
    line_index: int
    pronoun: str
    word_position: int
    reason: str  # no_antecedent | plural_fallback
    resolved_to: str | None = None


@dataclass
class CorefResult:
    story: Story
    flags: list[CorefFlag] = field(default_factory=list)


class CorefResolver(ABC):
    """Contract for pluggable resolvers (rule-based, remote, ...)."""

    @abstractmethod
    def resolve_story(self, story: Story, features: dict[str, EntityFeatures]) -> CorefResult:
        ...


class RuleBasedResolver(CorefResolver):
    def __init__(self, rules=DEFAULT_PRONOUN_RULES):
        validate_rules(rules)
        self.rules = {r.form.lower(): r for r in rules}

    def resolve_story(self, story: Story, features: dict[str, EntityFeatures] | None = None) -> CorefResult:
        if not story.characters:
            raise ValueError(f"story {story.story_id!r} has an empty roster")
        features = features or {}
        # character name word sequences, longest first so multiword names win
        roster = sorted(
            ((tuple(w.lower() for w in WORD_RE.findall(name)), name) for name in story.characters),
            key=lambda item: -len(item[0]),
        )
        mentions: list[tuple[int, int, str]] = []  # (line, word position, character)
        flags: list[CorefFlag] = []
        out = story
        for line in story.lines:
            text = line.resolved_text or line.text
            spans = list(WORD_RE.finditer(text))
            words = [m.group(0) for m in spans]
            replacements: list[tuple[int, int, str]] = []
            i = 0
            while i < len(spans):
                matched = self._match_roster(words, i, roster)
                if matched is not None:
                    name, length = matched
                    mentions.append((line.index, i, name))
                    i += length
                    continue
                rule = self.rules.get(words[i].lower())
                if rule is not None:
                    entity, flag_reason = self._find_antecedent(rule, mentions, features)
                    if entity is None:
                        flags.append(
                            CorefFlag(story.story_id, line.index, words[i], i, "no_antecedent")
                        )
                    else:
                        if flag_reason:
                            flags.append(
                                CorefFlag(
                                    story.story_id, line.index, words[i], i, flag_reason, entity
                                )
                            )
                        replacement = entity
                        if self._is_possessive(rule, words, i):
                            replacement = entity + ("'" if entity.endswith("s") else "'s")
                        replacements.append((spans[i].start(), spans[i].end(), replacement))
                        mentions.append((line.index, i, entity))
                i += 1
            resolved = text
            for start, end, replacement in reversed(replacements):
                resolved = resolved[:start] + replacement + resolved[end:]
            out = with_resolved_line(out, line.index, resolved)
        return CorefResult(story=out, flags=flags)

    @staticmethod
    def _match_roster(words, i, roster):
        for char_words, name in roster:
            n = len(char_words)
            if not n or i + n > len(words):
                continue
            window = tuple(strip_possessive(w).lower() for w in words[i : i + n])
            if window == char_words:
                return name, n
        return None

    @staticmethod
    def _is_possessive(rule: PronounRule, words, i) -> bool:
        if rule.possessive == "always":
            return True
        if rule.possessive == "next_word":
            return i + 1 < len(words)
        return False

    @staticmethod
    def _compatible(rule: PronounRule, feats: EntityFeatures) -> bool:
        if rule.gender and feats.gender and rule.gender != feats.gender:
            return False
        if rule.number and feats.number and rule.number != feats.number:
            return False
        return True

    def _find_antecedent(self, rule, mentions, features):
        for _, _, name in reversed(mentions):
            if self._compatible(rule, features.get(name, EntityFeatures())):
                return name, None
        if rule.plural_fallback and mentions:
            return mentions[-1][2], "plural_fallback"
        return None, None


def resolve_corpus(
    corpus: Corpus,
    features: dict[str, EntityFeatures] | None = None,
    resolver: CorefResolver | None = None,
) -> tuple[Corpus, list[CorefFlag]]:
    """Run the resolver over every story, returning a resolved corpus."""
    resolver = resolver or RuleBasedResolver()
    out = Corpus(aggregation=corpus.aggregation, annotations=dict(corpus.annotations))
    flags: list[CorefFlag] = []
    for sid in sorted(corpus.stories):
        result = resolver.resolve_story(corpus.stories[sid], features or {})
        out.stories[sid] = result.story
        flags.extend(result.flags)
    return out, flags
