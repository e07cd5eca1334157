"""Emotion scoring, threshold calibration and classification.

For each (event, character) pair with an assigned role, an inference set
is assembled from the raw event plus backend-generated unstated events
(intent and reaction for actors, reaction for objects, and the previous
line's effect when the character appeared there).  Each of the eight
Plutchik emotions is scored as the geometric mean, over the set, of the
probability that the reaction inference starts with the emotion's
dictionary word.  An emotion is classified when its score strictly
exceeds a per-(emotion, role) threshold, calibrated either from score
quantiles matched to annotation frequencies (zero-shot) or by a grid
sweep maximizing training F1 (few-shot).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import Backend, BackendError, Dimension, effect_dimension
from .corpus import PLUTCHIK_EMOTIONS, Corpus, Story
from .records import make_header, read_records, write_records
from .rolelab import Role, RoleAssignment

log = logging.getLogger(__name__)

DEFAULT_EMOTION_WORDS = {
    "surprise": "surprised",
    "disgust": "disgusted",
    "sadness": "sad",
    "joy": "happy",
    "anger": "angry",
    "fear": "fearful",
    "trust": "trusting",
    "anticipation": "excited",
}

# Relative frequency (%) at which each emotion is annotated per character
# and event on the StoryCommonsense training split, by role.  Drives the
# zero-shot quantile thresholds.
DEFAULT_EMOTION_FREQUENCIES: dict[tuple[str, Role], float] = {
    ("surprise", Role.ACTOR): 38.8,
    ("surprise", Role.OBJECT): 32.6,
    ("disgust", Role.ACTOR): 18.3,
    ("disgust", Role.OBJECT): 13.6,
    ("sadness", Role.ACTOR): 25.2,
    ("sadness", Role.OBJECT): 19.9,
    ("joy", Role.ACTOR): 53.0,
    ("joy", Role.OBJECT): 33.4,
    ("anger", Role.ACTOR): 19.3,
    ("anger", Role.OBJECT): 15.1,
    ("fear", Role.ACTOR): 26.3,
    ("fear", Role.OBJECT): 20.1,
    ("trust", Role.ACTOR): 34.1,
    ("trust", Role.OBJECT): 24.0,
    ("anticipation", Role.ACTOR): 56.4,
    ("anticipation", Role.OBJECT): 33.7,
}

# Score magnitudes are products of small first-word probabilities, so the
# sweep grid is log-spaced: five points per decade over [1e-5, 1e-1].
DEFAULT_THRESHOLD_GRID = tuple(10 ** (-5 + k / 5) for k in range(21)) + (0.2, 0.5, 0.9)

# provenance tags for inference-set elements
RAW_EVENT = "raw_event"
XINTENT = "xIntent"
XREACT_TEXT = "xReact_text"
OREACT_TEXT = "oReact_text"
PREV_XEFFECT = "prev_xEffect"
PREV_OEFFECT = "prev_oEffect"
CUR_XEFFECT = "cur_xEffect"
CUR_OEFFECT = "cur_oEffect"


class CalibrationError(ValueError):
    """Bad calibration configuration (empty grid, q out of range, ...)."""


@dataclass(frozen=True)
class InferenceElement:
    text: str
    source: str


@dataclass(frozen=True)
class InferenceSet:
    story_id: str
    line_index: int
    character: str
    role: Role
    elements: tuple[InferenceElement, ...]

    def texts(self) -> list[str]:
        return [e.text for e in self.elements]

    def sources(self) -> list[str]:
        return [e.source for e in self.elements]


def build_inference_set(
    story: Story,
    line_index: int,
    character: str,
    role: Role,
    backend: Backend,
    prev_roles: dict[tuple[str, int, str], Role] | None = None,
    include_current_effect: bool = False,
) -> InferenceSet:
    """Assemble the evidence events for one (line, character) pair.

    Actors contribute the raw event plus generated intent and reaction;
    objects the raw event plus generated reaction.  When the character
    also appeared in the previous line, that line's effect inference
    (actor- or object-side per its role there) is appended; the first
    line of a story never carries an effect element.
    """
    prev_roles = prev_roles or {}
    event = story.line_text(line_index)
    elements = [InferenceElement(event, RAW_EVENT)]
    if role is Role.ACTOR:
        elements.append(InferenceElement(backend.generate(event, Dimension.XINTENT), XINTENT))
        elements.append(InferenceElement(backend.generate(event, Dimension.XREACT), XREACT_TEXT))
    else:
        elements.append(InferenceElement(backend.generate(event, Dimension.OREACT), OREACT_TEXT))
    if include_current_effect:
        dim = effect_dimension(role)
        tag = CUR_XEFFECT if role is Role.ACTOR else CUR_OEFFECT
        elements.append(InferenceElement(backend.generate(event, dim), tag))
    if line_index > 0:
        prev_role = prev_roles.get((story.story_id, line_index - 1, character))
        if prev_role is not None:
            prev_event = story.line_text(line_index - 1)
            dim = effect_dimension(prev_role)
            tag = PREV_XEFFECT if prev_role is Role.ACTOR else PREV_OEFFECT
            elements.append(InferenceElement(backend.generate(prev_event, dim), tag))
    return InferenceSet(story.story_id, line_index, character, role, tuple(elements))


def geometric_mean(probs) -> float:
    """Geometric mean over probabilities; any zero collapses to zero."""
    probs = list(probs)
    if not probs:
        raise ValueError("geometric mean of an empty sequence")
    for p in probs:
        if p < 0.0 or p > 1.0:
            raise ValueError(f"probability outside [0, 1]: {p}")
    if any(p == 0.0 for p in probs):
        return 0.0
    # fsum keeps the result exactly permutation-invariant
    return math.exp(math.fsum(math.log(p) for p in probs) / len(probs))


def score_emotion(
    inference_set: InferenceSet,
    emotion: str,
    backend: Backend,
    words: dict[str, str] | None = None,
    floor: float = 0.0,
) -> float:
    """Score one emotion for one pair: geometric mean of first-word
    probabilities of the emotion's dictionary word across the set."""
    words = words or DEFAULT_EMOTION_WORDS
    word = words[emotion]
    probs = []
    for element in inference_set.elements:
        p = backend.react_word_prob(element.text, inference_set.role, word)
        if floor > 0.0:
            p = max(p, floor)
        probs.append(p)
    return geometric_mean(probs)


def score_all_emotions(inference_set, backend, words=None, floor=0.0) -> dict[str, float]:
    return {
        emotion: score_emotion(inference_set, emotion, backend, words=words, floor=floor)
        for emotion in PLUTCHIK_EMOTIONS
    }


@dataclass(frozen=True)
class ScoreEntry:
    story_id: str
    line_index: int
    character: str
    role: Role
    scores: dict[str, float]


class ScoreTable:
    """Per-(story, line, character) emotion scores plus the pair's role."""

    def __init__(self):
        self.entries: dict[tuple[str, int, str], ScoreEntry] = {}

    def add(self, entry: ScoreEntry) -> None:
        missing = set(PLUTCHIK_EMOTIONS) - set(entry.scores)
        if missing:
            raise ValueError(f"entry missing emotions {sorted(missing)}")
        for emotion, s in entry.scores.items():
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"score for {emotion!r} outside [0, 1]: {s}")
        self.entries[(entry.story_id, entry.line_index, entry.character)] = entry

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        for key in sorted(self.entries):
            yield self.entries[key]

    def records(self):
        for entry in self:
            yield {
                "kind": "score",
                "story_id": entry.story_id,
                "line_index": entry.line_index,
                "character": entry.character,
                "role": entry.role.value,
                "scores": {e: entry.scores[e] for e in PLUTCHIK_EMOTIONS},
            }

    def save(self, path, config: dict | None = None, **header_fields) -> None:
        header = make_header("scores", config or {}, **header_fields)
        write_records(path, self.records(), header=header)

    @classmethod
    def load(cls, path) -> "ScoreTable":
        _, body = read_records(path)
        table = cls()
        for rec in body:
            if rec.get("kind") != "score":
                continue
            table.add(
                ScoreEntry(
                    story_id=rec["story_id"],
                    line_index=int(rec["line_index"]),
                    character=rec["character"],
                    role=Role(rec["role"]),
                    scores={e: float(p) for e, p in rec["scores"].items()},
                )
            )
        return table


@dataclass
class ThresholdSet:
    values: dict[tuple[str, Role], float]
    mode: str  # zero_shot | few_shot
    provenance: dict = field(default_factory=dict)

    def get(self, emotion: str, role: Role) -> float:
        return self.values[(emotion, role)]

    def validate(self) -> None:
        for emotion in PLUTCHIK_EMOTIONS:
            for role in Role:
                if (emotion, role) not in self.values:
                    raise ValueError(f"threshold missing for ({emotion}, {role.value})")
        for key, k in self.values.items():
            if not 0.0 <= k <= 1.0:
                raise ValueError(f"threshold outside [0, 1] for {key}: {k}")

    def records(self):
        for (emotion, role) in sorted(self.values, key=lambda k: (k[0], k[1].value)):
            yield {
                "kind": "threshold",
                "emotion": emotion,
                "role": role.value,
                "value": self.values[(emotion, role)],
            }

    def save(self, path, config: dict | None = None, **header_fields) -> None:
        header = make_header(
            "thresholds", config or {}, mode=self.mode, provenance=self.provenance, **header_fields
        )
        write_records(path, self.records(), header=header)

    @classmethod
    def load(cls, path) -> "ThresholdSet":
        header, body = read_records(path)
        values = {}
        for rec in body:
            if rec.get("kind") != "threshold":
                continue
            values[(rec["emotion"], Role(rec["role"]))] = float(rec["value"])
        header = header or {}
        return cls(values=values, mode=header.get("mode", "unknown"),
                   provenance=header.get("provenance", {}))


def classify(scores: dict[str, float], thresholds: ThresholdSet, role: Role) -> frozenset[str]:
    """Emotions whose score strictly exceeds their (emotion, role) threshold."""
    missing = set(PLUTCHIK_EMOTIONS) - set(scores)
    if missing:
        raise ValueError(f"scores missing emotions {sorted(missing)}")
    return frozenset(
        e for e in PLUTCHIK_EMOTIONS if scores[e] > thresholds.get(e, role)
    )


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile on the sorted values (index ceil(p/100 * N))."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("percentile of an empty sequence")
    idx = math.ceil(pct / 100.0 * len(ordered))
    idx = min(max(idx, 1), len(ordered))
    return ordered[idx - 1]


def calibrate_zero_shot(
    table: ScoreTable,
    corpus: Corpus | None = None,
    frequencies: dict[tuple[str, Role], float] | None = None,
    quantile_mode: str = "complement",
) -> ThresholdSet:
    """Quantile thresholds matched to per-(emotion, role) annotation rates.

    With rate q%, complement mode (default) sets the threshold at the
    (100-q)-th nearest-rank percentile of that emotion's training scores,
    so roughly q% of them land strictly above; literal mode uses the q-th
    percentile itself.  ``frequencies`` defaults to rates derived from
    ``corpus`` gold labels, falling back to the built-in table.
    """
    if quantile_mode not in ("complement", "literal"):
        raise CalibrationError(f"unknown quantile mode {quantile_mode!r}")
    source = "explicit"
    if frequencies is None:
        if corpus is not None:
            frequencies = derive_frequencies(table, corpus)
            source = "derived"
        else:
            frequencies = DEFAULT_EMOTION_FREQUENCIES
            source = "default"
    values: dict[tuple[str, Role], float] = {}
    for role in Role:
        scores_by_emotion: dict[str, list[float]] = {e: [] for e in PLUTCHIK_EMOTIONS}
        for entry in table:
            if entry.role is role:
                for e in PLUTCHIK_EMOTIONS:
                    scores_by_emotion[e].append(entry.scores[e])
        for emotion in PLUTCHIK_EMOTIONS:
            q = frequencies[(emotion, role)]
            if not 0.0 < q < 100.0:
                raise CalibrationError(f"frequency for ({emotion}, {role.value}) outside (0, 100): {q}")
            scores = scores_by_emotion[emotion]
            if not scores:
                raise CalibrationError(f"no training scores for ({emotion}, {role.value})")
            pct = (100.0 - q) if quantile_mode == "complement" else q
            values[(emotion, role)] = nearest_rank_percentile(scores, pct)
    thresholds = ThresholdSet(
        values=values,
        mode="zero_shot",
        provenance={
            "quantile_mode": quantile_mode,
            "frequencies_source": source,
            "training_pairs": len(table),
        },
    )
    thresholds.validate()
    return thresholds


def derive_frequencies(table: ScoreTable, corpus: Corpus) -> dict[tuple[str, Role], float]:
    """Annotation rate (%) of each emotion among training pairs, by role."""
    totals = {role: 0 for role in Role}
    counts = {(e, role): 0 for e in PLUTCHIK_EMOTIONS for role in Role}
    for entry in table:
        gold = corpus.gold(entry.story_id, entry.line_index, entry.character)
        if gold is None:
            continue
        totals[entry.role] += 1
        for e in gold:
            counts[(e, entry.role)] += 1
    out = {}
    for key, n in counts.items():
        total = totals[key[1]]
        out[key] = 100.0 * n / total if total else 0.0
    return out


def _binary_f1(items, threshold: float) -> float:
    tp = fp = fn = 0
    for score, positive in items:
        predicted = score > threshold
        if predicted and positive:
            tp += 1
        elif predicted:
            fp += 1
        elif positive:
            fn += 1
    denom = 2 * tp + fp + fn
    return (2 * tp / denom) if denom else 0.0


def calibrate_few_shot(
    table: ScoreTable,
    corpus: Corpus,
    grid=DEFAULT_THRESHOLD_GRID,
) -> ThresholdSet:
    """Per-(emotion, role) sweep: lowest grid threshold maximizing F1 on
    the training pairs (score strictly above the threshold counts as a
    positive prediction)."""
    grid = sorted(grid)
    if not grid:
        raise CalibrationError("threshold grid is empty")
    for g in grid:
        if not 0.0 <= g <= 1.0:
            raise CalibrationError(f"grid threshold outside [0, 1]: {g}")
    skipped = 0
    by_cell: dict[tuple[str, Role], list[tuple[float, bool]]] = {
        (e, role): [] for e in PLUTCHIK_EMOTIONS for role in Role
    }
    for entry in table:
        gold = corpus.gold(entry.story_id, entry.line_index, entry.character)
        if gold is None:
            skipped += 1
            continue
        for e in PLUTCHIK_EMOTIONS:
            by_cell[(e, entry.role)].append((entry.scores[e], e in gold))
    if skipped:
        log.warning("few-shot calibration skipped %d pairs without gold labels", skipped)
    values = {}
    for cell, items in by_cell.items():
        best_k = grid[0]
        best_f1 = -1.0
        for g in grid:  # ascending, so ties keep the lowest value
            f1 = _binary_f1(items, g)
            if f1 > best_f1:
                best_f1 = f1
                best_k = g
        values[cell] = best_k
    thresholds = ThresholdSet(
        values=values,
        mode="few_shot",
        provenance={
            "grid": list(grid),
            "training_pairs": len(table) - skipped,
            "skipped_pairs": skipped,
        },
    )
    thresholds.validate()
    return thresholds


def roles_map(assignments) -> dict[tuple[str, int, str], Role]:
    return {(a.story_id, a.line_index, a.character): a.role for a in assignments}


@dataclass(frozen=True)
class PairError:
    story_id: str
    line_index: int
    character: str
    message: str


def score_pairs(
    corpus: Corpus,
    roles: list[RoleAssignment],
    backend: Backend,
    workers: int = 1,
    include_current_effect: bool = False,
    words: dict[str, str] | None = None,
    floor: float = 0.0,
) -> tuple[ScoreTable, list[PairError]]:
    """Score every role-assigned pair; backend failures are collected per
    pair and partial results returned."""
    prev = roles_map(roles)
    ordered = sorted(roles, key=lambda a: (a.story_id, a.line_index, a.character))

    def one(assignment: RoleAssignment):
        story = corpus.stories[assignment.story_id]
        inference_set = build_inference_set(
            story,
            assignment.line_index,
            assignment.character,
            assignment.role,
            backend,
            prev_roles=prev,
            include_current_effect=include_current_effect,
        )
        return score_all_emotions(inference_set, backend, words=words, floor=floor)

    table = ScoreTable()
    errors: list[PairError] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _guard(one, a), ordered))
    else:
        results = [_guard(one, a) for a in ordered]
    for assignment, outcome in zip(ordered, results):
        if isinstance(outcome, PairError):
            errors.append(outcome)
        else:
            table.add(
                ScoreEntry(
                    story_id=assignment.story_id,
                    line_index=assignment.line_index,
                    character=assignment.character,
                    role=assignment.role,
                    scores=outcome,
                )
            )
    return table, errors


def _guard(fn, assignment):
    try:
        return fn(assignment)
    except BackendError as exc:
        return PairError(assignment.story_id, assignment.line_index, assignment.character, str(exc))


def classify_table(table: ScoreTable, thresholds: ThresholdSet):
    """Predicted emotion set per scored pair."""
    thresholds.validate()
    out: dict[tuple[str, int, str], tuple[Role, frozenset[str]]] = {}
    for entry in table:
        key = (entry.story_id, entry.line_index, entry.character)
        out[key] = (entry.role, classify(entry.scores, thresholds, entry.role))
    return out


def run_pipeline(
    corpus: Corpus,
    roles: list[RoleAssignment],
    backend: Backend,
    thresholds: ThresholdSet,
    workers: int = 1,
    include_current_effect: bool = False,
):
    """Score freshly built inference sets and classify them.

    Exactly the composition of :func:`score_pairs` and
    :func:`classify_table`, so chained stage commands and an in-process
    run produce identical predictions.
    """
    table, errors = score_pairs(
        corpus, roles, backend, workers=workers, include_current_effect=include_current_effect
    )
    return classify_table(table, thresholds), errors


def predictions_to_records(predictions):
    for key in sorted(predictions):
        role, emotions = predictions[key]
        yield {
            "kind": "prediction",
            "story_id": key[0],
            "line_index": key[1],
            "character": key[2],
            "role": role.value,
            "emotions": sorted(emotions),
        }


def predictions_from_records(records):
    out = {}
    for rec in records:
        if rec.get("kind") != "prediction":
            continue
        key = (rec["story_id"], int(rec["line_index"]), rec["character"])
        out[key] = (Role(rec["role"]), frozenset(rec["emotions"]))
    return out
