"""Multi-label confusion counting and micro-averaged metrics.

Each evaluated (event, character) pair contributes per-emotion confusion
counts against the eight-label space; micro metrics are computed from
counts summed over all pairs.  The report also breaks results down per
emotion and per role and echoes the run configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import PLUTCHIK_EMOTIONS, Corpus
from .records import make_header, write_records
from .rolelab import Role

N_EMOTIONS = len(PLUTCHIK_EMOTIONS)

# Published results for this task, printed as comparison rows for context.
REFERENCE_RESULTS = (
    ("zero-shot", 31.1, 77.4, 44.3),
    ("few-shot", 39.4, 81.5, 53.1),
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def count_pair(gold, predicted, emotions=PLUTCHIK_EMOTIONS) -> ConfusionCounts:
    """Confusion counts for one pair's gold and predicted emotion sets."""
    gold = frozenset(gold)
    predicted = frozenset(predicted)
    label_set = set(emotions)
    stray = (gold | predicted) - label_set
    if stray:
        raise ValueError(f"emotions outside the label set: {sorted(stray)}")
    tp = len(gold & predicted)
    fp = len(predicted - gold)
    fn = len(gold - predicted)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=len(emotions) - tp - fp - fn)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def micro_metrics(counts: ConfusionCounts) -> Metrics:
    """Precision/recall/F1 from summed counts; zero denominators yield 0
    with the degeneracy flag set."""
    degenerate = False
    if counts.tp + counts.fp:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision, degenerate = 0.0, True
    if counts.tp + counts.fn:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall, degenerate = 0.0, True
    denom = 2 * counts.tp + counts.fp + counts.fn
    f1 = (2 * counts.tp / denom) if denom else 0.0
    if not denom:
        degenerate = True
    return Metrics(precision=precision, recall=recall, f1=f1, degenerate=degenerate)


@dataclass
class EvaluationReport:
    overall: Metrics
    overall_counts: ConfusionCounts
    per_emotion: dict[str, tuple[ConfusionCounts, Metrics]]
    per_role: dict[Role, tuple[ConfusionCounts, Metrics]]
    evaluated_pairs: int
    missing_gold: list[tuple[str, int, str]]
    unpredicted_gold_pairs: int
    include_absent: bool
    config_echo: dict

    def records(self):
        def row(scope, counts, metrics):
            return {
                "kind": "metric",
                "scope": scope,
                "tp": counts.tp,
                "fp": counts.fp,
                "fn": counts.fn,
                "tn": counts.tn,
                "precision": metrics.precision,
                "recall": metrics.recall,
                "f1": metrics.f1,
                "degenerate": metrics.degenerate,
            }

        yield row("overall", self.overall_counts, self.overall)
        for emotion in PLUTCHIK_EMOTIONS:
            counts, metrics = self.per_emotion[emotion]
            yield row(f"emotion:{emotion}", counts, metrics)
        for role in Role:
            counts, metrics = self.per_role[role]
            yield row(f"role:{role.value}", counts, metrics)
        for key in self.missing_gold:
            yield {
                "kind": "excluded",
                "story_id": key[0],
                "line_index": key[1],
                "character": key[2],
                "reason": "missing_gold",
            }
        for setting, p, r, f1 in REFERENCE_RESULTS:
            yield {
                "kind": "reference",
                "setting": setting,
                "precision": p,
                "recall": r,
                "f1": f1,
            }

    def to_text(self) -> str:
        lines = []
        lines.append("emotion classification report")
        lines.append("=" * 34)
        lines.append(f"evaluated pairs: {self.evaluated_pairs}")
        convention = "counted as all-negative" if self.include_absent else "excluded"
        lines.append(
            f"gold pairs without a prediction: {self.unpredicted_gold_pairs} ({convention}); "
            f"pair total under the other convention: "
            f"{self.evaluated_pairs - self.unpredicted_gold_pairs if self.include_absent else self.evaluated_pairs + self.unpredicted_gold_pairs}"
        )
        if self.missing_gold:
            lines.append(f"predicted pairs without gold (excluded): {len(self.missing_gold)}")
            for key in self.missing_gold:
                lines.append(f"  - {key[0]} line {key[1]} / {key[2]}")
        lines.append("")
        c, m = self.overall_counts, self.overall
        lines.append(f"counts: TP={c.tp} FP={c.fp} FN={c.fn} TN={c.tn} (sum {c.total})")
        lines.append(
            f"micro: precision={m.precision:.4f} recall={m.recall:.4f} f1={m.f1:.4f}"
            + (" [degenerate]" if m.degenerate else "")
        )
        lines.append("")
        lines.append("per emotion:")
        for emotion in PLUTCHIK_EMOTIONS:
            counts, metrics = self.per_emotion[emotion]
            lines.append(
                f"  {emotion:<12} P={metrics.precision:.4f} R={metrics.recall:.4f} "
                f"F1={metrics.f1:.4f} (TP={counts.tp} FP={counts.fp} FN={counts.fn})"
            )
        lines.append("per role:")
        for role in Role:
            counts, metrics = self.per_role[role]
            lines.append(
                f"  {role.value:<12} P={metrics.precision:.4f} R={metrics.recall:.4f} "
                f"F1={metrics.f1:.4f} (TP={counts.tp} FP={counts.fp} FN={counts.fn})"
            )
        lines.append("")
        lines.append("published reference rows (context only):")
        for setting, p, r, f1 in REFERENCE_RESULTS:
            lines.append(f"  {setting:<10} P={p:.1f} R={r:.1f} F1={f1:.1f}")
        if self.config_echo:
            lines.append("")
            lines.append("configuration:")
            for key in sorted(self.config_echo):
                lines.append(f"  {key} = {self.config_echo[key]}")
        return "\n".join(lines) + "\n"

    def save(self, records_path, text_path=None, config: dict | None = None) -> None:
        header = make_header("report", config or self.config_echo, include_absent=self.include_absent)
        write_records(records_path, self.records(), header=header)
        if text_path is not None:
            with open(text_path, "w", encoding="utf-8") as fh:
                fh.write(self.to_text())


def evaluate(
    predictions: dict[tuple[str, int, str], tuple[Role, frozenset[str]]],
    corpus: Corpus,
    include_absent: bool = False,
    config_echo: dict | None = None,
) -> EvaluationReport:
    """Score predictions against corpus gold labels.

    Pairs the pipeline never predicted (no role record) are excluded by
    default; with ``include_absent`` they count as empty predictions.
    Predicted pairs without gold labels are listed and excluded.
    """
    overall = ConfusionCounts()
    per_emotion = {e: ConfusionCounts() for e in PLUTCHIK_EMOTIONS}
    per_role = {role: ConfusionCounts() for role in Role}
    missing_gold: list[tuple[str, int, str]] = []
    evaluated = 0

    def tally(gold, predicted, role):
        nonlocal overall, evaluated
        overall = overall + count_pair(gold, predicted)
        for e in PLUTCHIK_EMOTIONS:
            per_emotion[e] = per_emotion[e] + count_pair(gold & {e}, predicted & {e}, (e,))
        if role is not None:
            per_role[role] = per_role[role] + count_pair(gold, predicted)
        evaluated += 1

    for key in sorted(predictions):
        role, predicted = predictions[key]
        gold = corpus.gold(*key)
        if gold is None:
            missing_gold.append(key)
            continue
        tally(frozenset(gold), frozenset(predicted), role)

    unpredicted = [k for k in corpus.annotations if k not in predictions]
    if include_absent:
        for key in sorted(unpredicted):
            tally(frozenset(corpus.gold(*key)), frozenset(), None)

    report = EvaluationReport(
        overall=micro_metrics(overall),
        overall_counts=overall,
        per_emotion={e: (c, micro_metrics(c)) for e, c in per_emotion.items()},
        per_role={r: (c, micro_metrics(c)) for r, c in per_role.items()},
        evaluated_pairs=evaluated,
        missing_gold=missing_gold,
        unpredicted_gold_pairs=len(unpredicted),
        include_absent=include_absent,
        config_echo=config_echo or {},
    )
    assert report.overall_counts.total == N_EMOTIONS * evaluated
    return report
