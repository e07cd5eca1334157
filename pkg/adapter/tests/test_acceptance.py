"""Acceptance: protocol conformance, probability mass, and parity with
the pipeline's remote backend (record-then-replay equality)."""

import os
from contextlib import contextmanager
from pathlib import Path

import pytest
import requests

from commonsense_adapter.probe import probe

DATA = Path(__file__).parent / "data"

DICTIONARY = (
    "surprised", "disgusted", "sad", "happy", "angry", "fearful", "trusting", "excited",
)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def test_protocol_conformance_probe(server_url):
    """The probe fixture passes with zero schema or range violations."""
    with criterion("adapter protocol conformance (probe fixture, zero violations)"):
        report = probe(server_url, DATA / "probe_fixture.jsonl")
        assert report.violations == [], report.violations


def test_dictionary_word_mass_sums_below_one(server_url):
    """Per event, the 8 dictionary-word probabilities sum to <= 1 + 1e-6."""
    with criterion("adapter dictionary-word probability mass <= 1 + 1e-6"):
        for event, dimension in (
            ("Tom won the race .", "xReact"),
            ("Mary lost her keys .", "oReact"),
            ("Tom made a friend .", "xReact"),
        ):
            total = 0.0
            for word in DICTIONARY:
                resp = requests.post(
                    server_url + "/",
                    json={"op": "word_prob", "event": event, "dimension": dimension, "word": word},
                    timeout=30,
                )
                assert resp.status_code == 200
                total += resp.json()["prob"]
            assert total <= 1.0 + 1e-6, (event, total)


def test_remote_backend_parity_record_then_replay(server_url):
    """The pipeline's remote backend pointed at this adapter passes the
    same substitutability check as any other backend: classifications
    replayed from recorded answers are identical."""
    emotrack = pytest.importorskip(
        "emotrack", reason="pipeline package not installed in this environment"
    )
    from emotrack.backend import FixtureBackend, RecordingBackend, RemoteBackend
    from emotrack.corpus import Corpus, EventLine, Story
    from emotrack.engine import ThresholdSet, classify_table, score_pairs
    from emotrack.corpus import PLUTCHIK_EMOTIONS
    from emotrack.rolelab import Role, RoleAssignment

    with criterion("adapter parity: record-then-replay identical classifications"):
        lines = ("Tom won the race .", "Mary lost her keys .")
        story = Story(
            story_id="s1",
            lines=tuple(EventLine(i, t, resolved_text=t) for i, t in enumerate(lines)),
            characters=frozenset({"Tom", "Mary"}),
        )
        corpus = Corpus()
        corpus.stories["s1"] = story
        roles = [
            RoleAssignment("s1", 0, "Tom", Role.ACTOR),
            RoleAssignment("s1", 1, "Mary", Role.ACTOR),
            RoleAssignment("s1", 1, "Tom", Role.OBJECT),
        ]
        remote = RemoteBackend(server_url, timeout=30)
        recorder = RecordingBackend(remote)
        table, errors = score_pairs(corpus, roles, recorder)
        assert errors == []
        # median-ish threshold so predictions are non-trivial either way
        thresholds = ThresholdSet(
            values={(e, role): 0.01 for e in PLUTCHIK_EMOTIONS for role in Role},
            mode="few_shot",
        )
        live = classify_table(table, thresholds)

        replay_backend = FixtureBackend(recorder.records)
        replay_table, errors = score_pairs(corpus, roles, replay_backend)
        assert errors == []
        replayed = classify_table(replay_table, thresholds)
        assert replayed == live
        assert list(replay_table.records()) == list(table.records())


def test_remote_client_matches_raw_protocol_answers(server_url):
    """The pipeline's HTTP client reports exactly the adapter's own
    first-word probabilities, cross-checked on ten events."""
    pytest.importorskip("emotrack", reason="pipeline package not installed")
    from emotrack.backend import Dimension, RemoteBackend

    with criterion("adapter raw-protocol cross-check (10 events)"):
        remote = RemoteBackend(server_url, timeout=30)
        events = [
            "Tom won the race .", "Mary lost her keys .", "Tom smiled .",
            "Mary cried .", "Tom made a friend .", "Mary went home .",
            "Tom won a prize .", "Mary smiled .", "Tom went home .", "Tom cried .",
        ]
        for event in events:
            raw = requests.post(
                server_url + "/",
                json={"op": "word_prob", "event": event, "dimension": "xReact", "word": "happy"},
                timeout=30,
            ).json()["prob"]
            assert remote.word_prob(event, Dimension.XREACT, "happy") == raw


@pytest.mark.skipif(
    "COMMONSENSE_MODEL_DIR" not in os.environ,
    reason="optional real-model integration: set COMMONSENSE_MODEL_DIR to a "
    "trained checkpoint (and run the pipeline on the full dev split) to exercise it",
)
def test_real_model_integration_optional():
    """With a real trained checkpoint this serves it and expects pipeline
    micro-F1 in the published ballpark; never runs in CI."""
    from commonsense_adapter.scorer import AdapterConfig, GreedyScorer

    scorer = GreedyScorer(AdapterConfig(model_id=os.environ["COMMONSENSE_MODEL_DIR"]))
    assert scorer.identity
