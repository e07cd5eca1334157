import dataclasses

import pytest
from hypothesis import given, strategies as st

from emotrack.corpus import (
    PLUTCHIK_EMOTIONS,
    CorpusImportError,
    GoldAnnotation,
    aggregate_votes,
    corpus_records,
    import_corpus,
    load_corpus,
    save_corpus,
    validate_corpus,
)

from corpus_fixtures import make_corpus, make_story


def test_majority_aggregation_keeps_majority_votes_only():
    assert aggregate_votes({"joy": 3, "fear": 1}, 3, "majority") == {"joy"}


def test_empty_votes_give_empty_gold_set():
    assert aggregate_votes({}, 3, "majority") == frozenset()


def test_any_and_all_rules():
    votes = {"joy": 1, "trust": 3}
    assert aggregate_votes(votes, 3, "any") == {"joy", "trust"}
    assert aggregate_votes(votes, 3, "all") == {"trust"}


@given(
    votes=st.dictionaries(st.sampled_from(PLUTCHIK_EMOTIONS), st.integers(0, 3), max_size=8),
    emotion=st.sampled_from(PLUTCHIK_EMOTIONS),
    rule=st.sampled_from(("majority", "any", "all")),
)
def test_adding_a_vote_never_removes_an_emotion(votes, emotion, rule):
    before = aggregate_votes(votes, 3, rule)
    bumped = dict(votes)
    bumped[emotion] = min(bumped.get(emotion, 0) + 1, 3)
    after = aggregate_votes(bumped, 3, rule)
    if emotion in before:
        assert emotion in after
    assert before - {emotion} <= after


def test_import_release_field_by_field(data_dir):
    corpus = import_corpus(data_dir / "release.csv")
    assert len(corpus.stories) == 2
    assert sum(len(s.lines) for s in corpus.stories.values()) == 10
    s1 = corpus.stories["s1"]
    assert s1.characters == {"Tom", "Mary"}
    assert s1.split == "dev"
    assert s1.lines[0].text == "Tom was hungry ."
    assert s1.lines[4].text == "Tom thanked Mary ."
    ann = corpus.annotations[("s1", 0, "Tom")]
    assert ann == GoldAnnotation(
        story_id="s1",
        line_index=0,
        character="Tom",
        annotator_votes={"anticipation": 3, "sadness": 2},
        annotator_count=3,
        gold_set=frozenset({"anticipation", "sadness"}),
    )
    # no votes at all is a legal empty gold set
    assert corpus.annotations[("s1", 0, "Mary")].gold_set == frozenset()
    # 1/3 votes drop under majority
    assert corpus.annotations[("s1", 2, "Tom")].gold_set == {"joy"}


def test_import_is_deterministic(data_dir, tmp_path):
    a = import_corpus(data_dir / "release.csv")
    b = import_corpus(data_dir / "release.csv")
    save_corpus(a, tmp_path / "a.jsonl")
    save_corpus(b, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_import_rejects_malformed_vote_cell(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "storyid,linenum,char,sentence,plutchik\n"
        's1,1,Tom,Tom ate .,"[""joy:3""]"\n'
        "s1,2,Tom,Tom slept .,not-a-list\n",
        encoding="utf-8",
    )
    with pytest.raises(CorpusImportError) as err:
        import_corpus(bad)
    assert "bad.csv" in str(err.value)
    assert ":3:" in str(err.value)


def test_import_rejects_gap_in_line_numbers(tmp_path):
    bad = tmp_path / "gap.csv"
    bad.write_text(
        "storyid,linenum,char,sentence,plutchik\n"
        "s1,1,Tom,First .,[]\n"
        "s1,3,Tom,Third .,[]\n",
        encoding="utf-8",
    )
    with pytest.raises(CorpusImportError):
        import_corpus(bad)


def test_round_trip_is_identity(data_dir, tmp_path):
    corpus = import_corpus(data_dir / "release.csv")
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    again = load_corpus(path)
    assert again.stories == corpus.stories
    assert again.annotations == corpus.annotations
    # and the re-export is byte-identical
    save_corpus(again, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()


def test_load_rejects_annotation_for_unknown_character(tmp_path, caplog):
    corpus = make_corpus(
        [make_story("s1", ["Tom ran ."], ["Tom"])],
        gold={("s1", 0, "Tom"): ["joy"]},
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    extra = '{"kind":"annotation","story_id":"s1","line_index":0,"character":"Ghost","votes":{},"annotators":3,"gold":[]}\n'
    path.write_text(path.read_text(encoding="utf-8") + extra, encoding="utf-8")
    with caplog.at_level("WARNING"):
        loaded = load_corpus(path)
    assert ("s1", 0, "Ghost") not in loaded.annotations
    assert ("s1", 0, "Tom") in loaded.annotations
    assert any("Ghost" in r.message for r in caplog.records)


def test_validate_clean_corpus_is_empty(data_dir):
    corpus = import_corpus(data_dir / "release.csv")
    assert validate_corpus(corpus) == []


def test_validate_flags_duplicate_character():
    story = make_story("s1", ["Tom ran ."], ["Tom", "tom"])
    report = validate_corpus(make_corpus([story]))
    assert len(report) == 1
    assert report[0].story_id == "s1"
    assert "duplicate" in report[0].message


def test_validate_flags_emotion_outside_label_set():
    corpus = make_corpus(
        [make_story("s1", ["Tom ran ."], ["Tom"])],
        gold={("s1", 0, "Tom"): ["joy"]},
    )
    ann = corpus.annotations[("s1", 0, "Tom")]
    corpus.annotations[("s1", 0, "Tom")] = dataclasses.replace(
        ann, gold_set=frozenset({"ennui"})
    )
    report = validate_corpus(corpus)
    assert any("outside the label set" in v.message for v in report)


def test_canonical_records_are_sorted_and_flat(data_dir):
    corpus = import_corpus(data_dir / "release.csv")
    kinds = [r["kind"] for r in corpus_records(corpus)]
    assert kinds[0] == "story"
    assert kinds.count("story") == 2
    assert kinds.count("line") == 10
    assert kinds.count("annotation") == 20
