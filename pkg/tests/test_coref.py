import pytest
from hypothesis import given, strategies as st

from emotrack.coref import (
    DEFAULT_PRONOUN_RULES,
    EntityFeatures,
    PronounRule,
    RuleBasedResolver,
    resolve_corpus,
    validate_rules,
)

from corpus_fixtures import make_corpus, make_story

FEATS = {
    "Tom": EntityFeatures(gender="m", number="sg"),
    "Mary": EntityFeatures(gender="f", number="sg"),
    "People": EntityFeatures(number="pl"),
}


def resolve(texts, roster, features=FEATS):
    story = make_story("s", texts, roster)
    return RuleBasedResolver().resolve_story(story, features)


def test_single_candidate_antecedent():
    result = resolve(["Tom was hungry .", "He went out ."], ["Tom"])
    assert result.story.lines[1].resolved_text == "Tom went out ."
    assert result.flags == []


def test_gender_features_pick_the_compatible_antecedent():
    result = resolve(["Mary met Tom .", "He smiled ."], ["Mary", "Tom"])
    assert result.story.lines[1].resolved_text == "Tom smiled ."


def test_feminine_counterpart():
    result = resolve(["Mary met Tom .", "She smiled ."], ["Mary", "Tom"])
    assert result.story.lines[1].resolved_text == "Mary smiled ."


def test_unresolvable_story_initial_pronoun_is_flagged_and_unchanged():
    result = resolve(["They cheered loudly .", "Tom bowed ."], ["Tom"])
    assert result.story.lines[0].resolved_text == "They cheered loudly ."
    assert len(result.flags) == 1
    flag = result.flags[0]
    assert (flag.pronoun, flag.reason, flag.line_index) == ("They", "no_antecedent", 0)


def test_possessive_his_substitutes_with_apostrophe_s():
    result = resolve(["Tom lost his keys ."], ["Tom"])
    assert result.story.lines[0].resolved_text == "Tom lost Tom's keys ."


def test_they_prefers_plural_roster_entries():
    result = resolve(
        ["Tom met People .", "They cheered ."], ["Tom", "People"]
    )
    assert result.story.lines[1].resolved_text == "People cheered ."
    assert result.flags == []


def test_they_falls_back_to_most_recent_entity_with_flag():
    result = resolve(["Mary met Tom .", "They laughed ."], ["Mary", "Tom"])
    assert result.story.lines[1].resolved_text == "Tom laughed ."
    assert [f.reason for f in result.flags] == ["plural_fallback"]


def test_most_recent_compatible_antecedent_wins():
    result = resolve(
        ["Tom met Ben .", "He paid ."],
        ["Tom", "Ben"],
        {"Tom": EntityFeatures("m", "sg"), "Ben": EntityFeatures("m", "sg")},
    )
    assert result.story.lines[1].resolved_text == "Ben paid ."


def test_same_line_antecedent_and_substitution_updates_recency():
    result = resolve(
        ["Mary saw Tom and he waved at her ."],
        ["Mary", "Tom"],
    )
    assert result.story.lines[0].resolved_text == "Mary saw Tom and Tom waved at Mary ."


def test_resolution_is_idempotent():
    resolver = RuleBasedResolver()
    story = make_story(
        "s", ["Tom was hungry .", "He went out .", "His dog followed ."], ["Tom"]
    )
    once = resolver.resolve_story(story, FEATS)
    twice = resolver.resolve_story(once.story, FEATS)
    assert twice.story == once.story


def test_substituted_entity_is_always_a_roster_member():
    result = resolve(["Mary met Tom .", "He smiled .", "She left ."], ["Mary", "Tom"])
    for line in result.story.lines:
        for word in line.resolved_text.split():
            assert word.lower() not in ("he", "she", "him", "his")


def test_rule_set_must_cover_required_pronouns():
    with pytest.raises(ValueError):
        validate_rules([PronounRule("he")])
    validate_rules(DEFAULT_PRONOUN_RULES)


def test_empty_roster_is_rejected():
    story = make_story("s", ["Nothing happens ."], [])
    with pytest.raises(ValueError):
        RuleBasedResolver().resolve_story(story, {})


@given(
    filler=st.lists(
        st.sampled_from(["ate", "bread", "slowly", "today", "Paris"]), min_size=0, max_size=4
    )
)
def test_non_pronoun_tokens_are_never_altered(filler):
    text = "Tom " + " ".join(filler + ["saw", "him", "."])
    result = resolve(["Ben arrived .", text], ["Tom", "Ben"],
                     {"Tom": EntityFeatures("m", "sg"), "Ben": EntityFeatures("m", "sg")})
    resolved = result.story.lines[1].resolved_text
    for word in filler:
        assert word in resolved
    assert resolved.split()[0] == "Tom"


def test_resolve_corpus_copies_annotations_and_fills_every_line():
    corpus = make_corpus(
        [make_story("s1", ["Tom ran .", "He won ."], ["Tom"])],
        gold={("s1", 0, "Tom"): ["joy"]},
    )
    resolved, flags = resolve_corpus(corpus, FEATS)
    assert flags == []
    assert resolved.annotations == corpus.annotations
    assert all(l.resolved_text for l in resolved.stories["s1"].lines)
    assert resolved.stories["s1"].lines[0].resolved_text == "Tom ran ."
