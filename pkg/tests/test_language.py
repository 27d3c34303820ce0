"""Caption parsing and verb grounding."""
import numpy as np
import pytest

from kinegraph.kinematics import ModelType
from kinegraph.language import (
    PRISMATIC_VERBS,
    ROTATIONAL_VERBS,
    SEED_PRISMATIC,
    SEED_ROTATIONAL,
    AllSeedsOutOfVocabulary,
    EmptyVocabulary,
    FormatError,
    ManualDictionary,
    SeedDictionary,
    Statement,
    Tag,
    VerbLabel,
    build_centroids,
    classify_hard,
    classify_manual,
    default_part_lexicon,
    default_verb_lexicon,
    fixture_embeddings,
    lemmatize,
    lingual_likelihood_hard,
    lingual_likelihood_soft,
    load_embeddings,
    load_lexicon,
    looks_pretagged,
    parse_caption_text,
    parse_pretagged,
    tokenize_and_tag,
    validate_caption,
)

STORE = fixture_embeddings()
CENTROIDS = build_centroids(STORE)
SHARED = sorted(set(PRISMATIC_VERBS) & set(ROTATIONAL_VERBS))


def test_shared_verbs_are_the_four_from_both_columns():
    assert SHARED == ["close", "move", "pull", "push"]


def test_lexicons_load_and_cover_the_simulator_names():
    parts = default_part_lexicon()
    for name in ("door", "drawer", "wheel", "seat"):
        assert name in parts
    verbs = default_verb_lexicon()
    assert set(PRISMATIC_VERBS) <= verbs and set(ROTATIONAL_VERBS) <= verbs


def test_load_lexicon_strips_comments_and_case():
    words = load_lexicon(["Door  # the hinged kind", "", "# only a comment", "DRAWER"])
    assert words == frozenset({"door", "drawer"})


@pytest.mark.parametrize(
    "word,lemma",
    [
        ("opens", "open"),
        ("rotating", "rotate"),
        ("spinning", "spin"),
        ("pushed", "push"),
        ("swings", "swing"),
        ("carries", "carry"),
        ("pushes", "push"),
        ("door", "door"),
    ],
)
def test_lemmatizer_cases(word, lemma):
    lexicon = default_part_lexicon() | default_verb_lexicon()
    assert lemmatize(word, lexicon) == lemma


def test_tagging_is_deterministic_and_prefers_part_reading():
    text = "The user pushes the door. The wheel turns."
    first = tokenize_and_tag(text)
    second = tokenize_and_tag(text)
    assert first == second
    tags = {t.surface: t.tag for t in first}
    assert tags["door"] is Tag.NOUN
    assert tags["wheel"] is Tag.NOUN  # part reading wins over the verb reading
    assert tags["pushes"] is Tag.VERB
    assert tags["user"] is Tag.OTHER  # agents never become parts


def test_parse_pairs_verb_with_nearest_preceding_noun():
    parsed = parse_caption_text("The door swings and the drawer slides.")
    assert Statement("door", "swing") in parsed.statements
    assert Statement("drawer", "slide") in parsed.statements


def test_parse_falls_back_to_following_noun():
    parsed = parse_caption_text("Someone turns the wheel.")
    assert parsed.statements == (Statement("wheel", "turn"),)


def test_parse_counts_sentences_and_validates():
    parsed = parse_caption_text("The door swings. The drawer slides.")
    assert parsed.n_sentences == 2
    assert validate_caption(parsed)
    assert not validate_caption(parse_caption_text("nothing relevant here"))
    assert parsed.nouns() == ["door", "drawer"]


def test_pretagged_round_trip_and_detection():
    text = "the/O door/N swings/V ./O"
    assert looks_pretagged(text)
    parsed = parse_pretagged(text)
    assert parsed.statements == (Statement("door", "swing"),)
    assert not looks_pretagged("The door swings.")
    # auto-detection picks the same path
    assert parse_caption_text(text) == parsed


def test_pretagged_rejects_malformed_chunks():
    with pytest.raises(FormatError):
        parse_pretagged("door/N swings/Q")
    with pytest.raises(FormatError):
        parse_pretagged("door swings")


def test_fixture_seed_words_classify_to_their_own_type():
    for word in SEED_PRISMATIC:
        assert classify_hard(STORE, CENTROIDS, word).label is VerbLabel.PRISMATIC
    for word in SEED_ROTATIONAL:
        assert classify_hard(STORE, CENTROIDS, word).label is VerbLabel.ROTATIONAL


def test_equidistant_words_are_ambiguous_with_exact_halves():
    for word in SHARED:
        result = classify_hard(STORE, CENTROIDS, word)
        assert result.label is VerbLabel.AMBIGUOUS
        assert result.prismatic == 0.5 and result.rotational == 0.5


def test_unknown_verb_label():
    result = classify_hard(STORE, CENTROIDS, "imaginaryword")
    assert result.label is VerbLabel.UNKNOWN
    assert result.prismatic == 0.5 and result.rotational == 0.5


def test_soft_likelihoods_sum_to_one_over_whole_vocabulary():
    for word in STORE.words():
        pri = lingual_likelihood_soft(STORE, CENTROIDS, word, ModelType.PRISMATIC)
        rot = lingual_likelihood_soft(STORE, CENTROIDS, word, ModelType.ROTATIONAL)
        assert pri + rot == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < pri < 1.0 and 0.0 < rot < 1.0


def test_hard_and_soft_agree_on_argmax_when_hard_is_decisive():
    for word in STORE.words():
        hard = classify_hard(STORE, CENTROIDS, word)
        if hard.label not in (VerbLabel.PRISMATIC, VerbLabel.ROTATIONAL):
            continue
        soft_pri = lingual_likelihood_soft(STORE, CENTROIDS, word, ModelType.PRISMATIC)
        assert (soft_pri > 0.5) == (hard.label is VerbLabel.PRISMATIC)


def test_hard_classification_ignores_vector_scale():
    lines = ["3 2", "stretchy 2.0 0.0", "twisty 0.0 0.002", "oddball 5.0 5.0"]
    store = load_embeddings(lines)
    seeds = SeedDictionary(("stretchy",), ("twisty",))
    centroids = build_centroids(store, seeds)
    assert classify_hard(store, centroids, "stretchy").label is VerbLabel.PRISMATIC
    assert classify_hard(store, centroids, "twisty").label is VerbLabel.ROTATIONAL
    assert classify_hard(store, centroids, "oddball").label is VerbLabel.AMBIGUOUS


def test_rigid_always_receives_uninformative_half():
    assert lingual_likelihood_hard(VerbLabel.PRISMATIC, ModelType.RIGID) == 0.5
    assert lingual_likelihood_soft(STORE, CENTROIDS, "shift", ModelType.RIGID) == 0.5


def test_manual_dictionary_partition():
    dictionary = ManualDictionary()
    assert sorted(dictionary.shared()) == SHARED
    assert classify_manual(dictionary, "insert").label is VerbLabel.PRISMATIC
    assert classify_manual(dictionary, "rotate").label is VerbLabel.ROTATIONAL
    assert classify_manual(dictionary, "pull").label is VerbLabel.AMBIGUOUS
    assert classify_manual(dictionary, "ponder").label is VerbLabel.UNKNOWN
    assert classify_manual(dictionary, "ROTATE").label is VerbLabel.ROTATIONAL


def test_embedding_loader_rejects_malformed_input():
    with pytest.raises(FormatError):
        load_embeddings(["word 1.0 2.0", "other 1.0"])  # inconsistent dimensions
    with pytest.raises(FormatError):
        load_embeddings(["not a header", "word 1.0"])  # non-numeric components
    with pytest.raises(EmptyVocabulary):
        load_embeddings(["0 4"])


def test_centroid_requires_in_vocabulary_seeds():
    with pytest.raises(AllSeedsOutOfVocabulary):
        build_centroids(STORE, SeedDictionary(("nosuchword",), ("rotate",)))


def test_fixture_vocabulary_scope():
    assert len(STORE.words()) == 68
    for word in PRISMATIC_VERBS + ROTATIONAL_VERBS:
        assert word in STORE
