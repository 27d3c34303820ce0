"""Caption processing and verb-to-motion-type grounding.

The pipeline is deliberately lexicon-driven: a lowercasing tokenizer with
suffix lemmatization, lexicon-membership tagging, and a per-sentence pairing
of verbs with their nearest part noun phrase.  Verbs are grounded either
through word-embedding centroids built from small seed sets (hard nearest
centroid with a margin, or a soft normalized similarity) or through a fixed
manual dictionary.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .kinematics import ModelType

LOGGER = logging.getLogger(__name__)


class FormatError(ValueError):
    """Malformed caption, lexicon, or embedding input."""


class EmptyVocabulary(ValueError):
    """An embedding source contained no usable word vectors."""


class AllSeedsOutOfVocabulary(ValueError):
    """None of the seed words exist in the embedding vocabulary."""


class Tag(str, Enum):
    NOUN = "N"
    VERB = "V"
    OTHER = "O"


class VerbLabel(str, Enum):
    PRISMATIC = "Prismatic"
    ROTATIONAL = "Rotational"
    AMBIGUOUS = "Ambiguous"
    UNKNOWN = "Unknown"


#: Hard-assignment likelihood floor for the motion type a verb spoke against.
EPSILON_UNMATCHED = 1e-6

#: Seed words whose embedding centroids anchor the two movable motion types.
SEED_PRISMATIC = ("shift", "insert", "extract")
SEED_ROTATIONAL = ("rotate", "circle", "twist")

#: Fixed verb-to-type dictionary used by the manual grounding mode.  The four
#: words listed in both columns stay deliberately ambiguous.
PRISMATIC_VERBS = (
    "pull", "push", "shift", "move", "close", "remove", "tug", "yank",
    "dislocate", "extract", "jerk", "thrust", "poke", "prod", "shove",
    "displace", "stretch", "squeeze", "fasten", "draw", "join", "insert",
    "embed", "enter", "exit", "implant", "inject", "introduce", "stick",
    "admit", "infuse", "inlay", "instill", "place", "set", "penetrate",
    "withdraw", "intrude", "slide",
)
ROTATIONAL_VERBS = (
    "bend", "yaw", "turn", "spin", "whirl", "move", "pull", "push", "close",
    "revolve", "rotate", "gyre", "gyrate", "pivot", "swivel", "twist",
    "twirl", "circle", "roll", "reel", "wheel", "round", "wrench", "screw",
    "tighten", "swing", "cycle", "bow", "flex", "wind", "spiral", "twine",
    "loosen",
)

_SENTENCE_TERMINALS = frozenset({".", "!", "?", ";"})
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?|[.!?;]")
_PRETAGGED_RE = re.compile(r"^(.+)/([NVO])$")

_LEMMA_EXCEPTIONS = {
    "men": "man",
    "women": "woman",
    "people": "person",
    "spun": "spin",
    "swung": "swing",
    "slid": "slide",
    "drew": "draw",
    "drawn": "draw",
    "wound": "wind",
    "stuck": "stick",
    "bent": "bend",
    "sank": "sink",
    "froze": "freeze",
}


@dataclass(frozen=True)
class TaggedToken:
    surface: str
    lemma: str
    tag: Tag


@dataclass(frozen=True)
class Statement:
    """One grounded clause: a part noun phrase and the motion verb said of it."""

    part_noun_phrase: str
    verb_lemma: str


@dataclass(frozen=True)
class ParsedCaption:
    statements: tuple[Statement, ...]
    n_sentences: int = 0

    def nouns(self) -> list[str]:
        """Distinct part noun phrases in order of first mention."""
        seen: list[str] = []
        for statement in self.statements:
            if statement.part_noun_phrase not in seen:
                seen.append(statement.part_noun_phrase)
        return seen


def _bundled(name: str) -> str:
    return (resources.files("kinegraph") / "data" / name).read_text(encoding="utf-8")


def load_lexicon(source: str | Path | Iterable[str]) -> frozenset[str]:
    """One lowercase word per line; blank lines and ``#`` comments ignored."""
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source
    words = set()
    for line in lines:
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


def default_part_lexicon() -> frozenset[str]:
    return load_lexicon(_bundled("part_nouns.txt").splitlines())


def default_verb_lexicon() -> frozenset[str]:
    return load_lexicon(_bundled("motion_verbs.txt").splitlines())


def default_agent_stoplist() -> frozenset[str]:
    return load_lexicon(_bundled("agent_stopwords.txt").splitlines())


def lemmatize(word: str, lexicon: frozenset[str]) -> str:
    """Suffix-rule lemmatizer with a small irregular table.

    Candidate stems are validated against ``lexicon`` where possible so that
    e-restoration ("rotating" -> "rotate") and consonant undoubling
    ("spinning" -> "spin") only fire when they produce a known word.
    """
    word = word.lower()
    if word in _LEMMA_EXCEPTIONS:
        return _LEMMA_EXCEPTIONS[word]
    if word in lexicon:
        return word
    if word.endswith("ies") and len(word) > 4:
        stem = word[:-3] + "y"
        if stem in lexicon:
            return stem
    if word.endswith("es") and len(word) > 3 and word[:-2] in lexicon:
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and word[:-1] in lexicon:
        return word[:-1]
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) > len(suffix) + 1:
            stem = word[: -len(suffix)]
            if stem in lexicon:
                return stem
            if stem + "e" in lexicon:
                return stem + "e"
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[:-1] in lexicon:
                return stem[:-1]
    # Lexicon-blind fallbacks, mildest first.
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("shes", "ches", "xes", "zes", "sses")):
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and len(word) > 3:
        return word[:-1]
    return word


def tokenize_and_tag(
    text: str,
    part_lexicon: frozenset[str] | None = None,
    verb_lexicon: frozenset[str] | None = None,
    agent_stoplist: frozenset[str] | None = None,
) -> list[TaggedToken]:
    """Lowercase, split off punctuation, lemmatize, and tag each token.

    Part nouns are recognized before verbs so that words appearing in both
    lexicons (a "wheel" can wheel around) keep their part reading; agent words
    are never tagged as parts.  Sentence terminals survive as Other tokens so
    the parser can find clause boundaries.
    """
    parts = default_part_lexicon() if part_lexicon is None else part_lexicon
    verbs = default_verb_lexicon() if verb_lexicon is None else verb_lexicon
    agents = default_agent_stoplist() if agent_stoplist is None else agent_stoplist
    known = parts | verbs
    tokens: list[TaggedToken] = []
    for surface in _TOKEN_RE.findall(text.lower()):
        if surface in _SENTENCE_TERMINALS:
            tokens.append(TaggedToken(surface, surface, Tag.OTHER))
            continue
        lemma = lemmatize(surface, known)
        if lemma in agents or surface in agents:
            tag = Tag.OTHER
        elif lemma in parts:
            tag = Tag.NOUN
        elif lemma in verbs:
            tag = Tag.VERB
        else:
            tag = Tag.OTHER
        tokens.append(TaggedToken(surface, lemma, tag))
    return tokens


def parse_caption(tokens: list[TaggedToken]) -> ParsedCaption:
    """Pair each verb with its nearest noun run (preceding first, else following)."""
    sentences: list[list[TaggedToken]] = [[]]
    for token in tokens:
        if token.surface in _SENTENCE_TERMINALS:
            sentences.append([])
        else:
            sentences[-1].append(token)
    statements: list[Statement] = []
    n_sentences = 0
    for sentence in sentences:
        if not sentence:
            continue
        n_sentences += 1
        statements.extend(_pair_sentence(sentence))
    return ParsedCaption(tuple(statements), n_sentences)


def _pair_sentence(tokens: list[TaggedToken]) -> list[Statement]:
    runs: list[tuple[int, int, str]] = []  # (start, end, phrase), end exclusive
    idx = 0
    while idx < len(tokens):
        if tokens[idx].tag is Tag.NOUN:
            start = idx
            while idx < len(tokens) and tokens[idx].tag is Tag.NOUN:
                idx += 1
            runs.append((start, idx, " ".join(t.lemma for t in tokens[start:idx])))
        else:
            idx += 1
    statements = []
    for position, token in enumerate(tokens):
        if token.tag is not Tag.VERB:
            continue
        preceding = [run for run in runs if run[1] <= position]
        following = [run for run in runs if run[0] > position]
        if preceding:
            phrase = preceding[-1][2]
        elif following:
            phrase = following[0][2]
        else:
            continue
        statements.append(Statement(phrase, token.lemma))
    return statements


def parse_pretagged(text: str, lexicon: frozenset[str] | None = None) -> ParsedCaption:
    """Parse pre-tagged caption text, one ``surface/TAG`` sentence per line."""
    if lexicon is None:
        lexicon = default_part_lexicon() | default_verb_lexicon()
    statements: list[Statement] = []
    n_sentences = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        sentence = []
        for chunk in line.split():
            match = _PRETAGGED_RE.match(chunk)
            if match is None:
                raise FormatError(f"line {line_no}: {chunk!r} is not of the form surface/TAG")
            surface = match.group(1).lower()
            if surface in _SENTENCE_TERMINALS:
                continue
            sentence.append(TaggedToken(surface, lemmatize(surface, lexicon), Tag(match.group(2))))
        if sentence:
            n_sentences += 1
            statements.extend(_pair_sentence(sentence))
    return ParsedCaption(tuple(statements), n_sentences)


def looks_pretagged(text: str) -> bool:
    chunks = text.split()
    return bool(chunks) and all(_PRETAGGED_RE.match(c) for c in chunks)


def parse_caption_text(
    text: str,
    part_lexicon: frozenset[str] | None = None,
    verb_lexicon: frozenset[str] | None = None,
    agent_stoplist: frozenset[str] | None = None,
) -> ParsedCaption:
    """Parse raw or pre-tagged caption text, auto-detecting the format."""
    if looks_pretagged(text):
        parts = default_part_lexicon() if part_lexicon is None else part_lexicon
        verbs = default_verb_lexicon() if verb_lexicon is None else verb_lexicon
        return parse_pretagged(text, parts | verbs)
    return parse_caption(tokenize_and_tag(text, part_lexicon, verb_lexicon, agent_stoplist))


def validate_caption(parsed: ParsedCaption) -> bool:
    """A caption is usable when at least one verb found a part to speak about."""
    return len(parsed.statements) >= 1


class EmbeddingStore:
    """In-memory word-vector table with case-insensitive lookup."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise EmptyVocabulary("no word vectors")
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise FormatError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        self._vectors = {w.lower(): np.asarray(v, dtype=float) for w, v in vectors.items()}

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._vectors

    def __getitem__(self, word: str) -> np.ndarray:
        return self._vectors[word.lower()]

    def __len__(self) -> int:
        return len(self._vectors)

    def words(self) -> list[str]:
        return sorted(self._vectors)


def load_embeddings(source: str | Path | IO[str] | Iterable[str]) -> EmbeddingStore:
    """Read whitespace-delimited word vectors, with an optional count header.

    Accepts the common text layout: an optional first line ``vocab_size dim``,
    then one ``word v1 ... vd`` line per entry.  Later duplicates win.
    """
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    elif hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = source
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    for line_no, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if line_no == 1 and len(fields) == 2 and all(_is_int(f) for f in fields):
            continue  # header
        word, *values = fields
        if not values:
            raise FormatError(f"line {line_no}: word {word!r} has no vector components")
        try:
            vector = np.array([float(v) for v in values])
        except ValueError as exc:
            raise FormatError(f"line {line_no}: non-numeric vector component") from exc
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise FormatError(
                f"line {line_no}: expected {dim} components, found {len(vector)}"
            )
        vectors[word.lower()] = vector
    if not vectors:
        raise EmptyVocabulary("embedding source contained no word vectors")
    return EmbeddingStore(vectors)


def fixture_embeddings() -> EmbeddingStore:
    """The small bundled embedding table covering the manual-dictionary verbs."""
    return load_embeddings(_bundled("fixture_embeddings.txt").splitlines())


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class SeedDictionary:
    prismatic: tuple[str, ...] = SEED_PRISMATIC
    rotational: tuple[str, ...] = SEED_ROTATIONAL


@dataclass(frozen=True, eq=False)
class CentroidPair:
    """Mean seed vectors anchoring the prismatic and rotational types."""

    prismatic: np.ndarray
    rotational: np.ndarray


def centroid(store: EmbeddingStore, seed_words: Iterable[str]) -> np.ndarray:
    """Mean vector of the in-vocabulary seed words."""
    vectors = []
    for word in seed_words:
        if word in store:
            vectors.append(store[word])
        else:
            LOGGER.warning("seed word %r missing from the embedding vocabulary", word)
    if not vectors:
        raise AllSeedsOutOfVocabulary("every seed word is out of vocabulary")
    return np.mean(vectors, axis=0)


def build_centroids(store: EmbeddingStore, seeds: SeedDictionary = SeedDictionary()) -> CentroidPair:
    return CentroidPair(centroid(store, seeds.prismatic), centroid(store, seeds.rotational))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        raise ValueError("cosine of a zero vector")
    return float(np.dot(a, b)) / denom


@dataclass(frozen=True)
class VerbClassification:
    verb: str
    label: VerbLabel
    prismatic: float
    rotational: float


def classify_hard(
    store: EmbeddingStore,
    centroids: CentroidPair,
    verb: str,
    margin: float = 0.1,
) -> VerbClassification:
    """Nearest-centroid type by cosine distance, subject to a winning margin.

    The winner must beat the other centroid's distance by more than ``margin``,
    otherwise the verb stays Ambiguous.  Out-of-vocabulary verbs are Unknown.
    Likelihoods are the hard pair: 1 for the winner, a small floor for the
    loser, 0.5/0.5 when no type wins.
    """
    if verb not in store:
        return VerbClassification(verb, VerbLabel.UNKNOWN, 0.5, 0.5)
    vector = store[verb]
    d_pri = 1.0 - _cosine(centroids.prismatic, vector)
    d_rot = 1.0 - _cosine(centroids.rotational, vector)
    if abs(d_pri - d_rot) <= margin:
        return VerbClassification(verb, VerbLabel.AMBIGUOUS, 0.5, 0.5)
    if d_pri < d_rot:
        return VerbClassification(verb, VerbLabel.PRISMATIC, 1.0, EPSILON_UNMATCHED)
    return VerbClassification(verb, VerbLabel.ROTATIONAL, EPSILON_UNMATCHED, 1.0)


def lingual_likelihood_hard(
    label: VerbLabel, model_type: ModelType, epsilon: float = EPSILON_UNMATCHED
) -> float:
    """Likelihood a hard-classified verb lends one candidate model type.

    Rigid candidates always receive the uninformative 0.5: motion verbs say
    nothing about the absence of motion.
    """
    if model_type is ModelType.RIGID:
        return 0.5
    if label is VerbLabel.AMBIGUOUS or label is VerbLabel.UNKNOWN:
        return 0.5
    matched = (label is VerbLabel.PRISMATIC) == (model_type is ModelType.PRISMATIC)
    return 1.0 if matched else epsilon


def lingual_likelihood_soft(
    store: EmbeddingStore,
    centroids: CentroidPair,
    verb: str,
    model_type: ModelType,
) -> float:
    """Shifted cosine similarity to the type centroid, normalized over both types."""
    if model_type is ModelType.RIGID:
        return 0.5
    if verb not in store:
        return 0.5
    vector = store[verb]
    sim_pri = 0.5 * (1.0 + _cosine(centroids.prismatic, vector))
    sim_rot = 0.5 * (1.0 + _cosine(centroids.rotational, vector))
    total = sim_pri + sim_rot
    if total == 0.0:
        return 0.5
    chosen = sim_pri if model_type is ModelType.PRISMATIC else sim_rot
    return float(chosen / total)


@dataclass(frozen=True)
class ManualDictionary:
    prismatic: frozenset[str] = field(default_factory=lambda: frozenset(PRISMATIC_VERBS))
    rotational: frozenset[str] = field(default_factory=lambda: frozenset(ROTATIONAL_VERBS))

    def shared(self) -> frozenset[str]:
        return self.prismatic & self.rotational


def classify_manual(dictionary: ManualDictionary, verb: str) -> VerbClassification:
    """Dictionary-membership grounding: both columns means Ambiguous."""
    verb = verb.lower()
    in_pri = verb in dictionary.prismatic
    in_rot = verb in dictionary.rotational
    if in_pri and in_rot:
        return VerbClassification(verb, VerbLabel.AMBIGUOUS, 0.5, 0.5)
    if in_pri:
        return VerbClassification(verb, VerbLabel.PRISMATIC, 1.0, EPSILON_UNMATCHED)
    if in_rot:
        return VerbClassification(verb, VerbLabel.ROTATIONAL, EPSILON_UNMATCHED, 1.0)
    return VerbClassification(verb, VerbLabel.UNKNOWN, 0.5, 0.5)
