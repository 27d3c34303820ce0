"""Run configuration: noise model, grounding mode, lexicon and embedding sources.

Values load from a TOML file and individual fields can be overridden by CLI
flags (flags win).  ``None`` paths fall back to the resources bundled with the
package, which keeps the tool runnable out of the box.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, fields, replace
from functools import lru_cache
from pathlib import Path

if sys.version_info >= (3, 11):  # pragma: no cover - version shim
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from . import language
from .kinematics import NoiseModel

LANGUAGE_MODES = ("off", "hard", "soft", "manual")

#: Factor on the effective relative-translation noise scale below which
#: observed sliding is treated as undetectable during graph inference.
DETECTABILITY_FACTOR = 2.0

#: Envelope for the log-likelihood gain a rotational fit can squeeze out of
#: pure observation noise on a rigidly attached part: base + slope * n_obs,
#: scaled by the lever-arm term in :func:`selection.rotation_gain_floor`.
#: Calibrated by Monte Carlo against rigid trajectories (the worst observed
#: normalized gain stays below ``1.1 * n + 28`` over 400 draws per n; the
#: slack keeps false positives out without approaching genuinely rotating
#: parts, whose gains sit several times higher even in ambiguous regimes).
ROTATION_GAIN_SLOPE = 1.3
ROTATION_GAIN_BASE = 35.0


@dataclass(frozen=True)
class Config:
    sigma_pos: float = 0.01
    sigma_rot: float = 0.0349
    margin: float = 0.1
    language_mode: str = "hard"
    prismatic_seeds: tuple[str, ...] = language.SEED_PRISMATIC
    rotational_seeds: tuple[str, ...] = language.SEED_ROTATIONAL
    embeddings: str | None = None
    part_lexicon: str | None = None
    verb_lexicon: str | None = None
    agent_stoplist: str | None = None
    assignment_cap: int = 3_628_800
    seed: int = 0

    def __post_init__(self) -> None:
        if self.language_mode not in LANGUAGE_MODES:
            raise ValueError(
                f"language_mode must be one of {LANGUAGE_MODES}, got {self.language_mode!r}"
            )
        if self.assignment_cap < 1:
            raise ValueError("assignment_cap must be positive")

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.sigma_pos, self.sigma_rot)

    def seed_dictionary(self) -> language.SeedDictionary:
        return language.SeedDictionary(tuple(self.prismatic_seeds), tuple(self.rotational_seeds))

    def embedding_store(self) -> language.EmbeddingStore:
        return _load_embeddings_cached(self.embeddings)

    def lexicons(self) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
        """(part nouns, motion verbs, agent stoplist)."""
        parts = (
            language.load_lexicon(self.part_lexicon)
            if self.part_lexicon
            else language.default_part_lexicon()
        )
        verbs = (
            language.load_lexicon(self.verb_lexicon)
            if self.verb_lexicon
            else language.default_verb_lexicon()
        )
        agents = (
            language.load_lexicon(self.agent_stoplist)
            if self.agent_stoplist
            else language.default_agent_stoplist()
        )
        return parts, verbs, agents

    def parse_caption_text(self, text: str) -> language.ParsedCaption:
        parts, verbs, agents = self.lexicons()
        return language.parse_caption_text(text, parts, verbs, agents)


@lru_cache(maxsize=8)
def _load_embeddings_cached(path: str | None) -> language.EmbeddingStore:
    if path is None:
        return language.fixture_embeddings()
    return language.load_embeddings(Path(path))


_FIELD_NAMES = {f.name for f in fields(Config)}
_SEQUENCE_FIELDS = {"prismatic_seeds", "rotational_seeds"}


def load_config(path: str | Path) -> Config:
    """Read a config file; unknown keys are rejected so typos fail loudly."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise language.FormatError(f"config {path}: {exc}") from exc
    return apply_overrides(Config(), raw, source=str(path))


def apply_overrides(base: Config, overrides: dict, source: str = "overrides") -> Config:
    cleaned = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_NAMES:
            raise language.FormatError(f"{source}: unknown config key {key!r}")
        if key in _SEQUENCE_FIELDS:
            if isinstance(value, str) or not all(isinstance(v, str) for v in value):
                raise language.FormatError(f"{source}: {key} must be a list of words")
            value = tuple(value)
        cleaned[key] = value
    try:
        return replace(base, **cleaned)
    except (TypeError, ValueError) as exc:
        raise language.FormatError(f"{source}: {exc}") from exc
