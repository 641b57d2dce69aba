"""Rule taxonomy: trigger keywords, homophones, icons, and ignored words.

Everything here is loaded from plain data files (see ``rebuskit/data``) so the
corpora can be swapped without touching code. A loaded :class:`Taxonomy` is
immutable and safe to share across threads.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

RuleCategory = str  # "individual" | "relational" | "modifier"

INDIVIDUAL = "individual"
RELATIONAL = "relational"
MODIFIER = "modifier"

CATEGORIES = (INDIVIDUAL, RELATIONAL, MODIFIER)

# Canonical rule order; also the serialization order of keywords.tsv.
RULE_IDS = (
    "direction-up",
    "direction-down",
    "direction-reverse",
    "highlight-before",
    "highlight-middle",
    "highlight-after",
    "size-big",
    "size-small",
    "color",
    "cross",
    "next-to",
    "inside",
    "above",
    "outside",
    "sound",
    "repetition-two",
    "repetition-four",
)

# Words that trigger repetition rules phonetically or literally rather than
# through the keyword tables (the repetition keyword lists stay empty).
TWO_LIKE_WORDS = ("to", "too", "two")
FOUR_LIKE_WORDS = ("for", "four")


class TaxonomyError(Exception):
    """Raised when a data file is malformed or inconsistent."""


@dataclass(frozen=True)
class Rule:
    id: str
    category: RuleCategory
    keywords: tuple[str, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise TaxonomyError(f"unknown rule category: {self.category!r}")


@dataclass(frozen=True, order=True)
class RuleMatch:
    """A triggered rule plus the value it carries.

    The payload is the attribute value the rule sets on a node (or the edge
    relation for relational rules): color name, size/direction/highlight kind,
    repetition count, or the relation id.
    """

    rule_id: str
    payload: str = ""

    @property
    def repeat_count(self) -> int:
        if self.rule_id == "repetition-two":
            return 2
        if self.rule_id == "repetition-four":
            return 4
        raise ValueError(f"{self.rule_id} carries no repeat count")


def _rule_payload(rule_id: str, keyword: str) -> str:
    if rule_id == "color":
        return keyword
    if rule_id.startswith("size-") or rule_id.startswith("direction-") or rule_id.startswith("highlight-"):
        return rule_id.split("-", 1)[1]
    if rule_id == "cross":
        return "cross"
    # relational rules carry their relation id
    return rule_id


@dataclass(frozen=True)
class Taxonomy:
    """Immutable bundle of rules, keyword triggers, and word maps."""

    rules: tuple[Rule, ...]
    homophones: dict[str, str]
    icons: dict[str, str]
    icon_words: dict[str, str]
    ignored_words: tuple[str, ...]
    plural_exceptions: frozenset[str] = field(default_factory=frozenset)
    irregular_plurals: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise TaxonomyError("duplicate rule ids")
        for rule in self.rules:
            if rule.id in ("sound", "repetition-two", "repetition-four"):
                continue
            if not rule.keywords:
                raise TaxonomyError(f"rule {rule.id} has no keywords")

    # -- rule lookup ------------------------------------------------------

    @property
    def rules_by_id(self) -> dict[str, Rule]:
        return {r.id: r for r in self.rules}

    def find_all_rules(self, word: str, is_plural: bool = False) -> set[RuleMatch]:
        """Every rule the given lowercase token triggers.

        Keyword tables drive individual and relational rules; plurality and
        the two/four-like words trigger the repetition rules. Returns an
        empty set when nothing matches.
        """
        word = word.lower()
        matches: set[RuleMatch] = set()
        for rule in self.rules:
            if word and word in rule.keywords:
                matches.add(RuleMatch(rule.id, _rule_payload(rule.id, word)))
        if is_plural:
            matches.add(RuleMatch("repetition-two", "2"))
        if word in TWO_LIKE_WORDS:
            matches.add(RuleMatch("repetition-two", "2"))
        if word in FOUR_LIKE_WORDS:
            matches.add(RuleMatch("repetition-four", "4"))
        return matches

    def is_ignored(self, word: str) -> bool:
        return word.lower() in self.ignored_words

    # -- word maps --------------------------------------------------------

    def homophone_for(self, word: str) -> str | None:
        return self.homophones.get(word.lower())

    def icon_for(self, word: str) -> str | None:
        return self.icons.get(word.lower())

    def word_for(self, icon: str) -> str | None:
        return self.icon_words.get(icon)

    # -- plurality --------------------------------------------------------

    def is_plural(self, word: str) -> bool:
        """Suffix heuristic (trailing s, not ss) plus the exceptions file."""
        word = word.lower()
        if word in self.irregular_plurals:
            return True
        if word in self.plural_exceptions:
            return False
        return len(word) > 1 and word.endswith("s") and not word.endswith("ss")

    def singularize(self, word: str) -> str:
        word = word.lower()
        if word in self.irregular_plurals:
            return self.irregular_plurals[word]
        if self.is_plural(word):
            return word[:-1]
        return word

    # -- serialization ----------------------------------------------------

    def serialize_keywords(self) -> str:
        """Keyword tables in the exact keywords.tsv format."""
        lines = [f"{r.id}\t{r.category}\t{','.join(r.keywords)}" for r in self.rules]
        return "\n".join(lines) + "\n"


# -- loading ---------------------------------------------------------------


def _read_lines(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


def load_taxonomy(data_dir: str | Path) -> Taxonomy:
    """Load all taxonomy data files from a directory."""
    data_dir = Path(data_dir)

    rules = []
    for line in _read_lines(data_dir / "keywords.tsv"):
        parts = line.split("\t")
        if len(parts) == 2:  # empty keywords column
            parts.append("")
        if len(parts) != 3:
            raise TaxonomyError(f"bad keywords.tsv line: {line!r}")
        rule_id, category, kw = parts
        keywords = tuple(k for k in kw.split(",") if k)
        rules.append(Rule(rule_id, category, keywords))

    homophones = {}
    for line in _read_lines(data_dir / "homophones.tsv"):
        word, sub = line.split("\t")
        homophones[word.lower()] = sub

    icons: dict[str, str] = {}
    icon_words: dict[str, str] = {}
    for line in _read_lines(data_dir / "icons.tsv"):
        word, glyph = line.split("\t")
        word = word.lower()
        if word in icons or glyph in icon_words:
            raise TaxonomyError(f"icon map not bijective at {word!r}/{glyph!r}")
        icons[word] = glyph
        icon_words[glyph] = word

    ignored = tuple(w.lower() for w in _read_lines(data_dir / "ignored.txt"))

    exceptions = set()
    irregular = {}
    for line in _read_lines(data_dir / "plural_exceptions.txt"):
        if "\t" in line:
            plural, singular = line.split("\t")
            irregular[plural.lower()] = singular.lower()
        else:
            exceptions.add(line.lower())

    return Taxonomy(
        rules=tuple(rules),
        homophones=homophones,
        icons=icons,
        icon_words=icon_words,
        ignored_words=ignored,
        plural_exceptions=frozenset(exceptions),
        irregular_plurals=irregular,
    )


def bundled_data_dir() -> Path:
    return Path(resources.files("rebuskit") / "data")


@functools.lru_cache(maxsize=1)
def default_taxonomy() -> Taxonomy:
    """The taxonomy loaded from the bundled data files (cached)."""
    return load_taxonomy(bundled_data_dir())
