"""File-backed morphological dictionary standing in for an external analyzer.

Supplies per-word candidate analyses, per-feature candidate tag sets for the
tagger input, and a declarative feature-consistency checker. Entry order
follows file order; that order is the deterministic tie-breaker wherever
analyses are ranked downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import (
    FEATURE_NAMES,
    Analysis,
    FeatureSchema,
    N_COLUMNS,
    _analysis_from_columns,
    normalize_orthography,
)
from .errors import ParseError


@dataclass
class MorphDictionary:
    """Map from normalized surface form to its stored analyses, in file order."""

    entries: dict[str, list[Analysis]] = field(default_factory=dict)
    name: str = "dictionary"

    @property
    def entry_count(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def lookup(self, surface: str) -> list[Analysis]:
        return self.entries.get(surface, [])

    def add(self, surface: str, analysis: Analysis):
        self.entries.setdefault(surface, []).append(analysis)


def load_dictionary(path, folding: dict[str, str] | None = None,
                    name: str | None = None) -> MorphDictionary:
    """Read a dictionary TSV: surface plus the 16 analysis columns per line.

    Repeated surfaces accumulate analyses; duplicate identical lines are
    kept as written.
    """
    dictionary = MorphDictionary(name=name or str(path))
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != N_COLUMNS:
                raise ParseError(f"expected {N_COLUMNS} columns, found {len(cols)}",
                                 path=path, line=lineno)
            if not cols[0]:
                raise ParseError("empty surface", path=path, line=lineno)
            surface = normalize_orthography(cols[0], folding)
            dictionary.add(surface, _analysis_from_columns(cols[1:], path, lineno))
    return dictionary


@dataclass
class CandidateTagSets:
    """Per-feature candidate values for one word, sorted for determinism."""

    sets: dict[str, tuple[str, ...]]
    oov: bool = False

    def size(self, feature: str) -> int:
        return len(self.sets[feature])


def candidates(dictionary: MorphDictionary, surface: str, schema: FeatureSchema,
               oov_policy: str = "all-values") -> CandidateTagSets:
    """Union of tag values over a word's analyses.

    Unknown words follow the OOV policy: "all-values" yields each feature's
    full value set (the default; candidate sets are a soft signal, not a
    constraint), "closed" yields empty sets.
    """
    analyses = dictionary.lookup(surface) if dictionary is not None else []
    if not analyses:
        if oov_policy == "all-values":
            sets = {f: tuple(schema.values[f]) for f in schema.names}
        elif oov_policy == "closed":
            sets = {f: () for f in schema.names}
        else:
            raise ValueError(f"unknown OOV policy {oov_policy!r}")
        return CandidateTagSets(sets=sets, oov=True)
    sets = {}
    for f in schema.names:
        sets[f] = tuple(sorted({a.tags[f] for a in analyses}))
    return CandidateTagSets(sets=sets, oov=False)


@dataclass(frozen=True)
class ConsistencyRule:
    """If feature == value then required_feature must be in allowed values."""

    feature: str
    value: str
    required_feature: str
    allowed: tuple[str, ...]

    def describe(self) -> str:
        allowed = ", ".join(self.allowed)
        return f"if {self.feature}={self.value} then {self.required_feature} in {{{allowed}}}"

    def violates(self, analysis: Analysis) -> bool:
        return (analysis.tags[self.feature] == self.value
                and analysis.tags[self.required_feature] not in self.allowed)


DEFAULT_RULES = (
    ConsistencyRule("pos", "verb", "cas", ("na",)),
    ConsistencyRule("pos", "verb", "stt", ("na",)),
    ConsistencyRule("pos", "noun", "asp", ("na",)),
    ConsistencyRule("pos", "noun", "per", ("na",)),
    ConsistencyRule("pos", "noun", "mod", ("na",)),
    ConsistencyRule("pos", "noun", "vox", ("na",)),
)


def parse_rule(text: str, path=None, lineno=None) -> ConsistencyRule:
    """Parse one rule: `if pos=verb then cas in {na}`."""
    words = text.split()
    ok = (len(words) >= 5 and words[0] == "if" and words[2] == "then" and words[4] == "in")
    if not ok:
        raise ParseError(f"cannot parse rule {text!r}; expected "
                         "'if <feature>=<value> then <feature> in {v1, v2}'",
                         path=path, line=lineno)
    cond = words[1].split("=")
    if len(cond) != 2:
        raise ParseError(f"bad condition {words[1]!r}", path=path, line=lineno)
    body = text.split(" in ", 1)[1].strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ParseError("allowed values must be wrapped in {braces}", path=path, line=lineno)
    allowed = tuple(v.strip() for v in body[1:-1].split(",") if v.strip())
    if not allowed:
        raise ParseError("empty allowed-value set", path=path, line=lineno)
    for f in (cond[0], words[3]):
        if f not in FEATURE_NAMES:
            raise ParseError(f"unknown feature {f!r}", path=path, line=lineno)
    return ConsistencyRule(feature=cond[0], value=cond[1],
                           required_feature=words[3], allowed=allowed)


def load_rules(path) -> tuple[ConsistencyRule, ...]:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            rules.append(parse_rule(line, path=path, lineno=lineno))
    return tuple(rules)


def check_consistency(analysis: Analysis, rules=DEFAULT_RULES) -> list[str]:
    """Return descriptions of every rule the analysis violates."""
    return [rule.describe() for rule in rules if rule.violates(analysis)]
