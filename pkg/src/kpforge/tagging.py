"""POS tagging and the four-way tag classification driving candidate mining.

Tags follow the Penn Treebank inventory (plus the web-text extensions
ADD, AFX, GW, HYPH, NFP, XX). Pre-tagged input is passed through
verbatim; otherwise a deterministic closed-class lexicon plus suffix
rules provides a serviceable baseline for scientific abstracts.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import NamedTuple

from kpforge.errors import DataError

PENN_TAGS = frozenset(
    {
        "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD",
        "NN", "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB",
        "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN",
        "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
        # web-text / OntoNotes extensions
        "ADD", "AFX", "GW", "HYPH", "NFP", "XX",
        # punctuation tags
        ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "$", "#",
    }
)


class TagCategory(enum.Enum):
    INDEP = "indep"
    DEP = "dep"
    START_DEP = "start_dep"
    END_DEP = "end_dep"
    INVALID = "invalid"


class TaggedToken(NamedTuple):
    word: str
    tag: str


def _expand(patterns: frozenset[str]) -> frozenset[str]:
    """Expand trailing-asterisk patterns against the Penn inventory."""
    expanded: set[str] = set()
    for pattern in patterns:
        if pattern.endswith("*"):
            prefix = pattern[:-1]
            expanded.update(tag for tag in PENN_TAGS if tag.startswith(prefix))
        else:
            expanded.add(pattern)
    return frozenset(expanded)


@dataclass(frozen=True)
class TagSetTable:
    """The four tag sets governing where candidate phrases start, extend,
    and end. Patterns ending in ``*`` match any tag with that prefix."""

    indep: frozenset[str]
    dep: frozenset[str]
    start_dep: frozenset[str]
    end_dep: frozenset[str]

    def __post_init__(self) -> None:
        expansions = {
            "indep": _expand(self.indep),
            "dep": _expand(self.dep),
            "start_dep": _expand(self.start_dep),
            "end_dep": _expand(self.end_dep),
        }
        names = list(expansions)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                overlap = expansions[a] & expansions[b]
                if overlap:
                    raise ValueError(
                        f"tag sets {a} and {b} overlap after wildcard "
                        f"expansion: {sorted(overlap)}"
                    )

    @classmethod
    def default(cls) -> "TagSetTable":
        return cls(
            indep=frozenset({"CD", "FW", "GW", "NN*", "VB*", "JJ*", "RB*", "ADD"}),
            dep=frozenset({"CC", "POS", "HYPH", "IN"}),
            start_dep=frozenset({"RP"}),
            end_dep=frozenset({"DT", "AFX", "LS"}),
        )

    @classmethod
    def nouns_only(cls) -> "TagSetTable":
        """Variant restricting independent tags to nouns."""
        base = cls.default()
        return cls(
            indep=frozenset({"NN*"}),
            dep=base.dep,
            start_dep=base.start_dep,
            end_dep=base.end_dep,
        )

    def _matches(self, tag: str, patterns: frozenset[str]) -> bool:
        for pattern in patterns:
            if pattern.endswith("*"):
                if tag.startswith(pattern[:-1]):
                    return True
            elif tag == pattern:
                return True
        return False

    def classify(self, tag: str) -> TagCategory:
        if self._matches(tag, self.indep):
            return TagCategory.INDEP
        if self._matches(tag, self.dep):
            return TagCategory.DEP
        if self._matches(tag, self.start_dep):
            return TagCategory.START_DEP
        if self._matches(tag, self.end_dep):
            return TagCategory.END_DEP
        return TagCategory.INVALID


def classify_tag(tag: str, table: TagSetTable | None = None) -> TagCategory:
    """Classify a tag into exactly one mining category (INVALID if in none)."""
    return (table or TagSetTable.default()).classify(tag)


# Closed-class lexicon for the baseline tagger.
_LEXICON: dict[str, str] = {}


def _add(tag: str, words: str) -> None:
    for word in words.split():
        _LEXICON[word] = tag


_add("DT", "the a an this that these those each every either neither some any no all both another such")
_add(
    "IN",
    "of in on at by for with from into through during under over between within "
    "without against about toward towards upon across along among around behind "
    "below beneath beside besides beyond despite except inside near outside since "
    "until unless via per versus than as if because while whether although though "
    "after before",
)
_add("CC", "and or but nor plus minus")
_add("TO", "to")
_add("PRP", "it we they he she i you them him her us me himself herself itself themselves ourselves")
_add("PRP$", "its our their his your my mine yours ours theirs hers")
_add("MD", "can could may might must shall should will would")
_add("EX", "there")
_add("RP", "up off out down away back apart aside")
_add("WDT", "which")
_add("WP", "what who whom")
_add("WP$", "whose")
_add("WRB", "when where why how")
_add("UH", "yes oh well hey")
_add(
    "CD",
    "zero one two three four five six seven eight nine ten eleven twelve twenty "
    "thirty forty fifty hundred thousand million billion",
)
_add("VBZ", "is has does")
_add("VBP", "are have do am")
_add("VBD", "was were had did")
_add("VB", "be")
_add("VBN", "been done")
_add("VBG", "being having doing")
_add("RB", "not also very too only just more most less least rather quite then now here often")
_add("PDT", "half")
_add("JJ", "other same own several many few much new")

_NUMERAL_RE = re.compile(r"^[0-9][0-9.,\-/]*$")
_PUNCT_TAGS = {
    ".": ".",
    "!": ".",
    "?": ".",
    ",": ",",
    ";": ":",
    ":": ":",
    "-": "HYPH",
    "(": "-LRB-",
    ")": "-RRB-",
    "[": "-LRB-",
    "]": "-RRB-",
    "{": "-LRB-",
    "}": "-RRB-",
    "$": "$",
    "#": "#",
    "'": "POS",
    '"': "''",
    "`": "``",
}


def _tag_single(token: str) -> str:
    if not token:
        return "UNK"
    first = token[0]
    if not first.isalnum():
        # Maximal punctuation run: classify by its first character.
        return _PUNCT_TAGS.get(first, "SYM")
    if _NUMERAL_RE.match(token):
        return "CD"
    known = _LEXICON.get(token)
    if known is not None:
        return known
    if token.endswith("ly") and len(token) > 3:
        return "RB"
    if token.endswith("ing") and len(token) > 4:
        return "VBG"
    if token.endswith("ed") and len(token) > 3:
        return "VBD"
    if token.endswith("s") and len(token) > 3 and not token.endswith("ss"):
        return "NNS"
    return "NN"


def tag_tokens(tokens, pre_tags=None) -> list[TaggedToken]:
    """Tag tokens, passing through ``pre_tags`` verbatim when given."""
    tokens = list(tokens)
    if pre_tags is not None:
        pre_tags = list(pre_tags)
        if len(pre_tags) != len(tokens):
            raise DataError(
                f"pos_tags length {len(pre_tags)} does not match "
                f"token count {len(tokens)}"
            )
        return [TaggedToken(w, t) for w, t in zip(tokens, pre_tags)]
    return [TaggedToken(w, _tag_single(w)) for w in tokens]
