"""Porter stemming used for candidate mining, matching, dedup, and scoring.

Implements the classic Porter algorithm (steps 1a through 5b) in the
canonical form maintained by its author, which differs from the 1980
paper at two well-known points in step 2 ("bli" -> "ble" instead of
"abli" -> "able", plus the added "logi" -> "log" rule).
"""

from __future__ import annotations

from functools import lru_cache

_VOWELS = frozenset("aeiou")


class _PorterMachine:
    """Single-word stemming state machine.

    Operates on a lowercase word held in ``b``; ``k`` is the index of the
    last live character and ``j`` marks the stem end set by ``_ends``.
    """

    def __init__(self, word: str) -> None:
        self.b = word
        self.k = len(word) - 1
        self.j = 0

    def _is_consonant(self, i: int) -> bool:
        ch = self.b[i]
        if ch in _VOWELS:
            return False
        if ch == "y":
            return True if i == 0 else not self._is_consonant(i - 1)
        return True

    def _measure(self) -> int:
        """Number of vowel-consonant sequences in b[0:j+1]."""
        n = 0
        i = 0
        while True:
            if i > self.j:
                return n
            if not self._is_consonant(i):
                break
            i += 1
        i += 1
        while True:
            while True:
                if i > self.j:
                    return n
                if self._is_consonant(i):
                    break
                i += 1
            i += 1
            n += 1
            while True:
                if i > self.j:
                    return n
                if not self._is_consonant(i):
                    break
                i += 1
            i += 1

    def _vowel_in_stem(self) -> bool:
        return any(not self._is_consonant(i) for i in range(self.j + 1))

    def _double_consonant(self, i: int) -> bool:
        if i < 1 or self.b[i] != self.b[i - 1]:
            return False
        return self._is_consonant(i)

    def _cvc(self, i: int) -> bool:
        """consonant-vowel-consonant ending at i, last not w, x or y."""
        if (
            i < 2
            or not self._is_consonant(i)
            or self._is_consonant(i - 1)
            or not self._is_consonant(i - 2)
        ):
            return False
        return self.b[i] not in "wxy"

    def _ends(self, suffix: str) -> bool:
        length = len(suffix)
        if length > self.k + 1:
            return False
        if self.b[self.k - length + 1 : self.k + 1] != suffix:
            return False
        self.j = self.k - length
        return True

    def _set_to(self, s: str) -> None:
        self.b = self.b[: self.j + 1] + s + self.b[self.j + 1 + len(s) :]
        self.k = self.j + len(s)

    def _replace_if_measure(self, s: str) -> None:
        if self._measure() > 0:
            self._set_to(s)

    def _step1ab(self) -> None:
        if self.b[self.k] == "s":
            if self._ends("sses"):
                self.k -= 2
            elif self._ends("ies"):
                self._set_to("i")
            elif self.b[self.k - 1] != "s":
                self.k -= 1
        if self._ends("eed"):
            if self._measure() > 0:
                self.k -= 1
        elif (self._ends("ed") or self._ends("ing")) and self._vowel_in_stem():
            self.k = self.j
            if self._ends("at"):
                self._set_to("ate")
            elif self._ends("bl"):
                self._set_to("ble")
            elif self._ends("iz"):
                self._set_to("ize")
            elif self._double_consonant(self.k):
                self.k -= 1
                if self.b[self.k] in "lsz":
                    self.k += 1
            elif self._measure() == 1 and self._cvc(self.k):
                self._set_to("e")

    def _step1c(self) -> None:
        if self._ends("y") and self._vowel_in_stem():
            self.b = self.b[: self.k] + "i" + self.b[self.k + 1 :]

    _STEP2 = {
        "a": (("ational", "ate"), ("tional", "tion")),
        "c": (("enci", "ence"), ("anci", "ance")),
        "e": (("izer", "ize"),),
        "l": (
            ("bli", "ble"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
        ),
        "o": (("ization", "ize"), ("ation", "ate"), ("ator", "ate")),
        "s": (
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
        ),
        "t": (("aliti", "al"), ("iviti", "ive"), ("biliti", "ble")),
        "g": (("logi", "log"),),
    }

    _STEP3 = {
        "e": (("icate", "ic"), ("ative", ""), ("alize", "al")),
        "i": (("iciti", "ic"),),
        "l": (("ical", "ic"), ("ful", "")),
        "s": (("ness", ""),),
    }

    def _apply_rule_table(self, table, dispatch_index: int) -> None:
        rules = table.get(self.b[self.k + dispatch_index])
        if not rules:
            return
        for suffix, replacement in rules:
            if self._ends(suffix):
                self._replace_if_measure(replacement)
                return

    _STEP4_SUFFIXES = (
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant",
        "ement", "ment", "ent", "ion", "ou", "ism", "ate", "iti",
        "ous", "ive", "ize",
    )

    def _step4(self) -> None:
        for suffix in self._STEP4_SUFFIXES:
            if self._ends(suffix):
                if suffix == "ion" and (self.j < 0 or self.b[self.j] not in "st"):
                    continue
                if self._measure() > 1:
                    self.k = self.j
                return

    def _step5(self) -> None:
        self.j = self.k
        if self.b[self.k] == "e":
            m = self._measure()
            if m > 1 or (m == 1 and not self._cvc(self.k - 1)):
                self.k -= 1
        if self.b[self.k] == "l" and self._double_consonant(self.k) and self._measure() > 1:
            self.k -= 1

    def run(self) -> str:
        if self.k <= 1:
            return self.b
        self._step1ab()
        self._step1c()
        self._apply_rule_table(self._STEP2, dispatch_index=-1)
        self._apply_rule_table(self._STEP3, dispatch_index=0)
        self._step4()
        self._step5()
        return self.b[: self.k + 1]


@lru_cache(maxsize=None)
def stem_word(word: str) -> str:
    """Stem a single token.

    Tokens containing anything but ASCII letters (numbers, punctuation,
    mixed strings) are returned unchanged. Input is lowercased first, so
    output is always lowercase for alphabetic tokens.
    """
    lowered = word.lower()
    if not lowered.isascii() or not lowered.isalpha():
        return word
    return _PorterMachine(lowered).run()


def stem_phrase(phrase) -> str:
    """Stem every token of a phrase and join with single spaces.

    Accepts either a pre-tokenized sequence of words or a raw string,
    which is split with the canonical tokenizer so that phrase-side and
    document-side stemming always agree.
    """
    if isinstance(phrase, str):
        from kpforge.corpus import tokenize_text

        tokens = tokenize_text(phrase)
    else:
        tokens = list(phrase)
    return " ".join(stem_word(token) for token in tokens)


def clear_cache() -> None:
    stem_word.cache_clear()
