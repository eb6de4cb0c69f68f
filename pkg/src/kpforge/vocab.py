"""Token vocabulary with the reserved control tokens."""

from __future__ import annotations

from kpforge.corpus import tokenize_text
from kpforge.errors import DataError

PAD, UNK, BOS, EOS, SEP = "<pad>", "<unk>", "<bos>", "<eos>", "<sep>"
RESERVED = (PAD, UNK, BOS, EOS, SEP)


class Vocabulary:
    """Immutable token-to-id mapping; ids 0..4 are reserved."""

    def __init__(self, tokens) -> None:
        tokens = list(tokens)
        if list(tokens[: len(RESERVED)]) != list(RESERVED):
            tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.tokens: tuple[str, ...] = tuple(tokens)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")
        self.pad_id = self.index[PAD]
        self.unk_id = self.index[UNK]
        self.bos_id = self.index[BOS]
        self.eos_id = self.index[EOS]
        self.sep_id = self.index[SEP]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, tokens, strict: bool = False) -> list[int]:
        ids = []
        for token in tokens:
            if token in self.index:
                ids.append(self.index[token])
            elif strict:
                raise DataError(f"token {token!r} is not in the vocabulary")
            else:
                ids.append(self.unk_id)
        return ids

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def from_documents(cls, documents) -> "Vocabulary":
        """Collect document and gold-keyphrase tokens, sorted for
        reproducibility."""
        seen: set[str] = set()
        for doc in documents:
            seen.update(tokenize_text(doc.text))
            for phrase in doc.keyphrases:
                seen.update(tokenize_text(phrase))
        return cls(list(RESERVED) + sorted(seen))
