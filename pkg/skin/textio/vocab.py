"""
SkIn - Vocabulary
Lowercase word/punctuation tokenizer and a dense token->id map.
"""

import re
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from ..errors import VocabError

PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3

_WORD_PATTERN = re.compile(r"\w+|[^\w\s]")


def split_words(text: str) -> List[str]:
    """Lowercase and split into word runs and single punctuation marks."""
    return _WORD_PATTERN.findall(text.lower())


class Vocab:
    """
    Token vocabulary with the four reserved ids at the front.

    Ids are dense in [0, len(vocab)); every non-reserved token maps to
    exactly one id.
    """

    def __init__(self, tokens: Optional[Iterable[str]] = None):
        self._id_to_token: List[str] = list(RESERVED_TOKENS)
        self._token_to_id: Dict[str, int] = {t: i for i, t in enumerate(RESERVED_TOKENS)}
        for token in tokens or []:
            if token in self._token_to_id:
                raise VocabError(f"duplicate vocabulary entry: {token!r}")
            self._token_to_id[token] = len(self._id_to_token)
            self._id_to_token.append(token)

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def id(self, token: str) -> int:
        return self._token_to_id.get(token, UNK_ID)

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._id_to_token):
            raise VocabError(f"token id {token_id} outside vocabulary of size {len(self)}")
        return self._id_to_token[token_id]

    def tokens(self) -> List[str]:
        return list(self._id_to_token)

    @classmethod
    def build(
        cls,
        texts: Iterable[str],
        min_count: int = 1,
        max_size: Optional[int] = None,
    ) -> "Vocab":
        """
        Build a vocabulary ranked by frequency (ties alphabetical).

        Args:
            texts: Raw documents.
            min_count: Drop words seen fewer times than this.
            max_size: Optional cap on the total size, reserved ids included.
        """
        counts: Counter = Counter()
        for text in texts:
            counts.update(split_words(text))
        ranked = sorted(
            (w for w, c in counts.items() if c >= min_count and w not in RESERVED_TOKENS),
            key=lambda w: (-counts[w], w),
        )
        if max_size is not None:
            ranked = ranked[: max(0, max_size - len(RESERVED_TOKENS))]
        return cls(ranked)

    def save(self, path: Path) -> None:
        """One token per line; the line number is the id."""
        with open(path, "w", encoding="utf-8") as f:
            for token in self._id_to_token:
                f.write(token + "\n")

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Vocabulary file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            lines = [line.rstrip("\n") for line in f]
        if tuple(lines[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise VocabError(f"{path}: vocabulary must start with {', '.join(RESERVED_TOKENS)}")
        return cls(lines[len(RESERVED_TOKENS):])


def tokenize(text: str, vocab: Vocab) -> List[int]:
    """Map text to ids; unknown words become [UNK]."""
    return [vocab.id(word) for word in split_words(text)]
