"""Tokenization and vocabulary.

Tokenization is rule-based: lowercase, split on whitespace, keep
punctuation marks as single-character tokens. When a vocabulary is
supplied, out-of-vocabulary words are decomposed by greedy longest-match
against the vocabulary with a single-character fallback, so slot values
like "9315831" break into known pieces instead of one unknown blob.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]  # (start, end) offsets into the source string

    def __len__(self) -> int:
        return len(self.tokens)


class Vocab:
    """Rank-ordered token list with specials at the front."""

    def __init__(self, tokens: Iterable[str]):
        self.tokens: list[str] = [PAD_TOKEN, UNK_TOKEN]
        seen = set(self.tokens)
        for t in tokens:
            if t not in seen:
                self.tokens.append(t)
                seen.add(t)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, self.index[UNK_TOKEN])

    def dump(self) -> str:
        return "\n".join(self.tokens) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Vocab":
        lines = [ln for ln in text.splitlines() if ln]
        if lines[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError("vocabulary file must start with <pad> and <unk>")
        return cls(lines[2:])


def _greedy_pieces(word: str, vocab: Vocab) -> list[tuple[str, int, int]]:
    """Longest-match decomposition; single characters as last resort."""
    pieces: list[tuple[str, int, int]] = []
    pos = 0
    while pos < len(word):
        match_len = 0
        for end in range(len(word), pos, -1):
            if word[pos:end] in vocab:
                match_len = end - pos
                break
        if match_len == 0:
            match_len = 1  # unknown single character, maps to <unk> at encoding time
        pieces.append((word[pos : pos + match_len], pos, pos + match_len))
        pos += match_len
    return pieces


def tokenize(text: str, vocab: Vocab | None = None) -> TokenSeq:
    """Lowercased word/punctuation tokens; OOV words decomposed when vocab given."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for m in _WORD_RE.finditer(text):
        word = m.group().lower()
        if vocab is None or word in vocab or len(word) == 1:
            tokens.append(word)
            spans.append((m.start(), m.end()))
        else:
            for piece, rel_start, rel_end in _greedy_pieces(word, vocab):
                tokens.append(piece)
                spans.append((m.start() + rel_start, m.start() + rel_end))
    return TokenSeq(tokens=tuple(tokens), spans=tuple(spans))


def build_vocab(texts: Iterable[str], max_size: int = 4000) -> Vocab:
    """Frequency-ranked vocabulary of at most max_size entries.

    Whole words ranked by descending frequency (lexicographic tie-break);
    any remaining room is filled with the corpus character inventory so the
    greedy decomposer has subword pieces to fall back on. The two special
    tokens are not counted against max_size.
    """
    counts: Counter[str] = Counter()
    chars: set[str] = set()
    for text in texts:
        for m in _WORD_RE.finditer(text):
            word = m.group().lower()
            counts[word] += 1
            chars.update(word)
    ranked = [w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
    entries = ranked[:max_size]
    taken = set(entries)
    for ch in sorted(chars):
        if len(entries) >= max_size:
            break
        if ch not in taken:
            entries.append(ch)
            taken.add(ch)
    return Vocab(entries)


def coverage(texts: Iterable[str], vocab: Vocab) -> float:
    """Fraction of word tokens found directly in the vocabulary."""
    total = 0
    hit = 0
    for text in texts:
        for m in _WORD_RE.finditer(text):
            total += 1
            if m.group().lower() in vocab:
                hit += 1
    return hit / total if total else 1.0
