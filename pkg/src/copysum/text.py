"""Shared text normalization: uncased, whitespace-collapsed."""

from __future__ import annotations

# Private-use char reserved as the tokenizer's end-of-word marker; stripped
# from input so no surface string can collide with a marked token.
WORD_END = ""


def normalize_text(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return " ".join(text.replace(WORD_END, " ").lower().split())


def split_words(text: str) -> list[str]:
    return normalize_text(text).split()
