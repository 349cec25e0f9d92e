"""Rule-based spoken-text to pseudo-gloss token normalisation."""

from __future__ import annotations

import string
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import ParseError

_STRIP = str.maketrans("", "", string.punctuation)


def _resolve(word: str, table: Mapping[str, str]) -> str:
    # follow chains (went -> go) to a fixed point; a cycle maps to its smallest member
    path = [word]
    while word in table:
        word = table[word]
        if word in path:
            return min(path[path.index(word) :])
        path.append(word)
    return word


def sign_lemma(
    sentence: str,
    lemma_table: Mapping[str, str] | None = None,
    stopwords: Iterable[str] = (),
    vocabulary: Iterable[str] | None = None,
) -> list[str]:
    """Normalise ``sentence`` into its token multiset, in sentence order.

    Lowercase, strip punctuation, split on whitespace, drop stopwords, map through
    the lemma table, drop lemmas that are stopwords, and optionally keep only
    vocabulary items.
    """
    table = {k.lower(): v.lower() for k, v in (lemma_table or {}).items()}
    stop = {w.lower() for w in stopwords}
    vocab = None if vocabulary is None else {w.lower() for w in vocabulary}
    out = []
    for word in (sentence or "").lower().translate(_STRIP).split():
        if word in stop:
            continue
        lemma = _resolve(word, table)
        if lemma in stop or (vocab is not None and lemma not in vocab):
            continue
        out.append(lemma)
    return out


def load_lemma_table(path) -> dict[str, str]:
    """Two-column TSV ``word<TAB>lemma``; blank lines and ``#`` comments skipped."""
    table = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError("expected two tab-separated columns", line=lineno)
        table[parts[0].strip().lower()] = parts[1].strip().lower()
    return table


def load_stopwords(path) -> set[str]:
    return {
        line.strip().lower()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    }
