"""Read-only linguistic resources bundled for the tools and workflows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .basetools.glosser import DictionaryIndex
from .basetools.lemma import load_lemma_table, load_stopwords
from .basetools.prototypes import PrototypeBank, load_prototype_bank
from .datamodel import DictionaryEntry, load_dictionary
from .knowledge import KnowledgeGraph, build_lexical_graph, load_graph

FUNCTION_WORDS = frozenset(
    "a an and at but by for from he her him his i if in is it its me my no not of on or our she so "
    "that the their them they this to us was we what when where which who why will with you your".split()
)


@dataclass
class Lexicon:
    """Dictionary, lexical graph, retrieval index and classifier banks."""

    entries: list[DictionaryEntry]
    bank: PrototypeBank | None = None
    lemma_table: dict[str, str] = field(default_factory=dict)
    stopwords: set[str] = field(default_factory=set)
    linguistic_graph: KnowledgeGraph | None = None
    function_words: frozenset[str] = FUNCTION_WORDS

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: e.gloss_id)
        self.graph = build_lexical_graph(self.entries)
        self.index = DictionaryIndex(self.entries)
        self.by_id = {e.gloss_id: e for e in self.entries}
        top = max(e.frequency for e in self.entries)
        self.frequency_prior = {e.gloss_id: (e.frequency / top if top > 0 else 0.0) for e in self.entries}

    @property
    def vocabulary(self) -> set[str]:
        return {k for e in self.entries for k in e.keywords}

    def keywords(self, gloss_id: str) -> list[str]:
        return self.by_id[gloss_id].keywords

    @classmethod
    def load(
        cls,
        dictionary,
        prototypes=None,
        lemmas=None,
        stopwords=None,
        linguistic_graph=None,
        function_words: Iterable[str] | None = None,
    ) -> "Lexicon":
        return cls(
            entries=load_dictionary(dictionary),
            bank=load_prototype_bank(prototypes) if prototypes else None,
            lemma_table=load_lemma_table(lemmas) if lemmas else {},
            stopwords=load_stopwords(stopwords) if stopwords else set(),
            linguistic_graph=load_graph(linguistic_graph) if linguistic_graph else None,
            function_words=frozenset(function_words) if function_words is not None else FUNCTION_WORDS,
        )
