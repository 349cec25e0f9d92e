import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signagent.datamodel import COMPONENT_KINDS, LABEL_SETS, DictionaryEntry
from signagent.errors import DuplicateGloss, UnknownComponentLabel, UnknownGloss
from signagent.knowledge import (
    LEXICAL_ITEM,
    PHONO_COMPONENT,
    Edge,
    KnowledgeGraph,
    Node,
    build_lexical_graph,
    canonical_phonology,
    gloss_ids,
    glosses_by_phonology,
    glosses_for_token,
    load_graph,
    query_linguistic_graph,
    save_graph,
)


def entry(gid, phon, keywords=None):
    return DictionaryEntry(gid, phon, np.ones(4), keywords=keywords)


FIVE = [
    entry("APPLE", {"handshape-base": "A", "movement": "twist", "location-major": "head"}),
    entry("BOOK", {"handshape-base": "B", "movement": "arc", "location-major": "neutral-space"}),
    entry("CAT", {"handshape-base": "F", "movement": "straight", "location-major": "head"}),
    entry("DOG", {"handshape-base": "B", "movement": "tap", "location-major": "torso"}, ["dog", "puppy"]),
    entry("EGG", {"handshape-base": "H", "movement": "arc", "location-major": "chest"}),
]


def test_one_entry_three_components():
    g = build_lexical_graph([FIVE[0]])
    assert len(g.nodes) == 4 and len(g.edges) == 3
    kinds = sorted(n.kind for n in g.nodes.values())
    assert kinds == [LEXICAL_ITEM] + [PHONO_COMPONENT] * 3


def test_shared_component_is_one_node():
    g = build_lexical_graph([FIVE[1], FIVE[3]])
    assert sorted(e.src for e in g.in_edges("handshape-base:B")) == ["lex:BOOK", "lex:DOG"]


def test_empty_phonology_entry():
    g = build_lexical_graph([entry("X", {})])
    assert len(g.nodes) == 1 and len(g.edges) == 0
    assert canonical_phonology(g, "X") == {}


def test_build_errors():
    with pytest.raises(DuplicateGloss):
        build_lexical_graph([FIVE[0], FIVE[0]])
    with pytest.raises(UnknownComponentLabel):
        build_lexical_graph([entry("X", {"handshape-base": "NOSUCH"})])


def test_canonical_phonology_lookup():
    g = build_lexical_graph(FIVE)
    assert canonical_phonology(g, "DOG") == FIVE[3].canonical_phonology
    with pytest.raises(UnknownGloss):
        canonical_phonology(g, "zzz")


def brute_force_rank(entries, constraints):
    allowed = {k: {v} if isinstance(v, str) else set(v) for k, v in constraints.items()}
    scored = []
    for e in entries:
        n = sum(1 for k, labels in allowed.items() if e.canonical_phonology.get(k) in labels)
        if n or not allowed:
            scored.append((e.gloss_id, n))
    return sorted(scored, key=lambda kv: (-kv[1], kv[0]))


def test_glosses_by_phonology_examples():
    g = build_lexical_graph(FIVE)
    ranked = glosses_by_phonology(g, FIVE[2].canonical_phonology)
    assert ranked[0] == ("CAT", 3)
    assert ranked == brute_force_rank(FIVE, FIVE[2].canonical_phonology)
    assert [gid for gid, _ in glosses_by_phonology(g, {})] == ["APPLE", "BOOK", "CAT", "DOG", "EGG"]
    assert glosses_by_phonology(g, {"handshape-base": "NOSUCH"}) == []
    # a set of acceptable labels counts once per kind
    assert glosses_by_phonology(g, {"movement": ["arc", "tap"]}) == [("BOOK", 1), ("DOG", 1), ("EGG", 1)]


def test_keyword_inverse_lookup():
    g = build_lexical_graph(FIVE)
    assert glosses_for_token(g, "Puppy") == ["DOG"]
    assert glosses_for_token(g, "apple") == ["APPLE"]
    assert glosses_for_token(g, "nothing") == []


phonologies = st.dictionaries(
    st.sampled_from(COMPONENT_KINDS), st.just(None), min_size=0, max_size=5
).flatmap(lambda d: st.fixed_dictionaries({k: st.sampled_from(sorted(LABEL_SETS[k])) for k in d}))


@settings(max_examples=60, deadline=None)
@given(st.lists(phonologies, min_size=1, max_size=8))
def test_round_trip_and_self_retrieval(phons):
    entries = [entry(f"G{i}", p) for i, p in enumerate(phons)]
    g = build_lexical_graph(entries)
    again = build_lexical_graph(entries)
    assert g.to_dict() == again.to_dict()
    assert gloss_ids(g) == sorted(e.gloss_id for e in entries)
    for e in entries:
        assert canonical_phonology(g, e.gloss_id) == e.canonical_phonology
        ranked = dict(glosses_by_phonology(g, e.canonical_phonology))
        if e.canonical_phonology:
            assert ranked[e.gloss_id] == len(e.canonical_phonology)
        assert glosses_by_phonology(g, e.canonical_phonology) == brute_force_rank(entries, e.canonical_phonology)


def small_linguistic_graph():
    nodes = [
        Node("concept:handedness", "concept", ("handedness", "dominant hand")),
        Node("concept:mirror", "concept", ("mirror production",)),
        Node("feature:left", "feature", ("left hand",)),
        Node("feature:right", "feature", ("right hand",)),
        Node("feature:twohanded", "feature", ("two-handed sign",)),
    ]
    edges = [
        Edge("concept:handedness", "feature:left", "related-to"),
        Edge("concept:handedness", "feature:right", "related-to"),
        Edge("concept:mirror", "concept:handedness", "related-to"),
        Edge("feature:right", "feature:twohanded", "related-to"),
    ]
    return KnowledgeGraph(nodes, edges)


def test_query_radius_zero_and_one():
    g = small_linguistic_graph()
    r0 = query_linguistic_graph(g, ["mirror production"], radius=0)
    assert r0.matched_nodes == [("concept:mirror", 1)] and r0.neighborhood == []
    r1 = query_linguistic_graph(g, ["handedness"], radius=1)
    assert r1.matched_nodes == [("concept:handedness", 1)]
    out = {e for e in r1.neighborhood if e.src == "concept:handedness"}
    assert out == {Edge("concept:handedness", "feature:left", "related-to"),
                   Edge("concept:handedness", "feature:right", "related-to")}
    # the in-edge from the mirror concept is also within one hop; two hops are not
    assert Edge("concept:mirror", "concept:handedness", "related-to") in r1.neighborhood
    assert Edge("feature:right", "feature:twohanded", "related-to") not in r1.neighborhood


def test_query_ranking_by_match_count():
    g = small_linguistic_graph()
    r = query_linguistic_graph(g, ["hand", "right"], radius=0)
    # exhaustive: "hand" hits handedness, left, right, twohanded; "right" hits only feature:right
    assert r.matched_nodes == [
        ("feature:right", 2),
        ("concept:handedness", 1),
        ("feature:left", 1),
        ("feature:twohanded", 1),
    ]
    assert r.provenance == {"query_terms": ["hand", "right"], "radius": 0}
    with pytest.raises(ValueError):
        query_linguistic_graph(g, ["x"], radius=-1)


def test_graph_file_round_trip(tmp_path):
    g = small_linguistic_graph()
    save_graph(g, tmp_path / "g.json")
    assert load_graph(tmp_path / "g.json").to_dict() == g.to_dict()
