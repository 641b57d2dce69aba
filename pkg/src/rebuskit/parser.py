"""Compound and phrase parsers that emit all candidate rebus graphs.

A compound (c1, c2) yields single-node graphs (one per rule triggered by
either constituent, applied to the other) plus the plain two-node variant.
A phrase is split at its first usable relational keyword; each side is parsed
pairwise left to right and the two path subgraphs are joined by the relational
edge. Every emitted node is additionally expanded with its homophone and icon
substitution variants, and duplicates are removed structurally.
"""
from __future__ import annotations

import itertools
from dataclasses import replace

from .graph import NodeAttributes, RebusEdge, RebusGraph, RebusNode, path_graph
from .taxonomy import RuleMatch, Taxonomy, default_taxonomy

# Relational rules that can split a phrase. next-to never splits: it is the
# default chaining relation.
SPLIT_RELATIONS = ("inside", "above", "outside")


class ParserError(Exception):
    pass


class EmptyPhraseError(ParserError):
    """The phrase contained only ignored words."""

    def __init__(self, phrase: str):
        super().__init__(f"phrase {phrase!r} is empty after preprocessing")
        self.phrase = phrase


Fragment = list[NodeAttributes]  # nodes chained next-to, left to right


def _substitution_variants(attrs: NodeAttributes, word: str, taxonomy: Taxonomy) -> list[NodeAttributes]:
    """The node itself plus its homophone and icon substitution variants."""
    out = [attrs]
    sub = taxonomy.homophone_for(word)
    if sub is not None:
        out.append(replace(attrs, text=sub.upper(), sound=((word, sub),)))
    glyph = taxonomy.icon_for(word)
    if glyph is not None and attrs.direction is None:
        out.append(replace(attrs, icon=glyph))
    return out


def _apply_match(word: str, match: RuleMatch, repeat: int) -> NodeAttributes | None:
    """Build a node for `word` with one rule match applied.

    Relational matches have no unary reading and return None.
    """
    rid = match.rule_id
    kwargs: dict = {}
    if rid == "color":
        kwargs["color"] = match.payload
    elif rid.startswith("size-"):
        kwargs["size"] = match.payload
    elif rid.startswith("direction-"):
        kwargs["direction"] = match.payload
    elif rid.startswith("highlight-"):
        kwargs["highlight"] = match.payload
    elif rid == "cross":
        kwargs["cross"] = True
    elif rid.startswith("repetition-"):
        repeat = max(repeat, match.repeat_count)
    else:
        return None
    return NodeAttributes(text=word.upper(), repeat=repeat, **kwargs)


def _rule_node_variants(
    word: str, match: RuleMatch, taxonomy: Taxonomy, compound_plural: bool
) -> list[NodeAttributes]:
    """Variants of `word` carrying `match`, with compound-level plurality."""
    if compound_plural:
        base = taxonomy.singularize(word)
        attrs = _apply_match(base, match, repeat=2)
        return _substitution_variants(attrs, base, taxonomy) if attrs else []
    out = []
    attrs = _apply_match(word, match, repeat=1)
    if attrs:
        out += _substitution_variants(attrs, word, taxonomy)
    # inside phrases each word's own plurality yields a repeat-2 reading
    if taxonomy.is_plural(word):
        singular = taxonomy.singularize(word)
        attrs = _apply_match(singular, match, repeat=2)
        if attrs:
            out += _substitution_variants(attrs, singular, taxonomy)
    return out


def _bare_word_variants(word: str, taxonomy: Taxonomy) -> list[NodeAttributes]:
    out = _substitution_variants(NodeAttributes(text=word.upper()), word, taxonomy)
    if taxonomy.is_plural(word):
        singular = taxonomy.singularize(word)
        out += _substitution_variants(
            NodeAttributes(text=singular.upper(), repeat=2), singular, taxonomy
        )
    return out


def _plural_tail_variants(word: str, taxonomy: Taxonomy) -> list[NodeAttributes]:
    singular = taxonomy.singularize(word)
    return _substitution_variants(
        NodeAttributes(text=singular.upper(), repeat=2), singular, taxonomy
    )


def remove_duplicate_graphs(graphs: list[RebusGraph]) -> list[RebusGraph]:
    """Structural-equality dedup preserving first-seen order."""
    seen = set()
    out = []
    for g in graphs:
        key = g.structural_key()
        if key not in seen:
            seen.add(key)
            out.append(g)
    return out


def _dedup_fragments(fragments: list[Fragment]) -> list[Fragment]:
    seen = set()
    out = []
    for frag in fragments:
        key = tuple(frag)
        if key not in seen:
            seen.add(key)
            out.append(frag)
    return out


def _compound_fragments(c1: str, c2: str, is_plural: bool, taxonomy: Taxonomy) -> list[Fragment]:
    """All fragments for a constituent pair, Listing-style.

    Single-node fragments apply each rule triggered by one word to the other
    word; the two-node fragment places both words next to each other.
    """
    fragments: list[Fragment] = []
    for match in sorted(taxonomy.find_all_rules(c1, is_plural)):
        fragments += [[a] for a in _rule_node_variants(c2, match, taxonomy, is_plural)]
    for match in sorted(taxonomy.find_all_rules(c2, is_plural)):
        fragments += [[a] for a in _rule_node_variants(c1, match, taxonomy, is_plural)]

    head_variants = _substitution_variants(NodeAttributes(text=c1.upper()), c1, taxonomy)
    if is_plural:
        tail_variants = _plural_tail_variants(c2, taxonomy)
    else:
        tail_variants = _substitution_variants(NodeAttributes(text=c2.upper()), c2, taxonomy)
    for head in head_variants:
        for tail in tail_variants:
            fragments.append([head, tail])
    return _dedup_fragments(fragments)


def _pair_fragments(w1: str, w2: str, taxonomy: Taxonomy) -> list[Fragment]:
    """Fragments for a word pair inside a phrase (per-word plurality)."""
    fragments: list[Fragment] = []
    for match in sorted(taxonomy.find_all_rules(w1)):
        fragments += [[a] for a in _rule_node_variants(w2, match, taxonomy, False)]
    for match in sorted(taxonomy.find_all_rules(w2)):
        fragments += [[a] for a in _rule_node_variants(w1, match, taxonomy, False)]
    for head in _bare_word_variants(w1, taxonomy):
        for tail in _bare_word_variants(w2, taxonomy):
            fragments.append([head, tail])
    return _dedup_fragments(fragments)


def parse_compound(
    c1: str,
    c2: str,
    is_plural: bool,
    taxonomy: Taxonomy | None = None,
    answer: str | None = None,
) -> list[RebusGraph]:
    """All candidate graphs for a compound split into (c1, c2).

    is_plural refers to the combined word; it singularizes the carrying
    node's text and sets its repetition attribute to 2.
    """
    taxonomy = taxonomy or default_taxonomy()
    c1, c2 = c1.strip().lower(), c2.strip().lower()
    if not c1 or not c2:
        raise ParserError("compound constituents must be non-empty")
    if answer is None:
        answer = f"{c1}{c2}"
    fragments = _compound_fragments(c1, c2, is_plural, taxonomy)
    return remove_duplicate_graphs([path_graph(f, answer) for f in fragments])


def _parse_substring(words: list[str], taxonomy: Taxonomy) -> list[Fragment]:
    """Pair words left to right; an odd trailing word forms its own node."""
    unit_alternatives: list[list[Fragment]] = []
    i = 0
    while i < len(words):
        if i + 1 < len(words):
            unit_alternatives.append(_pair_fragments(words[i], words[i + 1], taxonomy))
            i += 2
        else:
            unit_alternatives.append([[a] for a in _bare_word_variants(words[i], taxonomy)])
            i += 1
    combined = []
    for combo in itertools.product(*unit_alternatives):
        combined.append(list(itertools.chain.from_iterable(combo)))
    return _dedup_fragments(combined)


def _find_relational_split(words: list[str], taxonomy: Taxonomy) -> tuple[int, str] | None:
    """Index and relation of the first usable relational keyword.

    A keyword at either end has an empty side and cannot form an edge, so it
    is passed over and scanning continues.
    """
    for i, word in enumerate(words):
        matches = [
            m for m in sorted(taxonomy.find_all_rules(word)) if m.rule_id in SPLIT_RELATIONS
        ]
        if matches and 0 < i < len(words) - 1:
            return i, matches[0].rule_id
    return None


def _join_fragments(left: Fragment, right: Fragment, relation: str, answer: str) -> RebusGraph:
    nodes = tuple(RebusNode(i + 1, a) for i, a in enumerate(left + right))
    edges = [RebusEdge(i, i + 1, "next-to") for i in range(1, len(left))]
    edges.append(RebusEdge(len(left), len(left) + 1, relation))
    offset = len(left)
    edges += [
        RebusEdge(offset + i, offset + i + 1, "next-to") for i in range(1, len(right))
    ]
    return RebusGraph(nodes, tuple(edges), answer)


def parse_phrase(
    phrase: str,
    taxonomy: Taxonomy | None = None,
    compound_splits: dict[str, tuple[str, str, bool]] | None = None,
) -> list[RebusGraph]:
    """All candidate graphs for a space-separated phrase.

    Ignored words are removed first; the phrase is split at its first usable
    relational keyword and each side parsed pairwise; with no relational
    keyword the result is a single next-to path. A single word present in
    `compound_splits` is delegated to the compound parser.
    """
    taxonomy = taxonomy or default_taxonomy()
    if not phrase.strip():
        raise ParserError("phrase must be non-empty")
    raw_words = phrase.lower().split()

    if compound_splits and len(raw_words) == 1 and raw_words[0] in compound_splits:
        c1, c2, is_plural = compound_splits[raw_words[0]]
        return parse_compound(c1, c2, is_plural, taxonomy, answer=phrase)

    words = [w for w in raw_words if not taxonomy.is_ignored(w)]
    if not words:
        raise EmptyPhraseError(phrase)

    split = _find_relational_split(words, taxonomy)
    if split is None:
        fragments = _parse_substring(words, taxonomy)
        graphs = [path_graph(f, phrase) for f in fragments]
    else:
        index, relation = split
        graphs = []
        for left in _parse_substring(words[:index], taxonomy):
            for right in _parse_substring(words[index + 1 :], taxonomy):
                graphs.append(_join_fragments(left, right, relation, phrase))
    return remove_duplicate_graphs(graphs)


def get_all_combinations(alternative_lists: list[list[RebusGraph]]) -> list[RebusGraph]:
    """Cartesian product of per-unit graph alternatives, chained next-to."""
    for alts in alternative_lists:
        if not alts:
            raise ParserError("every alternative list must be non-empty")
    out = []
    for combo in itertools.product(*alternative_lists):
        attrs = [n.attrs for g in combo for n in g.nodes]
        non_nextto = [e for g in combo for e in g.edges if e.relation != "next-to"]
        if non_nextto:
            # keep the (single) relational edge; reindex against concatenation
            merged_nodes = tuple(RebusNode(i + 1, a) for i, a in enumerate(attrs))
            edges = []
            offset = 0
            for g in combo:
                for e in g.edges:
                    edges.append(
                        RebusEdge(e.from_ordinal + offset, e.to_ordinal + offset, e.relation)
                    )
                if offset:
                    edges.append(RebusEdge(offset, offset + 1, "next-to"))
                offset += len(g.nodes)
            answer = " ".join(g.answer for g in combo if g.answer)
            out.append(RebusGraph(merged_nodes, tuple(sorted(edges, key=lambda e: (e.from_ordinal, e.to_ordinal))), answer))
        else:
            answer = " ".join(g.answer for g in combo if g.answer)
            out.append(path_graph(attrs, answer))
    return remove_duplicate_graphs(out)
