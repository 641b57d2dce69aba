"""Attributed directed graphs representing rebus puzzles.

Nodes are the rendered elements (text or icons) with styling attributes;
edges carry the spatial relation between two elements. Graphs are immutable
values: every operation returns a new graph.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

SIZES = ("big", "small")
DIRECTIONS = ("up", "down", "reverse")
HIGHLIGHTS = ("before", "middle", "after")
RELATIONS = ("next-to", "inside", "above", "outside")
REPEATS = (1, 2, 4)


class GraphValidationError(Exception):
    """A graph violates a structural invariant."""


class IconLookupError(Exception):
    """An icon glyph has no word mapping."""


@dataclass(frozen=True)
class NodeAttributes:
    """Styling of one puzzle element.

    ``text`` is the uppercase element string; when ``icon`` is set the glyph
    is displayed instead of the text. At most one individual rule (color,
    size, direction, highlight, cross) may be set. ``sound`` maps the
    original word to its rendered phonetic substitute.
    """

    text: str = ""
    icon: str | None = None
    color: str | None = None
    size: str | None = None
    direction: str | None = None
    highlight: str | None = None
    cross: bool = False
    repeat: int = 1
    sound: tuple[tuple[str, str], ...] = ()

    def validate(self) -> None:
        individual = [
            self.color is not None,
            self.size is not None,
            self.direction is not None,
            self.highlight is not None,
            self.cross,
        ]
        if sum(individual) > 1:
            raise GraphValidationError(f"more than one individual rule on node {self.text!r}")
        if self.repeat not in REPEATS:
            raise GraphValidationError(f"repeat must be one of {REPEATS}, got {self.repeat}")
        if self.size is not None and self.size not in SIZES:
            raise GraphValidationError(f"bad size {self.size!r}")
        if self.direction is not None and self.direction not in DIRECTIONS:
            raise GraphValidationError(f"bad direction {self.direction!r}")
        if self.highlight is not None and self.highlight not in HIGHLIGHTS:
            raise GraphValidationError(f"bad highlight {self.highlight!r}")
        if self.icon is not None and self.direction is not None:
            raise GraphValidationError("direction rules do not apply to icon nodes")
        if not self.text and self.icon is None:
            raise GraphValidationError("node has neither text nor icon")

    def describe(self) -> str:
        parts = [f"icon: {self.icon}" if self.icon is not None else f"text: {self.text}"]
        if self.color is not None:
            parts.append(f"color: {self.color}")
        if self.size is not None:
            parts.append(f"size: {self.size}")
        if self.direction is not None:
            parts.append(f"direction: {self.direction}")
        if self.highlight is not None:
            parts.append(f"highlight: {self.highlight}")
        if self.cross:
            parts.append("cross: true")
        parts.append(f"repeat: {self.repeat}")
        for orig, sub in self.sound:
            parts.append(f"sound: ({orig}: {sub})")
        return "(" + ", ".join(parts) + ")"

    def rule_count(self) -> int:
        """Set non-default attributes plus modifier rules on this node."""
        n = sum(
            x is not None
            for x in (self.icon, self.color, self.size, self.direction, self.highlight)
        )
        if self.cross:
            n += 1
        if self.repeat > 1:
            n += 1
        if self.sound:
            n += 1
        return n

    def rule_ids(self) -> set[str]:
        ids = set()
        if self.color is not None:
            ids.add("color")
        if self.size is not None:
            ids.add(f"size-{self.size}")
        if self.direction is not None:
            ids.add(f"direction-{self.direction}")
        if self.highlight is not None:
            ids.add(f"highlight-{self.highlight}")
        if self.cross:
            ids.add("cross")
        if self.repeat == 2:
            ids.add("repetition-two")
        if self.repeat == 4:
            ids.add("repetition-four")
        if self.sound:
            ids.add("sound")
        return ids


@dataclass(frozen=True)
class RebusNode:
    ordinal: int  # 1-based
    attrs: NodeAttributes


@dataclass(frozen=True)
class RebusEdge:
    from_ordinal: int
    to_ordinal: int
    relation: str

    def validate(self, node_count: int) -> None:
        if self.relation not in RELATIONS:
            raise GraphValidationError(f"unknown relation {self.relation!r}")
        if self.from_ordinal == self.to_ordinal:
            raise GraphValidationError("self-loop edge")
        for ordinal in (self.from_ordinal, self.to_ordinal):
            if not 1 <= ordinal <= node_count:
                raise GraphValidationError(f"edge endpoint {ordinal} out of range")


@dataclass(frozen=True)
class RebusGraph:
    nodes: tuple[RebusNode, ...]
    edges: tuple[RebusEdge, ...] = ()
    answer: str = ""

    def validate(self) -> None:
        if not self.nodes:
            raise GraphValidationError("graph has no nodes")
        ordinals = [n.ordinal for n in self.nodes]
        if ordinals != list(range(1, len(self.nodes) + 1)):
            raise GraphValidationError(f"ordinals not contiguous: {ordinals}")
        for node in self.nodes:
            node.attrs.validate()
        for edge in self.edges:
            edge.validate(len(self.nodes))
        if sum(1 for e in self.edges if e.relation != "next-to") > 1:
            raise GraphValidationError("more than one non-next-to edge")
        if len(self.nodes) > 1 and not self._weakly_connected():
            raise GraphValidationError("graph is not weakly connected")

    def _weakly_connected(self) -> bool:
        adjacency: dict[int, set[int]] = {n.ordinal: set() for n in self.nodes}
        for e in self.edges:
            adjacency[e.from_ordinal].add(e.to_ordinal)
            adjacency[e.to_ordinal].add(e.from_ordinal)
        seen = {1}
        stack = [1]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.nodes)

    # -- description -------------------------------------------------------

    def describe(self, include_edges: bool = False) -> str:
        """Textual graph description, one line per node (and per edge)."""
        self.validate()
        lines = [f"Node {n.ordinal} attributes: {n.attrs.describe()}" for n in self.nodes]
        if include_edges:
            for k, e in enumerate(self.edges, start=1):
                lines.append(
                    f"Edge {k}: node {e.from_ordinal} to node {e.to_ordinal} "
                    f"(rule: {e.relation.upper()})"
                )
        return "\n".join(lines)

    # -- metrics -----------------------------------------------------------

    def rules_per_node(self) -> float:
        if not self.nodes:
            raise GraphValidationError("graph has no nodes")
        return sum(n.attrs.rule_count() for n in self.nodes) / len(self.nodes)

    def non_nextto_edge_count(self) -> int:
        return sum(1 for e in self.edges if e.relation != "next-to")

    def is_icon_substitution_only(self) -> bool:
        has_icon = any(n.attrs.icon is not None for n in self.nodes)
        other_rules = any(n.attrs.rule_ids() for n in self.nodes)
        # an icon with no styling contributes no rule ids
        return (
            has_icon
            and not other_rules
            and all(e.relation == "next-to" for e in self.edges)
        )

    def has_icon(self) -> bool:
        return any(n.attrs.icon is not None for n in self.nodes)

    def rule_ids(self) -> set[str]:
        """All taxonomy rule ids present in this graph."""
        ids: set[str] = set()
        for node in self.nodes:
            ids |= node.attrs.rule_ids()
        for edge in self.edges:
            ids.add(edge.relation)
        return ids

    # -- transforms ----------------------------------------------------------

    def icons_to_text(self, taxonomy) -> "RebusGraph":
        """Copy of the graph with every icon replaced by its uppercase word."""
        nodes = []
        for node in self.nodes:
            if node.attrs.icon is None:
                nodes.append(node)
                continue
            word = taxonomy.word_for(node.attrs.icon)
            if word is None:
                raise IconLookupError(f"no word mapping for icon {node.attrs.icon!r}")
            nodes.append(
                RebusNode(node.ordinal, replace(node.attrs, icon=None, text=word.upper()))
            )
        return RebusGraph(tuple(nodes), self.edges, self.answer)

    # -- identity ------------------------------------------------------------

    def structural_key(self) -> tuple:
        """Normalized identity used for duplicate removal (answer excluded)."""
        return (
            tuple((n.ordinal, n.attrs) for n in self.nodes),
            tuple((e.from_ordinal, e.to_ordinal, e.relation) for e in self.edges),
        )

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for node in self.nodes:
            a = node.attrs
            d: dict = {"ordinal": node.ordinal, "text": a.text}
            if a.icon is not None:
                d["icon"] = a.icon
            if a.color is not None:
                d["color"] = a.color
            if a.size is not None:
                d["size"] = a.size
            if a.direction is not None:
                d["direction"] = a.direction
            if a.highlight is not None:
                d["highlight"] = a.highlight
            if a.cross:
                d["cross"] = True
            d["repeat"] = a.repeat
            if a.sound:
                d["sound"] = {orig: sub for orig, sub in a.sound}
            nodes.append(d)
        edges = [
            {"from": e.from_ordinal, "to": e.to_ordinal, "relation": e.relation}
            for e in self.edges
        ]
        return {"answer": self.answer, "nodes": nodes, "edges": edges}

    @classmethod
    def from_dict(cls, data: dict) -> "RebusGraph":
        nodes = []
        for d in data["nodes"]:
            attrs = NodeAttributes(
                text=d.get("text", ""),
                icon=d.get("icon"),
                color=d.get("color"),
                size=d.get("size"),
                direction=d.get("direction"),
                highlight=d.get("highlight"),
                cross=d.get("cross", False),
                repeat=d.get("repeat", 1),
                sound=tuple(sorted(d.get("sound", {}).items())),
            )
            nodes.append(RebusNode(d["ordinal"], attrs))
        edges = tuple(
            RebusEdge(e["from"], e["to"], e["relation"]) for e in data.get("edges", [])
        )
        return cls(tuple(nodes), edges, data.get("answer", ""))


def path_graph(attrs_list: list[NodeAttributes], answer: str = "") -> RebusGraph:
    """Chain the given nodes left to right with next-to edges."""
    nodes = tuple(RebusNode(i + 1, a) for i, a in enumerate(attrs_list))
    edges = tuple(RebusEdge(i, i + 1, "next-to") for i in range(1, len(nodes)))
    return RebusGraph(nodes, edges, answer)


def save_graphs(graphs: list[RebusGraph], path: str | Path, ids: list[str] | None = None) -> None:
    records = []
    for i, g in enumerate(graphs):
        rec = g.to_dict()
        if ids is not None:
            rec["id"] = ids[i]
        records.append(rec)
    Path(path).write_text(json.dumps(records, ensure_ascii=False, indent=2), encoding="utf-8")


def load_graphs(path: str | Path) -> list[tuple[str | None, RebusGraph]]:
    """Read a graph corpus; returns (id, graph) pairs (id may be None)."""
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(rec.get("id"), RebusGraph.from_dict(rec)) for rec in records]
