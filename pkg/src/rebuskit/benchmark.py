"""Benchmark assembly: quality filters, difficulty ranking, partitions, stats.

The pipeline drops graphs that would render badly, keeps the top-k hardest
by rules-per-node plus non-next-to edges, removes icon-substitution-only
puzzles, and duplicates every icon puzzle into a text twin linked by an
overlap pair id.
"""
from __future__ import annotations

import hashlib
import json
import logging
import shutil
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import render as render_mod
from .distractors import QuestionOptions, visible_elements
from .graph import IconLookupError, RebusGraph
from .taxonomy import Taxonomy, default_taxonomy

log = logging.getLogger(__name__)

PARTITIONS = ("text", "icon")


class BenchmarkError(Exception):
    pass


def graph_id(graph: RebusGraph) -> str:
    """Stable content id for a puzzle graph."""
    payload = json.dumps(graph.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


@dataclass
class Puzzle:
    id: str
    image: str  # image filename relative to its partition's images directory
    question: str
    options: list[str]  # display order
    correct: str
    graph: RebusGraph
    partition: str
    overlap_pair_id: str | None = None

    def __post_init__(self):
        if self.options.count(self.correct) != 1:
            raise BenchmarkError(
                f"puzzle {self.id}: exactly one option must equal the correct answer"
            )
        if (self.partition == "icon") != self.graph.has_icon():
            raise BenchmarkError(f"puzzle {self.id}: partition does not match graph icons")

    @property
    def correct_letter(self) -> str:
        return "ABCD"[self.options.index(self.correct)]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "image": self.image,
            "question": self.question,
            "options": self.options,
            "correct": self.correct,
            "partition": self.partition,
            "overlap_pair_id": self.overlap_pair_id,
            "graph": self.graph.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Puzzle":
        return cls(
            id=data["id"],
            image=data["image"],
            question=data["question"],
            options=list(data["options"]),
            correct=data["correct"],
            graph=RebusGraph.from_dict(data["graph"]),
            partition=data["partition"],
            overlap_pair_id=data.get("overlap_pair_id"),
        )


# -- filtering ----------------------------------------------------------------


def _nextto_components(graph: RebusGraph) -> list[set[int]]:
    adjacency: dict[int, set[int]] = {n.ordinal: set() for n in graph.nodes}
    for e in graph.edges:
        if e.relation == "next-to":
            adjacency[e.from_ordinal].add(e.to_ordinal)
            adjacency[e.to_ordinal].add(e.from_ordinal)
    components = []
    unseen = {n.ordinal for n in graph.nodes}
    while unseen:
        start = min(unseen)
        seen = {start}
        stack = [start]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        components.append(seen)
        unseen -= seen
    return components


def passes_structure_heuristics(graph: RebusGraph) -> bool:
    """The readability heuristics over node counts and relations."""
    components = _nextto_components(graph)

    def component_of(ordinal: int) -> set[int]:
        for comp in components:
            if ordinal in comp:
                return comp
        raise BenchmarkError(f"ordinal {ordinal} missing from components")

    if any(len(c) > 3 for c in components):
        return False
    for edge in graph.edges:
        if edge.relation == "above":
            if len(component_of(edge.from_ordinal)) > 2 or len(component_of(edge.to_ordinal)) > 2:
                return False
        elif edge.relation == "outside":
            if len(component_of(edge.from_ordinal)) > 1 or len(component_of(edge.to_ordinal)) > 1:
                return False
    return True


def quality_filter(
    graphs: list[RebusGraph],
    layout_check: Callable[[RebusGraph], bool] | None = None,
) -> list[RebusGraph]:
    """Drop graphs violating the structure heuristics (and, when a check is
    supplied, graphs that fail to render or render with overlaps)."""
    kept = [g for g in graphs if passes_structure_heuristics(g)]
    if layout_check is not None:
        kept = [g for g in kept if layout_check(g)]
    return kept


def render_layout_check(config=None) -> Callable[[RebusGraph], bool]:
    """Layout check backed by the renderer: False on any render failure or
    overlapping/overflowing elements."""

    def check(graph: RebusGraph) -> bool:
        try:
            result = render_mod.render(graph, config)
        except render_mod.RenderError:
            return False
        return render_mod.validate_layout(result.elements)

    return check


def difficulty_score(graph: RebusGraph) -> float:
    return graph.rules_per_node() + graph.non_nextto_edge_count()


def rank_and_select(graphs: list[RebusGraph], k: int) -> list[RebusGraph]:
    """Top-k hardest graphs; ties break on the answer, then structure."""
    ranked = sorted(
        graphs,
        key=lambda g: (-difficulty_score(g), g.answer, repr(g.structural_key())),
    )
    return ranked[: min(k, len(ranked))]


def drop_icon_only(graphs: list[RebusGraph]) -> list[RebusGraph]:
    return [g for g in graphs if not g.is_icon_substitution_only()]


# -- partitions -----------------------------------------------------------------


@dataclass
class PartitionEntry:
    graph: RebusGraph
    partition: str
    pair_id: str | None
    origin: RebusGraph  # pre-duplication source graph


def _partition_entries(graphs: list[RebusGraph], taxonomy: Taxonomy) -> list[PartitionEntry]:
    entries: list[PartitionEntry] = []
    for graph in graphs:
        if not graph.has_icon():
            entries.append(PartitionEntry(graph, "text", None, graph))
            continue
        try:
            twin = graph.icons_to_text(taxonomy)
        except IconLookupError as exc:
            log.warning("excluding puzzle %r: %s", graph.answer, exc)
            continue
        pair_id = f"pair-{graph_id(graph)}"
        entries.append(PartitionEntry(graph, "icon", pair_id, graph))
        entries.append(PartitionEntry(twin, "text", pair_id, graph))
    return entries


def build_partitions(
    graphs: list[RebusGraph], taxonomy: Taxonomy | None = None
) -> tuple[list[tuple[RebusGraph, str | None]], list[tuple[RebusGraph, str | None]], list[str]]:
    """Split graphs into text/icon partitions, duplicating icon graphs.

    Every icon graph gets a text twin via icon conversion; the two are linked
    by a shared overlap pair id. Returns (text, icon, pair_ids) where the
    first two lists hold (graph, pair_id) tuples.
    """
    entries = _partition_entries(graphs, taxonomy or default_taxonomy())
    text = [(e.graph, e.pair_id) for e in entries if e.partition == "text"]
    icon = [(e.graph, e.pair_id) for e in entries if e.partition == "icon"]
    return text, icon, [e.pair_id for e in entries if e.partition == "icon" and e.pair_id]


# -- statistics -------------------------------------------------------------------


@dataclass
class BenchmarkStats:
    per_partition: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return self.per_partition


def _category_of(rule_id: str) -> str:
    if rule_id in ("next-to", "inside", "above", "outside"):
        return "relational"
    if rule_id in ("sound", "repetition-two", "repetition-four"):
        return "modifier"
    return "individual"


def _stats_for(puzzles: list[Puzzle], taxonomy: Taxonomy) -> dict:
    category_freq = Counter({"individual": 0, "relational": 0, "modifier": 0})
    rule_samples: Counter = Counter()
    node_counts: Counter = Counter()
    with_visible = 0
    total_words = 0
    for p in puzzles:
        total_words += len(p.correct.split())
        node_counts[len(p.graph.nodes)] += 1
        for rule_id in sorted(p.graph.rule_ids()):
            rule_samples[rule_id] += 1
        # category frequencies count rule instances, not puzzles
        for node in p.graph.nodes:
            for rule_id in node.attrs.rule_ids():
                category_freq[_category_of(rule_id)] += 1
        for _ in p.graph.edges:
            category_freq["relational"] += 1
        visible = set(visible_elements(p.graph, taxonomy))
        distractors = [o for o in p.options if o != p.correct]
        if any(visible & set(d.lower().split()) for d in distractors):
            with_visible += 1
    n = len(puzzles)
    return {
        "puzzles": n,
        "mean_answer_words": round(total_words / n, 4) if n else 0.0,
        "rule_category_freq": dict(category_freq),
        "node_count_freq": {str(k): v for k, v in sorted(node_counts.items())},
        "rule_sample_sizes": dict(sorted(rule_samples.items())),
        "distractor_visible_word_pct": round(100.0 * with_visible / n, 2) if n else 0.0,
    }


def compute_stats(puzzles: list[Puzzle], taxonomy: Taxonomy | None = None) -> BenchmarkStats:
    """Table-style statistics per partition and overall."""
    if not puzzles:
        raise BenchmarkError("cannot compute statistics over zero puzzles")
    taxonomy = taxonomy or default_taxonomy()
    stats = BenchmarkStats()
    for partition in PARTITIONS:
        subset = [p for p in puzzles if p.partition == partition]
        stats.per_partition[partition] = _stats_for(subset, taxonomy)
    stats.per_partition["all"] = _stats_for(puzzles, taxonomy)
    stats.per_partition["all"]["overlap_pairs"] = len(
        {p.overlap_pair_id for p in puzzles if p.overlap_pair_id}
    )
    return stats


# -- full assembly -------------------------------------------------------------------


def _question_text(options: list[str]) -> str:
    from .evaluation import PROMPT_TEMPLATES  # local import avoids a cycle

    return PROMPT_TEMPLATES[1].format(*options)


def build_benchmark(
    graphs_with_ids: list[tuple[str, RebusGraph]],
    images_dir: str | Path,
    questions: dict[str, QuestionOptions],
    top_k: int,
    out_dir: str | Path,
    render_config=None,
    taxonomy: Taxonomy | None = None,
) -> BenchmarkStats:
    """Run the full assembly and write the benchmark layout to out_dir.

    Expects images rendered beforehand into images_dir (``{id}.png`` plus
    ``{id}.layout.json``); text twins of icon puzzles are rendered here.
    Graphs whose image is missing or whose layout is invalid are dropped and
    recorded in flagged.json for optional human review.
    """
    taxonomy = taxonomy or default_taxonomy()
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    flagged: list[dict] = []
    id_of = {(g.answer, g.structural_key()): pid for pid, g in graphs_with_ids}

    def pid_for(graph: RebusGraph) -> str:
        return id_of[(graph.answer, graph.structural_key())]

    graphs = [g for _, g in graphs_with_ids]

    structural = quality_filter(graphs)
    flagged += [
        {"id": pid_for(g), "answer": g.answer, "reason": "structure heuristics"}
        for g in graphs
        if not passes_structure_heuristics(g)
    ]

    def prerendered_ok(graph: RebusGraph) -> bool:
        pid = pid_for(graph)
        layout_path = images_dir / f"{pid}.layout.json"
        if not layout_path.exists() or not (images_dir / f"{pid}.png").exists():
            return False
        return bool(json.loads(layout_path.read_text(encoding="utf-8")).get("valid"))

    renderable = []
    for g in structural:
        if prerendered_ok(g):
            renderable.append(g)
        else:
            flagged.append(
                {
                    "id": pid_for(g),
                    "answer": g.answer,
                    "reason": "render failed or layout invalid",
                }
            )

    selected = drop_icon_only(rank_and_select(renderable, top_k))
    entries = _partition_entries(selected, taxonomy)

    for partition in PARTITIONS:
        (out_dir / partition / "images").mkdir(parents=True, exist_ok=True)

    twin_check = render_layout_check(render_config)
    puzzles: list[Puzzle] = []
    broken_pairs: set[str] = set()

    for entry in entries:
        origin_id = pid_for(entry.origin)
        opts = questions.get(origin_id)
        if opts is None:
            flagged.append(
                {"id": origin_id, "answer": entry.graph.answer, "reason": "no question options"}
            )
            if entry.pair_id:
                broken_pairs.add(entry.pair_id)
            continue

        images_out = out_dir / entry.partition / "images"
        if entry.graph is entry.origin:
            pid = origin_id
            shutil.copy(images_dir / f"{pid}.png", images_out / f"{pid}.png")
        else:
            # text twin of an icon puzzle: render it now
            pid = graph_id(entry.graph)
            if not twin_check(entry.graph):
                flagged.append(
                    {"id": pid, "answer": entry.graph.answer, "reason": "twin render invalid"}
                )
                broken_pairs.add(entry.pair_id)
                continue
            render_mod.render_to_files(entry.graph, images_out, pid, render_config)

        puzzles.append(
            Puzzle(
                id=pid,
                image=f"{pid}.png",
                question=_question_text(opts.display_options()),
                options=opts.display_options(),
                correct=opts.correct,
                graph=entry.graph,
                partition=entry.partition,
                overlap_pair_id=entry.pair_id,
            )
        )

    pair_members: dict[str, list[str]] = {}
    for p in puzzles:
        if p.overlap_pair_id in broken_pairs:
            p.overlap_pair_id = None
        if p.overlap_pair_id:
            pair_members.setdefault(p.overlap_pair_id, []).append(p.id)
    for p in puzzles:  # unlink dangling pairs
        if p.overlap_pair_id and len(pair_members.get(p.overlap_pair_id, [])) != 2:
            p.overlap_pair_id = None
    pair_members = {k: v for k, v in pair_members.items() if len(v) == 2}

    if not puzzles:
        raise BenchmarkError("no puzzles survived filtering")

    stats = compute_stats(puzzles, taxonomy)
    for partition in PARTITIONS:
        subset = [p.to_dict() for p in puzzles if p.partition == partition]
        (out_dir / partition / "puzzles.json").write_text(
            json.dumps(subset, indent=2, ensure_ascii=False), encoding="utf-8"
        )
    (out_dir / "overlap_pairs.json").write_text(
        json.dumps(pair_members, indent=2), encoding="utf-8"
    )
    (out_dir / "stats.json").write_text(json.dumps(stats.to_dict(), indent=2), encoding="utf-8")
    (out_dir / "flagged.json").write_text(
        json.dumps(flagged, indent=2, ensure_ascii=False), encoding="utf-8"
    )
    return stats


def load_benchmark(benchmark_dir: str | Path) -> dict[str, list[Puzzle]]:
    """Read back a built benchmark: {"text": [...], "icon": [...]}."""
    benchmark_dir = Path(benchmark_dir)
    out = {}
    for partition in PARTITIONS:
        path = benchmark_dir / partition / "puzzles.json"
        records = json.loads(path.read_text(encoding="utf-8")) if path.exists() else []
        out[partition] = [Puzzle.from_dict(r) for r in records]
    return out
