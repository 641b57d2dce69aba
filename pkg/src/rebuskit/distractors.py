"""Distractor sampling: pick the three most confusable wrong answers.

Candidates are scored against a puzzle's visible elements with a
lambda-weighted mix of Jaccard word overlap and embedding cosine similarity,
then near-duplicates (answers differing only by non-rule-triggering
stopwords) are swapped for the next best candidate.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import RebusGraph
from .taxonomy import Taxonomy, default_taxonomy


class DistractorError(Exception):
    pass


class PoolTooSmallError(DistractorError):
    pass


class EmbeddingProviderError(DistractorError):
    pass


class EmbeddingProvider:
    """Deterministic text -> unit vector mapping."""

    name: str = "base"
    dimension: int = 0

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


class TrigramProvider(EmbeddingProvider):
    """Character-trigram term-frequency vectors; no ML runtime needed.

    Trigrams are hashed into a fixed number of buckets with a stable digest,
    so vectors are reproducible across processes.
    """

    name = "trigram"

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        if text in self._cache:
            return self._cache[text]
        padded = f"  {text.lower().strip()} "
        vec = np.zeros(self.dimension, dtype=np.float64)
        for i in range(len(padded) - 2):
            tri = padded[i : i + 3]
            digest = hashlib.md5(tri.encode("utf-8")).digest()
            vec[int.from_bytes(digest[:4], "little") % self.dimension] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EmbeddingProviderError(f"cannot embed empty text {text!r}")
        vec /= norm
        self._cache[text] = vec
        return vec


class PrecomputedProvider(EmbeddingProvider):
    """Embeddings exported to disk: float32 little-endian rows plus a
    sidecar JSON index mapping answer strings to row numbers."""

    name = "precomputed"

    def __init__(self, vectors_path: str | Path):
        vectors_path = Path(vectors_path)
        index_path = Path(str(vectors_path) + ".index.json")
        index = json.loads(index_path.read_text(encoding="utf-8"))
        self.dimension = int(index["dimension"])
        self._rows = {key: int(row) for key, row in index["rows"].items()}
        raw = np.fromfile(vectors_path, dtype="<f4")
        if raw.size != len(self._rows) * self.dimension:
            raise EmbeddingProviderError(
                f"vector file holds {raw.size} floats, expected "
                f"{len(self._rows)} x {self.dimension}"
            )
        matrix = raw.reshape(len(self._rows), self.dimension).astype(np.float64)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise EmbeddingProviderError("zero vector in embedding file")
        self._matrix = matrix / norms

    def embed(self, text: str) -> np.ndarray:
        row = self._rows.get(text)
        if row is None:
            raise EmbeddingProviderError(f"no precomputed embedding for {text!r}")
        return self._matrix[row]

    @staticmethod
    def write(path: str | Path, vectors: dict[str, "np.ndarray"]) -> None:
        """Export vectors in the on-disk format this provider reads."""
        keys = list(vectors)
        dim = len(next(iter(vectors.values())))
        matrix = np.stack([np.asarray(vectors[k], dtype="<f4") for k in keys])
        matrix.tofile(path)
        index = {"dimension": dim, "rows": {k: i for i, k in enumerate(keys)}}
        Path(str(path) + ".index.json").write_text(json.dumps(index), encoding="utf-8")


@dataclass(frozen=True)
class SimilarityConfig:
    lam: float = 0.8
    provider: EmbeddingProvider = field(default_factory=TrigramProvider)
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DistractorError(f"lambda must be in [0, 1], got {self.lam}")


@dataclass
class QuestionOptions:
    """The four answer options for one puzzle.

    ``shuffled_order`` is the display permutation over [correct, d1, d2, d3]:
    display position p shows item shuffled_order[p].
    """

    correct: str
    distractors: list[str]
    shuffled_order: list[int]
    scores: list[float]
    warnings: list[str] = field(default_factory=list)

    def display_options(self) -> list[str]:
        items = [self.correct] + self.distractors
        return [items[i] for i in self.shuffled_order]

    def correct_letter(self) -> str:
        return "ABCD"[self.shuffled_order.index(0)]

    def to_dict(self) -> dict:
        return {
            "correct": self.correct,
            "distractors": self.distractors,
            "shuffled_order": self.shuffled_order,
            "scores": self.scores,
            "warnings": self.warnings,
            "options": self.display_options(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuestionOptions":
        return cls(
            correct=data["correct"],
            distractors=list(data["distractors"]),
            shuffled_order=list(data["shuffled_order"]),
            scores=list(data["scores"]),
            warnings=list(data.get("warnings", [])),
        )


def visible_elements(graph: RebusGraph, taxonomy: Taxonomy | None = None) -> list[str]:
    """The words a solver actually sees, post substitution, lowercased."""
    taxonomy = taxonomy or default_taxonomy()
    words = []
    for node in graph.nodes:
        if node.attrs.icon is not None:
            word = taxonomy.word_for(node.attrs.icon)
            words.append(word if word is not None else node.attrs.text.lower())
        else:
            words.append(node.attrs.text.lower())
    return words


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def combined_similarity(elements: list[str], candidate: str, cfg: SimilarityConfig) -> float:
    """lambda * word overlap + (1 - lambda) * cosine, cosine clamped to [0, 1]."""
    if not candidate:
        raise DistractorError("candidate must be non-empty")
    overlap = jaccard(set(elements), set(candidate.lower().split()))
    query = " ".join(elements)
    cosine = float(np.dot(cfg.provider.embed(query), cfg.provider.embed(candidate)))
    cosine = min(1.0, max(0.0, cosine))
    return cfg.lam * overlap + (1.0 - cfg.lam) * cosine


def _stopword_stripped(answer: str, taxonomy: Taxonomy) -> tuple[str, ...]:
    return tuple(w for w in answer.lower().split() if not taxonomy.is_ignored(w))


def _near_duplicates(a: str, b: str, taxonomy: Taxonomy) -> bool:
    """Equal once non-rule-triggering stopwords are removed.

    Deliberately no singularization: singular/plural pairs are kept, since
    plurality itself triggers the repetition rules.
    """
    return _stopword_stripped(a, taxonomy) == _stopword_stripped(b, taxonomy)


def near_duplicate_filter(
    distractors: list[str],
    pool_remainder: list[str],
    cfg: SimilarityConfig,
    taxonomy: Taxonomy | None = None,
) -> tuple[list[str], list[str]]:
    """Swap near-duplicate distractors for the next best pool candidates.

    ``pool_remainder`` must be ranked best-first. Returns the possibly
    updated distractors plus warning records for unresolvable duplicates.
    """
    taxonomy = taxonomy or default_taxonomy()
    result = list(distractors)
    warnings = []
    replacements = iter(pool_remainder)
    for i in range(len(result)):
        for j in range(i + 1, len(result)):
            while _near_duplicates(result[i], result[j], taxonomy):
                candidate = next(replacements, None)
                if candidate is None:
                    warnings.append(
                        f"pool exhausted; keeping near-duplicates {result[i]!r} / {result[j]!r}"
                    )
                    break
                if candidate in result:
                    continue
                if any(
                    _near_duplicates(candidate, kept, taxonomy)
                    for k, kept in enumerate(result)
                    if k != j
                ):
                    continue
                result[j] = candidate
    return result, warnings


def sample_distractors(
    graph: RebusGraph,
    candidate_pool: list[str],
    cfg: SimilarityConfig | None = None,
    taxonomy: Taxonomy | None = None,
) -> QuestionOptions:
    """Top-3 most similar pool answers, deduplicated and seed-shuffled."""
    cfg = cfg or SimilarityConfig()
    taxonomy = taxonomy or default_taxonomy()
    correct = graph.answer
    pool = [c for c in candidate_pool if c.lower() != correct.lower()]
    if len(pool) < 3:
        raise PoolTooSmallError(f"need at least 3 candidates, got {len(pool)}")

    elements = visible_elements(graph, taxonomy)
    scored = [(combined_similarity(elements, c, cfg), c) for c in pool]
    scored.sort(key=lambda sc: (-sc[0], sc[1]))
    ranked = [c for _, c in scored]
    by_candidate = {c: s for s, c in scored}

    top3 = ranked[:3]
    top3, warnings = near_duplicate_filter(top3, ranked[3:], cfg, taxonomy)
    scores = [by_candidate[c] for c in top3]

    rng = random.Random(f"{cfg.seed}|{correct}")
    order = list(range(4))
    rng.shuffle(order)
    return QuestionOptions(correct, top3, order, scores, warnings)
