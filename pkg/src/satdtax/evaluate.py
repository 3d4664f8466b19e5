"""Scoring generated taxonomies against a human reference.

* name alignment: ``top_sim(H_i)``, the best cosine similarity between the
  embedding of a human category name and any generated category name;
* assignment alignment: best-match precision / recall / F1 per human
  category, read off the human x generated contingency matrix;
* granularity: ``|M| - |H|`` category-count difference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import HumanTaxonomyRef
from .taxonomize import Taxonomy

MINILM = "sentence-transformers/all-MiniLM-L6-v2"


class EvaluationError(ValueError):
    pass


class Embedder(Protocol):
    def embed(self, texts: list[str]) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic stand-in embedder: text -> seeded Gaussian unit vector.

    Identical strings embed identically; anything else is essentially random.
    Suitable for tests and offline runs, not for judging semantic similarity.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim

    def _one(self, text: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
        v = np.random.default_rng(seed).standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed(self, texts: list[str]) -> np.ndarray:
        return np.array([self._one(t) for t in texts]).reshape(len(texts), self.dim)


class SentenceTransformerEmbedder:
    """Adapter over ``sentence_transformers`` (install the ``embeddings`` extra)."""

    def __init__(self, model_name: str = MINILM, device: str | None = None):
        from sentence_transformers import SentenceTransformer

        self.model = SentenceTransformer(model_name, device=device)

    def embed(self, texts: list[str]) -> np.ndarray:
        return np.asarray(self.model.encode(list(texts), convert_to_numpy=True), dtype=float)


def get_embedder(name: str) -> Embedder:
    if name == "hash":
        return HashEmbedder()
    if name in ("minilm", MINILM):
        return SentenceTransformerEmbedder(MINILM)
    return SentenceTransformerEmbedder(name)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise EvaluationError("embedding has non-finite components")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise EvaluationError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class SimilarityMatrix:
    values: np.ndarray
    rows: list[str]
    cols: list[str]


def similarity_matrix(human_names, generated_names, embedder: Embedder) -> SimilarityMatrix:
    rows, cols = list(human_names), list(generated_names)
    eh, em = embedder.embed(rows), embedder.embed(cols)
    values = np.array([[cosine(h, m) for m in em] for h in eh]).reshape(len(rows), len(cols))
    return SimilarityMatrix(values, rows, cols)


def top_sim(human_names, generated_names, embedder: Embedder) -> dict[str, float]:
    human_names, generated_names = list(human_names), list(generated_names)
    if not generated_names:
        raise EvaluationError("no generated category names to compare against")
    unique = list(dict.fromkeys(generated_names))
    gen_vecs = embedder.embed(unique)
    out = {}
    for name, h in zip(human_names, embedder.embed(human_names)):
        out[name] = max(cosine(h, m) for m in gen_vecs)
    return out


@dataclass
class ContingencyMatrix:
    """``counts[i, j]`` = comments put in human category ``rows[i]`` and generated ``cols[j]``."""

    counts: np.ndarray
    rows: list[str]
    cols: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.rows), len(self.cols)):
            raise EvaluationError(f"counts shape {self.counts.shape} does not match labels")
        if (self.counts < 0).any():
            raise EvaluationError("counts must be non-negative")

    @classmethod
    def from_counts(cls, counts, rows=None, cols=None) -> ContingencyMatrix:
        counts = np.asarray(counts, dtype=np.int64)
        rows = rows or [f"H{i + 1}" for i in range(counts.shape[0])]
        cols = cols or [f"M{j + 1}" for j in range(counts.shape[1])]
        return cls(counts, list(rows), list(cols))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(human: HumanTaxonomyRef, generated: Taxonomy, level: str) -> ContingencyMatrix:
    h = human.labels(level)
    g = generated.labels(level)
    only_h = [i for i in h if i not in g]
    only_g = [i for i in g if i not in h]
    if only_h or only_g:
        raise EvaluationError(
            f"{level}: ids assigned by one side only (reference-only {only_h[:5]}, generated-only {only_g[:5]})"
        )
    used = set(h.values())
    rows = [n for n in human.names(level) if n in used]
    cols = generated.category_names(level)
    ri = {n: i for i, n in enumerate(rows)}
    ci = {n: j for j, n in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for cid, hname in h.items():
        if g[cid] not in ci:
            raise EvaluationError(f"comment {cid!r}: generated label {g[cid]!r} missing from the tree")
        counts[ri[hname], ci[g[cid]]] += 1
    return ContingencyMatrix(counts, rows, cols)


def f1_score(p: Fraction, r: Fraction) -> Fraction:
    return Fraction(0) if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class CategoryScore:
    h_name: str
    best_match: str
    precision: Fraction
    recall: Fraction
    f1: Fraction
    top_sim: float | None = None


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else None


@dataclass
class MetricReport:
    level: str
    per_category: list[CategoryScore] = field(default_factory=list)
    granularity: float | None = None
    dataset: str = ""
    run_id: str | None = None
    n_runs: int = 1
    means: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        if not self.means:
            self.means = self._compute_means()

    def _compute_means(self) -> dict[str, float | None]:
        cats = self.per_category
        sims = [c.top_sim for c in cats if c.top_sim is not None]
        out = {}
        for key in ("precision", "recall", "f1"):
            m = _mean(getattr(c, key) for c in cats)
            out[key] = None if m is None else float(m)
        out["top_sim"] = float(_mean(sims)) if sims and len(sims) == len(cats) else None
        return out

    def refresh_means(self) -> None:
        self.means = self._compute_means()

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "level": self.level,
            "run_id": self.run_id,
            "n_runs": self.n_runs,
            "per_category": [
                {
                    "h_name": c.h_name,
                    "best_match": c.best_match,
                    "precision": float(c.precision),
                    "recall": float(c.recall),
                    "f1": float(c.f1),
                    "top_sim": c.top_sim,
                }
                for c in self.per_category
            ],
            "means": dict(self.means),
            "granularity": self.granularity,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> MetricReport:
        cats = [
            CategoryScore(
                c["h_name"], c["best_match"],
                Fraction(c["precision"]), Fraction(c["recall"]), Fraction(c["f1"]), c.get("top_sim"),
            )
            for c in doc.get("per_category", [])
        ]
        return cls(doc["level"], cats, doc.get("granularity"), doc.get("dataset", ""),
                   doc.get("run_id"), doc.get("n_runs", 1), dict(doc.get("means") or {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> MetricReport:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def best_match_metrics(C: ContingencyMatrix, level: str = "main") -> MetricReport:
    """Per human category: best-matched generated column (ties -> lowest index), precision, recall, F1."""
    counts = C.counts
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    scores = []
    for i, name in enumerate(C.rows):
        if row_sums[i] == 0:
            raise EvaluationError(f"human category {name!r} has no comments")
        j = int(np.argmax(counts[i]))  # first maximum
        hit = int(counts[i, j])
        p = Fraction(hit, int(col_sums[j]))
        r = Fraction(hit, int(row_sums[i]))
        scores.append(CategoryScore(name, C.cols[j], p, r, f1_score(p, r)))
    return MetricReport(level, scores)


def granularity(generated: Taxonomy, human: HumanTaxonomyRef, level: str) -> int:
    return len(generated.category_names(level)) - len(human.names(level))


def evaluate_run(generated: Taxonomy, human: HumanTaxonomyRef, level: str,
                 embedder: Embedder | None = None, dataset: str = "", run_id: str | None = None):
    """Full metric set for one run at one level. Returns (report, contingency matrix)."""
    C = contingency(human, generated, level)
    report = best_match_metrics(C, level)
    if embedder is not None:
        sims = top_sim(human.names(level), generated.label_texts(level), embedder)
        for c in report.per_category:
            c.top_sim = sims[c.h_name]
    report.granularity = granularity(generated, human, level)
    report.dataset = dataset
    report.run_id = run_id
    report.refresh_means()
    return report, C


def aggregate_runs(reports: list[MetricReport]) -> MetricReport:
    if not reports:
        raise EvaluationError("no reports to aggregate")
    if len({(r.level, r.dataset) for r in reports}) > 1:
        raise EvaluationError("reports span different levels or datasets")
    if len(reports) == 1:
        return reports[0]
    means = {}
    for key in ("precision", "recall", "f1", "top_sim"):
        vals = [r.means.get(key) for r in reports]
        means[key] = None if any(v is None for v in vals) else sum(vals) / len(vals)
    grans = [r.granularity for r in reports]
    gran = None if any(g is None for g in grans) else sum(grans) / len(grans)
    first = reports[0]
    return MetricReport(first.level, [], gran, first.dataset, None, sum(r.n_runs for r in reports), means)
