"""Metrics and evaluation harnesses.

ROUGE-L, coreference-aware MRR/HIT@k, rank-weighted AvgM and MaxM over
pluggable similarity scorers, challenging/gold subset selection, the
multi-choice harness with similarity-selected distractors, paired-bootstrap
significance, direction breakdowns, and neighbor-similarity analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import TaskInstance, normalize_text


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class RankedPrediction:
    instance_id: str
    outputs: tuple[tuple[str, float], ...]
    model_id: str = ""

    def texts(self) -> list[str]:
        return [t for t, _ in self.outputs]


@dataclass(frozen=True)
class SimilarityScorer:
    name: str
    score: Callable[[str, str], float]
    higher_better: bool = True
    value_range: tuple[float, float] = (0.0, 1.0)
    symmetric: bool = False


def exact_match_scorer() -> SimilarityScorer:
    return SimilarityScorer(
        name="exact",
        score=lambda c, r: float(normalize_text(c) == normalize_text(r)),
        symmetric=True,
    )


def token_overlap_scorer() -> SimilarityScorer:
    def overlap(candidate: str, reference: str) -> float:
        a = set(normalize_text(candidate).split())
        b = set(normalize_text(reference).split())
        if not a and not b:
            return 1.0
        if not a or not b:
            return 0.0
        return len(a & b) / len(a | b)

    return SimilarityScorer(name="token-overlap", score=overlap, symmetric=True)


# ---------------------------------------------------------------------------
# Sentence generation metrics
# ---------------------------------------------------------------------------


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """LCS-based F1 over normalized whitespace tokens."""
    cand = normalize_text(candidate).split()
    ref = normalize_text(reference).split()
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Node prediction metrics
# ---------------------------------------------------------------------------


def mrr_hits(pred: RankedPrediction, truth_cluster: set[str], ks=(1, 5, 10)):
    """Rank of the first output whose normalized form is in the truth cluster.

    truth_cluster entries are normalized before matching, so a raw coreference
    cluster can be passed directly.
    """
    if not truth_cluster:
        raise MetricError("truth cluster must be non-empty")
    cluster = {normalize_text(t) for t in truth_cluster}
    rank = 0
    for i, text in enumerate(pred.texts(), start=1):
        if normalize_text(text) in cluster:
            rank = i
            break
    mrr = 1.0 / rank if rank else 0.0
    hits = {k: int(bool(rank) and rank <= k) for k in ks}
    return mrr, hits


def avg_max_metric(pred: RankedPrediction, reference: str, scorer: SimilarityScorer):
    """Rank-weighted average and maximum of a similarity metric over top-10.

    With m < 10 outputs the weighted sum and its harmonic normalizer both run
    to m, so abstention is not conflated with wrong answers.
    """
    outputs = pred.texts()[:10]
    if not outputs:
        raise MetricError(f"{pred.instance_id}: no outputs to score")
    scores = [scorer.score(p, reference) for p in outputs]
    weights = [1.0 / i for i in range(1, len(scores) + 1)]
    avg = sum(s * w for s, w in zip(scores, weights)) / sum(weights)
    return avg, max(scores)


# ---------------------------------------------------------------------------
# Subset selection
# ---------------------------------------------------------------------------


def challenging_subset(
    test_pairs: Sequence[tuple[TaskInstance, str]],
    provider,
    percentile: float = 0.1,
    threshold_override: float | None = None,
):
    """Test instances whose background/reference cosine similarity is low.

    Percentile mode keeps exactly floor(percentile * N) instances, ties broken
    by keeping lower instance ids; an explicit override keeps those strictly
    below the threshold instead.
    """
    if threshold_override is None and not 0 < percentile < 1:
        raise MetricError("percentile must be in (0, 1)")
    scored = []
    for instance, reference in test_pairs:
        sim = float(np.dot(provider.embed(instance.background), provider.embed(reference)))
        scored.append((sim, instance.instance_id, instance, reference))
    if threshold_override is not None:
        kept = [row for row in scored if row[0] < threshold_override]
        kept.sort(key=lambda row: (row[0], row[1]))
    else:
        scored.sort(key=lambda row: (row[0], row[1]))
        kept = scored[: int(percentile * len(scored))]
    return [(instance, reference) for _, _, instance, reference in kept]


def gold_subset_flags(instance: TaskInstance, annotation: dict, task: str = "sentence") -> bool:
    """Eligibility for the gold subset: all required criteria must pass.

    Required criteria: no trivial overlap with the background, background
    relevance, seed salience; node task additionally requires adequate
    extraction quality.
    """
    required = ["no_trivial_overlap", "background_relevant", "relation_salient"]
    if task == "node":
        required.append("ie_quality")
    for key in required:
        if key not in annotation:
            raise MetricError(f"{instance.instance_id}: missing criterion {key!r}")
    return all(bool(annotation[key]) for key in required)


# ---------------------------------------------------------------------------
# Multi-choice harness
# ---------------------------------------------------------------------------


def select_distractors(
    truth: str,
    same_paper_nodes: Sequence[str],
    provider,
    truth_cluster: set[str] | None = None,
) -> list[str] | None:
    """The 3 same-paper nodes most similar to the ground truth by cosine.

    The truth and its coreference cluster are excluded.  Returns None when
    fewer than 3 candidates remain (instance skipped).
    """
    excluded = {normalize_text(truth)}
    if truth_cluster:
        excluded |= {normalize_text(t) for t in truth_cluster}
    candidates = [
        c for c in dict.fromkeys(same_paper_nodes) if normalize_text(c) not in excluded
    ]
    if len(candidates) < 3:
        return None
    tvec = provider.embed(truth)
    scored = [(c, float(np.dot(tvec, provider.embed(c)))) for c in candidates]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return [c for c, _ in scored[:3]]


def multi_choice_eval(
    rank_candidates: Callable[[TaskInstance, Sequence[str]], Sequence[str]],
    instance: TaskInstance,
    truth: str,
    distractors: Sequence[str],
):
    """Rank truth among 4 candidates; returns (MRR, HIT@1, HIT@3)."""
    candidates = [truth] + list(distractors)
    if len(candidates) != 4:
        raise MetricError("multi-choice requires exactly 4 candidates")
    ranking = list(rank_candidates(instance, candidates))
    pred = RankedPrediction(instance.instance_id, tuple((t, 0.0) for t in ranking))
    mrr, hits = mrr_hits(pred, {truth}, ks=(1, 3))
    return mrr, hits[1], hits[3]


# ---------------------------------------------------------------------------
# Significance and reporting
# ---------------------------------------------------------------------------


def significance_test(
    per_instance_a: Sequence[float],
    per_instance_b: Sequence[float],
    seed: int = 0,
    resamples: int = 10_000,
) -> float:
    """Two-sided paired bootstrap p-value on the mean difference."""
    a = np.asarray(per_instance_a, dtype=float)
    b = np.asarray(per_instance_b, dtype=float)
    if a.shape != b.shape:
        raise MetricError("paired inputs must have equal length")
    diff = b - a
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(diff), size=(resamples, len(diff)))
    means = diff[idx].mean(axis=1)
    p_low = (np.count_nonzero(means <= 0) + 1) / (resamples + 1)
    p_high = (np.count_nonzero(means >= 0) + 1) / (resamples + 1)
    return min(1.0, 2 * min(p_low, p_high))


@dataclass
class MetricReport:
    rows: list[dict] = field(default_factory=list)

    def add(self, instance_id: str, metrics: dict, **keys) -> None:
        self.rows.append({"instance_id": instance_id, **keys, **metrics})

    def aggregate(self, metric: str, where: dict | None = None):
        values = [
            row[metric]
            for row in self.rows
            if metric in row
            and all(row.get(k) == v for k, v in (where or {}).items())
        ]
        return (float(np.mean(values)) if values else float("nan"), len(values))

    def metric_names(self) -> list[str]:
        names = []
        for row in self.rows:
            for key in row:
                if key not in ("instance_id", "direction", "subset", "model") and key not in names:
                    names.append(key)
        return names

    def write_tsv(self, path) -> None:
        names = self.metric_names()
        keys = ["instance_id", "model", "subset", "direction"] + names
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(keys) + "\n")
            for row in self.rows:
                fh.write("\t".join(str(row.get(k, "")) for k in keys) + "\n")


def direction_breakdown(report: MetricReport) -> dict:
    """Aggregate every metric separately for forward and backward rows."""
    result = {}
    for direction in ("forward", "backward"):
        result[direction] = {
            metric: report.aggregate(metric, {"direction": direction})
            for metric in report.metric_names()
        }
    return result


# ---------------------------------------------------------------------------
# Neighbor similarity analysis
# ---------------------------------------------------------------------------


def _quartiles(values) -> dict:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"count": 0}
    q1, q2, q3 = np.percentile(arr, [25, 50, 75])
    return {
        "count": int(arr.size),
        "min": float(arr.min()),
        "q1": float(q1),
        "median": float(q2),
        "q3": float(q3),
        "max": float(arr.max()),
    }


def neighbor_similarity_analysis(rows, provider) -> dict:
    """Distribution of neighbor/reference similarity per neighbor type.

    rows: iterable of (instance, NeighborSet, reference).  The three-way
    comparison only covers instances where all three neighbor types are
    non-empty; per instance the least similar neighbor of each type is used.
    The background/target similarity split by direction is reported for all
    rows.
    """
    per_type: dict[str, list[float]] = {"semantic": [], "kg": [], "citation": []}
    background_by_direction: dict[str, list[float]] = {"forward": [], "backward": []}
    for instance, neighbors, reference in rows:
        rvec = provider.embed(reference)
        background_by_direction[instance.direction].append(
            float(np.dot(provider.embed(instance.background), rvec))
        )
        groups = {
            "semantic": neighbors.semantic,
            "kg": neighbors.kg,
            "citation": neighbors.citation,
        }
        if not all(groups.values()):
            continue
        for kind, items in groups.items():
            sims = [float(np.dot(provider.embed(n), rvec)) for n in items]
            per_type[kind].append(min(sims))
    return {
        "least_similar_neighbor": {k: _quartiles(v) for k, v in per_type.items()},
        "background_target": {k: _quartiles(v) for k, v in background_by_direction.items()},
    }


def write_analysis_table(analysis: dict, path) -> None:
    """Plot-ready tabular dump of the analysis summaries."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("group\tkey\tcount\tmin\tq1\tmedian\tq3\tmax\n")
        for group, table in analysis.items():
            for key, stats in table.items():
                fields = [group, key, str(stats.get("count", 0))] + [
                    f"{stats[k]:.6f}" if k in stats else ""
                    for k in ("min", "q1", "median", "q3", "max")
                ]
                fh.write("\t".join(fields) + "\n")
