"""Diagnostics: per-query features, gain regression, and log-size sweeps.

Nine features describe each query: token count, the three frequency-group
indicators, the entropies of the normalized similar-query and similar-document
distributions, the expected clicked-document count under the similar-query
distribution, and the clicked-document counts of the top-1 and top-5 similar
queries. A linear regression of per-query NDCG@10 gain on the min-max
normalized features shows which queries benefit from log evidence.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import ClickLog, Query, group_of, subsample_queries, HEAD, TORSO, TAIL
from .embed import EmbeddingMatrix
from .errors import ValidationError
from .evaluation import MetricTable, Qrels, RunFile, evaluate, ndcg_at_k
from .fusion import FusionConfig, LaderTrace, run_queries
from .index import FlatIndex

FEATURE_NAMES = ("ql", "group_head", "group_torso", "group_tail",
                 "ent_q", "ent_d", "e_rel", "rel1", "rel5")


@dataclass(frozen=True)
class QueryFeatures:
    ql: int
    group_head: int
    group_torso: int
    group_tail: int
    ent_q: float
    ent_d: float
    e_rel: float
    rel1: float
    rel5: float
    degenerate: bool = False

    def as_row(self) -> list[float]:
        return [float(self.ql), float(self.group_head), float(self.group_torso),
                float(self.group_tail), self.ent_q, self.ent_d,
                self.e_rel, self.rel1, self.rel5]


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    intercept: float
    r_squared: float
    rank_deficient: bool = False


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 * ln 0 = 0."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("entropy of an empty distribution")
    if (arr < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(arr.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {arr.sum()}, not 1")
    nonzero = arr[arr > 0]
    return float(-(nonzero * np.log(nonzero)).sum())


def extract_features(trace: LaderTrace, query: Query,
                     rel: Mapping[str, frozenset[str]]) -> QueryFeatures:
    """Features for one scored query; an empty similar-query list is flagged degenerate."""
    group = group_of(query.frequency)
    ql = len(query.text.split())
    ent_d = entropy(trace.similar_docs.scores()) if trace.similar_docs else 0.0
    if not trace.similar_queries:
        return QueryFeatures(ql=ql, group_head=int(group == HEAD),
                             group_torso=int(group == TORSO), group_tail=int(group == TAIL),
                             ent_q=0.0, ent_d=ent_d, e_rel=0.0, rel1=0.0, rel5=0.0,
                             degenerate=True)
    rel_sizes = [len(rel.get(qid, ())) for qid, _ in trace.similar_queries]
    weights = trace.similar_queries.scores()
    e_rel = float(np.dot(weights, np.asarray(rel_sizes, dtype=np.float64)))
    top5 = rel_sizes[:5]
    return QueryFeatures(
        ql=ql,
        group_head=int(group == HEAD),
        group_torso=int(group == TORSO),
        group_tail=int(group == TAIL),
        ent_q=entropy(weights),
        ent_d=ent_d,
        e_rel=e_rel,
        rel1=float(rel_sizes[0]),
        rel5=float(sum(top5) / len(top5)),
    )


def minmax_normalize(rows: np.ndarray) -> np.ndarray:
    """Map each column to [0, 1]; constant columns map to 0."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError("min-max normalization needs at least 2 rows")
    lo = rows.min(axis=0)
    span = rows.max(axis=0) - lo
    out = np.zeros_like(rows)
    nonconst = span > 0
    out[:, nonconst] = (rows[:, nonconst] - lo[nonconst]) / span[nonconst]
    return out


def fit_linear_regression(x: np.ndarray, y: np.ndarray,
                          names: Sequence[str] | None = None) -> RegressionResult:
    """OLS with intercept via the normal equations; ridge eps=1e-8 on singularity."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {x.shape} vs y {y.shape}")
    if x.shape[0] < x.shape[1] + 1:
        raise ValueError(f"need at least {x.shape[1] + 1} rows, got {x.shape[0]}")
    if names is None:
        names = [f"x{i}" for i in range(x.shape[1])]
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    gram = design.T @ design
    rhs = design.T @ y
    rank_deficient = np.linalg.matrix_rank(design) < design.shape[1]
    if rank_deficient:
        weights = np.linalg.solve(gram + 1e-8 * np.eye(gram.shape[0]), rhs)
    else:
        try:
            weights = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            rank_deficient = True
            weights = np.linalg.solve(gram + 1e-8 * np.eye(gram.shape[0]), rhs)
    residual = y - design @ weights
    ss_res = float(residual @ residual)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r_squared = 0.0 if ss_tot == 0.0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return RegressionResult(
        coefficients={name: float(w) for name, w in zip(names, weights[:-1])},
        intercept=float(weights[-1]),
        r_squared=r_squared,
        rank_deficient=rank_deficient,
    )


def gain_vector(run_full: RunFile, run_dr_only: RunFile, qrels: Qrels,
                k: int = 10) -> dict[str, float]:
    """Per-query NDCG@k difference between the full and dense-only runs."""
    if set(run_full) != set(run_dr_only):
        raise ValidationError("run files cover different query sets")
    gains = {}
    for qid in sorted(run_full):
        judged = qrels.judgments.get(qid, {})
        gains[qid] = ndcg_at_k(run_full[qid], judged, k) - ndcg_at_k(run_dr_only[qid], judged, k)
    return gains


def feature_matrix(traces: Sequence[LaderTrace], queries: Mapping[str, Query],
                   rel: Mapping[str, frozenset[str]]) -> tuple[np.ndarray, list[str]]:
    """Stack per-query features into a matrix aligned with the trace order."""
    rows, qids = [], []
    for trace in traces:
        rows.append(extract_features(trace, queries[trace.query_id], rel).as_row())
        qids.append(trace.query_id)
    return np.asarray(rows, dtype=np.float64), qids


@dataclass(frozen=True)
class SweepRow:
    proportion: float
    table: MetricTable


def sweep(proportions: Sequence[float], seed: int, *,
          eval_queries: EmbeddingMatrix, train_queries: EmbeddingMatrix,
          d_index: FlatIndex, log: ClickLog, qrels: Qrels,
          groups: Mapping[str, str] | None, cfg: FusionConfig, k_out: int,
          lambda_of=None, threads: int = 1) -> list[SweepRow]:
    """Evaluate the full pipeline under log subsamples of each proportion.

    The query index is rebuilt from the surviving log queries for every
    proportion, so proportion 0 degenerates to dense-only retrieval.
    """
    rows = []
    for p in proportions:
        sub = subsample_queries(log, p, seed)
        kept = set(sub.query_ids())
        q_index = FlatIndex(matrix=train_queries.select(kept))
        traces = run_queries(eval_queries, q_index, d_index, sub.rel, cfg, k_out,
                             lambda_of=lambda_of, threads=threads)
        run: RunFile = {t.query_id: t.final for t in traces}
        rows.append(SweepRow(proportion=float(p), table=evaluate(run, qrels, groups)))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["proportion", "group", "metric", "value", "n_queries"])
        for row in rows:
            for group, metric, value, n in row.table.rows:
                writer.writerow([f"{row.proportion:g}", group, metric, f"{value:.6f}", n])


__all__ = [
    "FEATURE_NAMES", "QueryFeatures", "RegressionResult", "SweepRow",
    "entropy", "extract_features", "minmax_normalize", "fit_linear_regression",
    "gain_vector", "feature_matrix", "sweep", "write_sweep_csv",
]
