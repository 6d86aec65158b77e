"""Numeric evaluation: binary scoring, pass@k, stratification, correlations.

Everything is kept at full precision internally; percentages are rounded
half-to-even to 0.1 only when a report is rendered.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .core import Verdict, VerifRecord


class MissingVerdicts(ValueError):
    """A report was requested over results that lack required verdicts."""


def round_percent(x: float | None) -> float | None:
    """Presentation rounding: half-to-even at one decimal."""
    return None if x is None else round(x, 1)


def f1_from_rates(precision: float, recall: float) -> float | None:
    """Harmonic mean of two percentage rates; None when both are zero."""
    if precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class BinaryScore:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float | None:
        denom = self.tp + self.fp
        return 100.0 * self.tp / denom if denom else None

    @property
    def recall(self) -> float | None:
        denom = self.tp + self.fn
        return 100.0 * self.tp / denom if denom else None

    @property
    def f1(self) -> float | None:
        p, r = self.precision, self.recall
        if p is None or r is None:
            return None
        return f1_from_rates(p, r)

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "precision": round_percent(self.precision),
            "recall": round_percent(self.recall),
            "f1": round_percent(self.f1),
        }


def binary_metrics(predictions: Sequence[bool], labels: Sequence[bool]) -> BinaryScore:
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels")
    if not predictions:
        raise ValueError("empty input")
    tp = fp = tn = fn = 0
    for pred, label in zip(predictions, labels):
        if pred and label:
            tp += 1
        elif pred and not label:
            fp += 1
        elif not pred and label:
            fn += 1
        else:
            tn += 1
    return BinaryScore(tp=tp, fp=fp, tn=tn, fn=fn)


def stratify_by_length(
    records: Sequence[VerifRecord], cuts: tuple[int, int] = (115, 165)
) -> tuple[list[VerifRecord], list[VerifRecord], list[VerifRecord]]:
    """Partition on reference length into (<lo), [lo, hi], (>hi)."""
    lo, hi = cuts
    if not lo < hi:
        raise ValueError(f"cuts must be strictly increasing, got {cuts}")
    short = [r for r in records if r.reference_length < lo]
    mid = [r for r in records if lo <= r.reference_length <= hi]
    long_ = [r for r in records if r.reference_length > hi]
    return short, mid, long_


def pass_at_k_exact(n: int, c: int, k: int) -> Fraction:
    """Unbiased estimator 1 - C(n-c, k)/C(n, k) as an exact rational.

    Product form: C(n-c,k)/C(n,k) = prod_{i=0..k-1} (n-c-i)/(n-i), which never
    forms the huge intermediate binomials.
    """
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if c == 0:
        return Fraction(0)
    if n - c < k:
        return Fraction(1)
    miss = Fraction(1)
    for i in range(k):
        miss *= Fraction(n - c - i, n - i)
    return 1 - miss


def pass_at_k(n: int, c: int, k: int) -> float:
    return float(pass_at_k_exact(n, c, k))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Sample Pearson r via the direct covariance formula; None when an input
    is constant (undefined, reported as absent)."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = math.fsum((x - mx) ** 2 for x in xs)
    vy = math.fsum((y - my) ** 2 for y in ys)
    if vx == 0 or vy == 0:
        return None
    return cov / math.sqrt(vx * vy)


def _count_inversions(seq: list[float]) -> int:
    """Strict inversions (i < j with seq[i] > seq[j]) by merge counting."""
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    inv = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            inv += len(left) - i
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    seq[:] = merged
    return inv


def _tie_pairs(values: Sequence[float]) -> int:
    groups: dict[float, int] = {}
    for v in values:
        groups[v] = groups.get(v, 0) + 1
    return sum(t * (t - 1) // 2 for t in groups.values())


def kendall_tau_b(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Tau-b with tie correction: (C - D) / sqrt((n0-n1)(n0-n2)).

    Concordance counted by merge sort (O(n log n)); the final expression uses
    the exact integer counts, so it agrees bit-for-bit with naive pair
    enumeration. Returns None when either side is entirely tied.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two points")
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(ys)
    if n0 == n1 or n0 == n2:
        return None
    # Pairs tied in both coordinates.
    both: dict[tuple[float, float], int] = {}
    for pair in zip(xs, ys):
        both[pair] = both.get(pair, 0) + 1
    n3 = sum(t * (t - 1) // 2 for t in both.values())
    # Sorting by (x, y) makes discordant pairs exactly the strict y-inversions:
    # equal-x pairs are y-sorted (never inverted) and everything else inverts
    # iff x and y order strictly disagree.
    ordered = [y for _, y in sorted(zip(xs, ys))]
    swaps = _count_inversions(ordered)
    c_minus_d = n0 - n1 - n2 + n3 - 2 * swaps
    return c_minus_d / math.sqrt((n0 - n1) * (n0 - n2))


@dataclass(frozen=True)
class BenchmarkPoint:
    """One model+method run: human accuracy vs the automated rates."""

    label: str
    human_accuracy: float | None
    type_check_rate: float
    beq_l_rate: float
    beq_plus_rate: float

    def __post_init__(self) -> None:
        for name in ("human_accuracy", "type_check_rate", "beq_l_rate", "beq_plus_rate"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 100:
                raise ValueError(f"{name} must be in [0, 100], got {v}")


@dataclass(frozen=True)
class ProblemResult:
    """Per-problem outcome of one selection method, input to aggregation."""

    problem_id: str
    method: str
    pool_size: int
    survivors: int
    beq_l_verdict: Verdict | None = None
    beq_plus_verdict: Verdict | None = None
    # Candidates in the pool verified Equivalent against the reference — the
    # c of pass@k. None when the run did not verify the whole pool.
    n_correct: int | None = None


@dataclass(frozen=True)
class MethodRow:
    method: str
    problems: int
    type_check_rate: float
    beq_l_rate: float
    beq_plus_rate: float
    accuracy: float | None = None  # human labels only, never computed
    pass_at_k: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[MethodRow, ...]
    points: tuple[BenchmarkPoint, ...]

    def to_json(self) -> str:
        payload = {
            "rows": [
                {
                    "method": r.method,
                    "problems": r.problems,
                    "type_check": round_percent(r.type_check_rate),
                    "accuracy": round_percent(r.accuracy),
                    "beq_l": round_percent(r.beq_l_rate),
                    "beq_plus": round_percent(r.beq_plus_rate),
                    "pass_at_k": {str(k): round_percent(v) for k, v in sorted(r.pass_at_k.items())},
                }
                for r in self.rows
            ],
            "points": [
                {
                    "label": p.label,
                    "human_accuracy": round_percent(p.human_accuracy),
                    "type_check_rate": round_percent(p.type_check_rate),
                    "beq_l_rate": round_percent(p.beq_l_rate),
                    "beq_plus_rate": round_percent(p.beq_plus_rate),
                }
                for p in self.points
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def to_markdown(self) -> str:
        def fmt(v: float | None) -> str:
            return "—" if v is None else f"{round_percent(v):.1f}"

        ks = sorted({k for r in self.rows for k in r.pass_at_k})
        header = ["Method", "Type-Check", "Accuracy", "BEq_L", "BEq+"] + [f"pass@{k}" for k in ks]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for r in self.rows:
            cells = [
                r.method,
                fmt(r.type_check_rate),
                fmt(r.accuracy),
                fmt(r.beq_l_rate),
                fmt(r.beq_plus_rate),
            ] + [fmt(r.pass_at_k.get(k)) for k in ks]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def aggregate_report(results: Iterable[ProblemResult], k_list: Sequence[int] = ()) -> EvalReport:
    """Fold per-problem results into per-method rate rows.

    Rates are per-problem fractions in percent. pass@k uses the effective
    k' = min(k, pool size) for undersized pools (drawing more than n samples
    means drawing all of them).
    """
    by_method: dict[str, list[ProblemResult]] = {}
    for r in results:
        by_method.setdefault(r.method, []).append(r)
    if not by_method:
        raise MissingVerdicts("no results to aggregate")
    rows = []
    points = []
    for method in sorted(by_method):
        group = by_method[method]
        total = len(group)
        for r in group:
            if r.survivors > 0 and (r.beq_l_verdict is None or r.beq_plus_verdict is None):
                raise MissingVerdicts(f"problem {r.problem_id} has survivors but no verdict")
            if k_list and r.n_correct is None:
                raise MissingVerdicts(f"problem {r.problem_id} lacks pool-wide correctness counts")
        type_check = 100.0 * sum(1 for r in group if r.survivors > 0) / total
        beq_l = 100.0 * sum(1 for r in group if r.beq_l_verdict is Verdict.EQUIVALENT) / total
        beq_plus = 100.0 * sum(1 for r in group if r.beq_plus_verdict is Verdict.EQUIVALENT) / total
        curve: dict[int, float] = {}
        for k in k_list:
            acc = 0.0
            for r in group:
                if r.pool_size == 0 or not r.n_correct:
                    continue
                acc += pass_at_k(r.pool_size, r.n_correct, min(k, r.pool_size))
            curve[k] = 100.0 * acc / total
        rows.append(
            MethodRow(
                method=method,
                problems=total,
                type_check_rate=type_check,
                beq_l_rate=beq_l,
                beq_plus_rate=beq_plus,
                pass_at_k=curve,
            )
        )
        points.append(
            BenchmarkPoint(
                label=method,
                human_accuracy=None,
                type_check_rate=type_check,
                beq_l_rate=beq_l,
                beq_plus_rate=beq_plus,
            )
        )
    return EvalReport(rows=tuple(rows), points=tuple(points))
