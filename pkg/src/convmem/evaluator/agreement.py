"""Inter-rater agreement: Cohen's kappa (pairwise) and Fleiss' kappa.

Degenerate convention: when chance agreement is exactly 1 (both raters
constant), kappa is 1.0 for perfect observed agreement and 0.0 otherwise.
"""

from __future__ import annotations

from typing import Mapping, Sequence

CATEGORIES = (0, 1, 2, 3)


def cohen_kappa(a: Sequence[int], b: Sequence[int]) -> float:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("need at least one paired rating")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    p_e = 0.0
    for c in CATEGORIES:
        p_e += (sum(1 for x in a if x == c) / n) * (sum(1 for y in b if y == c) / n)
    if p_e >= 1.0 - 1e-15:
        return 1.0 if p_o >= 1.0 - 1e-15 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(matrix: Sequence[Sequence[int]], n_raters: int) -> float:
    """Fleiss' kappa over an items x categories count matrix.

    Every row must sum to ``n_raters`` (use only items rated by all
    graders).
    """
    if n_raters < 2:
        raise ValueError("need at least 2 raters")
    if not matrix:
        raise ValueError("need at least one item")
    n_items = len(matrix)
    n_cats = len(matrix[0])
    for i, row in enumerate(matrix):
        if len(row) != n_cats:
            raise ValueError(f"row {i} has {len(row)} categories, expected {n_cats}")
        if sum(row) != n_raters:
            raise ValueError(f"row {i} sums to {sum(row)}, expected {n_raters}")
    p_i_sum = 0.0
    for row in matrix:
        p_i_sum += (sum(c * c for c in row) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = p_i_sum / n_items
    total = n_items * n_raters
    p_j = [sum(row[j] for row in matrix) / total for j in range(n_cats)]
    p_e = sum(p * p for p in p_j)
    if p_e >= 1.0 - 1e-15:
        return 1.0 if p_bar >= 1.0 - 1e-15 else 0.0
    return (p_bar - p_e) / (1.0 - p_e)


def kappa_interpretation(kappa: float) -> str:
    """Landis & Koch bands, as used when reporting agreement levels."""
    if kappa < 0.0:
        return "Poor"
    if kappa < 0.20:
        return "Slight"
    if kappa < 0.40:
        return "Fair"
    if kappa < 0.60:
        return "Moderate"
    if kappa < 0.80:
        return "Substantial"
    return "Almost Perfect"


def pairwise_kappa_matrix(grades_by_grader: Mapping[str, Mapping[str, int]]) -> dict:
    """Cohen's kappa for every grader pair over their shared items.

    ``grades_by_grader`` maps grader_id -> {item_key: grade}. Returns the
    pair table plus mean/best/worst summary.
    """
    graders = sorted(grades_by_grader)
    pairs = {}
    for i, ga in enumerate(graders):
        for gb in graders[i + 1:]:
            shared = sorted(set(grades_by_grader[ga]) & set(grades_by_grader[gb]))
            if not shared:
                continue
            k = cohen_kappa(
                [grades_by_grader[ga][s] for s in shared],
                [grades_by_grader[gb][s] for s in shared],
            )
            pairs[(ga, gb)] = {"kappa": k, "n_items": len(shared),
                               "interpretation": kappa_interpretation(k)}
    summary = {}
    if pairs:
        mean_k = sum(p["kappa"] for p in pairs.values()) / len(pairs)
        best = max(pairs.items(), key=lambda kv: kv[1]["kappa"])
        worst = min(pairs.items(), key=lambda kv: kv[1]["kappa"])
        summary = {
            "mean_pairwise_kappa": mean_k,
            "best_pair": {"graders": list(best[0]), **best[1]},
            "worst_pair": {"graders": list(worst[0]), **worst[1]},
        }
    return {"pairs": {f"{a}|{b}": v for (a, b), v in pairs.items()}, **summary}


def fleiss_from_votes(votes_by_item: Mapping[str, Mapping[str, int]], n_raters: int) -> tuple[float, int]:
    """Build the Fleiss matrix from per-item grader votes, restricted to
    items rated by all ``n_raters`` graders. Returns (kappa, n_items)."""
    matrix = []
    for _, votes in sorted(votes_by_item.items()):
        if len(votes) != n_raters:
            continue
        row = [0] * len(CATEGORIES)
        for g in votes.values():
            row[g] += 1
        matrix.append(row)
    if not matrix:
        return 0.0, 0
    return fleiss_kappa(matrix, n_raters), len(matrix)
