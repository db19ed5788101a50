"""Majority-vote consensus over grader votes, with escalation.

A grade wins outright when it holds a strict majority of the valid votes
(3+ of 5). When the maximum vote concentration is 2 or less among 5 valid
votes (the 2-2-1 and 2-1-1-1 shapes), the pair escalates: a sixth vote is
obtained and the recount over all six picks a strict plurality winner;
any remaining tie resolves conservatively to the lowest tied grade.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

TIER_UNANIMOUS = "unanimous"
TIER_STRONG = "strong"
TIER_WEAK = "weak"
TIER_ESCALATED = "escalated"

GRADES = (0, 1, 2, 3)


class UngradeableError(ValueError):
    """No valid votes at all; the pair is excluded from metrics."""


@dataclass
class ConsensusGrade:
    query_id: str
    config_id: str
    exchange_ref: str
    grade: int
    tier: str
    votes: dict[int, int]
    escalation_vote: int | None = None


def _plurality_lowest(counter: Counter) -> int:
    top = max(counter.values())
    return min(g for g, c in counter.items() if c == top)


def consensus_votes(votes: Sequence[int],
                    escalator: Callable[[], int] | None = None) -> tuple[int, str, int | None]:
    """Resolve valid votes to (grade, tier, escalation_vote).

    With fewer than 5 valid votes the majority threshold scales to the
    valid-vote count (strictly more than half). Tier names keep their
    5-vote meanings: unanimous = all votes agree, strong = all but one,
    weak = any other majority.
    """
    votes = list(votes)
    if not votes:
        raise UngradeableError("no valid votes")
    for v in votes:
        if v not in GRADES:
            raise ValueError(f"vote out of range: {v!r}")
    n = len(votes)
    counter = Counter(votes)
    top_grade, top_count = max(counter.items(), key=lambda gc: (gc[1], -gc[0]))
    majority = n // 2 + 1
    if top_count >= majority:
        if top_count == n:
            tier = TIER_UNANIMOUS
        elif top_count == n - 1:
            tier = TIER_STRONG
        else:
            tier = TIER_WEAK
        return top_grade, tier, None
    # No majority: escalate with a sixth vote when available.
    esc_vote = None
    recount = counter
    if escalator is not None:
        esc_vote = escalator()
        if esc_vote not in GRADES:
            raise ValueError(f"escalation vote out of range: {esc_vote!r}")
        recount = counter + Counter([esc_vote])
    return _plurality_lowest(recount), TIER_ESCALATED, esc_vote


def consensus(query_id: str, config_id: str, exchange_ref: str, votes: Sequence[int],
              escalator: Callable[[], int] | None = None) -> ConsensusGrade:
    grade, tier, esc = consensus_votes(votes, escalator)
    return ConsensusGrade(
        query_id=query_id,
        config_id=config_id,
        exchange_ref=exchange_ref,
        grade=grade,
        tier=tier,
        votes=dict(Counter(votes)),
        escalation_vote=esc,
    )
