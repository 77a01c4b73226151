"""Interactive carving core: clicks vote for proposals, votes drive re-ranking.

A session owns mutable state (click history, vote counts, accepted id) over a
shared immutable pool.  The owner serializes calls into one session; distinct
sessions over the same pool can run in parallel.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .proposals import ProposalPool

DEFAULT_K = 9
DEFAULT_BUDGET = 10
HEATMAP_DEPTH = 5


class CarvingError(Exception):
    """Base for interactive-session errors."""


class OutOfBoundsClick(CarvingError):
    pass


class BudgetExhausted(CarvingError):
    pass


class SessionFrozen(CarvingError):
    """Session already has an accepted proposal."""


class UndoUnderflow(CarvingError):
    pass


class AcceptRejected(CarvingError):
    """Accepted id is not in the current top-k."""


def rank(pool: ProposalPool, votes: np.ndarray | None = None) -> list[int]:
    """Total order over proposal ids: votes desc, objectness desc, id asc.

    With no votes this reduces to a pure objectness ranking.
    """
    ids = np.array([p.id for p in pool.proposals])
    obj = np.array([p.objectness for p in pool.proposals])
    if votes is None:
        votes = np.zeros(len(ids), dtype=np.int64)
    order = np.lexsort((ids, -obj, -votes))
    return ids[order].tolist()


@dataclass(frozen=True)
class ClickResult:
    matched: int
    ranking: tuple[int, ...]
    topk: tuple[int, ...]
    heatmap: np.ndarray
    clicks_used: int


class CarvingSession:
    """Click / re-rank / top-k loop over one proposal pool."""

    def __init__(
        self,
        pool: ProposalPool,
        k: int = DEFAULT_K,
        budget: int = DEFAULT_BUDGET,
        accept_any: bool = False,
    ):
        self.pool = pool
        self.k = k
        self.budget = budget
        self.accept_any = accept_any
        self.clicks: list[tuple[int, int]] = []
        self.accepted: int | None = None
        self.created = time.time()
        self.updated = self.created
        self._pos_of_id = {p.id: i for i, p in enumerate(pool.proposals)}
        self._votes = np.zeros(len(pool.proposals), dtype=np.int64)
        self._ranking = rank(pool)

    # -- views ------------------------------------------------------------

    @property
    def votes(self) -> np.ndarray:
        return self._votes.copy()

    def votes_for(self, pid: int) -> int:
        return int(self._votes[self._pos_of_id[pid]])

    @property
    def ranking(self) -> list[int]:
        return list(self._ranking)

    def top_k(self) -> list[int]:
        return self._ranking[: self.k]

    def heatmap(self) -> np.ndarray:
        """Per-pixel count of top-5 proposals' dilated contours (values 0..5)."""
        out = np.zeros((self.pool.height, self.pool.width), dtype=np.int64)
        for pid in self._ranking[:HEATMAP_DEPTH]:
            p = self.pool.proposals[self._pos_of_id[pid]]
            out += p.contour.base.pixels
        return out

    def _result(self, matched: int) -> ClickResult:
        return ClickResult(
            matched=matched,
            ranking=tuple(self._ranking),
            topk=tuple(self.top_k()),
            heatmap=self.heatmap(),
            clicks_used=len(self.clicks),
        )

    # -- mutations ----------------------------------------------------------

    def click(self, x: int, y: int) -> ClickResult:
        """Record a click; every proposal whose contour covers it gains one vote.

        A click matching no contour is recorded but changes no votes (the
        caller can warn via ``matched == 0``).
        """
        if self.accepted is not None:
            raise SessionFrozen("session already accepted a proposal")
        if not (0 <= x < self.pool.width and 0 <= y < self.pool.height):
            raise OutOfBoundsClick(f"click ({x},{y}) outside {self.pool.width}x{self.pool.height}")
        if len(self.clicks) >= self.budget:
            raise BudgetExhausted(f"click budget of {self.budget} exhausted")
        self.clicks.append((int(x), int(y)))
        ids = self.pool.ids_at_click(x, y)
        for pid in ids:
            self._votes[self._pos_of_id[int(pid)]] += 1
        self._ranking = rank(self.pool, self._votes)
        self.updated = time.time()
        return self._result(matched=len(ids))

    def undo(self) -> ClickResult:
        """Remove the last click; votes are recounted from the remaining clicks."""
        if self.accepted is not None:
            raise SessionFrozen("session already accepted a proposal")
        if not self.clicks:
            raise UndoUnderflow("no clicks to undo")
        self.clicks.pop()
        self._recount()
        self.updated = time.time()
        return self._result(matched=0)

    def reset(self) -> None:
        if self.accepted is not None:
            raise SessionFrozen("session already accepted a proposal")
        self.clicks.clear()
        self._recount()
        self.updated = time.time()

    def accept(self, pid: int):
        """Freeze the session on `pid` (must be in the current top-k) and
        return its mask."""
        if self.accepted is not None:
            raise SessionFrozen("session already accepted a proposal")
        if pid not in self._pos_of_id:
            raise AcceptRejected(f"unknown proposal id {pid}")
        if not self.accept_any and pid not in self.top_k():
            raise AcceptRejected(f"proposal {pid} is not in the current top-{self.k}")
        self.accepted = int(pid)
        self.updated = time.time()
        return self.pool.proposals[self._pos_of_id[pid]].mask

    def _recount(self) -> None:
        self._votes[:] = 0
        for x, y in self.clicks:
            for pid in self.pool.ids_at_click(x, y):
                self._votes[self._pos_of_id[int(pid)]] += 1
        self._ranking = rank(self.pool, self._votes)
