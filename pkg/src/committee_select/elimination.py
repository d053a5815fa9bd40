"""Successive elimination on failure-conditioned observations.

One engine serves both feedback models. For binary feedback the observation of
candidate c on an accepted failure is its solve bit; for pairwise feedback it
is 1 when c equals the sampled rival (free) and otherwise the cover query
``rank(c) <= rank(x)``.

Rounds are simulated in batches: the engine peeks ahead at upcoming failures,
finds the first round at which the active set changes or the run stops, and
commits (pays for) exactly the rounds up to that point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Exhausted, QueryLedger
from .oracles import RejectionStream
from .stats import elim_radii, elim_round_cap

MAX_BATCH = 1 << 15


@dataclass
class ElimOutcome:
    candidate: int
    rounds: int
    queries: dict[int, int] = field(default_factory=dict)
    capped: bool = False
    estimates: dict[int, float] = field(default_factory=dict)


def _observe(rows, x, arms):
    if x is None:
        return rows[:, arms].astype(np.int64)
    rx = rows[np.arange(rows.shape[0]), x]
    return ((rows[:, arms] <= rx[:, None]) | (arms[None, :] == x[:, None])).astype(np.int64)


def eliminate(
    stream: RejectionStream,
    arms,
    eta: float,
    delta: float,
    ledger: QueryLedger,
    round_cap: int | None = None,
) -> ElimOutcome:
    """Run elimination over ``arms`` until the radius reaches eta/4 or one arm survives."""
    arms = np.array(sorted(int(a) for a in arms), dtype=np.int64)
    if arms.size == 0:
        raise ValueError("candidate set must be nonempty")
    n_arms = arms.size
    limit = elim_round_cap(n_arms, eta, delta)
    capped_run = round_cap is not None and round_cap < limit
    if capped_run:
        limit = int(round_cap)
    source = stream.source
    sums = np.zeros(n_arms, dtype=np.int64)
    counts = np.zeros(n_arms, dtype=np.int64)
    active = np.ones(n_arms, dtype=bool)
    r = 0
    batch = 64

    def outcome(capped=False):
        idx = np.flatnonzero(active)
        means = sums[idx] / max(r, 1)
        best = idx[int(np.argmax(means))]
        return ElimOutcome(
            int(arms[best]),
            r,
            {int(a): int(c) for a, c in zip(arms, counts)},
            capped,
            {int(arms[i]): float(sums[i] / max(r, 1)) for i in idx},
        )

    while True:
        need = min(batch, limit - r)
        ids, rows, x = stream.peek(need)
        got = ids.shape[0]
        if got == 0:
            try:
                stream.give_up()
            except Exhausted as exc:
                exc.partial = outcome()
                raise
        act = np.flatnonzero(active)
        X = _observe(rows, x, arms[act])
        cs = sums[act] + np.cumsum(X, axis=0)
        rr = r + np.arange(1, got + 1)
        q = cs / rr[:, None]
        rad = elim_radii(rr, n_arms, delta)
        best = q.max(axis=1)
        keep = q + rad[:, None] >= best[:, None] - rad[:, None] - eta
        n_keep = keep.sum(axis=1)
        event = (n_keep < act.size) | (n_keep == 1) | (rr >= limit)
        hits = np.flatnonzero(event)
        j = int(hits[0]) if hits.size else got - 1
        used = j + 1
        free = np.zeros(act.size, dtype=np.int64) if x is None else (x[:used, None] == arms[act][None, :]).sum(axis=0)
        paid = used - free
        keys = None
        if source.logging:
            xs = np.full(used, -1) if x is None else x[:used]
            keys = [
                (int(ids[t]), int(c), int(xs[t]))
                for t in range(used)
                for c in arms[act]
                if c != xs[t]
            ]
        stream.commit(used)
        source.bill(ledger, "cand", int(paid.sum()), keys)
        counts[act] += paid
        sums[act] = cs[j]
        r = int(rr[j])
        if hits.size:
            active[act[~keep[j]]] = False
            if r >= limit or n_keep[j] == 1:
                return outcome(capped=capped_run and r >= limit and active.sum() > 1)
        elif got < need:
            try:
                stream.give_up()
            except Exhausted as exc:
                exc.partial = outcome()
                raise
        else:
            batch = min(2 * batch, MAX_BATCH)
