"""Exact evaluators, brute-force optima and structural checks.

Functions here accept either a finite object (``BinaryOutcomeMatrix`` or
``RankingProfile``) or a closed-form law exposing the same ``coverage`` /
``cover_probs`` methods.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .core import BinaryOutcomeMatrix, CapExceeded, Committee, RankingProfile, RivalWeights, as_members

DEFAULT_CAP = 10**7
TIE_TOL = 1e-12


@dataclass(frozen=True)
class OptResult:
    value: float
    witness: Committee
    enumerated: int


@dataclass(frozen=True)
class ThetaValue:
    value: float
    argmin_rival: int


@dataclass(frozen=True)
class PrefixCoverStats:
    phi: float
    rho_lambda: float
    q_lambda: np.ndarray


@dataclass(frozen=True)
class Pass:
    checked: int


@dataclass(frozen=True)
class Witness:
    """First violated property: ``kind`` is normalized, monotone or diminishing."""

    kind: str
    S: tuple
    R: tuple
    x: int | None
    gains: tuple


# -- binary objective --------------------------------------------------------


def coverage(data, S) -> float:
    return float(data.coverage(as_members(S)))


# -- ordinal objectives ------------------------------------------------------


def cover_probs(data, S) -> np.ndarray:
    """g_x(S) for every candidate x (1 for members)."""
    g = np.asarray(data.cover_probs(as_members(S)), dtype=float)
    g = g.copy()
    g[list(as_members(S))] = 1.0
    return g


def win_rate(profile: RankingProfile, S, S_prime) -> float:
    """Probability S's best member beats S_prime's, ties counted half."""
    a = profile.best_ranks(S)
    b = profile.best_ranks(S_prime)
    w = profile.weights
    return float(w @ (a < b) + 0.5 * (w @ (a == b)))


def theta_exact(data, S) -> ThetaValue:
    members = as_members(S)
    if not members or len(members) >= data.m:
        raise ValueError("theta is defined for nonempty proper committees only")
    g = cover_probs(data, members)
    g[list(members)] = np.inf
    x = int(np.argmin(g))
    return ThetaValue(float(g[x]), x)


def theta(data, S) -> float:
    return theta_exact(data, S).value


def phi(data, S, lam: RivalWeights) -> float:
    return float(lam.probs @ cover_probs(data, S))


def prefix_cover_stats(data, S, lam: RivalWeights) -> PrefixCoverStats:
    """Exact Phi, rho and the failure-conditioned rescue rates of every candidate."""
    members = as_members(S)
    m = data.m
    if isinstance(data, RankingProfile):
        ranks = data.ranks
        best = data.best_ranks(members)
        # fail[t, x]: ranking t, rival x not covered by S
        fail = best[:, None] > ranks
        joint = data.weights[:, None] * lam.probs[None, :] * fail
        rho = float(joint.sum())
        q = np.zeros(m)
        if rho > 0:
            for c in range(m):
                q[c] = float((joint * (ranks[:, [c]] <= ranks)).sum()) / rho
        return PrefixCoverStats(1.0 - rho, rho, q)
    base = phi(data, members, lam)
    rho = 1.0 - base
    q = np.zeros(m)
    if rho > TIE_TOL:
        for c in range(m):
            if c not in members:
                q[c] = (phi(data, members + (c,), lam) - base) / rho
            else:
                q[c] = 0.0
    return PrefixCoverStats(base, max(rho, 0.0), q)


def lottery_value(data, committees: Iterable) -> float:
    """min_x of the average cover probability over a uniform lottery."""
    gs = [cover_probs(data, S) for S in committees]
    return float(np.mean(gs, axis=0).min())


# -- enumeration --------------------------------------------------------------


def _combos(m, k, cap):
    count = math.comb(m, k)
    if count > cap:
        raise CapExceeded(count, cap)
    return count, itertools.combinations(range(m), k)


def _first_max(values, tol=TIE_TOL):
    values = np.asarray(values, dtype=float)
    best = values.max()
    return int(np.flatnonzero(values >= best - tol)[0])


def _chunks(it, size):
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def opt_coverage_bruteforce(data, k: int, cap: int = DEFAULT_CAP) -> OptResult:
    """Exact OPT_k for coverage, lexicographically first witness."""
    m = data.m
    if k == 0:
        return OptResult(0.0, Committee((), 0), 1)
    count, combos = _combos(m, k, cap)
    if isinstance(data, BinaryOutcomeMatrix):
        bits = data.bits.astype(bool)
        n = max(data.n, 1)
        size = max(1, 2_000_000 // max(n * k, 1))
        best_val, best_S = -1, None
        for block in _chunks(combos, size):
            counts = bits[block].any(axis=1).sum(axis=1)
            i = int(np.argmax(counts))
            if counts[i] > best_val:
                best_val, best_S = int(counts[i]), tuple(block[i])
        return OptResult(best_val / n if data.n else 0.0, Committee(best_S, k), count)
    best_val, best_S = -np.inf, None
    for S in combos:
        v = data.coverage(S)
        if v > best_val + TIE_TOL:
            best_val, best_S = v, S
    return OptResult(float(best_val), Committee(best_S, k), count)


def _theta_block(profile: RankingProfile, block: np.ndarray) -> np.ndarray:
    ranks = profile.ranks
    best = ranks[:, block].min(axis=2)  # n x c
    g = np.einsum("t,tcx->cx", profile.weights, (best[:, :, None] <= ranks[:, None, :]).astype(float))
    rows = np.arange(block.shape[0])[:, None]
    g[rows, block] = np.inf
    return g.min(axis=1)


def theta_values(data, committees: np.ndarray) -> np.ndarray:
    """theta for each row of a (count, size) committee array."""
    committees = np.asarray(committees, dtype=np.int64)
    if isinstance(data, RankingProfile):
        out = []
        size = max(1, 4_000_000 // max(data.n * data.m, 1))
        for i in range(0, committees.shape[0], size):
            out.append(_theta_block(data, committees[i : i + size]))
        return np.concatenate(out) if out else np.zeros(0)
    return np.array([theta(data, tuple(S)) for S in committees])


def opt_theta_bruteforce(data, k: int, cap: int = DEFAULT_CAP) -> OptResult:
    m = data.m
    if not 1 <= k < m:
        raise ValueError(f"need 1 <= k < m, got k={k}, m={m}")
    count, combos = _combos(m, k, cap)
    best_val, best_S = -np.inf, None
    for block in _chunks(combos, 20_000):
        vals = theta_values(data, block)
        i = _first_max(vals)
        if vals[i] > best_val + TIE_TOL:
            best_val, best_S = float(vals[i]), tuple(block[i])
    return OptResult(best_val, Committee(best_S, k), count)


def opt_phi_bruteforce(data, k: int, lam: RivalWeights, cap: int = DEFAULT_CAP) -> OptResult:
    m = data.m
    count, combos = _combos(m, k, cap)
    best_val, best_S = -np.inf, None
    for S in combos:
        v = phi(data, S, lam)
        if v > best_val + TIE_TOL:
            best_val, best_S = v, S
    return OptResult(float(best_val), Committee(best_S, k), count)


# -- structure ----------------------------------------------------------------


def _members(mask, m):
    return tuple(c for c in range(m) if mask >> c & 1)


def check_submodularity(f: Callable, m: int, tol: float = 1e-12) -> Pass | Witness:
    """Exhaustively check a set function on subsets of range(m).

    ``f`` maps a sorted member tuple to a value, or to None where undefined;
    undefined sets are skipped. Checks normalization, then monotonicity, then
    diminishing returns, and reports the first violation in mask order.
    """
    if m > 6:
        raise ValueError("exhaustive check supports m <= 6")
    full = 1 << m
    vals = [f(_members(mask, m)) for mask in range(full)]
    checked = 0
    if vals[0] is not None and abs(vals[0]) > tol:
        return Witness("normalized", (), (), None, (vals[0],))
    for mask in range(full):
        for x in range(m):
            if mask >> x & 1:
                continue
            a, b = vals[mask], vals[mask | 1 << x]
            if a is None or b is None:
                continue
            checked += 1
            if b < a - tol:
                return Witness("monotone", _members(mask, m), _members(mask | 1 << x, m), x, (a, b))
    for S in range(full):
        for R in range(full):
            if R == S or R & S != S:
                continue
            for x in range(m):
                if R >> x & 1:
                    continue
                parts = (vals[S], vals[S | 1 << x], vals[R], vals[R | 1 << x])
                if any(p is None for p in parts):
                    continue
                checked += 1
                gain_S = parts[1] - parts[0]
                gain_R = parts[3] - parts[2]
                if gain_S < gain_R - tol:
                    return Witness("diminishing", _members(S, m), _members(R, m), x, (gain_S, gain_R))
    return Pass(checked)
