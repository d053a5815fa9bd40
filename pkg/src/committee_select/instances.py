"""Synthetic instances, their closed-form laws, CSV interchange and splits."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BinaryOutcomeMatrix, Committee, DataError, RankingProfile, RivalWeights, as_members, competition_ranks
from .oracles import BINARY, RANKING, EmpiricalSource, GenerativeSource

log = logging.getLogger(__name__)

GENERATOR_KINDS = ("bernoulli_product", "planted_gap", "planted_gap_ordinal", "cyclic", "bit_block", "nonsubmodular4")


class MalformedCellError(DataError):
    pass


class RaggedRowError(DataError):
    pass


class DuplicateLabelError(DataError):
    pass


class MissingCellError(DataError):
    pass


def _check_probs(name, p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or ((p < 0) | (p > 1)).any() or np.isnan(p).any():
        raise ValueError(f"{name} must be probabilities in [0, 1]")
    return p


# -- laws ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BernoulliProductLaw:
    """Independent solve indicators with per-candidate biases."""

    biases: np.ndarray

    @property
    def m(self) -> int:
        return len(self.biases)

    def coverage(self, S) -> float:
        members = list(as_members(S))
        return float(1.0 - np.prod(1.0 - self.biases[members]))

    def rescue_rate(self, c: int, S) -> float:
        if self.coverage(S) >= 1.0:
            return 0.0
        return float(self.biases[c])

    def sample(self, U):
        return (U < self.biases).astype(np.int8)


@dataclass(frozen=True, eq=False)
class BitBlockLaw:
    """Winners block (bit 1) above losers block (bit 0), uniform order within blocks."""

    biases: np.ndarray

    @property
    def m(self) -> int:
        return len(self.biases)

    def _count_dist(self, members):
        # distribution of the number of members whose bit is 1
        dist = np.array([1.0])
        for p in self.biases[list(members)]:
            dist = np.concatenate([dist * (1 - p), [0.0]]) + np.concatenate([[0.0], dist * p])
        return dist

    def cover_probs(self, S) -> np.ndarray:
        members = as_members(S)
        size = len(members)
        p = self.biases
        out = np.ones(self.m)
        if size == 0:
            out[:] = 0.0
            return out
        dist = self._count_dist(members)
        s1 = np.arange(size + 1)
        in_winners = float(dist @ (s1 / (s1 + 1)))
        none_win = float(dist[0])
        in_losers = (1.0 - none_win) + none_win * size / (size + 1)
        g = p * in_winners + (1 - p) * in_losers
        out[:] = g
        out[list(members)] = 1.0
        return out

    def pairwise(self) -> np.ndarray:
        """P[i above j] for every ordered pair (diagonal left at 1/2)."""
        p = self.biases
        return p[:, None] * (1 - p[None, :]) + 0.5 * (p[:, None] * p[None, :] + np.outer(1 - p, 1 - p))

    def sample(self, U):
        m = self.m
        bits = U[:, :m] < self.biases
        key = (~bits).astype(float) + U[:, m:]
        return (np.argsort(np.argsort(key, axis=1), axis=1) + 1).astype(np.int16)


# -- generators ---------------------------------------------------------------


def gen_bernoulli_product(m: int, biases, seed=0) -> GenerativeSource:
    p = _check_probs("biases", biases)
    if p.shape[0] != m:
        raise ValueError("need one bias per candidate")
    law = BernoulliProductLaw(p)
    return GenerativeSource(BINARY, m, law.sample, m, seed, law=law, meta={"kind": "bernoulli_product"})


def _planted_biases(m, star, gaps, first_arm):
    arms = list(range(first_arm, m))
    if star not in arms:
        raise ValueError(f"star must be one of the arms {arms}")
    gaps = np.asarray(gaps, dtype=float)
    if gaps.shape[0] != len(arms) - 1:
        raise ValueError(f"need {len(arms) - 1} gaps, one per non-star arm")
    if ((gaps <= 0) | (gaps > 0.5)).any():
        raise ValueError("gaps must lie in (0, 1/2]")
    b = np.zeros(m)
    b[star] = 0.5
    others = [a for a in arms if a != star]
    b[others] = 0.5 - gaps
    return b, arms


def gen_planted_gap(m: int, star: int, gaps, seed=0) -> GenerativeSource:
    """Failure-conditioned planted-gap instance.

    Candidate 0 is the frozen committee and never solves anything, so every
    task is a failure; arms 1..m-1 solve with rate 1/2 (star) or 1/2 - gap.
    """
    b, arms = _planted_biases(m, star, gaps, 1)
    src = gen_bernoulli_product(m, b, seed)
    src.meta.update(kind="planted_gap", frozen=Committee((0,)), arms=tuple(arms), star=star)
    return src


def gen_planted_gap_ordinal(m: int, star: int, gaps, seed=0) -> GenerativeSource:
    """Pairwise analogue of :func:`gen_planted_gap` built around a pivot rival.

    Candidate 0 (the frozen committee) is always ranked last and candidate 1 is
    the pivot; each arm 2..m-1 lands above the pivot independently with its
    rescue rate. With all rival weight on the pivot, every pair is a failure.
    """
    b, arms = _planted_biases(m, star, gaps, 2)

    def sample(U):
        above = U[:, :m] < b
        key = np.where(above, U[:, m:], 1.5 + 0.5 * U[:, m:])
        key[:, 1] = 1.0
        key[:, 0] = 3.0
        return (np.argsort(np.argsort(key, axis=1), axis=1) + 1).astype(np.int16)

    meta = dict(kind="planted_gap_ordinal", frozen=Committee((0,)), pivot=1, arms=tuple(arms), star=star,
                rival=RivalWeights.point(m, 1), rescue=b)
    return GenerativeSource(RANKING, m, sample, 2 * m, seed, meta=meta)


def gen_bitblock_ranking(m: int, biases, seed=0) -> GenerativeSource:
    p = _check_probs("biases", biases)
    if p.shape[0] != m:
        raise ValueError("need one bias per candidate")
    law = BitBlockLaw(p)
    return GenerativeSource(RANKING, m, law.sample, 2 * m, seed, law=law, meta={"kind": "bit_block"})


def gen_cyclic_profile(N: int) -> RankingProfile:
    if N < 3:
        raise ValueError("cyclic profile needs N >= 3")
    orders = [[(i + j) % N for j in range(N)] for i in range(N)]
    return RankingProfile.from_orders(orders)


def nonsubmodular4() -> RankingProfile:
    """Four candidates a, b, c, d with weight 2/3 on b>a>d>c and 1/3 on c>a>d>b."""
    a, b, c, d = range(4)
    return RankingProfile.from_orders(
        [[b, a, d, c], [c, a, d, b]], weights=[2 / 3, 1 / 3], candidate_labels=("a", "b", "c", "d")
    )


def random_matrix(m: int, n: int, rng, density: float | None = None) -> BinaryOutcomeMatrix:
    p = rng.uniform(0.1, 0.6) if density is None else density
    return BinaryOutcomeMatrix((rng.random((m, n)) < p).astype(np.int8))


def random_profile(m: int, n: int, rng, weak: bool = False, weighted: bool = False) -> RankingProfile:
    if weak:
        scores = rng.integers(0, max(2, m // 2), size=(m, n))
        ranks = competition_ranks(scores).T
    else:
        ranks = np.argsort(np.argsort(rng.random((n, m)), axis=1), axis=1) + 1
    w = None
    if weighted:
        w = rng.random(n) + 0.05
        w = w / w.sum()
    return RankingProfile(ranks, w)


@dataclass
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")


def build_generator(spec: GeneratorSpec):
    """A source (generative kinds) or a finite profile (cyclic, nonsubmodular4)."""
    p = spec.params
    if spec.kind == "bernoulli_product":
        biases = p.get("biases")
        if biases is None:
            rng = np.random.default_rng(spec.seed)
            biases = rng.uniform(p.get("low", 0.05), p.get("high", 0.6), size=p["m"])
        return gen_bernoulli_product(len(biases), biases, spec.seed)
    if spec.kind == "bit_block":
        biases = p.get("biases")
        if biases is None:
            rng = np.random.default_rng(spec.seed)
            biases = rng.uniform(p.get("low", 0.1), p.get("high", 0.9), size=p["m"])
        return gen_bitblock_ranking(len(biases), biases, spec.seed)
    if spec.kind == "planted_gap":
        return gen_planted_gap(p["m"], p["star"], p["gaps"], spec.seed)
    if spec.kind == "planted_gap_ordinal":
        return gen_planted_gap_ordinal(p["m"], p["star"], p["gaps"], spec.seed)
    if spec.kind == "cyclic":
        return gen_cyclic_profile(p["N"])
    return nonsubmodular4()


def materialize(source: GenerativeSource, n: int):
    """Draw ``n`` tasks from a generative source into a finite instance."""
    _, rows = source.draw(n)
    if source.kind == BINARY:
        return BinaryOutcomeMatrix(rows.T.copy(), task_labels=tuple(f"t{i}" for i in range(n)))
    return RankingProfile(rows.astype(np.int64), task_labels=tuple(f"t{i}" for i in range(n)))


def source_for(data, seed=0):
    return EmpiricalSource(data, seed)


# -- CSV ----------------------------------------------------------------------


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise RaggedRowError(f"{path}: row {i} has {len(r)} fields, expected {width}")
    return rows


def _unique(labels, what, path):
    if len(set(labels)) != len(labels):
        dup = sorted({x for x in labels if labels.count(x) > 1})
        raise DuplicateLabelError(f"{path}: duplicate {what} labels {dup}")
    return tuple(labels)


def load_binary_csv(path) -> BinaryOutcomeMatrix:
    """Header ``id,<task labels>``; one row per candidate with 0/1 cells."""
    rows = _read_rows(path)
    tasks = _unique(rows[0][1:], "task", path)
    cands = _unique([r[0] for r in rows[1:]], "candidate", path)
    bits = np.zeros((len(cands), len(tasks)), dtype=np.int8)
    for i, r in enumerate(rows[1:]):
        for j, cell in enumerate(r[1:]):
            cell = cell.strip()
            if cell not in ("0", "1"):
                raise MalformedCellError(f"{path}: row {i + 1} column {j + 1}: expected 0 or 1, got {cell!r}")
            bits[i, j] = int(cell)
    return BinaryOutcomeMatrix(bits, cands, tasks)


def save_binary_csv(matrix: BinaryOutcomeMatrix, path) -> None:
    cands = matrix.candidate_labels or tuple(f"c{i}" for i in range(matrix.m))
    tasks = matrix.task_labels or tuple(f"t{j}" for j in range(matrix.n))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *tasks])
        for c, row in zip(cands, matrix.bits):
            w.writerow([c, *row.tolist()])


def load_scores_csv(path) -> RankingProfile:
    """Dense score matrix (candidates x tasks) converted to competition ranks per task."""
    rows = _read_rows(path)
    tasks = _unique(rows[0][1:], "task", path)
    cands = _unique([r[0] for r in rows[1:]], "candidate", path)
    scores = np.zeros((len(cands), len(tasks)))
    for i, r in enumerate(rows[1:]):
        for j, cell in enumerate(r[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("nan", "na"):
                raise MissingCellError(f"{path}: row {i + 1} column {j + 1}: missing score")
            try:
                v = float(cell)
            except ValueError:
                raise MalformedCellError(f"{path}: row {i + 1} column {j + 1}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise MalformedCellError(f"{path}: row {i + 1} column {j + 1}: non-finite score")
            scores[i, j] = v
    return RankingProfile(competition_ranks(scores).T, None, cands, tasks)


def load_rank_csv(path) -> RankingProfile:
    """Header ``task,weight,<candidate labels>``; one ranking per row."""
    rows = _read_rows(path)
    header = rows[0]
    if header[:2] != ["task", "weight"]:
        raise DataError(f"{path}: rank file header must start with task,weight")
    cands = _unique(header[2:], "candidate", path)
    tasks = _unique([r[0] for r in rows[1:]], "task", path)
    ranks = np.zeros((len(tasks), len(cands)), dtype=np.int64)
    weights = np.zeros(len(tasks))
    for i, r in enumerate(rows[1:]):
        try:
            weights[i] = float(r[1])
            ranks[i] = [int(x) for x in r[2:]]
        except ValueError:
            raise MalformedCellError(f"{path}: row {i + 1}: malformed weight or rank") from None
    total = weights.sum()
    if total > 0 and abs(total - 1.0) <= 1e-9:
        weights = weights / total
    return RankingProfile(ranks, weights, cands, tasks)


def save_rank_csv(profile: RankingProfile, path) -> None:
    cands = profile.candidate_labels or tuple(f"c{i}" for i in range(profile.m))
    tasks = profile.task_labels or tuple(f"t{j}" for j in range(profile.n))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task", "weight", *cands])
        for t, wt, row in zip(tasks, profile.weights, profile.ranks):
            w.writerow([t, repr(float(wt)), *row.tolist()])


def load_instance(path):
    """Dispatch on the header: rank files start with ``task,weight``."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header[:2] == ["task", "weight"]:
        return load_rank_csv(path)
    try:
        return load_binary_csv(path)
    except MalformedCellError:
        return load_scores_csv(path)


def save_instance(data, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, BinaryOutcomeMatrix):
        save_binary_csv(data, path)
    else:
        save_rank_csv(data, path)


# -- splits -------------------------------------------------------------------


def train_test_split(n: int, fraction: float, seed=0, strata=None) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic split of range(n); proportional within strata when given."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    if strata is None:
        groups = {None: np.arange(n)}
    else:
        if len(strata) != n:
            raise ValueError("need one stratum label per item")
        labels = np.asarray(strata)
        groups = {s: np.flatnonzero(labels == s) for s in sorted(set(labels.tolist()), key=str)}
    train, test = [], []
    for label, idx in groups.items():
        perm = idx[rng.permutation(idx.shape[0])]
        size = perm.shape[0]
        if size < 2:
            log.warning("stratum %r has %d item(s); assigned wholly to train", label, size)
            train.append(perm)
            continue
        n_train = min(max(math.floor(fraction * size + 0.5), 1), size - 1)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return _joined(train), _joined(test)


def _joined(parts):
    return np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)
