"""Command-line entry points: gen, opt, select, audit, sweep."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import binary_select as bsel
from . import ordinal_select as osel
from .core import (
    BinaryOutcomeMatrix, CapExceeded, Committee, DataError, Exhausted, QueryLedger,
    RankingProfile, RivalWeights, SelectionResult,
)
from .exact import coverage, lottery_value, opt_coverage_bruteforce, opt_theta_bruteforce, theta
from .instances import GeneratorSpec, build_generator, load_instance, materialize, save_instance, train_test_split
from .oracles import EmpiricalSource, GenerativeSource

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CAP = 0, 2, 3, 4

BINARY_METHODS = (
    "erm_exhaustive", "greedy_full_elicitation", "adaptive_fail_greedy",
    "top_k", "sampled_erm", "uniform_greedy", "ucb_greedy",
)
ORDINAL_METHODS = (
    "ordinal_erm", "weighted_ordinal_fail_greedy", "minimax_wrapper",
    "ptas_theta", "borda_top_k", "sampled_erm_theta",
)
METHODS = BINARY_METHODS + ORDINAL_METHODS
ALIASES = {
    "erm": "erm_exhaustive", "greedy": "greedy_full_elicitation", "afg": "adaptive_fail_greedy",
    "wofg": "weighted_ordinal_fail_greedy", "minimax": "minimax_wrapper",
    "ptas": "ptas_theta", "borda": "borda_top_k",
}

REPORT_FIELDS = (
    "method", "instance", "k", "epsilon", "delta", "param", "seed",
    "q_cand", "q_eval", "q_rank", "draws", "value_train", "value_test",
    "committee", "status", "wall_time",
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    method: str
    k: int
    instance: dict | None = None
    data: str | None = None
    epsilon: float = 0.1
    delta: float = 0.1
    seed: int = 0
    budget: int | None = None
    N: int | None = None
    gamma: float = 0.5
    n_tasks: int = 1000
    train_fraction: float = 0.75
    rival_audit_mode: str = "full"
    c_R: float = 8.0
    R: int | None = None
    tentative_pairs: int | None = None
    max_rounds_per_step: int | None = 10_000
    timing: bool = False

    def __post_init__(self):
        self.method = ALIASES.get(self.method, self.method)
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if (self.instance is None) == (self.data is None):
            raise ConfigError("give exactly one of 'instance' (generator spec) or 'data' (CSV path)")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k must be a positive integer")
        if not 0 < self.epsilon:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.rival_audit_mode not in ("full", "sampled"):
            raise ConfigError("rival_audit_mode must be 'full' or 'sampled'")
        if self.method in ("uniform_greedy", "ucb_greedy") and self.budget is None:
            raise ConfigError(f"{self.method} needs a budget")
        if self.method in ("sampled_erm", "sampled_erm_theta") and self.N is None:
            raise ConfigError(f"{self.method} needs N")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def param(self):
        if self.method in ("uniform_greedy", "ucb_greedy"):
            return self.budget
        if self.method.startswith("sampled_erm"):
            return self.N
        if self.method == "ptas_theta":
            return self.gamma
        return ""


@dataclass
class ReportRow:
    method: str
    instance: str
    k: int
    epsilon: float
    delta: float
    param: object
    seed: int
    q_cand: int = 0
    q_eval: int = 0
    q_rank: int = 0
    draws: int = 0
    value_train: float | str = ""
    value_test: float | str = ""
    committee: str = ""
    status: str = "ok"
    wall_time: float | str = ""

    def as_list(self):
        out = []
        for name in REPORT_FIELDS:
            v = getattr(self, name)
            out.append(f"{v:.6f}" if isinstance(v, float) and name.startswith("value") else v)
        return out


# -- instance handling ------------------------------------------------------------


def _instance_name(cfg: RunConfig) -> str:
    if cfg.data is not None:
        return Path(cfg.data).stem
    return cfg.instance.get("kind", "?")


def load_split(cfg: RunConfig):
    """Finite train/test instances for a run."""
    if cfg.data is not None:
        data = load_instance(cfg.data)
    else:
        spec = GeneratorSpec(cfg.instance["kind"], cfg.instance.get("params", {}), cfg.instance.get("seed", 0))
        made = build_generator(spec)
        data = materialize(made, cfg.n_tasks) if isinstance(made, GenerativeSource) else made
    n = data.n
    train_idx, test_idx = train_test_split(n, cfg.train_fraction, cfg.seed)
    if isinstance(data, BinaryOutcomeMatrix):
        return data, data.columns(train_idx), data.columns(test_idx) if test_idx.size else None
    test = data.rows(test_idx) if test_idx.size else None
    return data, data.rows(train_idx), test


def _value(data, S, ordinal):
    if data is None:
        return ""
    if ordinal:
        return theta(data, S) if 0 < len(S) < data.m else 1.0
    return coverage(data, S)


def _offline(meth, train, k, cfg):
    """Full-information baselines; the caller bills their reads through the source."""
    reads = QueryLedger()
    if meth == "top_k":
        S = bsel.top_k_baseline(train, k, reads)
    elif meth == "sampled_erm":
        S = bsel.sampled_erm_baseline(train, k, cfg.N, cfg.seed, reads)
    elif meth == "ptas_theta":
        S = osel.ptas_theta(train, k, cfg.gamma)
    elif meth == "borda_top_k":
        S = osel.borda_top_k(train, k, reads)
    else:
        S = osel.sampled_erm_theta(train, k, cfg.N, cfg.seed, reads)
    return S, reads


def run_config(cfg: RunConfig) -> ReportRow:
    """Execute one configured run and return its report row."""
    start = time.perf_counter()
    _, train, test = load_split(cfg)
    ordinal = cfg.method in ORDINAL_METHODS
    if ordinal != isinstance(train, RankingProfile):
        kind = "ranking profile" if ordinal else "binary matrix"
        raise ConfigError(f"method {cfg.method} needs a {kind}")
    m, k = train.m, cfg.k
    if k > m or (ordinal and k >= m):
        raise ConfigError(f"k={k} is out of range for m={m}")
    source = EmpiricalSource(train, cfg.seed)
    ledger = QueryLedger()
    eps, delta = cfg.epsilon, cfg.delta
    value_override = None
    meth = cfg.method
    if meth == "erm_exhaustive":
        res = bsel.erm_exhaustive(source, m, k, min(eps, 1.0), delta)
    elif meth == "greedy_full_elicitation":
        res = bsel.greedy_full_elicitation(source, m, k, min(eps, 1.0), delta)
    elif meth == "adaptive_fail_greedy":
        res = bsel.adaptive_fail_greedy(source, m, k, eps, delta)
    elif meth == "uniform_greedy":
        res = bsel.uniform_greedy_baseline(source, m, k, cfg.budget)
    elif meth == "ucb_greedy":
        res = bsel.ucb_greedy_baseline(source, m, k, cfg.budget)
    elif meth == "ordinal_erm":
        res = osel.ordinal_erm(source, m, k, min(eps, 1.0), delta)
    elif meth == "weighted_ordinal_fail_greedy":
        res = osel.weighted_ordinal_fail_greedy(
            source, m, k, RivalWeights.uniform(m), eps, delta,
            tentative_pairs=cfg.tentative_pairs, max_rounds_per_step=cfg.max_rounds_per_step,
        )
    elif meth == "minimax_wrapper":
        mm = osel.minimax_wrapper(
            source, m, k, min(eps, 1.0), delta, cfg.rival_audit_mode, cfg.c_R, cfg.R,
            tentative_pairs=cfg.tentative_pairs, max_rounds_per_step=cfg.max_rounds_per_step,
        )
        res = SelectionResult(mm.union, mm.ledger)
        members = [S.members for S in mm.lottery.committees]
        value_override = (lottery_value(train, members), lottery_value(test, members) if test is not None else "")
    else:
        committee, reads = _offline(meth, train, k, cfg)
        for cost in ("cand", "eval", "rank"):
            source.bill(ledger, cost, getattr(reads, f"q_{cost}"))
        ledger.charge("draw", reads.draws)
        res = SelectionResult(committee, ledger)
    S = res.committee.members
    if value_override is None:
        v_train, v_test = _value(train, S, ordinal), _value(test, S, ordinal)
    else:
        v_train, v_test = value_override
    led = res.ledger
    if led.total != source.oracle_calls:
        raise RuntimeError(f"ledger total {led.total} differs from {source.oracle_calls} oracle calls")
    labels = res.committee.labels(train.candidate_labels)
    return ReportRow(
        meth, _instance_name(cfg), k, eps, delta, cfg.param, cfg.seed,
        led.q_cand, led.q_eval, led.q_rank, led.draws, v_train, v_test,
        " ".join(labels), "ok", round(time.perf_counter() - start, 4) if cfg.timing else "",
    )


# -- reports ------------------------------------------------------------------------


def write_rows(rows, path, append=False) -> None:
    path = Path(path)
    exists = path.exists() and path.stat().st_size > 0
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not (append and exists):
            w.writerow(REPORT_FIELDS)
        for r in rows:
            w.writerow(r.as_list())


def q_bucket(q: float, per_decade: int = 1) -> float:
    if q <= 0:
        return 0.0
    return math.floor(per_decade * math.log10(q) + 0.5) / per_decade


def frontier(rows, per_decade: int = 1):
    """Mean test value and normal-approximation 95% CI per (method, log10 Q bucket)."""
    groups: dict[tuple, list] = {}
    for r in rows:
        if r.status != "ok" or r.value_test == "":
            continue
        q = r.q_cand + r.q_eval + r.q_rank
        groups.setdefault((r.method, q_bucket(q, per_decade)), []).append((q, float(r.value_test)))
    out = []
    for (method, bucket), vals in sorted(groups.items()):
        qs = np.array([v[0] for v in vals], dtype=float)
        ys = np.array([v[1] for v in vals])
        half = 1.96 * ys.std(ddof=1) / math.sqrt(len(ys)) if len(ys) > 1 else 0.0
        out.append((method, bucket, len(ys), qs.mean(), ys.mean(), half))
    return out


def write_frontier(table, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "log10_q_bucket", "runs", "mean_q", "mean_value_test", "ci95_half_width"])
        for method, bucket, n, q, y, h in table:
            w.writerow([method, f"{bucket:.1f}", n, f"{q:.1f}", f"{y:.6f}", f"{h:.6f}"])


# -- sweep ------------------------------------------------------------------------


def expand_grid(sweep: dict) -> list[dict]:
    """Cartesian product of ``grid`` lists over ``base``, one config per seed."""
    base = dict(sweep.get("base", {}))
    grid = sweep.get("grid", {})
    seeds = sweep.get("seeds", 1)
    master = sweep.get("master_seed", 0)
    keys = sorted(grid)
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    configs = []
    index = 0
    for cell in cells:
        for _ in range(seeds):
            cfg = {**base, **cell}
            state = np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1)[0]
            cfg["seed"] = int(state)
            configs.append(cfg)
            index += 1
    return configs


def _safe_run(cfg_dict: dict) -> ReportRow:
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        return run_config(cfg)
    except (Exhausted, CapExceeded, ValueError, TypeError) as exc:
        return ReportRow(cfg.method, _instance_name(cfg), cfg.k, cfg.epsilon, cfg.delta, cfg.param, cfg.seed,
                         status=f"error: {type(exc).__name__}")


def run_sweep(sweep: dict, workers: int = 1) -> list[ReportRow]:
    configs = expand_grid(sweep)
    for c in configs:
        RunConfig.from_dict(c)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_safe_run, configs))
    else:
        rows = [_safe_run(c) for c in configs]
    return sorted(rows, key=lambda r: (r.method, str(r.param), r.epsilon, r.k, r.seed))


# -- commands -------------------------------------------------------------------


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def cmd_gen(args) -> int:
    spec = _read_json(args.spec) if args.spec else {"kind": args.kind, "params": json.loads(args.params)}
    gen = build_generator(GeneratorSpec(spec["kind"], spec.get("params", {}), spec.get("seed", args.seed)))
    data = materialize(gen, args.n) if isinstance(gen, GenerativeSource) else gen
    save_instance(data, args.out)
    print(f"wrote {data.m} candidates x {data.n} tasks to {args.out}")
    return EXIT_OK


def cmd_opt(args) -> int:
    data = load_instance(args.data)
    if args.objective == "theta":
        if not isinstance(data, RankingProfile):
            raise ConfigError("theta needs a ranking profile")
        if not 1 <= args.k < data.m:
            raise ConfigError(f"theta needs 1 <= k < m (m={data.m})")
        res = opt_theta_bruteforce(data, args.k, args.cap)
    else:
        if not isinstance(data, BinaryOutcomeMatrix):
            raise ConfigError("coverage needs a binary matrix")
        res = opt_coverage_bruteforce(data, args.k, args.cap)
    labels = res.witness.labels(data.candidate_labels)
    print(f"{res.value:.6f} {{{','.join(labels)}}}")
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = RunConfig.from_dict(_read_json(args.config))
    row = run_config(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    w.writerow(row.as_list())
    sys.stdout.write(buf.getvalue())
    if args.out:
        write_rows([row], args.out, append=True)
    return EXIT_OK


def cmd_audit(args) -> int:
    data = load_instance(args.data)
    if not isinstance(data, RankingProfile):
        raise ConfigError("audits need a ranking profile")
    names = data.candidate_labels or tuple(str(i) for i in range(data.m))
    try:
        S = [names.index(x) for x in args.committee.split(",")]
    except ValueError:
        raise ConfigError(f"unknown candidate in {args.committee!r}") from None
    source = EmpiricalSource(data, args.seed)
    if args.mode == "fixed":
        rep = audit_mod.audit_theta_fixed(source, S, args.epsilon, args.delta)
    else:
        rep = audit_mod.gap_adaptive_audit(source, S, args.epsilon, args.delta)
    lo, hi = rep.interval
    print(f"theta_hat={rep.theta_hat:.6f} interval=[{lo:.6f},{hi:.6f}] comparisons={rep.ledger.q_eval}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    sweep = _read_json(args.config)
    rows = run_sweep(sweep, args.workers)
    write_rows(rows, args.out)
    per_decade = 2 if sweep.get("bucket", "decade") == "half-decade" else 1
    write_frontier(frontier(rows, per_decade), Path(args.out).with_suffix(".frontier.csv"))
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="committee-select", description="Select expert committees under query budgets.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="materialize a synthetic instance to CSV")
    g.add_argument("--spec", help="JSON generator spec file")
    g.add_argument("--kind", help="generator kind (when no spec file)")
    g.add_argument("--params", default="{}", help="JSON parameters for --kind")
    g.add_argument("--n", type=int, default=1000, help="tasks to draw for generative kinds")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    o = sub.add_parser("opt", help="exact optimum by enumeration")
    o.add_argument("data")
    o.add_argument("--k", type=int, required=True)
    o.add_argument("--objective", choices=("coverage", "theta"), default="coverage")
    o.add_argument("--cap", type=int, default=10**7)
    o.set_defaults(func=cmd_opt)

    s = sub.add_parser("select", help="run one configured method")
    s.add_argument("config", help="JSON run config")
    s.add_argument("--out", help="append the report row to this CSV")
    s.set_defaults(func=cmd_select)

    a = sub.add_parser("audit", help="audit theta of a committee")
    a.add_argument("data")
    a.add_argument("--committee", required=True, help="comma-separated candidate labels")
    a.add_argument("--epsilon", type=float, default=0.05)
    a.add_argument("--delta", type=float, default=0.1)
    a.add_argument("--mode", choices=("fixed", "gap"), default="gap")
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_audit)

    w = sub.add_parser("sweep", help="run a parameter grid and write report CSVs")
    w.add_argument("config", help="JSON sweep config with base, grid, seeds, master_seed")
    w.add_argument("--out", required=True)
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
