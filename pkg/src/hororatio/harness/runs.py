"""Experiment runners behind the CLI subcommands.

Every sample draws its randomness from its own stream, derived from the
master seed and the sample index, and results are gathered in index order.
The worker count therefore changes wall time only, never the bytes written.
"""

from __future__ import annotations

import io
import logging
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..actions import FiniteAction, NonSingularAction, registry_get
from ..boundary import BoundaryPrefix, CylinderFunction, act, geodesic_J, sample_boundary, tail_cocycle
from ..free_group import ReducedWord, letter_token
from ..relation import (
    HoroballSequence,
    SkewSequence,
    accumulate,
    audit_maximal,
    check_properties,
    interval_surrogate,
    random_automorphism,
    random_hierarchical_model,
    skew_product_model,
)
from ..relation.audit import SLACK
from .config import ConfigError, ExperimentConfig

__all__ = [
    "stream_seeds",
    "fmt",
    "write_csv",
    "run_ratio_convergence",
    "run_audit_suite",
    "run_counterexample_j",
    "RATIO_COLUMNS",
    "AUDIT_COLUMNS",
    "J_COLUMNS",
]

log = logging.getLogger(__name__)

RATIO_COLUMNS = [
    "sample_id", "n", "sum_u", "sum_v", "ratio", "running_max", "reference", "abs_dev", "status",
]
AUDIT_COLUMNS = [
    "section", "subject", "name", "param", "lhs", "mid", "rhs", "passed", "expected", "detail",
]
J_COLUMNS = ["pair_id", "move_id", "move", "window_before", "window_after", "equal"]


# plumbing


def stream_seeds(master: int, index: int, count: int = 2) -> list[int]:
    """Independent 64-bit seeds for sample ``index`` of a run seeded by ``master``."""
    ss = np.random.SeedSequence(master, spawn_key=(index,))
    return [int(s) for s in ss.generate_state(count, np.uint64)]


def _rng(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=(index,)))


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path, comments: Iterable[tuple[str, str]], columns: Sequence[str], rows) -> None:
    buf = io.StringIO(newline="")
    for key, val in comments:
        buf.write(f"# {key}: {val}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for x in row:
            cell = fmt(x)
            if any(ch in cell for ch in ',"\n'):
                cell = '"' + cell.replace('"', '""') + '"'
            cells.append(cell)
        buf.write(",".join(cells) + "\n")
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def _load_action(cfg: ExperimentConfig) -> Optional[NonSingularAction]:
    name = cfg.action_name
    if name == "none":
        return None
    if name == "finite_model":
        if not cfg.action_arg:
            raise ConfigError("finite_model needs an action file: action = finite_model:PATH")
        action = registry_get(name, path=cfg.resolve(cfg.action_arg))
    elif name == "boundary_pair":
        action = registry_get(name, rank=cfg.rank)
    elif name == "trivial":
        action = registry_get(name, rank=cfg.rank)
    else:
        try:
            action = registry_get(name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    if action.rank is not None and action.rank != cfg.rank:
        raise ConfigError(f"action {name} has rank {action.rank}, config says {cfg.rank}")
    return action


# ratio convergence


def _scaled(cyl: CylinderFunction, c) -> CylinderFunction:
    if c == 1:
        return cyl
    table = cyl.table * c if not isinstance(c, Fraction) else np.array(
        [v * c for v in cyl.table.tolist()], dtype=object
    )
    return CylinderFunction(cyl.rank, cyl.depth, table)


def _exact_div(a, b):
    if isinstance(a, Rational) and isinstance(b, Rational):
        return Fraction(a) / Fraction(b)
    return float(a) / float(b)


@lru_cache(maxsize=8)
def _ratio_setup(cfg: ExperimentConfig):
    action = _load_action(cfg)
    u, v = cfg.u_spec, cfg.v_spec
    base = HoroballSequence(cfg.rank, shell=cfg.mode == "exploratory-sphere")
    if action is None:
        if not (u.xpart.is_const and v.xpart.is_const):
            raise ConfigError("boundary-only runs take constant x-parts")
        F = base
        fu, fv = _scaled(u.cylinder, u.xpart.param), _scaled(v.cylinder, v.xpart.param)
        if isinstance(v.xpart.param, float) or isinstance(u.xpart.param, float):
            fu = CylinderFunction(cfg.rank, fu.depth, fu.table.astype(float))
            fv = CylinderFunction(cfg.rank, fv.depth, fv.table.astype(float))
    else:
        F = SkewSequence(base, lambda b2, b: tail_cocycle(b2, b), action)
        fu, fv = u, v
    return action, F, fu, fv


def _reference(cfg: ExperimentConfig, action, x) -> tuple[Optional[object], str]:
    """Known or candidate limit of the ratio at a sample, with its kind."""
    if cfg.mode != "ball":
        return None, "none"
    u, v = cfg.u_spec, cfg.v_spec
    iu, iv = u.cylinder.integral(), v.cylinder.integral()
    name = cfg.action_name
    if name in ("none", "trivial"):
        if not (u.xpart.is_const and v.xpart.is_const):
            return None, "none"
        return _exact_div(iu * u.xpart.param, iv * v.xpart.param), "exact"
    if isinstance(action, FiniteAction):
        if not action.measure_preserving:
            return None, "none"
        orbit = next(o for o in action.even_orbits() if x in o)
        su = accumulate(u.xpart(y) * action.weights[y] for y in sorted(orbit))
        sv = accumulate(v.xpart(y) * action.weights[y] for y in sorted(orbit))
        return _exact_div(iu * su, iv * sv), "oracle"
    if name in ("so3_sphere", "sanov_plane"):
        xu, xv = u.xpart.integral(name), v.xpart.integral(name)
        if xu is None or xv is None or xv == 0:
            return None, "none"
        return float(iu) * xu / (float(iv) * xv), "candidate"
    return None, "none"


def _check_xparts(cfg: ExperimentConfig, action) -> None:
    for spec in (cfg.u_spec, cfg.v_spec):
        kind = spec.xpart.kind
        if kind == "table" and not (
            isinstance(action, FiniteAction) and len(spec.xpart.param) == action.size
        ):
            raise ConfigError("table x-parts need a finite_model action with one value per point")
        if kind == "cap" and cfg.action_name != "so3_sphere":
            raise ConfigError("cap x-parts are defined on the sphere only")
        if kind == "bump" and cfg.action_name not in ("so3_sphere", "sanov_plane"):
            raise ConfigError("bump x-parts need a Euclidean fibre")


def _reference_kind(cfg: ExperimentConfig) -> str:
    action = _load_action(cfg)
    x = action.sample_point(0)[0] if action is not None else 0
    return _reference(cfg, action, x)[1]


def _ratio_sample(job: tuple[ExperimentConfig, int]) -> list[list]:
    cfg, i = job
    action, F, fu, fv = _ratio_setup(cfg)
    s_base, s_fibre = stream_seeds(cfg.seed, i)
    xi = sample_boundary(cfg.rank, s_base)
    if action is None:
        point, x = xi, 0
    else:
        x, _ = action.sample_point(s_fibre)
        point = (xi, x)
    ref, _ = _reference(cfg, action, x)
    rows, best = [], None
    for n in range(cfg.n_max + 1):
        su = F.weighted_sum(fu, point, n)
        sv = F.weighted_sum(fv, point, n)
        if sv == 0:
            rows.append([i, n, su, sv, None, best, ref, None, "degenerate"])
            continue
        r = _exact_div(su, sv)
        best = abs(r) if best is None else max(best, abs(r))
        dev = None if ref is None else abs(float(r) - float(ref))
        rows.append([i, n, su, sv, r, best, ref, dev, "ok"])
    return rows


def run_ratio_convergence(cfg: ExperimentConfig, out, threads: int = 1) -> list[list]:
    """RATIO_n along skew-extended horoballs for ``cfg.samples`` seeded points."""
    action = _load_action(cfg)
    _check_xparts(cfg, action)
    jobs = [(cfg, i) for i in range(cfg.samples)]
    rows = [r for block in _map(_ratio_sample, jobs, threads) for r in block]
    degenerate = sum(1 for r in rows if r[-1] == "degenerate")
    if degenerate:
        log.warning("%d rows with a vanishing denominator", degenerate)
    comments = [
        ("subcommand", "ratio-converge"),
        ("claim", "no-claim" if cfg.mode == "exploratory-sphere" else "ball"),
        ("tolerance", fmt(action.tolerance) if action is not None else "0"),
        ("reference_kind", _reference_kind(cfg)),
        ("degenerate_rows", str(degenerate)),
    ] + cfg.describe()
    write_csv(out, comments, RATIO_COLUMNS, rows)
    return rows


# audit suite


def random_finite_action(rank: int, rng: np.random.Generator, k: int, *, preserving: bool = False) -> FiniteAction:
    perms = [rng.permutation(k).tolist() for _ in range(rank)]
    if preserving:
        weights = [Fraction(1, k)] * k
    else:
        weights = [Fraction(int(rng.integers(1, 6)), int(rng.integers(1, 6))) for _ in range(k)]
    return FiniteAction(weights, perms)


def _random_word(rank: int, rng: np.random.Generator, max_len: int) -> ReducedWord:
    length = int(rng.integers(0, max_len + 1))
    letters: list[int] = []
    while len(letters) < length:
        c = int(rng.integers(0, 2 * rank))
        if letters and c == letters[-1] ^ 1:
            continue
        letters.append(c)
    return ReducedWord(rank, tuple(letters))


def random_skew_model(rank: int, rng: np.random.Generator, max_points: int = 64):
    """A random nested base model times a random finite action, at most ``max_points`` points."""
    k = int(rng.integers(1, 5))
    n_base = int(rng.integers(1, max(1, max_points // k) + 1))
    n_base = min(n_base, 16)
    base = random_hierarchical_model(rng, n_base)
    action = random_finite_action(rank, rng, k)
    h = [_random_word(rank, rng, 4) for _ in range(n_base)]
    return skew_product_model(base, action, h)


def _audit_model(job: tuple[ExperimentConfig, int]) -> list[list]:
    cfg, i = job
    rng = _rng(cfg.seed, i)
    model = random_skew_model(cfg.rank, rng, cfg.max_points)
    P = model.size
    u = np.abs(rng.standard_normal(P)).tolist()
    v = rng.uniform(0.0, 2.0, P)
    v[rng.random(P) < 0.3] = 0.0
    if not v.any():
        v[int(rng.integers(P))] = 1.0
    v = v.tolist()
    w = model.weights
    scale = accumulate(u[b] * w[b] for b in range(P)) / accumulate(v[b] * w[b] for b in range(P))
    eps = (np.geomspace(1e-2, 1e2, cfg.eps_points) * scale).tolist()
    rows = []
    for r in audit_maximal(model, u, v, eps).weak:
        rows.append(["weak", f"model{i}", "weak_1_1", r.epsilon, r.lhs_mass, r.mid_bound,
                     r.l1_bound, r.passed, "pass", f"points={P}"])
    # u/v must lie in L^p(nu_v), so the strong audit only sees u where v > 0
    u_on_v = [a if b > 0 else 0.0 for a, b in zip(u, v)]
    for r in audit_maximal(model, u_on_v, v, [], p_values=cfg.p_values).lp:
        rows.append(["lp", f"model{i}", "lp_maximal", r.p, r.lhs, r.doob_rhs, r.rhs,
                     r.passed, "pass", "vacuous" if r.vacuous else f"ratio={r.lhs / r.rhs:.6g}" if r.rhs else ""])
    return rows


def _property_rows(subject: str, report, failing: Sequence[str] = ()) -> list[list]:
    return [
        ["property", subject, r.name, r.checks, None, None, None, r.passed,
         "fail" if r.name in failing else "pass", r.witness]
        for r in report.rows
    ]


def _horoball_properties(cfg: ExperimentConfig) -> list[list]:
    rng = _rng(cfg.seed, 10**6)
    r, N = cfg.rank, cfg.property_n_max
    F = HoroballSequence(r)
    points = [sample_boundary(r, s) for s in stream_seeds(cfg.seed, 10**6 + 1, cfg.property_points)]
    pairs = []
    for j in range(cfg.besicovich_pairs):
        xi = points[j % len(points)]
        m = int(rng.integers(0, N + 1))
        rows = F._block(xi, m)
        pairs.append((xi, xi.with_prefix(rows[int(rng.integers(len(rows)))].tolist())))
    autos = [random_automorphism(r, m, rng) for m in range(1, min(4, N) + 1)]
    return _property_rows("horoball", check_properties(F, points, pairs, autos, N))


def _skew_properties(cfg: ExperimentConfig) -> list[list]:
    rng = _rng(cfg.seed, 10**6 + 2)
    r, N = cfg.rank, cfg.skew_n_max
    action = _load_action(cfg) if cfg.action_name == "finite_model" else None
    if action is None:
        action = random_finite_action(r, rng, 4)
    F = SkewSequence(HoroballSequence(r), lambda b2, b: tail_cocycle(b2, b), action)
    seeds = stream_seeds(cfg.seed, 10**6 + 3, cfg.property_points)
    points = [(sample_boundary(r, s), int(rng.integers(action.size))) for s in seeds]
    pairs = []
    for pt in points:
        m = int(rng.integers(0, N + 1))
        members = F.members(pt, m)
        pairs.append((pt, members[int(rng.integers(len(members)))][0]))
    autos = [F.lift(random_automorphism(r, m, rng)) for m in range(1, min(3, N) + 1)]
    return _property_rows("horoball_skew_finite", check_properties(F, points, pairs, autos, N))


def _surrogate_properties() -> list[list]:
    model = interval_surrogate(64, 8)
    F = model.sequence()
    points = list(range(model.size))
    pairs = [(0, 1), (0, 5)]
    return _property_rows("interval_surrogate", check_properties(F, points, pairs, (), 8), ("extreme_besicovich",))


def run_audit_suite(cfg: ExperimentConfig, out, threads: int = 1) -> list[list]:
    """Window-axiom checks plus weak-type and L^p audits on random finite skew models."""
    rows = _horoball_properties(cfg) + _skew_properties(cfg) + _surrogate_properties()
    jobs = [(cfg, i) for i in range(cfg.models)]
    rows += [r for block in _map(_audit_model, jobs, threads) for r in block]
    weak_bad = sum(1 for r in rows if r[0] == "weak" and not r[7])
    lp_bad = sum(1 for r in rows if r[0] == "lp" and not r[7])
    doob_bad = sum(1 for r in rows if r[0] == "lp" and r[4] > r[5] * (1 + SLACK))
    unexpected = sum(1 for r in rows if r[0] == "property" and (r[7] != (r[8] == "pass")))
    comments = [
        ("subcommand", "audit"),
        ("weak_violations", str(weak_bad)),
        ("lp_violations", str(lp_bad)),
        ("lp_doob_violations", str(doob_bad)),
        ("unexpected_property_outcomes", str(unexpected)),
    ] + cfg.describe()
    write_csv(out, comments, AUDIT_COLUMNS, rows)
    return rows


# counterexample


def _window_text(J: dict[int, int]) -> str:
    return ".".join(letter_token(J[n]) for n in sorted(J))


def horosphere_move(c: BoundaryPrefix, rng: np.random.Generator, bound: int) -> ReducedWord:
    """A uniform-length random element of the horosphere of ``c`` with |g| <= bound."""
    rank = c.rank
    j = int(rng.integers(0, bound // 2 + 1))
    letters = list(c.letters(j))
    banned = {c.letter(j)} | ({letters[-1] ^ 1} if letters else set())
    while len(letters) < 2 * j:
        x = int(rng.integers(0, 2 * rank))
        if len(letters) == j and x in banned:
            continue
        if len(letters) > j and x == letters[-1] ^ 1:
            continue
        letters.append(x)
    return ReducedWord(rank, tuple(letters))


def _j_pair(job: tuple[ExperimentConfig, int]) -> tuple[list[list], int]:
    cfg, i = job
    rng = _rng(cfg.seed, i)
    resampled = 0
    attempt = 0
    while True:
        sb, sc = stream_seeds(cfg.seed, i, 2 + 2 * attempt)[-2:]
        b, c = sample_boundary(cfg.rank, sb), sample_boundary(cfg.rank, sc)
        try:
            J = geodesic_J(b, c, cfg.window)
            break
        except ValueError:
            resampled += 1
            attempt += 1
    before = _window_text(J)
    rows = []
    for k in range(cfg.moves):
        g = ReducedWord.identity(cfg.rank) if k == 0 else horosphere_move(c, rng, cfg.move_bound)
        gi = ~g
        b2, c2 = act(gi, b).point, act(gi, c).point
        after = _window_text(geodesic_J(b2, c2, cfg.window))
        rows.append([i, k, str(g), before, after, before == after])
    return rows, resampled


def run_counterexample_j(cfg: ExperimentConfig, out, threads: int = 1) -> list[list]:
    """Check that J is unchanged by relation moves while varying across pairs."""
    if cfg.rank < 2:
        raise ConfigError("the counterexample needs rank at least 2")
    if cfg.window < 1:
        raise ConfigError("window must be at least 1")
    jobs = [(cfg, i) for i in range(cfg.pairs)]
    results = _map(_j_pair, jobs, threads)
    rows = [r for block, _ in results for r in block]
    resampled = sum(n for _, n in results)
    if resampled:
        log.info("resampled %d degenerate pairs", resampled)
    equal = sum(1 for r in rows if r[5])
    distinct = len({r[3] for r in rows})
    comments = [
        ("subcommand", "counterexample-j"),
        ("moves_checked", str(len(rows))),
        ("moves_equal", str(equal)),
        ("distinct_windows", str(distinct)),
        ("non_constant", "true" if distinct >= 2 else "false"),
        ("resampled_degenerate", str(resampled)),
    ] + cfg.describe()
    write_csv(out, comments, J_COLUMNS, rows)
    return rows
