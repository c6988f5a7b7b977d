"""Brute-force searches over hidden-variable models with one dependent source.

Two searches live here.

``max_s_lhv`` walks every deterministic skeleton (response tables plus a
deterministic central rule) for two sources and evaluates it on a grid of
product distributions. That is the literal check of the local bound.

``max_s_given_md`` explores the measurement-dependent class. Only one source,
``d``, may look at the inputs. Its hidden variable is binary and its law is
``q(x) = P(lambda_d = 1 | x) = q_lo + s f(x)`` with a Boolean pattern ``f`` over
input contexts and spread ``s <= M/2``, so any two contexts are at L1 distance
at most ``2 s <= M``. The other sources are input independent. The search uses
three reductions that leave the optimum unchanged:

* A branch party only matters through the "type" of its table on each hidden
  value, either constant or anti (sign following the input). Global signs are
  absorbed by the central party, which sees every hidden variable.
* With types fixed, the central party's best reply gives each term of every
  ``I_j`` its own sign. For two sources B_0 and B_1 are independent bits, so
  this is exact. For three sources the four signs are tied together, so the
  grid uses it as an upper bound and the best candidates are then solved
  exactly by enumerating every deterministic central rule.
* Patterns ``f`` related by relabeling inputs or permuting the independent
  parties give the same value, so one pattern per orbit is searched.

After the grid pass the best candidates are polished by bounded scalar
searches along each continuous coordinate.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .inequalities import aggregate, md_bound, parity_sign_table
from .lhv import MDLhvModel, md_degree
from .quantum import default_sign_convention, even_subsets
from .scenario import Scenario, make_star_scenario

log = logging.getLogger(__name__)

MAX_EXHAUSTIVE_SOURCES = 3
MAX_LAMBDA = 2
MAX_GRID = 400
SKELETON_LIMIT = 10**6

TYPES = ("cc", "ca", "aa")


class ResourceGuardError(RuntimeError):
    """A request would exceed the configured combinatorial limits."""


# ---------------------------------------------------------------------------
# literal enumeration


@dataclass(frozen=True)
class DeterministicSkeleton:
    """``responses[i][x][l]`` in {+1, -1}; ``central[k]`` is the outcome for the k-th
    hidden tuple in row-major order."""

    responses: tuple[tuple[tuple[int, ...], ...], ...]
    central: tuple[int, ...]


def skeleton_count(n: int, lambda_sizes: Sequence[int]) -> int:
    count = 1
    for size in lambda_sizes:
        count *= 2 ** (2 * size)
    return count * (2**n) ** int(np.prod(lambda_sizes))


def _check_lambda_sizes(n: int, lambda_sizes: Sequence[int]) -> tuple[int, ...]:
    sizes = tuple(int(v) for v in lambda_sizes)
    if len(sizes) == 0 or any(v < 1 for v in sizes):
        raise ValueError("every source needs a hidden-variable alphabet of size >= 1")
    if len(sizes) != n:
        raise ValueError(f"need {n} alphabet sizes, got {len(sizes)}")
    return sizes


def enumerate_deterministic(
    scenario: Scenario, lambda_sizes: Sequence[int]
) -> Iterator[DeterministicSkeleton]:
    n = scenario.n
    sizes = _check_lambda_sizes(n, lambda_sizes)
    if n > MAX_EXHAUSTIVE_SOURCES or max(sizes) > MAX_LAMBDA:
        raise ResourceGuardError(
            f"exhaustive enumeration is limited to n <= {MAX_EXHAUSTIVE_SOURCES} "
            f"and alphabets <= {MAX_LAMBDA}"
        )
    tables = []
    for size in sizes:
        per = list(itertools.product((1, -1), repeat=size))
        tables.append(list(itertools.product(per, repeat=2)))
    cells = int(np.prod(sizes))
    for resp in itertools.product(*tables):
        for central in itertools.product(range(2**n), repeat=cells):
            yield DeterministicSkeleton(resp, central)


def _simplex_grid(size: int, grid: int) -> np.ndarray:
    if size == 1:
        return np.ones((1, 1))
    r = np.arange(grid + 1) / grid
    return np.stack([1 - r, r], axis=1)


@dataclass
class ExhaustiveResult:
    best_S: float
    skeletons: int
    evaluations: int
    best_skeleton: DeterministicSkeleton
    best_weights: list[list[float]]


def exhaustive_bilocal(
    lambda_sizes: Sequence[int] = (2, 2), grid: int = 100, batch: int = 512
) -> ExhaustiveResult:
    """Every deterministic two-source skeleton on a grid of product distributions."""
    scenario = Scenario(2)
    sizes = _check_lambda_sizes(2, lambda_sizes)
    conv = default_sign_convention(2)
    w1 = _simplex_grid(sizes[0], grid)
    w2 = _simplex_grid(sizes[1], grid)
    weights = np.einsum("pa,qb->pqab", w1, w2).reshape(len(w1) * len(w2), -1)
    par = np.array([1.0, -1.0])
    best = (-1.0, None, None)
    n_skel = 0

    def flush(buf):
        nonlocal best
        A = np.array([s.responses[0] for s in buf], dtype=float)  # [k, x, l1]
        C = np.array([s.responses[1] for s in buf], dtype=float)
        cen = np.array([s.central for s in buf]).reshape(len(buf), sizes[0], sizes[1])
        sA, dA = A.sum(axis=1), np.einsum("x,kxl->kl", par, A)
        sC, dC = C.sum(axis=1), np.einsum("x,kxl->kl", par, C)
        b0, b1 = conv.table[0][cen], conv.table[1][cen]
        cI = 0.25 * sA[:, :, None] * sC[:, None, :] * b0
        cJ = 0.25 * dA[:, :, None] * dC[:, None, :] * b1
        I = weights @ cI.reshape(len(buf), -1).T
        J = weights @ cJ.reshape(len(buf), -1).T
        S = np.sqrt(np.abs(I)) + np.sqrt(np.abs(J))
        k = int(np.argmax(S))
        p_idx, s_idx = np.unravel_index(k, S.shape)
        if S[p_idx, s_idx] > best[0] + 1e-15:
            best = (float(S[p_idx, s_idx]), buf[s_idx], p_idx)

    buf: list[DeterministicSkeleton] = []
    for skel in enumerate_deterministic(scenario, sizes):
        buf.append(skel)
        n_skel += 1
        if len(buf) == batch:
            flush(buf)
            buf = []
    if buf:
        flush(buf)
    i1, i2 = divmod(int(best[2]), len(w2))
    return ExhaustiveResult(
        best_S=best[0],
        skeletons=n_skel,
        evaluations=n_skel * len(weights),
        best_skeleton=best[1],
        best_weights=[list(map(float, w1[i1])), list(map(float, w2[i2]))],
    )


def max_s_lhv(
    scenario: Scenario, lambda_sizes: Sequence[int] | None = None, grid: int = 100
) -> float:
    """Largest aggregate over measurement-independent models.

    Two sources: exhaustive over skeletons. Three sources: the reduced search of
    ``max_s_given_md`` at zero budget, where each term of the central reply
    feeds a single ``I_j`` and the reduction is exact.
    """
    n = scenario.n
    if lambda_sizes is None:
        lambda_sizes = (2,) * n
    sizes = _check_lambda_sizes(n, lambda_sizes)
    if n > MAX_EXHAUSTIVE_SOURCES or max(sizes) > MAX_LAMBDA:
        raise ResourceGuardError("exhaustive limits exceeded")
    if n == 2:
        return exhaustive_bilocal(sizes, grid).best_S
    return max_s_given_md(scenario, SearchConfig(M_budget=0.0, grid_resolution=grid)).best_S


# ---------------------------------------------------------------------------
# measurement-dependent search


@dataclass(frozen=True)
class SearchConfig:
    M_budget: float
    grid_resolution: int = 100
    lambda_size: int = 2
    dependent_source: int = 1
    dependence: str = "context"
    refine: bool = True
    top_candidates: int = 4

    def __post_init__(self) -> None:
        if not 0 <= self.M_budget <= 2:
            raise ValueError(f"M_budget must lie in [0, 2], got {self.M_budget}")
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be at least 2")
        if self.dependence not in ("context", "branch"):
            raise ValueError("dependence must be 'context' or 'branch'")
        if self.lambda_size < 1:
            raise ValueError("lambda_size must be at least 1")


@dataclass
class SearchResult:
    best_S: float
    best_model: MDLhvModel
    achieved_M: float
    evaluations: int
    certificate: list[float]
    upper_S: float
    md_bound: float
    gap: float
    config: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    def to_json(self) -> dict:
        return {
            "best_S": self.best_S,
            "achieved_M": self.achieved_M,
            "evaluations": self.evaluations,
            "certificate": self.certificate,
            "upper_S": self.upper_S,
            "md_bound": self.md_bound,
            "gap": self.gap,
            "config": self.config,
            "elapsed_s": self.elapsed_s,
            "best_model": self.best_model.to_json(),
        }


@dataclass
class _Candidate:
    value: float
    type_idx: int
    pattern: int
    q_lo: float
    spread: float
    t: np.ndarray


class _Space:
    """Precomputed sign tables for one (n, dependent party) pair."""

    def __init__(self, n: int, d: int):
        self.n, self.d = n, d
        self.others = [i for i in range(n) if i != d]
        self.contexts = np.array(list(itertools.product((0, 1), repeat=n)))  # [x, n]
        self.parity = parity_sign_table(n).reshape(2 ** (n - 1), 2**n)  # [j, x]
        # tau enumerates anti subsets of the independent parties, bit k <-> others[k]
        self.taus = list(itertools.product((0, 1), repeat=n - 1))
        sign_tau = np.array(
            [
                (-1.0) ** (self.contexts[:, self.others] @ np.array(tau, dtype=int))
                if n > 1
                else np.ones(2**n)
                for tau in self.taus
            ]
        )  # [T, x]
        sign_d = np.stack([np.ones(2**n), (-1.0) ** self.contexts[:, d]])  # [anti?, x]
        # c[anti_d, T, j, x] = 2^-n (-1)^{g_j(x)} * tau sign * own sign
        self.c = (
            sign_d[:, None, None, :] * sign_tau[None, :, None, :] * self.parity[None, None, :, :]
        ) / 2**n

    def coefficients(self, type_idx: int, patterns: np.ndarray):
        """H[λ_d, T, j] = base + q_lo * lin_q + s * lin_s, for each pattern row."""
        kind = TYPES[type_idx]
        anti0, anti1 = kind[0] == "a", kind[1] == "a"
        c0, c1 = self.c[int(anti0)], self.c[int(anti1)]  # [T, j, x]
        f = patterns.astype(float)  # [F, x]
        base = np.stack([np.broadcast_to(c0.sum(-1), (len(f),) + c0.shape[:2]),
                         np.zeros((len(f),) + c1.shape[:2])], axis=1)
        lin_q = np.stack([np.broadcast_to(-c0.sum(-1), (len(f),) + c0.shape[:2]),
                          np.broadcast_to(c1.sum(-1), (len(f),) + c1.shape[:2])], axis=1)
        lin_s = np.stack([-np.einsum("tjx,fx->ftj", c0, f), np.einsum("tjx,fx->ftj", c1, f)], axis=1)
        return base, lin_q, lin_s  # each [F, 2, T, J]

    def tau_weights(self, t: np.ndarray) -> np.ndarray:
        """W[P, T] for independent anti-probabilities t[P, n-1]."""
        W = np.ones((len(t), len(self.taus)))
        for k, tau in enumerate(self.taus):
            for m, bit in enumerate(tau):
                W[:, k] *= t[:, m] if bit else 1 - t[:, m]
        return W


def _pattern_orbits(n: int, d: int, dependence: str) -> list[int]:
    """One representative pattern per symmetry orbit, as integers over contexts."""
    contexts = list(itertools.product((0, 1), repeat=n))
    index = {x: k for k, x in enumerate(contexts)}
    if dependence == "branch":
        reps = []
        for vals in itertools.product((0, 1), repeat=2):
            bits = [vals[x[d]] for x in contexts]
            reps.append(sum(b << k for k, b in enumerate(bits)))
        return sorted(set(reps))
    others = [i for i in range(n) if i != d]
    group = []
    for flips in itertools.product((0, 1), repeat=n):
        for perm in itertools.permutations(others):
            mapping = list(range(n))
            for src, dst in zip(others, perm):
                mapping[src] = dst
            group.append((flips, mapping))
    seen, reps = set(), []
    for code in range(2 ** (2**n)):
        if code in seen:
            continue
        bits = [(code >> k) & 1 for k in range(2**n)]
        orbit = set()
        for flips, mapping in group:
            img = 0
            for k, x in enumerate(contexts):
                y = [0] * n
                for i in range(n):
                    y[mapping[i]] = x[i] ^ flips[i]
                img |= bits[k] << index[tuple(y)]
            orbit.add(img)
        seen |= orbit
        reps.append(min(orbit))
    return reps


def _pattern_matrix(codes: Sequence[int], n: int) -> np.ndarray:
    return np.array([[(c >> k) & 1 for k in range(2**n)] for c in codes], dtype=np.int8)


def _root(v: np.ndarray, n: int) -> np.ndarray:
    if n == 2:
        return np.sqrt(v)
    if n == 3:
        return np.cbrt(v)
    return v ** (1.0 / n)


def _relaxed_value(space: _Space, type_idx: int, pattern_row: np.ndarray, q_lo, s, t) -> float:
    base, lq, ls = space.coefficients(type_idx, pattern_row[None, :])
    H = base[0] + q_lo * lq[0] + s * ls[0]  # [2, T, J]
    W = space.tau_weights(np.asarray(t, dtype=float)[None, :])[0]
    I = np.einsum("t,ltj->j", W, np.abs(H))
    return float(_root(I, space.n).sum())


def _signed_cells(space: _Space, cand: _Candidate) -> np.ndarray:
    """v[λ_d, T, j]: contribution of each hidden cell to I_j before the central sign."""
    f = _pattern_matrix([cand.pattern], space.n)
    base, lq, ls = space.coefficients(cand.type_idx, f)
    H = base[0] + cand.q_lo * lq[0] + cand.spread * ls[0]
    W = space.tau_weights(cand.t[None, :])[0]
    return H * W[None, :, None]


def _exact_central(cells: np.ndarray, n: int) -> tuple[float, np.ndarray]:
    """Best deterministic central reply for given cell vectors ``cells[k, j]``."""
    conv = default_sign_convention(n)
    B = conv.table.T  # [b, j]
    if n == 2:
        choice = []
        for v in cells:
            targets = {1: 1.0 if v[0] >= 0 else -1.0, 2: 1.0 if v[1] >= 0 else -1.0}
            choice.append(next(b for b in range(4) if B[b, 0] == targets[1] and B[b, 1] == targets[2]))
        choice = np.array(choice)
        I = np.einsum("kj,kj->j", cells, B[choice])
        return float(_root(np.abs(I), n).sum()), choice
    live = [k for k in range(len(cells)) if np.any(np.abs(cells[k]) > 1e-15)]
    contrib = [cells[k][None, :] * B for k in live]  # each [b, j]
    n_out = len(B)
    best_val, best_choice = -1.0, np.zeros(len(cells), dtype=int)
    if not live:
        return 0.0, best_choice
    head = min(2, len(live))
    tail = len(live) - head
    # enumerate the tail once, loop over the head choices
    tail_sum = np.zeros((1, cells.shape[1]))
    for k in range(head, len(live)):
        tail_sum = (tail_sum[:, None, :] + contrib[k][None, :, :]).reshape(-1, cells.shape[1])
    for head_choice in itertools.product(range(n_out), repeat=head):
        partial = sum(contrib[k][head_choice[k]] for k in range(head))
        vals = _root(np.abs(tail_sum + partial), n).sum(axis=1)
        idx = int(np.argmax(vals))
        if vals[idx] > best_val + 1e-15:
            best_val = float(vals[idx])
            tail_choice = np.unravel_index(idx, (n_out,) * tail) if tail else ()
            full = list(head_choice) + [int(v) for v in tail_choice]
            best_choice = np.zeros(len(cells), dtype=int)
            for k, c in zip(live, full):
                best_choice[k] = c
    return best_val, best_choice


def _build_model(space: _Space, cand: _Candidate, choice: np.ndarray, dependence: str) -> MDLhvModel:
    n, d = space.n, space.d
    kind = TYPES[cand.type_idx]
    x = space.contexts
    f = _pattern_matrix([cand.pattern], n)[0]
    responses, dists = [], []
    for i in range(n):
        if i == d:
            r = np.ones((2, 2))
            for lam, ty in enumerate(kind):
                if ty == "a":
                    r[1, lam] = -1
            q = cand.q_lo + cand.spread * f
            q = np.clip(q, 0.0, 1.0)
            rho = np.stack([1 - q, q], axis=-1).reshape((2,) * n + (2,))
        else:
            r = np.array([[1.0, 1.0], [1.0, -1.0]])
            ti = cand.t[space.others.index(i)]
            rho = np.broadcast_to(np.array([1 - ti, ti]), (2,) * n + (2,)).copy()
        responses.append(r)
        dists.append(rho)
    central = np.zeros((2,) * n + (2**n,))
    for lam_d in (0, 1):
        for k, tau in enumerate(space.taus):
            lam = [0] * n
            lam[d] = lam_d
            for m, i in enumerate(space.others):
                lam[i] = tau[m]
            central[tuple(lam)][choice[lam_d * len(space.taus) + k]] = 1.0
    pattern = tuple(range(n)) if dependence == "context" else (d,)
    if cand.spread == 0 or not f.any():
        pattern = ()
        dists[d] = np.broadcast_to(dists[d][(0,) * n], dists[d].shape).copy()
    deps = [pattern if i == d else () for i in range(n)]
    del x
    return MDLhvModel(n, (2,) * n, responses, central, dists, deps)


def _refine(space, cand: _Candidate, pattern_row, M: float, sweeps: int = 4):
    """Coordinate-wise bounded scalar maximization of the relaxed value."""
    q, s, t = cand.q_lo, cand.spread, cand.t.copy()
    k_type = cand.type_idx
    evals = 0

    def val(q_, s_, t_):
        nonlocal evals
        evals += 1
        return _relaxed_value(space, k_type, pattern_row, q_, s_, t_)

    best = val(q, s, t)
    for _ in range(sweeps):
        before = best
        coords = ["s", "q"] + [("t", m) for m in range(len(t))]
        for coord in coords:
            if coord == "s":
                hi = min(M / 2, 1 - q)
                if hi <= 0:
                    continue
                res = minimize_scalar(lambda v: -val(q, v, t), bounds=(0.0, hi), method="bounded",
                                      options={"xatol": 1e-12})
                if -res.fun > best:
                    best, s = -res.fun, float(res.x)
            elif coord == "q":
                hi = 1 - s
                res = minimize_scalar(lambda v: -val(v, s, t), bounds=(0.0, hi), method="bounded",
                                      options={"xatol": 1e-12})
                if -res.fun > best:
                    best, q = -res.fun, float(res.x)
            else:
                m = coord[1]

                def ft(v, m=m):
                    tt = t.copy()
                    tt[m] = v
                    return -val(q, s, tt)

                res = minimize_scalar(ft, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
                if -res.fun > best:
                    best = -res.fun
                    t[m] = float(res.x)
        if best - before < 1e-14:
            break
    return _Candidate(best, k_type, cand.pattern, q, s, t), evals


def max_s_given_md(scenario: Scenario, cfg: SearchConfig) -> SearchResult:
    start = time.perf_counter()
    n = scenario.n
    if n > MAX_EXHAUSTIVE_SOURCES:
        raise ResourceGuardError(f"the search is limited to n <= {MAX_EXHAUSTIVE_SOURCES}")
    if cfg.grid_resolution > MAX_GRID:
        raise ResourceGuardError(f"grid_resolution is limited to {MAX_GRID}")
    if cfg.lambda_size > MAX_LAMBDA:
        raise ResourceGuardError(f"hidden-variable alphabets are limited to {MAX_LAMBDA}")
    if not 1 <= cfg.dependent_source <= n:
        raise ValueError(f"dependent_source must be in 1..{n}")
    d = cfg.dependent_source - 1
    G = cfg.grid_resolution
    M = cfg.M_budget
    space = _Space(n, d)

    s_grid = np.floor(M * G / 2 + 1e-9) / G
    if cfg.lambda_size == 1:
        s_grid = 0.0
    types = range(len(TYPES)) if cfg.lambda_size == 2 else [0]
    codes = _pattern_orbits(n, d, cfg.dependence) if s_grid > 0 else [0]
    patterns = _pattern_matrix(codes, n)

    q_vals = np.arange(G + 1) / G
    q_vals = q_vals[q_vals <= 1 - s_grid + 1e-12]
    if cfg.lambda_size == 1 or s_grid == 0:
        q_vals = q_vals if cfg.lambda_size == 2 else np.array([0.0])
    t_axis = np.arange(G + 1) / G
    t_pts = np.array(list(itertools.product(t_axis, repeat=n - 1)))
    W = space.tau_weights(t_pts)  # [P, T]

    evaluations = 0
    upper = -np.inf
    cands: list[_Candidate] = []
    for ti in types:
        base, lq, ls = space.coefficients(ti, patterns)
        for q in q_vals:
            H = base + q * lq + s_grid * ls  # [F, 2, T, J]
            U = np.abs(H).sum(axis=1)  # [F, T, J]
            I = np.matmul(W, U)  # [F, P, J]
            S = _root(I, n).sum(axis=-1)  # [F, P]
            evaluations += S.size
            best_p = np.argmax(S, axis=1)
            vals = S[np.arange(len(codes)), best_p]
            upper = max(upper, float(vals.max()))
            for fi in range(len(codes)):
                cands.append(_Candidate(float(vals[fi]), ti, codes[fi], float(q), float(s_grid),
                                        t_pts[best_p[fi]].astype(float).copy()))
        log.info("type %s done, running max %.9f", TYPES[ti], upper)

    # keep the best grid cell of each (type, pattern), then the top few overall
    best_per: dict = {}
    for c in cands:
        key = (c.type_idx, c.pattern)
        if key not in best_per or c.value > best_per[key].value + 1e-15:
            best_per[key] = c
    ranked = sorted(best_per.values(), key=lambda c: (-c.value, c.type_idx, c.pattern))
    top = ranked[: max(1, cfg.top_candidates)]
    refined = []
    for c in top:
        if cfg.refine and n <= 3:
            r, ev = _refine(space, c, _pattern_matrix([c.pattern], n)[0], M if cfg.lambda_size == 2 else 0.0)
            evaluations += ev
            upper = max(upper, r.value)
            refined.append(r if r.value >= c.value else c)
        else:
            refined.append(c)

    best_val, best_model, best_comp = -1.0, None, None
    for c in refined:
        cells = _signed_cells(space, c).reshape(-1, 2 ** (n - 1))
        value, choice = _exact_central(cells, n)
        if value > best_val + 1e-12:
            model = _build_model(space, c, choice, cfg.dependence)
            best_val, best_model = value, model
            conv = default_sign_convention(n)
            best_comp = np.einsum("kj,kj->j", cells, conv.table.T[choice])
    achieved = md_degree(best_model, cfg.dependent_source)
    bound = md_bound(n, M)
    return SearchResult(
        best_S=float(best_val),
        best_model=best_model,
        achieved_M=achieved,
        evaluations=int(evaluations),
        certificate=[float(v) for v in best_comp],
        upper_S=float(upper),
        md_bound=bound,
        gap=float(bound - best_val),
        config={
            "n": n,
            "M_budget": M,
            "grid_resolution": G,
            "lambda_size": cfg.lambda_size,
            "dependent_source": cfg.dependent_source,
            "dependence": cfg.dependence,
            "refine": cfg.refine,
        },
        elapsed_s=time.perf_counter() - start,
    )


def saturating_model(n: int, M1: float, grid: int = 200) -> MDLhvModel:
    return max_s_given_md(make_star_scenario(n), SearchConfig(M_budget=M1, grid_resolution=grid)).best_model
