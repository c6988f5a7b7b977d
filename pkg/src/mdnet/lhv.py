"""Hidden-variable models whose source distributions may depend on the inputs.

A model has one finite hidden variable per source. Branch party ``i`` answers
deterministically from ``(x_i, lambda_i)``; the central party draws its outcome
from a distribution that depends on all the ``lambda``. Source ``i`` has its own
table ``rho_i(lambda_i | x)`` for every full input context ``x``, so the sources
stay independent given the inputs by construction.

Measurement dependence of a source is the largest L1 distance between its
distributions under any two input contexts. When a source only looks at its
own branch input this is the familiar ``sum |rho(l|x) - rho(l|x')|``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .inequalities import independence_fraction
from .quantum import CentralSignConvention, default_sign_convention, even_subsets
from .scenario import BehaviorTensor, Scenario, make_star_scenario

MODEL_TOL = 1e-12

log = logging.getLogger(__name__)

FALLBACK_NOTE = (
    "the %s selector table read row by row does not give the stated values; "
    "substituting the explicit %s model"
)


@dataclass
class MDLhvModel:
    """``responses[i][x, l]`` is +/-1, ``central_rule[l_1, ..., l_n, b]`` a distribution,
    ``distributions[i][x_1, ..., x_n, l]`` the conditional law of source ``i``.

    ``dependence_pattern[i]`` lists the (0-based) parties whose inputs source ``i``
    is allowed to see. An empty entry means the source is input independent.
    """

    n: int
    lambda_sizes: tuple[int, ...]
    responses: list[np.ndarray]
    central_rule: np.ndarray
    distributions: list[np.ndarray]
    dependence_pattern: list[tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.scenario = make_star_scenario(self.n)
        self.lambda_sizes = tuple(int(v) for v in self.lambda_sizes)
        self.responses = [np.asarray(r, dtype=float) for r in self.responses]
        self.central_rule = np.asarray(self.central_rule, dtype=float)
        self.distributions = [np.asarray(d, dtype=float) for d in self.distributions]
        if not self.dependence_pattern:
            self.dependence_pattern = [() for _ in range(self.n)]
        self.dependence_pattern = [tuple(sorted(int(v) for v in p)) for p in self.dependence_pattern]
        self.validate()

    def validate(self) -> None:
        n, sizes = self.n, self.lambda_sizes
        if len(sizes) != n or any(s < 1 for s in sizes):
            raise ValueError(f"need {n} hidden-variable alphabets of size >= 1, got {sizes}")
        if len(self.responses) != n or len(self.distributions) != n:
            raise ValueError("need one response table and one distribution per source")
        if len(self.dependence_pattern) != n:
            raise ValueError("need one dependence pattern entry per source")
        for i in range(n):
            r = self.responses[i]
            if r.shape != (2, sizes[i]):
                raise ValueError(f"response table {i} must have shape (2, {sizes[i]})")
            if not np.all(np.isin(r, (-1.0, 1.0))):
                raise ValueError(f"response table {i} must hold +/-1 values")
            d = self.distributions[i]
            if d.shape != (2,) * n + (sizes[i],):
                raise ValueError(f"distribution {i} must have shape {(2,) * n + (sizes[i],)}")
            _check_distribution(d, f"distribution of source {i + 1}")
            if any(not 0 <= p < n for p in self.dependence_pattern[i]):
                raise ValueError(f"dependence pattern of source {i + 1} names an unknown party")
            free = [ax for ax in range(n) if ax not in self.dependence_pattern[i]]
            for ax in free:
                gap = np.max(np.abs(np.take(d, 0, axis=ax) - np.take(d, 1, axis=ax)))
                if gap > MODEL_TOL:
                    raise ValueError(
                        f"source {i + 1} varies with the input of party {ax + 1} "
                        "although its dependence pattern forbids it"
                    )
        if self.central_rule.shape != sizes + (2**n,):
            raise ValueError(f"central rule must have shape {sizes + (2**n,)}")
        _check_distribution(self.central_rule, "central rule")

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        n = self.n
        central = []
        for lam in itertools.product(*[range(s) for s in self.lambda_sizes]):
            central.append({"lambda": list(lam), "p": [float(v) for v in self.central_rule[lam]]})
        dists = []
        for d in self.distributions:
            dists.append(
                [{"x": list(x), "p": [float(v) for v in d[x]]} for x in itertools.product((0, 1), repeat=n)]
            )
        return {
            "n": n,
            "lambda_sizes": list(self.lambda_sizes),
            "responses": [[[int(v) for v in row] for row in r] for r in self.responses],
            "central_rule": central,
            "distributions": dists,
            "dependence_pattern": [[p + 1 for p in pat] for pat in self.dependence_pattern],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MDLhvModel":
        n = int(doc["n"])
        sizes = tuple(int(v) for v in doc["lambda_sizes"])
        if len(sizes) != n:
            raise ValueError("lambda_sizes must list one alphabet per source")
        central = np.full(sizes + (2**n,), np.nan)
        for row in doc["central_rule"]:
            central[tuple(row["lambda"])] = row["p"]
        if np.isnan(central).any():
            raise ValueError("central rule does not cover every hidden-variable tuple")
        dists = []
        for i, entries in enumerate(doc["distributions"]):
            d = np.full((2,) * n + (sizes[i],), np.nan)
            for e in entries:
                d[tuple(e["x"])] = e["p"]
            if np.isnan(d).any():
                raise ValueError(f"distribution of source {i + 1} misses some input context")
            dists.append(d)
        pattern = [tuple(p - 1 for p in pat) for pat in doc.get("dependence_pattern", [[]] * n)]
        return cls(n, sizes, [np.array(r) for r in doc["responses"]], central, dists, pattern)


def _check_distribution(arr: np.ndarray, what: str) -> None:
    if np.any(arr < -MODEL_TOL):
        raise ValueError(f"{what} has negative entries")
    sums = arr.sum(axis=-1)
    if np.max(np.abs(sums - 1)) > MODEL_TOL:
        raise ValueError(f"{what} is not normalized (worst sum {sums.flat[np.argmax(np.abs(sums - 1))]})")


def lhv_behavior(m: MDLhvModel) -> BehaviorTensor:
    n = m.n
    scenario = make_star_scenario(n)
    probs = np.zeros(scenario.shape)
    letters = "abcdefghij"[:n]
    # indicator[i][x_i, l_i, a_i]
    indicators = []
    for r in m.responses:
        ind = np.zeros(r.shape + (2,))
        ind[..., 0] = r > 0
        ind[..., 1] = r < 0
        indicators.append(ind)
    spec = ",".join(f"{l}{l.upper()}" for l in letters) + f",{letters}z->{''.join(l.upper() for l in letters)}z"
    for x in itertools.product((0, 1), repeat=n):
        ops = [m.distributions[i][x][:, None] * indicators[i][x[i]] for i in range(n)]
        probs[x] = np.einsum(spec, *ops, m.central_rule)
    probs[np.abs(probs) < 1e-300] = 0.0
    return BehaviorTensor(scenario, probs)


def md_degree(m: MDLhvModel, source_index: int) -> float:
    """Largest L1 distance between the source's laws under two input contexts."""
    return md_degree_with_context(m, source_index)[0]


def md_degree_with_context(m: MDLhvModel, source_index: int):
    d = m.distributions[source_index - 1]
    flat = d.reshape(2**m.n, -1)
    gaps = np.abs(flat[:, None, :] - flat[None, :, :]).sum(axis=-1)
    i, j = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
    ctx = [list(np.unravel_index(k, (2,) * m.n)) for k in (i, j)]
    return float(min(2.0, gaps[i, j])), [[int(v) for v in c] for c in ctx]


def md_degree_single_flip(m: MDLhvModel, source_index: int) -> float:
    """L1 distance when only the source's own branch input flips, max over the rest."""
    d = m.distributions[source_index - 1]
    ax = source_index - 1
    return float(np.max(np.abs(np.take(d, 0, axis=ax) - np.take(d, 1, axis=ax)).sum(axis=-1)))


@dataclass
class MdReport:
    M: list[float]
    F: list[float]
    worst_context: list[list[list[int]]]
    M_single_flip: list[float]

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "F": self.F,
            "worst_context": self.worst_context,
            "M_single_flip": self.M_single_flip,
        }


def md_report(m: MDLhvModel) -> MdReport:
    Ms, ctxs, flips = [], [], []
    for i in range(1, m.n + 1):
        M, ctx = md_degree_with_context(m, i)
        Ms.append(M)
        ctxs.append(ctx)
        flips.append(md_degree_single_flip(m, i))
    return MdReport(M=Ms, F=[independence_fraction(M) for M in Ms], worst_context=ctxs, M_single_flip=flips)


# ---------------------------------------------------------------------------
# explicit models


def outcome_with_signs(conv: CentralSignConvention, targets: dict[int, float]) -> int:
    """First central outcome whose B^j values match ``targets`` (j is 1-based)."""
    for b in range(2**conv.n):
        if all(conv.table[j - 1, b] == s for j, s in targets.items()):
            return b
    raise ValueError(f"no central outcome realizes the signs {targets}")


def _check_p(p: float) -> None:
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def paper_bilocal_model(p: float, a: int = 1, b: int = 1) -> MDLhvModel:
    """Two-source model with I = 1, J = p and M_1 = 2p.

    Alice always answers ``a`` and Charlie ``b``. Source 1 carries one bit ``e``
    that equals ``x XOR z`` with probability (1+p)/2. The central party reads
    ``e`` and answers with B_0 = ab and B_1 = ab (-1)^e, which makes every term
    of I equal to one and leaves J = E[(-1)^(e + x + z)] = p.

    The source sees both branch inputs, so the behavior signals from the
    branches to the central party as soon as p > 0.
    """
    _check_p(p)
    log.info(FALLBACK_NOTE, "bilocal", "parity-guess")
    if a not in (-1, 1) or b not in (-1, 1):
        raise ValueError("table constants must be +1 or -1")
    conv = default_sign_convention(2)
    rho1 = np.zeros((2, 2, 2))
    for x, z in itertools.product((0, 1), repeat=2):
        par = x ^ z
        rho1[x, z, par] = (1 + p) / 2
        rho1[x, z, 1 - par] = (1 - p) / 2
    rho2 = np.ones((2, 2, 1))
    central = np.zeros((2, 1, 4))
    for e in (0, 1):
        out = outcome_with_signs(conv, {1: a * b, 2: a * b * (-1) ** e})
        central[e, 0, out] = 1.0
    return MDLhvModel(
        n=2,
        lambda_sizes=(2, 1),
        responses=[np.full((2, 2), a), np.full((2, 1), b)],
        central_rule=central,
        distributions=[rho1, rho2],
        dependence_pattern=[(0, 1), ()],
    )


def _pattern_weights(t: np.ndarray, n: int) -> np.ndarray:
    """P(set of 'anti' parties == S_j) for independent parties with anti-probabilities t."""
    out = []
    for subset in even_subsets(n):
        w = 1.0
        for i in range(n):
            w *= t[i] if i in subset else 1 - t[i]
        out.append(w)
    return np.array(out)


def context_informed_value(n: int, p: float, t: Sequence[float]) -> float:
    t = np.asarray(t, dtype=float)
    return float(np.sum(((1 - p) * _pattern_weights(t, n) + p) ** (1.0 / n)))


def best_anti_probabilities(n: int, p: float) -> np.ndarray:
    """Type mixture maximizing the closed-form value of the context-informed model."""
    best_t, best_v = None, -np.inf
    starts = [np.zeros(n), np.full(n, 0.5)] + [np.full(n, s) for s in (0.1, 0.25, 0.4)]
    for start in starts:
        res = minimize(
            lambda v: -context_informed_value(n, p, v),
            start,
            method="L-BFGS-B",
            bounds=[(0.0, 1.0)] * n,
        )
        cand = np.clip(res.x, 0.0, 1.0)
        for c in (cand, start):
            v = context_informed_value(n, p, c)
            if v > best_v + 1e-15:
                best_t, best_v = c, v
    return np.asarray(best_t)


def context_informed_model(
    n: int, p: float, anti: Sequence[float] | None = None, a: int = 1
) -> MDLhvModel:
    """Star model in which source 1 leaks the whole input context with probability p.

    With probability 1-p source 1 behaves like a measurement-independent local
    source: party ``i`` answers ``a`` ("constant" type) or ``a (-1)^{x_i}`` ("anti"
    type, chosen with probability ``anti[i]``). The central party knows every
    type from the hidden variables. When the set of anti parties is the j-th
    even subset it outputs the sign that makes the j-th term positive.

    With probability p source 1 emits a label naming the full context. Party 1
    then answers ``a`` and the central party, knowing every input, picks the
    outcome whose B^j values make all terms equal to one at once.

    Every |I_j| equals (1-p) P(anti set = S_j) + p, with M_1 = 2p.
    """
    _check_p(p)
    make_star_scenario(n)
    conv = default_sign_convention(n)
    subsets = even_subsets(n)
    t = best_anti_probabilities(n, p) if anti is None else np.asarray(anti, dtype=float)
    if t.shape != (n,) or np.any((t < 0) | (t > 1)):
        raise ValueError("anti-type probabilities must be n numbers in [0, 1]")
    contexts = list(itertools.product((0, 1), repeat=n))
    size1 = 2 + len(contexts)
    sizes = (size1,) + (2,) * (n - 1)

    responses = []
    for i in range(n):
        r = np.full((2, sizes[i]), float(a))
        r[1, 1] = -a  # label 1 is the anti type
        responses.append(r)

    dists = []
    rho1 = np.zeros((2,) * n + (size1,))
    for k, x in enumerate(contexts):
        rho1[x][0] = (1 - p) * (1 - t[0])
        rho1[x][1] = (1 - p) * t[0]
        rho1[x][2 + k] += p
    dists.append(rho1)
    for i in range(1, n):
        dists.append(np.broadcast_to(np.array([1 - t[i], t[i]]), (2,) * n + (2,)).copy())

    ref = conv.table[:, 0]
    a_n = float(a) ** n
    central = np.zeros(sizes + (2**n,))
    for lam in itertools.product(*[range(s) for s in sizes]):
        rest_anti = tuple(i for i in range(1, n) if lam[i] == 1)
        if lam[0] < 2:
            anti_set = ((0,) if lam[0] == 1 else ()) + rest_anti
            if anti_set in subsets:
                j = subsets.index(anti_set) + 1
                out = outcome_with_signs(conv, {j: ref[j - 1] * a_n})
            else:
                out = 0
        else:
            x = contexts[lam[0] - 2]
            h = sum(x[i] for i in rest_anti) % 2
            targets = {
                j + 1: ref[j] * a_n * (-1) ** ((sum(x[i] for i in s) + h) % 2)
                for j, s in enumerate(subsets)
            }
            out = outcome_with_signs(conv, targets)
        central[lam][out] = 1.0
    return MDLhvModel(
        n=n,
        lambda_sizes=sizes,
        responses=responses,
        central_rule=central,
        distributions=dists,
        dependence_pattern=[tuple(range(n))] + [() for _ in range(n - 1)],
    )


def paper_star_model(p: float, a: int = 1) -> MDLhvModel:
    """Three-source fallback: the context-informed model at the best type mixture."""
    log.info(FALLBACK_NOTE, "star", "context-informed")
    return context_informed_model(3, p, a=a)


# ---------------------------------------------------------------------------
# literal reading of the selector tables

_BILOCAL_ROWS = [
    # (outcome, lambda label, A_X, A_X', C_Z, C_Z') with a, b as symbols
    ("00", 0, ("-a", "-a"), ("-a", "-a")),
    ("01", 1, ("b", "b"), ("b", "b")),
    ("10", 0, ("a", "a"), ("-a", "a")),
    ("11", 1, ("b", "b"), ("b", "-b")),
]

_STAR_ROWS = [
    # (outcome, lambda label, party 1 (X, X'), party 2 (Y, Y'), party 3 (Z, Z'))
    ("000", 0, ("a", "a"), ("a", "a"), ("a", "a")),
    ("001", 1, ("b", "b"), ("b", "b"), ("b", "b")),
    ("010", 0, ("a", "a"), ("-a", "a"), ("a", "a")),
    ("011", 1, ("b", "-b"), ("b", "-b"), ("b", "b")),
    ("100", 0, ("a", "-a"), ("-a", "-a"), ("-a", "a")),
    ("101", 1, ("b", "b"), ("b", "b"), ("b", "-b")),
    ("110", 0, ("a", "a"), ("a", "-a"), ("a", "-a")),
    ("111", 1, ("-b", "b"), ("b", "-b"), ("b", "-b")),
]


def table_literal_behavior(kind: str, p: float, a: int = 1, b: int = 1) -> BehaviorTensor:
    """Behavior from reading a selector table row by row.

    The central outcome group (pair of rows) is uniform, the row inside the
    group is picked by lambda_1 drawn from the tabulated law (label 0 has
    probability 0 under the first setting of party 1 and p under the second),
    and each branch output is the table entry for its input.

    The branch outputs then depend on which group the central party landed in,
    so this is not a hidden-variable model with local responses. It is kept to
    document why the explicit fallbacks above are used.
    """
    _check_p(p)
    rows = {"bilocal": _BILOCAL_ROWS, "star": _STAR_ROWS}.get(kind)
    if rows is None:
        raise ValueError("kind must be 'bilocal' or 'star'")
    n = 2 if kind == "bilocal" else 3
    values = {"a": a, "-a": -a, "b": b, "-b": -b}
    scenario = Scenario(n)
    probs = np.zeros(scenario.shape)
    groups = len(rows) // 2
    for x in itertools.product((0, 1), repeat=n):
        law = (0.0, 1.0) if x[0] == 0 else (p, 1 - p)
        for outcome, label, *cols in rows:
            weight = law[label] / groups
            if weight == 0:
                continue
            outs = tuple(0 if values[cols[i][x[i]]] == 1 else 1 for i in range(n))
            probs[x + outs + (int(outcome, 2),)] += weight
    return BehaviorTensor(scenario, probs)
