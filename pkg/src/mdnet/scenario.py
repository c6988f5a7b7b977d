"""Star-network scenarios and the dense behavior tensor shared by every layer.

Storage layout of ``BehaviorTensor.probabilities`` for ``n`` sources::

    axes 0..n-1      branch inputs x_i in {0, 1}
    axes n..2n-1     branch outputs, index 0 <-> +1 and index 1 <-> -1
    axis 2n          central outcome b as an integer, bit b_1 is the most significant

so that ``(-1) ** index`` recovers the +/-1 output value.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_SOURCES = 6
NORMALIZATION_TOL = 1e-12
CLAMP_TOL = 1e-15
PHYSICS_TOL = 1e-9

TOL_ENV_VAR = "MDNET_TOL"


def default_tolerance() -> float:
    """Physics tolerance, overridable through the ``MDNET_TOL`` environment variable."""
    raw = os.environ.get(TOL_ENV_VAR)
    if raw is None or raw.strip() == "":
        return PHYSICS_TOL
    value = float(raw)
    if not value > 0:
        raise ValueError(f"{TOL_ENV_VAR} must be positive, got {raw!r}")
    return value


@dataclass(frozen=True)
class Scenario:
    n_sources: int
    branch_inputs: int = 2
    branch_outputs: int = 2

    def __post_init__(self) -> None:
        if self.n_sources < 2:
            raise ValueError(f"a star network needs at least 2 sources, got {self.n_sources}")
        if self.branch_inputs != 2 or self.branch_outputs != 2:
            raise ValueError("only binary inputs and binary outputs are supported")

    @property
    def n(self) -> int:
        return self.n_sources

    @property
    def central_outcomes(self) -> int:
        return 2**self.n_sources

    @property
    def shape(self) -> tuple[int, ...]:
        n = self.n_sources
        return (2,) * n + (2,) * n + (2**n,)

    def contexts(self) -> list[tuple[int, ...]]:
        return list(itertools.product((0, 1), repeat=self.n_sources))

    def outcome_strings(self) -> list[str]:
        n = self.n_sources
        return [format(b, f"0{n}b") for b in range(2**n)]


def make_star_scenario(n: int, max_sources: int = MAX_SOURCES) -> Scenario:
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if n > max_sources:
        raise ValueError(f"n={n} exceeds the configured maximum of {max_sources} sources")
    return Scenario(n)


def outcome_bits(b: int, n: int) -> tuple[int, ...]:
    """Bits (b_1, ..., b_n) of the central outcome index ``b``."""
    return tuple((b >> (n - 1 - k)) & 1 for k in range(n))


@dataclass
class BehaviorTensor:
    scenario: Scenario
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probabilities, dtype=float)
        if arr.shape != self.scenario.shape:
            raise ValueError(
                f"probability array has shape {arr.shape}, expected {self.scenario.shape}"
            )
        self.probabilities = arr

    @property
    def n(self) -> int:
        return self.scenario.n_sources

    def conditional(self, x: Sequence[int]) -> np.ndarray:
        """P(a, b | x) as an array over output axes."""
        return self.probabilities[tuple(int(v) for v in x)]

    def mix(self, other: "BehaviorTensor", alpha: float) -> "BehaviorTensor":
        if other.scenario != self.scenario:
            raise ValueError("cannot mix behaviors from different scenarios")
        return BehaviorTensor(
            self.scenario, alpha * self.probabilities + (1 - alpha) * other.probabilities
        )

    # -- JSON ---------------------------------------------------------------

    def to_records(self) -> list[dict]:
        n = self.n
        records = []
        for x in itertools.product((0, 1), repeat=n):
            for a in itertools.product((-1, 1), repeat=n):
                a_idx = tuple(0 if v == 1 else 1 for v in a)
                for b in range(2**n):
                    p = float(self.probabilities[x + a_idx + (b,)])
                    records.append(
                        {"x": list(x), "a": list(a), "b": format(b, f"0{n}b"), "p": p}
                    )
        return records

    def to_json(self) -> dict:
        return {"scenario": {"n": self.n}, "records": self.to_records()}

    @classmethod
    def from_json(cls, doc: dict) -> "BehaviorTensor":
        n = int(doc["scenario"]["n"])
        scenario = make_star_scenario(n)
        arr = np.zeros(scenario.shape)
        seen = np.zeros(scenario.shape, dtype=bool)
        for rec in doc["records"]:
            x = tuple(int(v) for v in rec["x"])
            a = tuple(int(v) for v in rec["a"])
            if len(x) != n or len(a) != n or len(rec["b"]) != n:
                raise ValueError(f"record arity does not match n={n}: {rec}")
            if any(v not in (0, 1) for v in x) or any(v not in (-1, 1) for v in a):
                raise ValueError(f"record has out-of-range inputs or outputs: {rec}")
            idx = x + tuple(0 if v == 1 else 1 for v in a) + (int(rec["b"], 2),)
            if seen[idx]:
                raise ValueError(f"duplicate record {rec}")
            seen[idx] = True
            arr[idx] = float(rec["p"])
        return cls(scenario, arr)


def uniform_behavior(scenario: Scenario) -> BehaviorTensor:
    arr = np.full(scenario.shape, 1.0 / (2**scenario.n * scenario.central_outcomes))
    return BehaviorTensor(scenario, arr)


@dataclass
class ValidationReport:
    passed: bool
    max_normalization_defect: float
    worst_context: tuple[int, ...]
    min_entry: float
    negative_entries: int
    clamped_entries: int
    messages: list[str] = field(default_factory=list)


def validate_behavior(
    t: BehaviorTensor,
    norm_tol: float = NORMALIZATION_TOL,
    clamp_tol: float = CLAMP_TOL,
) -> ValidationReport:
    """Check normalization per input context and nonnegativity.

    Entries in ``[-clamp_tol, 0)`` are clamped to zero in place. Anything more
    negative, or above one, counts as a violation.
    """
    if t.probabilities.shape != t.scenario.shape:
        raise ValueError("tensor shape does not match its scenario")
    arr = t.probabilities
    n = t.n
    tiny = (arr < 0) & (arr >= -clamp_tol)
    clamped = int(tiny.sum())
    if clamped:
        arr[tiny] = 0.0
    negative = int((arr < -clamp_tol).sum())
    above_one = int((arr > 1 + norm_tol).sum())
    sums = arr.reshape((2**n, -1)).sum(axis=1)
    defects = np.abs(sums - 1.0)
    worst = int(np.argmax(defects))
    worst_ctx = tuple(int(v) for v in np.unravel_index(worst, (2,) * n))
    messages = []
    if negative:
        messages.append(f"{negative} entries below -{clamp_tol}")
    if above_one:
        messages.append(f"{above_one} entries above 1")
    if defects[worst] > norm_tol:
        messages.append(f"normalization defect {defects[worst]:.3e} at x={worst_ctx}")
    return ValidationReport(
        passed=not messages,
        max_normalization_defect=float(defects[worst]),
        worst_context=worst_ctx,
        min_entry=float(arr.min()),
        negative_entries=negative,
        clamped_entries=clamped,
        messages=messages,
    )


@dataclass
class NsReport:
    max_marginal_discrepancy: float
    passed: bool
    worst_context: dict
    tolerance: float


def _party_subsets(n: int) -> Iterable[tuple[int, ...]]:
    # Parties 0..n-1 are the branches, party n is the central one.
    everyone = range(n + 1)
    for size in range(1, n + 1):
        yield from itertools.combinations(everyone, size)


def no_signaling_check(t: BehaviorTensor, tol: float | None = None) -> NsReport:
    """Largest change of any marginal when the inputs outside its party subset vary."""
    if tol is None:
        tol = default_tolerance()
    n = t.n
    arr = t.probabilities
    worst = 0.0
    worst_ctx: dict = {"subset": [], "context_a": [], "context_b": []}
    for subset in _party_subsets(n):
        drop = tuple(n + i for i in range(n) if i not in subset)
        if n not in subset:
            drop = drop + (2 * n,)
        marg = arr.sum(axis=drop) if drop else arr
        # marg axes: all n inputs, then kept outputs
        outside = [i for i in range(n) if i not in subset]
        if not outside:
            continue
        for x in itertools.product((0, 1), repeat=n):
            ref = marg[x]
            for i in outside:
                if x[i] == 1:
                    continue
                y = list(x)
                y[i] = 1
                diff = float(np.max(np.abs(ref - marg[tuple(y)])))
                if diff > worst:
                    worst = diff
                    worst_ctx = {
                        "subset": [("central" if p == n else p + 1) for p in subset],
                        "context_a": list(x),
                        "context_b": y,
                    }
    return NsReport(
        max_marginal_discrepancy=worst,
        passed=worst <= tol,
        worst_context=worst_ctx,
        tolerance=tol,
    )


def output_sign_array(n: int) -> np.ndarray:
    """Array over the branch output axes holding the product of the +/-1 values."""
    sign = np.ones((2,) * n)
    for i in range(n):
        shape = [1] * n
        shape[i] = 2
        sign = sign * np.array([1.0, -1.0]).reshape(shape)
    return sign


def correlator(
    t: BehaviorTensor,
    x: Sequence[int],
    central_sign: Callable[[int], float] | Sequence[float] | np.ndarray,
) -> float:
    """Sum over (a, b) of (prod a_i) * sign(b) * P(a, b | x)."""
    n = t.n
    if callable(central_sign):
        signs = np.array([float(central_sign(b)) for b in range(2**n)])
    else:
        signs = np.asarray(central_sign, dtype=float)
    if signs.shape != (2**n,):
        raise ValueError(f"central sign table must have {2**n} entries")
    block = t.conditional(x)
    weights = output_sign_array(n)[..., None] * signs
    return float(np.sum(block * weights))


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False)
