"""Network Bell functionals for the star scenario and their relaxed bounds.

Conventions:

* ``I_j = 2^-n * sum_x (-1)^{g_j(x)} <A^1_{x_1} ... A^n_{x_n} B^j>``
* ``S_n = sum_j |I_j|^(1/n)``, with local bound ``2^(n-2)``
* for two sources ``I = I_1`` and ``J = I_2``, so ``S = sqrt|I| + sqrt|J|``

``g_j`` is the parity of the inputs inside the j-th even-size subset of parties,
subsets ordered by bitmask with bit 0 standing for party 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .quantum import CentralSignConvention, default_sign_convention, even_subsets
from .scenario import BehaviorTensor, default_tolerance, output_sign_array

PAPER_CLOSED_FORM = "paper-closed-form"
DERIVED = "derived-extrapolation"


def bound_provenance(n: int) -> str:
    return PAPER_CLOSED_FORM if n in (2, 3) else DERIVED


def g_parity(n: int, j: int, x) -> int:
    subsets = even_subsets(n)
    if not 1 <= j <= len(subsets):
        raise ValueError(f"j must be in 1..{len(subsets)} for n={n}, got {j}")
    if len(x) != n:
        raise ValueError(f"expected {n} input bits, got {len(x)}")
    return sum(int(x[i]) for i in subsets[j - 1]) % 2


def parity_sign_table(n: int) -> np.ndarray:
    """Array ``[j, x_1, ..., x_n]`` holding (-1)^{g_j(x)}."""
    subsets = even_subsets(n)
    grids = np.indices((2,) * n)
    out = np.empty((len(subsets),) + (2,) * n)
    for j, subset in enumerate(subsets):
        par = np.zeros((2,) * n, dtype=int)
        for i in subset:
            par = par + grids[i]
        out[j] = (-1.0) ** (par % 2)
    return out


def _convention(t: BehaviorTensor, convention: CentralSignConvention | None):
    conv = convention or default_sign_convention(t.n)
    if conv.n != t.n:
        raise ValueError(f"sign convention is for n={conv.n}, behavior has n={t.n}")
    return conv


def all_components(
    t: BehaviorTensor, convention: CentralSignConvention | None = None
) -> np.ndarray:
    n = t.n
    conv = _convention(t, convention)
    out_sign = output_sign_array(n)
    # full correlators C[x..., j]
    weighted = t.probabilities * out_sign.reshape((1,) * n + (2,) * n + (1,))
    marg = weighted.reshape(2**n, 2**n, 2**n).sum(axis=1)  # [x, b]
    corr = marg @ conv.table.T  # [x, j]
    par = parity_sign_table(n).reshape(len(conv.table), 2**n)  # [j, x]
    return np.einsum("jx,xj->j", par, corr) / 2**n


def star_Ij(t: BehaviorTensor, j: int, convention: CentralSignConvention | None = None) -> float:
    comps = all_components(t, convention)
    if not 1 <= j <= len(comps):
        raise ValueError(f"j out of range 1..{len(comps)}")
    return float(comps[j - 1])


def _require_bilocal(t: BehaviorTensor) -> None:
    if t.n != 2:
        raise ValueError(f"I and J are defined for two sources, behavior has n={t.n}")


def bilocal_I(t: BehaviorTensor, convention: CentralSignConvention | None = None) -> float:
    _require_bilocal(t)
    return star_Ij(t, 1, convention)


def bilocal_J(t: BehaviorTensor, convention: CentralSignConvention | None = None) -> float:
    _require_bilocal(t)
    return star_Ij(t, 2, convention)


def aggregate(components, n: int) -> float:
    return float(np.sum(np.abs(np.asarray(components)) ** (1.0 / n)))


def classical_bound(n: int) -> float:
    return float(2 ** (n - 2))


def _check_m(M1: float) -> None:
    if not 0 <= M1 <= 2:
        raise ValueError(f"measurement dependence must lie in [0, 2], got {M1}")


def md_bound(n: int, M1: float) -> float:
    """Relaxed star bound 2^(n-2) (1 + (M/2)^(1/n)) for one dependent source."""
    if n < 2:
        raise ValueError("n must be at least 2")
    _check_m(M1)
    return float(2 ** (n - 2) * (1 + (M1 / 2) ** (1.0 / n)))


def required_md(n: int, S_target: float) -> float:
    """Smallest one-sided M for which the relaxed bound admits ``S_target``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    base = classical_bound(n)
    if S_target <= base:
        return 0.0
    if S_target > md_bound(n, 2.0) * (1 + 1e-15):
        raise ValueError(f"S={S_target} exceeds the largest relaxed bound {md_bound(n, 2.0)}")
    return float(min(2.0, 2 * (S_target / base - 1) ** n))


def independence_fraction(M: float) -> float:
    _check_m(M)
    return 1.0 - M / 2.0


@dataclass
class InequalityReport:
    n: int
    components: list[float]
    aggregate_S: float
    classical_bound: float
    md_bound: float
    M_used: float
    violation: bool
    tolerance: float
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def s_n(
    t: BehaviorTensor,
    M_used: float = 0.0,
    convention: CentralSignConvention | None = None,
    tol: float | None = None,
) -> InequalityReport:
    if tol is None:
        tol = default_tolerance()
    n = t.n
    comps = all_components(t, convention)
    S = aggregate(comps, n)
    bound = md_bound(n, M_used)
    return InequalityReport(
        n=n,
        components=[float(c) for c in comps],
        aggregate_S=S,
        classical_bound=classical_bound(n),
        md_bound=bound,
        M_used=float(M_used),
        violation=bool(S > bound + tol),
        tolerance=tol,
        provenance={
            "components": "computed",
            "aggregate_S": "computed",
            "classical_bound": bound_provenance(n),
            "md_bound": bound_provenance(n),
        },
    )
