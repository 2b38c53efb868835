"""Closed-form constants and the numerical checks built on them: GHZ
boundedness, the row/column (RC) operator-space norm, and the sqrt(d)
envelope for tripartite violations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classical_value import classical_value
from .functionals import mermin, pad_settings, random_functional
from .quantum_value import SeesawConfig, ViolationReport, seesaw
from .tensor_core import QuantumState, ValidationError, check_budget


@dataclass(frozen=True)
class BoundsTable:
    grothendieck_lower: float = 1.676
    grothendieck_upper: float = 1.782
    chsh_k: float = math.sqrt(2.0)

    @property
    def ghz_tripartite_bound(self) -> float:
        return 4.0 * math.sqrt(2.0) * self.grothendieck_upper

    def ghz_nparty_bound(self, parties: int) -> float:
        if parties < 2:
            raise ValidationError("need at least 2 parties")
        return self.grothendieck_upper * (2.0 * math.sqrt(2.0)) ** (parties - 1)

    def to_json(self) -> dict:
        return {
            "grothendieck_lower": self.grothendieck_lower,
            "grothendieck_upper": self.grothendieck_upper,
            "chsh_k": self.chsh_k,
            "ghz_tripartite_bound": self.ghz_tripartite_bound,
            "ghz_nparty_bound": {str(n): self.ghz_nparty_bound(n) for n in range(2, 7)},
        }


BOUNDS = BoundsTable()


def ghz_state(n: int, parties: int = 3) -> QuantumState:
    """``(1/sqrt(n)) sum_i |i ... i>`` on ``(C^n)^{(x) parties}``."""
    if n < 1:
        raise ValidationError("GHZ level count must be >= 1")
    if parties < 2:
        raise ValidationError("GHZ state needs at least 2 parties")
    dims = (n,) * parties
    vec = np.zeros(n ** parties, dtype=complex)
    stride = sum(n ** k for k in range(parties))
    vec[np.arange(n) * stride] = 1 / np.sqrt(n)
    return QuantumState.pure(vec, dims)


@dataclass
class GhzTrial:
    label: str
    classical_value: float
    quantum_value: float
    ratio: float

    def to_json(self) -> dict:
        return {"label": self.label, "classical_value": self.classical_value,
                "quantum_value": self.quantum_value, "ratio": self.ratio}


@dataclass
class GhzExperimentReport:
    n: int
    M: int
    parties: int
    seed: int
    bound: float
    trials: list[GhzTrial] = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(t.ratio for t in self.trials)

    @property
    def within_bound(self) -> bool:
        return self.max_ratio <= self.bound

    def to_json(self) -> dict:
        return {
            "n": self.n, "M": self.M, "parties": self.parties, "seed": self.seed,
            "bound": self.bound, "max_ratio": self.max_ratio, "within_bound": self.within_bound,
            "trials": [t.to_json() for t in self.trials],
        }


def ghz_violation_experiment(
    n: int,
    M: int,
    trials: int,
    seed: int,
    *,
    parties: int = 3,
    restarts: int = 4,
    max_iters: int = 300,
    workers: int = 1,
) -> GhzExperimentReport:
    """See-saw over observables with the state frozen at GHZ_n.

    Runs ``trials`` Gaussian functionals with ``M`` settings per party plus the
    Mermin functional (zero-padded to ``M`` settings when ``M > 2``).
    """
    if M < 1 or trials < 0:
        raise ValidationError("M must be >= 1 and trials >= 0")
    check_budget((n,) * parties)
    state = ghz_state(n, parties)
    bound = BOUNDS.ghz_tripartite_bound if parties == 3 else BOUNDS.ghz_nparty_bound(parties)
    fseeds = np.random.SeedSequence(seed).generate_state(trials + 1)

    jobs: list[tuple[str, object]] = []
    if M >= 2:
        jobs.append((f"mermin{parties}", pad_settings(mermin(parties), M)))
    for t in range(trials):
        jobs.append((f"random#{t}", random_functional(parties, M, int(fseeds[t]))))

    def run(job_index: int) -> GhzTrial:
        label, T = jobs[job_index]
        classical = classical_value(T, seed=int(fseeds[-1]))
        cfg = SeesawConfig(dims=state.dims, restarts=restarts, max_iters=max_iters,
                           seed=int(fseeds[-1]) + job_index)
        rep = seesaw(T, cfg, fixed_state=state, classical=classical)
        return GhzTrial(label, rep.classical_value, rep.quantum_value, rep.ratio)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(jobs))))
    else:
        results = [run(k) for k in range(len(jobs))]
    return GhzExperimentReport(n=n, M=M, parties=parties, seed=seed, bound=bound, trials=results)


def _as_family(family) -> np.ndarray:
    A = np.asarray(family, dtype=complex)
    if A.ndim != 4 or A.shape[0] != A.shape[1] or A.shape[2] != A.shape[3]:
        raise ValidationError(
            f"RC family must have shape (N, N, m, m) with square m x m entries, got {A.shape}"
        )
    return A


def rc_terms(family) -> tuple[float, float, float, float]:
    """The four operator norms whose maximum is the RC-squared norm of ``sum A_ij (x) |ij>``.

    ``||sum A A^dagger||^(1/2)``, ``||sum A^dagger A||^(1/2)``,
    ``||sum A_ij (x) |i><j| ||`` and ``||sum A_ij (x) |j><i| ||``.
    """
    A = _as_family(family)
    N, _, m, _ = A.shape
    flat = A.reshape(N * N, m, m)
    row = math.sqrt(np.linalg.norm(np.einsum("kab,kcb->ac", flat, flat.conj()), 2))
    col = math.sqrt(np.linalg.norm(np.einsum("kba,kbc->ac", flat.conj(), flat), 2))
    # block (i, j) of the mN x mN matrix; operator on C^m (x) C^N
    direct = np.einsum("ijab->aibj", A).reshape(m * N, m * N)
    swapped = np.einsum("ijab->ajbi", A).reshape(m * N, m * N)
    return row, col, float(np.linalg.norm(direct, 2)), float(np.linalg.norm(swapped, 2))


def rc_norm(family, *, flatten: bool = False) -> float:
    """RC norm of a doubly indexed family ``A[i, j]`` of ``m x m`` matrices.

    By default the index pair carries the RC_N (x)min RC_N structure and the
    value is the maximum of all four :func:`rc_terms`. With ``flatten=True``
    the pair ``(i, j)`` is treated as a single index of RC_{N^2}, which keeps
    only the row and column terms; for ``A_ij = |i><j|`` that value is
    ``sqrt(N)`` while the four-term value is ``N``.
    """
    row, col, direct, swapped = rc_terms(family)
    if flatten:
        return max(row, col)
    return max(row, col, direct, swapped)


def matrix_unit_family(N: int) -> np.ndarray:
    """``A_ij = |i><j|`` in ``M_N``."""
    if N < 1:
        raise ValidationError("N must be >= 1")
    A = np.zeros((N, N, N, N), dtype=complex)
    for i in range(N):
        for j in range(N):
            A[i, j, i, j] = 1.0
    return A


@dataclass(frozen=True)
class EnvelopeCheck:
    passed: bool
    ratio: float
    d: int
    constant: float
    margin: float

    def to_json(self) -> dict:
        return {"passed": self.passed, "ratio": self.ratio, "d": self.d,
                "constant": self.constant, "margin": self.margin}


def sqrt_d_envelope(report: ViolationReport, constant: float = 10.0) -> EnvelopeCheck:
    """Check ``ratio <= constant * sqrt(d_1)`` for a tripartite report."""
    if len(report.dims) != 3:
        raise ValidationError(f"sqrt(d) envelope applies to tripartite reports, got dims {report.dims}")
    d = int(report.dims[0])
    limit = constant * math.sqrt(d)
    return EnvelopeCheck(passed=report.ratio <= limit, ratio=report.ratio, d=d,
                         constant=constant, margin=limit - report.ratio)
