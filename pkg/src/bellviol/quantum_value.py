"""See-saw lower bounds on the quantum value of a Bell functional.

Each block is solved exactly: given the state and the other parties'
observables, the best observable for one setting is the eigen-sign of the
Hermitian part of its effective operator; given all observables, the best
state is the top eigenvector of the Bell operator. The objective therefore
never decreases.
"""

from __future__ import annotations

import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classical_value import ClassicalResult, classical_value
from .random_states import haar_unitary, random_state_vector
from .tensor_core import (
    BellFunctional,
    ObservableSet,
    QuantumState,
    ValidationError,
    bell_operator,
    check_budget,
    expectation,
    sign_operator,
)

STAGNATION_LIMIT = 200
MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class SeesawConfig:
    dims: tuple[int, ...]
    restarts: int = 16
    max_iters: int = 500
    rel_tol: float = 1e-9
    seed: int = 0
    init: str = "haar_random"
    initial_observables: ObservableSet | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValidationError(f"dims must be positive, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if self.rel_tol <= 0:
            raise ValidationError("rel_tol must be > 0")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValidationError("restarts and max_iters must be >= 1")
        if self.init not in ("haar_random", "provided"):
            raise ValidationError(f"unknown init {self.init!r}")
        if self.init == "provided" and self.initial_observables is None:
            raise ValidationError("init='provided' requires initial_observables")


@dataclass
class RestartTrace:
    restart: int
    objective: list[float]
    iterations: int
    converged: bool
    reason: str

    def to_json(self) -> dict:
        return {
            "restart": self.restart,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "reason": self.reason,
        }


@dataclass
class ViolationReport:
    functional: BellFunctional
    classical_value: float
    quantum_value: float
    ratio: float
    best_state: QuantumState
    best_observables: ObservableSet
    traces: list[RestartTrace]
    seed: int
    dims: tuple[int, ...]
    fixed_state: bool = False
    classical: ClassicalResult | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "functional": self.functional.to_json(),
            "classical_value": self.classical_value,
            "classical_method": None if self.classical is None else self.classical.method,
            "quantum_value": self.quantum_value,
            "ratio": self.ratio,
            "dims": list(self.dims),
            "seed": self.seed,
            "fixed_state": self.fixed_state,
            "best_state": self.best_state.to_json(),
            "best_observables": self.best_observables.to_json(),
            "traces": [t.to_json() for t in self.traces],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ViolationReport":
        try:
            return cls(
                functional=BellFunctional.from_json(data["functional"]),
                classical_value=float(data["classical_value"]),
                quantum_value=float(data["quantum_value"]),
                ratio=float(data["ratio"]),
                best_state=QuantumState.from_json(data["best_state"]),
                best_observables=ObservableSet.from_json(data["best_observables"]),
                traces=[RestartTrace(**t) for t in data.get("traces", [])],
                seed=int(data["seed"]),
                dims=tuple(data["dims"]),
                fixed_state=bool(data.get("fixed_state", False)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed violation report JSON: {exc}") from exc


def optimal_observable_step(E: np.ndarray) -> tuple[np.ndarray, float]:
    """Maximize ``Re tr(E A)`` over Hermitian contractions ``A``.

    Returns the eigen-sign of ``(E + E^dagger)/2`` (zero eigenvalues map to
    +1) and the attained value, the sum of absolute eigenvalues.
    """
    E = np.asarray(E, dtype=complex)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ValidationError(f"effective operator must be square, got {E.shape}")
    H = (E + E.conj().T) / 2
    w = np.linalg.eigvalsh(H)
    return sign_operator(H), float(np.abs(w).sum())


def optimal_state_step(B: np.ndarray, dims: Sequence[int] | None = None) -> tuple[QuantumState, float]:
    """Top eigenvector of a Hermitian ``B``; ties go to the first eigenvector in ``eigh`` order."""
    B = np.asarray(B, dtype=complex)
    dev = float(np.max(np.abs(B - B.conj().T))) if B.size else 0.0
    if dev > 1e-9:
        raise ValidationError(f"Bell operator is not Hermitian (deviation {dev:.3e})")
    w, v = np.linalg.eigh((B + B.conj().T) / 2)
    top = w[-1]
    tol = 1e-12 * max(1.0, abs(top))
    idx = int(np.nonzero(w >= top - tol)[0][0])
    vec = v[:, idx]
    vec = vec / np.linalg.norm(vec)
    dims = (B.shape[0],) if dims is None else tuple(dims)
    return QuantumState.pure(vec, dims), float(w[idx])


def _mixed_subscripts(n: int, j: int) -> str:
    """Operands: T, the other parties' stacks, rho. Output ``[setting_j, b_j, a_j]``."""
    L = string.ascii_letters
    s, a, b = L[:n], L[n:2 * n], L[2 * n:3 * n]
    ops = [s] + [s[k] + a[k] + b[k] for k in range(n) if k != j] + [b + a]
    return ",".join(ops) + "->" + s[j] + b[j] + a[j]


class _Problem:
    def __init__(self, T: BellFunctional, dims: tuple[int, ...]):
        if len(dims) != T.num_parties:
            raise ValidationError(f"dims {dims} given for a {T.num_parties}-party functional")
        check_budget(dims)
        self.T = T
        self.dims = dims
        self.n = T.num_parties
        self.coeffs = T.coeffs.astype(complex)
        self._paths: dict = {}

    def effective_operators(self, j: int, stacks: list[np.ndarray], state: QuantumState) -> np.ndarray:
        """``E[i_j]`` with ``sum_i tr(E[i] A^j_i)`` equal to the objective; shape ``(M_j, d_j, d_j)``."""
        if state.is_pure:
            return self._effective_pure(j, stacks, state.vector)
        sub = _mixed_subscripts(self.n, j)
        others = [stacks[k] for k in range(self.n) if k != j]
        operands = [self.coeffs, *others, state.density.reshape(self.dims + self.dims)]
        if j not in self._paths:
            self._paths[j] = np.einsum_path(sub, *operands, optimize="greedy")[0]
        return np.einsum(sub, *operands, optimize=self._paths[j])

    def _effective_pure(self, j: int, stacks: list[np.ndarray], vector: np.ndarray) -> np.ndarray:
        n = self.n
        psi = vector.reshape(self.dims)
        # X axes: (settings of applied parties..., d_1, ..., d_N)
        X = psi
        applied: list[int] = []
        for k in range(n):
            if k == j:
                continue
            X = np.tensordot(stacks[k], X, axes=([2], [len(applied) + k]))
            # tensordot puts (setting, row) first; move row back to party k's slot
            X = np.moveaxis(X, 1, len(applied) + 1 + k)
            applied.append(k)
        # newest setting axis is first; restore ascending party order
        L = len(applied)
        X = np.transpose(X, list(reversed(range(L))) + list(range(L, X.ndim)))
        m_other = int(np.prod([self.T.settings[k] for k in applied]))
        X = X.reshape(m_other, -1)
        Tm = np.moveaxis(self.coeffs, j, 0).reshape(self.T.settings[j], m_other)
        chi = (Tm @ X).reshape((self.T.settings[j],) + self.dims)
        dj = self.dims[j]
        chi = np.moveaxis(chi, 1 + j, 1).reshape(self.T.settings[j], dj, -1)
        psi_j = np.moveaxis(psi, j, 0).reshape(dj, -1)
        return chi @ psi_j.conj().T

    def objective(self, stacks: list[np.ndarray], state: QuantumState) -> float:
        E = self.effective_operators(0, stacks, state)
        return float(np.einsum("sba,sab->", E, stacks[0]).real)

    def bell(self, stacks: list[np.ndarray]) -> np.ndarray:
        return bell_operator(self.T, ObservableSet(tuple(stacks)))


def _random_observable(d: int, rng: np.random.Generator) -> np.ndarray:
    U = haar_unitary(d, rng)
    signs = rng.choice([-1.0, 1.0], size=d)
    A = (U * signs) @ U.conj().T
    return sign_operator(A)


def _initial_state(dims: tuple[int, ...], rng: np.random.Generator, fully_random: bool) -> QuantumState:
    if fully_random:
        return QuantumState.pure(random_state_vector(int(np.prod(dims)), rng), dims)
    d1 = dims[0]
    rest = int(np.prod(dims[1:])) if len(dims) > 1 else 1
    r = min(d1, rest)
    V = haar_unitary(rest, rng)
    psi = np.zeros((d1, rest), dtype=complex)
    for k in range(r):
        psi[k] = V[:, k]
    psi /= np.sqrt(r)
    vec = psi.reshape(-1)
    return QuantumState.pure(vec / np.linalg.norm(vec), dims)


def _run_restart(problem: _Problem, cfg: SeesawConfig, restart: int, ss: np.random.SeedSequence,
                 fixed_state: QuantumState | None) -> tuple[float, list[np.ndarray], QuantumState, RestartTrace]:
    rng = np.random.default_rng(ss)
    T = problem.T
    if cfg.init == "provided":
        stacks = [np.array(s) for s in cfg.initial_observables.stacks]
    else:
        stacks = [np.stack([_random_observable(d, rng) for _ in range(m)])
                  for d, m in zip(problem.dims, T.settings)]
    if fixed_state is not None:
        state = fixed_state
    else:
        state = _initial_state(problem.dims, rng, fully_random=(restart == cfg.restarts - 1 and cfg.restarts > 1))

    trace = [problem.objective(stacks, state)]
    last_sweep = trace[0]
    stagnant = 0
    converged = False
    reason = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        for j in range(problem.n):
            E = problem.effective_operators(j, stacks, state)
            value = 0.0
            for i in range(T.settings[j]):
                stacks[j][i], v = optimal_observable_step(E[i])
                value += v
            _check_monotone(trace[-1], value)
            trace.append(value)
        if fixed_state is None:
            state, value = optimal_state_step(problem.bell(stacks), problem.dims)
            _check_monotone(trace[-1], value)
            trace.append(value)
        current = trace[-1]
        change = (current - last_sweep) / max(abs(current), 1e-300)
        if change < cfg.rel_tol:
            converged = True
            reason = "rel_tol"
            break
        stagnant = stagnant + 1 if change < 1e-6 else 0
        if stagnant >= STAGNATION_LIMIT:
            reason = "stagnation"
            break
        last_sweep = current
    return trace[-1], stacks, state, RestartTrace(restart, trace, it, converged, reason)


def _check_monotone(prev: float, new: float) -> None:
    if new < prev - MONOTONE_TOL * max(1.0, abs(prev)):
        raise RuntimeError(f"see-saw objective decreased from {prev!r} to {new!r}")


def seesaw(
    T: BellFunctional,
    cfg: SeesawConfig,
    fixed_state: QuantumState | None = None,
    classical: ClassicalResult | None = None,
) -> ViolationReport:
    """Best see-saw value over ``cfg.restarts`` seeded restarts, with a feasibility certificate."""
    problem = _Problem(T, cfg.dims)
    if fixed_state is not None and fixed_state.dims != cfg.dims:
        raise ValidationError(f"fixed state dims {fixed_state.dims} differ from configured dims {cfg.dims}")
    if cfg.init == "provided":
        cfg.initial_observables.check_matches(T)
        if cfg.initial_observables.dims != cfg.dims:
            raise ValidationError("initial observables have the wrong local dimensions")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    def one(r):
        return _run_restart(problem, cfg, r, children[r], fixed_state)

    if cfg.workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(one, range(cfg.restarts)))
    else:
        runs = [one(r) for r in range(cfg.restarts)]

    # first restart wins ties so the result does not depend on scheduling
    best = max(range(len(runs)), key=lambda r: (runs[r][0], -r))
    _, stacks, state, _ = runs[best]
    observables = ObservableSet(tuple(stacks))
    certified = expectation(state, bell_operator(T, observables))
    if classical is None:
        classical = classical_value(T, seed=cfg.seed)
    cval = classical.value
    return ViolationReport(
        functional=T,
        classical_value=cval,
        quantum_value=certified,
        ratio=certified / cval if cval > 0 else float("inf"),
        best_state=state,
        best_observables=observables,
        traces=[run[3] for run in runs],
        seed=cfg.seed,
        dims=cfg.dims,
        fixed_state=fixed_state is not None,
        classical=classical,
    )


def verify_report(report: ViolationReport, tol: float = 1e-9) -> bool:
    """Recompute the quantum value from the stored state and observables."""
    value = expectation(report.best_state, bell_operator(report.functional, report.best_observables))
    ratio_ok = report.classical_value <= 0 or abs(report.ratio - report.quantum_value / report.classical_value) <= tol
    return abs(value - report.quantum_value) <= tol * max(1.0, abs(value)) and ratio_ok
