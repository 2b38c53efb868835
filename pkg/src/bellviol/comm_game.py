"""Broadcast communication-complexity game attached to a Bell functional.

Each party receives ``(x_i, y_i)`` with ``x ~ |T_x| / sum |T|`` and ``y_i``
uniform in {-1, +1}, broadcasts ``m_i = y_i a_i`` where ``a_i`` is its local
+-1 outcome for setting ``x_i``, and everybody outputs ``prod_i m_i``. The
round is won when that equals ``F(x, y) = prod_i y_i sign(T_x)``, so the
success probability is ``1/2 + V / (2 sum |T|)`` with ``V`` the value of the
functional under the strategy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classical_value import ClassicalResult, SignStrategy, classical_value_exact, strategy_value
from .quantum_value import ViolationReport
from .tensor_core import (
    BellFunctional,
    ObservableSet,
    QuantumState,
    ValidationError,
    bell_operator,
    expectation,
    sign_operator,
)

BLOCK_ROUNDS = 1 << 16
RATIO_TOL = 1e-9


@dataclass(frozen=True)
class QuantumStrategy:
    state: QuantumState
    observables: ObservableSet


@dataclass(frozen=True)
class GameSpec:
    T: BellFunctional
    strategy: SignStrategy | QuantumStrategy

    def __post_init__(self) -> None:
        if isinstance(self.strategy, SignStrategy):
            self.strategy.check_matches(self.T)
        elif isinstance(self.strategy, QuantumStrategy):
            self.strategy.observables.check_matches(self.T)
            if self.strategy.observables.dims != self.strategy.state.dims:
                raise ValidationError("observable dims do not match the state dims")
        else:
            raise ValidationError(f"unsupported strategy type {type(self.strategy).__name__}")

    @property
    def kind(self) -> str:
        return "classical" if isinstance(self.strategy, SignStrategy) else "quantum"

    @property
    def input_distribution(self) -> np.ndarray:
        w = np.abs(self.T.coeffs)
        return w / w.sum()

    def correlation_value(self) -> float:
        """``V = sum_x T_x <prod_i a_i>_x`` under the strategy."""
        if isinstance(self.strategy, SignStrategy):
            return strategy_value(self.T, self.strategy)
        return expectation(self.strategy.state, bell_operator(self.T, self.strategy.observables))


@dataclass(frozen=True)
class GameResult:
    success_probability: float
    standard_error: float
    rounds: int | None
    information_gain: float
    seed: int | None
    exact: bool

    def to_json(self) -> dict:
        return {
            "success_probability": self.success_probability,
            "standard_error": self.standard_error,
            "rounds": self.rounds,
            "information_gain": self.information_gain,
            "seed": self.seed,
            "exact": self.exact,
        }


def information_gain(P: float) -> float:
    """``1 - H(P)`` with ``H`` the binary entropy in bits."""
    if not 0.0 <= P <= 1.0:
        raise ValidationError(f"probability must lie in [0, 1], got {P}")
    h = 0.0
    for q in (P, 1.0 - P):
        if q > 0:
            h -= q * np.log2(q)
    return 1.0 - h


def classical_spec(T: BellFunctional, result: ClassicalResult | None = None) -> GameSpec:
    """Game spec for an optimal classical strategy, oriented so that ``V >= 0``."""
    result = classical_value_exact(T) if result is None else result
    strategy = result.strategy
    if strategy_value(T, strategy) < 0:
        signs = list(strategy.signs)
        signs[0] = tuple(-s for s in signs[0])
        strategy = SignStrategy(tuple(signs))
    return GameSpec(T, strategy)


def quantum_spec(T: BellFunctional, state: QuantumState, observables: ObservableSet) -> GameSpec:
    """Game spec for a quantum strategy, flipping party 0's observables if needed so that ``V >= 0``."""
    spec = GameSpec(T, QuantumStrategy(state, observables))
    if spec.correlation_value() < 0:
        stacks = list(observables.stacks)
        stacks[0] = -stacks[0]
        spec = GameSpec(T, QuantumStrategy(state, ObservableSet(tuple(stacks))))
    return spec


def quantum_spec_from_report(report: ViolationReport) -> GameSpec:
    return quantum_spec(report.functional, report.best_state, report.best_observables)


def exact_success(spec: GameSpec) -> GameResult:
    V = spec.correlation_value()
    P = 0.5 + V / (2.0 * float(np.abs(spec.T.coeffs).sum()))
    return GameResult(success_probability=P, standard_error=0.0, rounds=None,
                      information_gain=information_gain(min(max(P, 0.0), 1.0)), seed=None, exact=True)


def ratio_check(spec_classical: GameSpec, spec_quantum: GameSpec) -> float:
    """``(P_K - 1/2) / (P - 1/2)``, cross-checked against ``V_quantum / V_classical``."""
    if spec_classical.T != spec_quantum.T:
        raise ValidationError("classical and quantum specs use different functionals")
    P = exact_success(spec_classical).success_probability
    PK = exact_success(spec_quantum).success_probability
    if abs(P - 0.5) <= 1e-15:
        raise ValidationError("classical success probability is 1/2; the ratio is undefined")
    ratio = (PK - 0.5) / (P - 0.5)
    direct = spec_quantum.correlation_value() / spec_classical.correlation_value()
    if abs(ratio - direct) > RATIO_TOL * max(1.0, abs(direct)):
        raise RuntimeError(f"success-probability ratio {ratio!r} disagrees with value ratio {direct!r}")
    return ratio


def binarize(obs: ObservableSet) -> ObservableSet:
    """Replace every observable by its eigen-sign (zero eigenvalues map to +1)."""
    return ObservableSet(tuple(np.stack([sign_operator(A) for A in stack]) for stack in obs.stacks))


def _check_dichotomic(obs: ObservableSet, tol: float = 1e-8) -> None:
    for j, stack in enumerate(obs.stacks):
        eye = np.eye(stack.shape[1])
        for i, A in enumerate(stack):
            if np.max(np.abs(A @ A - eye)) > tol:
                raise ValidationError(
                    f"observable (party {j}, setting {i}) does not have +-1 spectrum; apply binarize() first"
                )


def _apply_local(state: QuantumState, ops: list[np.ndarray]) -> float:
    """``tr(rho (x)_k ops[k])`` by local contractions."""
    n = len(state.dims)
    if state.is_pure:
        phi = state.vector.reshape(state.dims)
        for k, P in enumerate(ops):
            phi = np.moveaxis(np.tensordot(P, phi, axes=([1], [k])), 0, k)
        return float(np.vdot(state.vector, phi.reshape(-1)).real)
    x = state.density.reshape(state.dims + state.dims)
    for k, P in enumerate(ops):
        x = np.moveaxis(np.tensordot(x, P, axes=([n + k], [0])), -1, n + k)
    return float(np.trace(x.reshape(state.dim, state.dim)).real)


def outcome_table(spec: GameSpec) -> np.ndarray:
    """``table[x_flat, o]``: probability of joint outcome ``o`` (bit k set <=> party k outputs -1)."""
    T = spec.T
    n = T.num_parties
    flat = T.coeffs.reshape(-1)
    table = np.zeros((flat.size, 2 ** n))
    if isinstance(spec.strategy, SignStrategy):
        for xf, idx in enumerate(np.ndindex(*T.settings)):
            o = sum(1 << k for k in range(n) if spec.strategy.signs[k][idx[k]] < 0)
            table[xf, o] = 1.0
        return table
    obs = spec.strategy.observables
    _check_dichotomic(obs)
    state = spec.strategy.state
    projectors = [
        [[(np.eye(A.shape[0]) + s * A) / 2 for s in (1.0, -1.0)] for A in stack] for stack in obs.stacks
    ]
    for xf, idx in enumerate(np.ndindex(*T.settings)):
        if flat[xf] == 0:
            continue
        for o in range(2 ** n):
            ops = [projectors[k][idx[k]][(o >> k) & 1] for k in range(n)]
            table[xf, o] = _apply_local(state, ops)
        row = np.clip(table[xf], 0.0, None)
        table[xf] = row / row.sum()
    return table


@dataclass(frozen=True)
class SampledRounds:
    x: np.ndarray  # (rounds, N) setting indices
    y: np.ndarray  # (rounds, N) +-1
    a: np.ndarray  # (rounds, N) +-1 local outcomes
    won: np.ndarray  # (rounds,) bool


def sample_rounds(spec: GameSpec, rounds: int, seed: int) -> SampledRounds:
    """Play ``rounds`` rounds in fixed-size blocks with seeds derived from ``seed``."""
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    T = spec.T
    n = T.num_parties
    dist = spec.input_distribution.reshape(-1)
    table = outcome_table(spec)
    cum = np.cumsum(table, axis=1)
    sign_T = np.sign(T.coeffs.reshape(-1))
    nblocks = -(-rounds // BLOCK_ROUNDS)
    xs, ys, as_, wins = [], [], [], []
    for b, ss in enumerate(np.random.SeedSequence(seed).spawn(nblocks)):
        rng = np.random.default_rng(ss)
        size = min(BLOCK_ROUNDS, rounds - b * BLOCK_ROUNDS)
        xf = rng.choice(dist.size, size=size, p=dist)
        y = rng.choice(np.array([-1, 1]), size=(size, n))
        u = rng.random(size)
        o = (u[:, None] >= cum[xf]).sum(axis=1)
        o = np.minimum(o, 2 ** n - 1)
        a = 1 - 2 * ((o[:, None] >> np.arange(n)) & 1)
        m = y * a
        guess = m.prod(axis=1)
        F = y.prod(axis=1) * sign_T[xf]
        xs.append(np.stack(np.unravel_index(xf, T.settings), axis=1))
        ys.append(y)
        as_.append(a)
        wins.append(guess == F)
    return SampledRounds(np.concatenate(xs), np.concatenate(ys), np.concatenate(as_), np.concatenate(wins))


def simulate_game(spec: GameSpec, rounds: int, seed: int) -> GameResult:
    sampled = sample_rounds(spec, rounds, seed)
    P = float(sampled.won.mean())
    se = float(np.sqrt(P * (1.0 - P) / rounds))
    return GameResult(success_probability=P, standard_error=se, rounds=rounds,
                      information_gain=information_gain(P), seed=seed, exact=False)
