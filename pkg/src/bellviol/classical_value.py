"""Local-hidden-variable value ``||T||`` of a full-correlation Bell functional.

The exact routine eliminates the party with the most settings analytically:
once every other party's signs are fixed, the functional is linear in that
party's signs and the best choice is the sign of each contracted coefficient.
The remaining sign bits are split into

* chunk bits, fixed per independent work unit;
* Gray-code bits, walked one flip at a time with an incremental update of the
  contracted matrix;
* block bits (settings of the last party), enumerated all at once as a matrix
  product.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor_core import BellFunctional, BudgetError, ValidationError

EXACT_BUDGET_BITS = 28
BLOCK_BITS = 14
MAX_CHUNK_BITS = 4


@dataclass(frozen=True)
class SignStrategy:
    """Deterministic +-1 responses, one vector per party."""

    signs: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        signs = tuple(tuple(int(s) for s in party) for party in self.signs)
        for j, party in enumerate(signs):
            if any(s not in (-1, 1) for s in party):
                raise ValidationError(f"party {j}: sign strategy entries must be exactly +-1")
        object.__setattr__(self, "signs", signs)

    def check_matches(self, T: BellFunctional) -> None:
        if tuple(len(p) for p in self.signs) != T.settings:
            raise ValidationError(
                f"strategy lengths {[len(p) for p in self.signs]} do not match settings {T.settings}"
            )

    def key(self) -> tuple[int, ...]:
        return tuple(s for party in self.signs for s in party)

    def arrays(self) -> list[np.ndarray]:
        return [np.asarray(p, dtype=float) for p in self.signs]


@dataclass(frozen=True)
class ClassicalResult:
    value: float
    strategy: SignStrategy
    method: str
    nodes_explored: int
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "strategy": [list(p) for p in self.strategy.signs],
            "method": self.method,
            "nodes_explored": self.nodes_explored,
            **self.extras,
        }


def strategy_value(T: BellFunctional, strategy: SignStrategy) -> float:
    """Signed value ``sum_i T_i prod_j s^j_{i_j}`` of a sign strategy."""
    strategy.check_matches(T)
    x = T.coeffs
    for s in reversed(strategy.arrays()):
        x = x @ s
    return float(x)


def _contract_except(coeffs: np.ndarray, signs: Sequence[np.ndarray | None]) -> np.ndarray:
    """Contract every axis whose entry in ``signs`` is not None; keep the rest in order."""
    x = coeffs
    for axis in reversed(range(coeffs.ndim)):
        if signs[axis] is not None:
            x = np.tensordot(x, signs[axis], axes=([axis], [0]))
    return x


def _block_signs(bits: int) -> np.ndarray:
    """All +-1 vectors of length ``bits`` as columns; column c has bit b set -> -1."""
    cols = np.arange(2 ** bits)
    return 1.0 - 2.0 * ((cols[None, :] >> np.arange(bits)[:, None]) & 1)


class _ExactPlan:
    """Precomputed layout for the chunked Gray-code enumeration."""

    def __init__(self, T: BellFunctional):
        settings = T.settings
        self.T = T
        self.n = len(settings)
        self.elim = int(np.argmax(settings))
        self.rest = [p for p in range(self.n) if p != self.elim]
        self.last = self.rest[-1]
        self.middle = self.rest[:-1]
        # axes ordered (elim, middle..., last)
        order = [self.elim] + self.middle + [self.last]
        self.coeffs = np.transpose(T.coeffs, order)
        self.m_elim = settings[self.elim]
        self.m_last = settings[self.last]
        self.block = min(self.m_last, BLOCK_BITS)
        self.last_prefix = self.m_last - self.block
        # prefix bits: (party, setting) for middle parties then the last party's leading settings
        self.prefix: list[tuple[int, int]] = [(p, i) for p in self.middle for i in range(settings[p])]
        self.prefix += [(self.last, i) for i in range(self.last_prefix)]
        self.total_bits = len(self.prefix) + self.block
        self.block_signs = _block_signs(self.block)
        self.scale = float(np.abs(T.coeffs).sum())
        self.tie_tol = 1e-10 * max(1.0, self.scale)

    def chunk_bits(self, requested: int | None) -> int:
        c = MAX_CHUNK_BITS if requested is None else requested
        return max(0, min(c, len(self.prefix)))

    def _reduced(self, mid_signs: list[np.ndarray]) -> np.ndarray:
        """Contract middle parties' signs: result has shape (m_elim, m_last)."""
        x = self.coeffs
        for k in reversed(range(len(self.middle))):
            x = np.tensordot(x, mid_signs[k], axes=([1 + k], [0]))
        return x

    def _slice_delta(self, mid_signs: list[np.ndarray], k: int, i: int) -> np.ndarray:
        x = np.take(self.coeffs, i, axis=1 + k)
        for kk in reversed(range(len(self.middle))):
            if kk == k:
                continue
            axis = 1 + kk - (1 if kk > k else 0)
            x = np.tensordot(x, mid_signs[kk], axes=([axis], [0]))
        return x

    def _full_keys(self, mid_signs, last_prefix_signs, block_cols: np.ndarray, v_cols: np.ndarray) -> np.ndarray:
        """Full strategies (original party order) for the selected block columns, one row each."""
        ncand = len(block_cols)
        per_party: dict[int, np.ndarray] = {}
        # the best response is +-sign(v) (|value| is symmetric); zero entries -> -1;
        # take whichever orientation is lexicographically smaller
        vT = v_cols.T  # (ncand, m_elim)
        nonzero = np.abs(vT) > self.tie_tol
        first = np.argmax(nonzero, axis=1)
        lead = vT[np.arange(ncand), first]
        orient = np.where(lead > 0, -1.0, 1.0)[:, None]
        elim_signs = np.where(orient * vT > self.tie_tol, 1, -1)
        per_party[self.elim] = elim_signs
        for k, p in enumerate(self.middle):
            per_party[p] = np.broadcast_to(mid_signs[k].astype(int), (ncand, len(mid_signs[k])))
        last = np.concatenate(
            [np.broadcast_to(last_prefix_signs.astype(int), (ncand, self.last_prefix)),
             self.block_signs[:, block_cols].T.astype(int)],
            axis=1,
        )
        per_party[self.last] = last
        return np.concatenate([per_party[p] for p in range(self.n)], axis=1)

    def run_chunk(self, chunk: int, c_bits: int) -> tuple[float, tuple[int, ...], int]:
        signs = np.ones(len(self.prefix))
        for b in range(c_bits):
            if (chunk >> b) & 1:
                signs[b] = -1.0
        sizes = [self.T.settings[p] for p in self.middle]
        bounds = np.cumsum([0] + sizes)
        mid_signs = [signs[bounds[k]:bounds[k + 1]].copy() for k in range(len(self.middle))]
        lp_signs = signs[bounds[-1]:].copy()

        R = self._reduced(mid_signs)
        RbS = R[:, self.last_prefix:] @ self.block_signs
        best_val = -np.inf
        best_key: tuple[int, ...] | None = None
        nodes = 0
        g_bits = len(self.prefix) - c_bits

        for t in range(2 ** g_bits):
            if t > 0:
                b = c_bits + ((t & -t).bit_length() - 1)
                party, i = self.prefix[b]
                if party == self.last:
                    lp_signs[i] = -lp_signs[i]
                else:
                    k = self.middle.index(party)
                    old = mid_signs[k][i]
                    R = R - 2.0 * old * self._slice_delta(mid_signs, k, i)
                    mid_signs[k][i] = -old
                    RbS = R[:, self.last_prefix:] @ self.block_signs
            offset = R[:, :self.last_prefix] @ lp_signs
            V = offset[:, None] + RbS
            vals = np.abs(V).sum(axis=0)
            nodes += vals.size
            step_max = float(vals.max())
            if step_max < best_val - self.tie_tol:
                continue
            cand = np.nonzero(vals >= step_max - self.tie_tol)[0]
            keys = self._full_keys(mid_signs, lp_signs, cand, V[:, cand])
            order = np.lexsort(keys.T[::-1])
            key = tuple(int(s) for s in keys[order[0]])
            if best_key is None or step_max > best_val + self.tie_tol:
                best_val, best_key = step_max, key
            elif key < best_key:
                best_val, best_key = max(best_val, step_max), key
        return best_val, best_key, nodes


def _merge(results, tol: float) -> tuple[float, tuple[int, ...], int]:
    """Order-independent reduction: maximum value, lexicographically smallest key among ties."""
    best_val, best_key = -np.inf, None
    nodes = 0
    for val, key, n in results:
        nodes += n
        if best_key is None or val > best_val + tol:
            best_val, best_key = val, key
        elif val >= best_val - tol and key < best_key:
            best_val, best_key = max(val, best_val), key
    return best_val, best_key, nodes


def _split_key(key: Sequence[int], settings: Sequence[int]) -> SignStrategy:
    out, pos = [], 0
    for m in settings:
        out.append(tuple(key[pos:pos + m]))
        pos += m
    return SignStrategy(tuple(out))


def classical_value_exact(T: BellFunctional, *, workers: int = 1, chunk_bits: int | None = None) -> ClassicalResult:
    """Exact ``||T||`` by exhaustive enumeration of all but one party's signs.

    Raises :class:`BudgetError` when the non-eliminated parties carry more than
    28 settings in total; use :func:`classical_value_heuristic` then.
    """
    plan = _ExactPlan(T)
    if plan.total_bits > EXACT_BUDGET_BITS:
        raise BudgetError(
            f"exact enumeration needs {plan.total_bits} sign bits (> {EXACT_BUDGET_BITS}); "
            "use classical_value_heuristic instead"
        )
    c_bits = plan.chunk_bits(chunk_bits)
    chunks = range(2 ** c_bits)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: plan.run_chunk(c, c_bits), chunks))
    else:
        results = [plan.run_chunk(c, c_bits) for c in chunks]
    _, key, nodes = _merge(results, plan.tie_tol)
    strategy = _split_key(key, T.settings)
    value = abs(strategy_value(T, strategy))
    return ClassicalResult(value=value, strategy=strategy, method="exact", nodes_explored=nodes)


def _local_search(T: BellFunctional, rng: np.random.Generator) -> tuple[float, tuple[int, ...], int]:
    """Steepest single-sign flips; the party with most settings always plays its best response.

    The reduced objective ``sum_a |c_a|`` (``c`` the coefficients contracted
    with every other party's signs) equals ``max |value|`` over that party's
    signs, so each accepted flip strictly increases the best attainable value.
    """
    settings = T.settings
    n = len(settings)
    x = T.coeffs
    if n == 1:
        signs = [np.where(x >= 0, 1.0, -1.0)]
        return float(np.abs(x).sum()), tuple(int(v) for v in signs[0]), 1
    elim = int(np.argmax(settings))
    rest = [k for k in range(n) if k != elim]
    signs = [rng.choice([-1.0, 1.0], size=m) for m in settings]
    signs[elim] = None
    c = _contract_except(x, signs)
    f = float(np.abs(c).sum())
    steps = 0
    while True:
        best_gain, best_move = 0.0, None
        for k in rest:
            D = _contract_except(x, [None if j in (k, elim) else signs[j] for j in range(n)])
            if k < elim:
                D = D.T  # axes now (elim, k)
            new_vals = np.abs(c[:, None] - 2.0 * D * signs[k][None, :]).sum(axis=0)
            i = int(np.argmax(new_vals))
            gain = float(new_vals[i]) - f
            if gain > best_gain + 1e-12 * max(1.0, f):
                best_gain, best_move = gain, (k, i, D[:, i].copy())
        if best_move is None:
            break
        k, i, col = best_move
        c = c - 2.0 * signs[k][i] * col
        signs[k][i] = -signs[k][i]
        f = float(np.abs(c).sum())
        steps += 1
    signs[elim] = np.where(c >= 0, 1.0, -1.0)
    key = tuple(int(s) for party in signs for s in party)
    return f, key, steps + 1


def classical_value_heuristic(
    T: BellFunctional, restarts: int = 32, seed: int = 0, *, workers: int = 1
) -> ClassicalResult:
    """Multi-start single-sign-flip hill climbing; a lower bound on ``||T||``."""
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    children = np.random.SeedSequence(seed).spawn(restarts)

    def one(ss):
        return _local_search(T, np.random.default_rng(ss))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, children))
    else:
        results = [one(ss) for ss in children]
    tol = 1e-10 * max(1.0, float(np.abs(T.coeffs).sum()))
    _, key, nodes = _merge(results, tol)
    strategy = _split_key(key, T.settings)
    value = abs(strategy_value(T, strategy))
    return ClassicalResult(
        value=value, strategy=strategy, method="heuristic", nodes_explored=nodes,
        extras={"restarts": restarts, "seed": seed},
    )


def classical_value(T: BellFunctional, *, restarts: int = 64, seed: int = 0, workers: int = 1) -> ClassicalResult:
    """Exact value when the enumeration budget allows, heuristic otherwise."""
    try:
        return classical_value_exact(T, workers=workers)
    except BudgetError:
        return classical_value_heuristic(T, restarts=restarts, seed=seed, workers=workers)
