"""Dense linear algebra for correlation Bell experiments.

Bell functionals are real coefficient tensors ``T[i_1, ..., i_N]``; each party
holds a stack of Hermitian contractions indexed by its settings. Everything is
dense and complex.
"""

from __future__ import annotations

import itertools
import logging
import os
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-9
PURE_NORM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
IMAG_REPORT_TOL = 1e-9

DEFAULT_BUDGET_DIM = 4096


class ValidationError(ValueError):
    """Input violates a documented invariant or precondition."""


class BudgetError(ValidationError):
    """Requested computation exceeds a configured size budget."""


def budget_dim() -> int:
    """Largest total Hilbert space dimension the dense routines accept."""
    raw = os.environ.get("BELLVIOL_BUDGET_DIM")
    if raw is None:
        return DEFAULT_BUDGET_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"BELLVIOL_BUDGET_DIM must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValidationError("BELLVIOL_BUDGET_DIM must be positive")
    return value


def check_budget(dims: Sequence[int], budget: int | None = None) -> int:
    total = int(np.prod(dims))
    limit = budget_dim() if budget is None else budget
    if total > limit:
        raise BudgetError(
            f"total dimension {total} for dims {tuple(dims)} exceeds budget {limit} "
            "(set BELLVIOL_BUDGET_DIM to raise it)"
        )
    return total


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BellFunctional:
    """Real full-correlation Bell functional ``T`` of shape ``(M_1, ..., M_N)``."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs)
        if np.iscomplexobj(coeffs):
            if np.any(np.abs(coeffs.imag) > 0):
                raise ValidationError("Bell coefficients must be real")
            coeffs = coeffs.real
        coeffs = coeffs.astype(float)
        if coeffs.ndim < 2:
            raise ValidationError(f"need at least 2 parties, got coefficient tensor of ndim {coeffs.ndim}")
        if any(m < 1 for m in coeffs.shape):
            raise ValidationError(f"every party needs at least one setting, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("Bell coefficients must be finite")
        if not np.any(coeffs != 0):
            raise ValidationError("Bell functional must have at least one nonzero coefficient")
        object.__setattr__(self, "coeffs", _readonly(coeffs))

    @property
    def num_parties(self) -> int:
        return self.coeffs.ndim

    @property
    def settings(self) -> tuple[int, ...]:
        return tuple(int(m) for m in self.coeffs.shape)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BellFunctional):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self) -> int:
        return hash((self.coeffs.shape, self.coeffs.tobytes()))

    def to_json(self) -> dict:
        return {"parties": self.num_parties, "settings": list(self.settings), "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "BellFunctional":
        try:
            coeffs = np.asarray(data["coeffs"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed Bell functional JSON: {exc}") from exc
        if "settings" in data and tuple(data["settings"]) != coeffs.shape:
            raise ValidationError(
                f"settings {data['settings']} inconsistent with coefficient shape {coeffs.shape}"
            )
        if "parties" in data and int(data["parties"]) != coeffs.ndim:
            raise ValidationError(f"parties={data['parties']} but coefficients have {coeffs.ndim} axes")
        return cls(coeffs)


def _as_square(matrix, name: str = "matrix") -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def validate_observable(matrix, name: str = "observable") -> np.ndarray:
    """Return ``matrix`` as a complex array after checking it is a Hermitian contraction."""
    m = _as_square(matrix, name)
    herm_err = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if herm_err > HERMITIAN_TOL:
        raise ValidationError(f"{name} is not Hermitian (max deviation {herm_err:.3e})")
    norm = float(np.linalg.norm(m, 2)) if m.size else 0.0
    if norm > 1 + NORM_TOL:
        raise ValidationError(f"{name} has operator norm {norm:.12g} > 1")
    return m


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _readonly(validate_observable(self.matrix)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class ObservableSet:
    """Per-party stacks of observables; ``stacks[j]`` has shape ``(M_j, d_j, d_j)``."""

    stacks: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        stacks = []
        for j, stack in enumerate(self.stacks):
            arr = np.asarray(stack, dtype=complex)
            if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
                raise ValidationError(f"party {j}: observable stack must have shape (M, d, d), got {arr.shape}")
            if arr.shape[0] < 1:
                raise ValidationError(f"party {j}: needs at least one observable")
            for i, m in enumerate(arr):
                validate_observable(m, name=f"observable (party {j}, setting {i})")
            stacks.append(_readonly(arr))
        if len(stacks) < 1:
            raise ValidationError("observable set is empty")
        object.__setattr__(self, "stacks", tuple(stacks))

    @classmethod
    def from_lists(cls, parties: Sequence[Sequence]) -> "ObservableSet":
        return cls(tuple(np.stack([np.asarray(getattr(a, "matrix", a), dtype=complex) for a in p]) for p in parties))

    @property
    def num_parties(self) -> int:
        return len(self.stacks)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.shape[1] for s in self.stacks)

    @property
    def settings(self) -> tuple[int, ...]:
        return tuple(s.shape[0] for s in self.stacks)

    def observable(self, party: int, setting: int) -> np.ndarray:
        return self.stacks[party][setting]

    def check_matches(self, T: BellFunctional) -> None:
        if self.settings != T.settings:
            raise ValidationError(
                f"observable settings {self.settings} do not match Bell functional settings {T.settings}"
            )

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "parties": [
                {"real": stack.real.tolist(), "imag": stack.imag.tolist()} for stack in self.stacks
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ObservableSet":
        try:
            stacks = tuple(
                np.asarray(p["real"], dtype=float) + 1j * np.asarray(p["imag"], dtype=float)
                for p in data["parties"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed observable set JSON: {exc}") from exc
        return cls(stacks)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure (``vector``) or mixed (``density``) state on ``C^{d_1} (x) ... (x) C^{d_N}``."""

    dims: tuple[int, ...]
    vector: np.ndarray | None = None
    density: np.ndarray | None = None

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValidationError(f"state dims must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        total = int(np.prod(dims))
        if (self.vector is None) == (self.density is None):
            raise ValidationError("provide exactly one of vector or density")
        if self.vector is not None:
            v = np.asarray(self.vector, dtype=complex).reshape(-1)
            if v.shape != (total,):
                raise ValidationError(f"state vector length {v.size} does not match dims {dims}")
            norm_err = abs(float(np.vdot(v, v).real) - 1.0)
            if norm_err > PURE_NORM_TOL:
                raise ValidationError(f"pure state is not normalized (|<psi|psi> - 1| = {norm_err:.3e})")
            object.__setattr__(self, "vector", _readonly(v))
        else:
            rho = _as_square(self.density, "density operator")
            if rho.shape != (total, total):
                raise ValidationError(f"density operator shape {rho.shape} does not match dims {dims}")
            herm_err = float(np.max(np.abs(rho - rho.conj().T)))
            if herm_err > HERMITIAN_TOL:
                raise ValidationError(f"density operator is not Hermitian (deviation {herm_err:.3e})")
            tr_err = abs(np.trace(rho) - 1.0)
            if tr_err > TRACE_TOL:
                raise ValidationError(f"density operator trace differs from 1 by {tr_err:.3e}")
            min_eig = float(np.linalg.eigvalsh(rho)[0])
            if min_eig < -PSD_TOL:
                raise ValidationError(f"density operator has negative eigenvalue {min_eig:.3e}")
            object.__setattr__(self, "density", _readonly(rho))

    @classmethod
    def pure(cls, vector, dims: Sequence[int]) -> "QuantumState":
        return cls(tuple(dims), vector=vector)

    @classmethod
    def mixed(cls, density, dims: Sequence[int]) -> "QuantumState":
        return cls(tuple(dims), density=density)

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def density_matrix(self) -> np.ndarray:
        if self.density is not None:
            return np.array(self.density)
        return np.outer(self.vector, self.vector.conj())

    def to_json(self) -> dict:
        if self.vector is not None:
            return {"dims": list(self.dims), "kind": "pure", "real": self.vector.real.tolist(),
                    "imag": self.vector.imag.tolist()}
        return {"dims": list(self.dims), "kind": "mixed", "real": self.density.real.tolist(),
                "imag": self.density.imag.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "QuantumState":
        try:
            arr = np.asarray(data["real"], dtype=float) + 1j * np.asarray(data["imag"], dtype=float)
            dims = tuple(data["dims"])
            kind = data.get("kind", "pure" if arr.ndim == 1 else "mixed")
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed state JSON: {exc}") from exc
        if kind == "pure":
            return cls(dims, vector=arr)
        if kind == "mixed":
            return cls(dims, density=arr)
        raise ValidationError(f"unknown state kind {kind!r}")


def reduced_density(state: QuantumState, keep: Sequence[int]) -> np.ndarray:
    """Partial trace of ``state`` onto the parties listed in ``keep`` (in that order)."""
    n = len(state.dims)
    keep = list(keep)
    letters = string.ascii_letters
    if state.is_pure:
        psi = state.vector.reshape(state.dims)
        ket = [letters[k] for k in range(n)]
        bra = list(ket)
        for k in keep:
            bra[k] = letters[n + k]
        out = "".join(ket[k] for k in keep) + "".join(bra[k] for k in keep)
        sub = f"{''.join(ket)},{''.join(bra)}->{out}"
        red = np.einsum(sub, psi, psi.conj())
    else:
        rho = state.density.reshape(state.dims + state.dims)
        row = [letters[k] for k in range(n)]
        col = list(row)
        for k in keep:
            col[k] = letters[n + k]
        out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
        red = np.einsum(f"{''.join(row)}{''.join(col)}->{out}", rho)
    d = int(np.prod([state.dims[k] for k in keep])) if keep else 1
    return red.reshape(d, d)


def bell_operator(T: BellFunctional, obs: ObservableSet, budget: int | None = None) -> np.ndarray:
    """Assemble ``sum_i T_i A^1_{i_1} (x) ... (x) A^N_{i_N}`` as a dense matrix."""
    if obs.num_parties != T.num_parties:
        raise ValidationError(f"{obs.num_parties} observable parties for a {T.num_parties}-party functional")
    obs.check_matches(T)
    total = check_budget(obs.dims, budget)
    n = T.num_parties
    letters = string.ascii_letters
    setting_idx = letters[:n]
    row_idx = letters[n:2 * n]
    col_idx = letters[2 * n:3 * n]
    operands = [setting_idx]
    for k in range(n):
        operands.append(setting_idx[k] + row_idx[k] + col_idx[k])
    sub = ",".join(operands) + "->" + row_idx + col_idx
    B = np.einsum(sub, T.coeffs.astype(complex), *obs.stacks, optimize=True)
    return B.reshape(total, total)


def expectation(state: QuantumState, B: np.ndarray) -> float:
    """``Re tr(rho B)``; a non-negligible imaginary part is logged as a warning."""
    B = _as_square(B, "operator")
    if B.shape[0] != state.dim:
        raise ValidationError(f"operator dimension {B.shape[0]} does not match state dimension {state.dim}")
    if state.is_pure:
        val = np.vdot(state.vector, B @ state.vector)
    else:
        val = np.einsum("ij,ji->", state.density, B)
    if abs(val.imag) > IMAG_REPORT_TOL:
        logger.warning("tr(rho B) has imaginary part %.3e; operator is probably not Hermitian", val.imag)
    return float(val.real)


def correlation_value(T: BellFunctional, obs: ObservableSet, state: QuantumState) -> float:
    """Evaluate ``sum_i T_i <A_{i_1} ... A_{i_N}>`` term by term without forming the Bell operator."""
    obs.check_matches(T)
    if obs.dims != state.dims:
        raise ValidationError(f"observable dims {obs.dims} do not match state dims {state.dims}")
    n = T.num_parties
    rho = state.density_matrix().reshape(state.dims + state.dims)
    total = 0.0
    for idx in itertools.product(*(range(m) for m in T.settings)):
        c = T.coeffs[idx]
        if c == 0:
            continue
        x = rho
        # contract each party's observable into the column index of that party
        for k in range(n):
            x = np.tensordot(x, obs.stacks[k][idx[k]], axes=([n + k], [0]))
            x = np.moveaxis(x, -1, n + k)
        d = state.dim
        total += c * np.trace(x.reshape(d, d)).real
    return float(total)


def make_traceless(A) -> tuple[np.ndarray, float]:
    """Split ``A = A0 + alpha * 1`` with ``tr A0 = 0``.

    ``A0`` can have norm up to 2, so it is returned as a plain matrix.
    """
    m = validate_observable(getattr(A, "matrix", A))
    d = m.shape[0]
    alpha = float(np.trace(m).real / d)
    return m - alpha * np.eye(d), alpha


def is_traceless(matrix: np.ndarray, tol: float = 1e-10) -> bool:
    return abs(np.trace(matrix)) <= tol


def sign_operator(H: np.ndarray) -> np.ndarray:
    """Replace the eigenvalues of a Hermitian matrix by their signs (0 maps to +1)."""
    H = (H + H.conj().T) / 2
    w, v = np.linalg.eigh(H)
    s = np.where(w < 0, -1.0, 1.0)
    out = (v * s) @ v.conj().T
    return (out + out.conj().T) / 2


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
