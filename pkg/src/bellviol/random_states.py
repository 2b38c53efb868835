"""Haar-random unitaries, the controlled-unitary tripartite state, and the
Monte Carlo check of the Chevet-type estimate for ``sup ||sum_i lambda_i U_i||``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .tensor_core import QuantumState, ValidationError

UNITARITY_TOL = 1e-10
EPS_RESTARTS = 16
EPS_MAX_ITERS = 500


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary(N: int, seed=None) -> np.ndarray:
    """Haar-distributed ``N x N`` unitary (QR of a complex Ginibre matrix with phase fix)."""
    if N < 1:
        raise ValidationError("unitary dimension must be >= 1")
    rng = as_rng(seed)
    z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    # without this column phase correction the QR factor is not Haar distributed
    return q * (d / np.abs(d))


def random_state_vector(D: int, seed=None) -> np.ndarray:
    rng = as_rng(seed)
    v = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class UnitaryFamily:
    """``n`` unitaries of size ``N x N``, stacked as an array of shape ``(n, N, N)``."""

    matrices: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        m = np.asarray(self.matrices, dtype=complex)
        if m.ndim != 3 or m.shape[1] != m.shape[2] or m.shape[0] < 1:
            raise ValidationError(f"unitary family must have shape (n, N, N), got {m.shape}")
        eye = np.eye(m.shape[1])
        for i, U in enumerate(m):
            err = float(np.max(np.abs(U.conj().T @ U - eye)))
            if err > UNITARITY_TOL:
                raise ValidationError(f"matrix {i} is not unitary (max |U^dagger U - 1| = {err:.3e})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def N(self) -> int:
        return self.matrices.shape[1]

    @classmethod
    def haar(cls, n: int, N: int, seed: int) -> "UnitaryFamily":
        if n < 1:
            raise ValidationError("family size must be >= 1")
        rng = np.random.default_rng(seed)
        return cls(np.stack([haar_unitary(N, rng) for _ in range(n)]), seed=seed)


def tripartite_state(family: UnitaryFamily) -> QuantumState:
    """``psi_{ijk} = <j|U_i^dagger|k> / sqrt(nN)`` on ``C^n (x) C^N (x) C^N``."""
    n, N = family.n, family.N
    amps = np.conj(np.transpose(family.matrices, (0, 2, 1)))  # U_i^dagger
    vec = amps.reshape(-1) / np.sqrt(n * N)
    return QuantumState.pure(vec, (n, N, N))


def random_tripartite_state(n: int, N: int, seed: int) -> QuantumState:
    if n < 1 or N < 1:
        raise ValidationError("n and N must be >= 1")
    return tripartite_state(UnitaryFamily.haar(n, N, seed))


@dataclass(frozen=True)
class EpsNormEstimate:
    """Lower bound on ``sup_{||lambda||_2 <= 1} ||sum_i lambda_i U_i||`` with its witness."""

    value: float
    lam: np.ndarray
    left: np.ndarray
    right: np.ndarray
    restarts: int

    def recompute(self, family: UnitaryFamily) -> float:
        M = np.tensordot(self.lam, family.matrices, axes=1)
        return float(abs(np.vdot(self.left, M @ self.right)))


def _lam_for(U: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    c = (U @ x) @ np.conj(y)
    norm_c = np.linalg.norm(c)
    if norm_c == 0:
        return np.full(len(c), 1 / np.sqrt(len(c)), dtype=complex)
    return np.conj(c) / norm_c


def _eps_alternate(U: np.ndarray, x: np.ndarray, y: np.ndarray, tol: float):
    """Alternate lambda <-> (y, x) until the top singular pair step stops improving.

    Cheap single power steps do most of the climbing; every stall is checked
    with a full SVD, so the returned point is a fixed point of the exact map.
    """
    n = U.shape[0]
    flat = U.reshape(n, -1)
    value = -np.inf
    for _ in range(EPS_MAX_ITERS):
        lam = _lam_for(U, x, y)
        M = (lam @ flat).reshape(U.shape[1:])
        Mx = M @ x
        y = Mx / np.linalg.norm(Mx)
        x = M.conj().T @ y
        new = float(np.linalg.norm(x))
        x = x / new
        if new - value > tol * max(1.0, new):
            value = new
            continue
        value = max(value, new)
        u, sv, vh = np.linalg.svd(M)
        if sv[0] - value <= tol * max(1.0, sv[0]):
            break
        y, x = u[:, 0], np.conj(vh[0])
        value = float(sv[0])
    lam = _lam_for(U, x, y)
    return value, lam, y, x


def eps_norm(family: UnitaryFamily, restarts: int = EPS_RESTARTS, seed: int = 0, tol: float = 1e-13) -> EpsNormEstimate:
    """Alternating maximization of ``|<y| sum_i lambda_i U_i |x>|`` over unit ``lambda, x, y``."""
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    U = family.matrices
    best = None
    for _ in range(restarts):
        x = random_state_vector(family.N, rng)
        y = random_state_vector(family.N, rng)
        value, lam, y, xx = _eps_alternate(U, x, y, tol)
        if best is None or value > best[0]:
            best = (value, lam, y, xx)
    _, lam, y, x = best
    # report the witness value itself so the estimate is a certificate
    value = float(abs(np.vdot(y, np.tensordot(lam, U, axes=1) @ x)))
    return EpsNormEstimate(value=value, lam=lam, left=y, right=x, restarts=restarts)


def chevet_bound(n: int, N: int) -> float:
    """``32 pi (1 + sqrt(n / 4N))``."""
    if n < 1 or N < 1:
        raise ValidationError("n and N must be >= 1")
    return float(32.0 * np.pi * (1.0 + np.sqrt(n / (4.0 * N))))


@dataclass(frozen=True)
class ChevetSummary:
    n: int
    N: int
    samples: int
    seed: int
    values: tuple[float, ...]
    bound: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values, ddof=1)) if len(self.values) > 1 else 0.0

    def to_json(self) -> dict:
        return {"n": self.n, "N": self.N, "samples": self.samples, "seed": self.seed,
                "mean": self.mean, "max": self.max, "std": self.std, "bound": self.bound,
                "values": list(self.values)}

    def rows(self):
        for k, v in enumerate(self.values):
            yield {"sample": k, "eps_norm": v, "bound": self.bound}


def chevet_montecarlo(n: int, N: int, samples: int, seed: int, *, restarts: int = EPS_RESTARTS,
                      workers: int = 1) -> ChevetSummary:
    """eps_norm over ``samples`` independent Haar families."""
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    children = np.random.SeedSequence(seed).spawn(samples)

    def one(ss):
        fam_seed, eps_seed = ss.spawn(2)
        rng = np.random.default_rng(fam_seed)
        fam = UnitaryFamily(np.stack([haar_unitary(N, rng) for _ in range(n)]))
        return eps_norm(fam, restarts=restarts, seed=np.random.default_rng(eps_seed).integers(2**63)).value

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, children))
    else:
        values = [one(ss) for ss in children]
    return ChevetSummary(n=n, N=N, samples=samples, seed=seed, values=tuple(values), bound=chevet_bound(n, N))
