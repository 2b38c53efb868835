"""White-noise mixing and the visibility law for traceless observables.

Mixing a state with the maximally mixed one at visibility ``p`` multiplies the
value of any functional built from traceless observables by exactly ``p``;
non-traceless observables pick up an identity contribution, so they are
rejected instead of silently projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import (
    BellFunctional,
    ObservableSet,
    QuantumState,
    ValidationError,
    bell_operator,
    expectation,
)

TRACELESS_TOL = 1e-10
AGREEMENT_TOL = 1e-9


def mix_white_noise(rho: QuantumState, p: float) -> QuantumState:
    """``p rho + (1 - p) 1/D``."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"visibility p must lie in [0, 1], got {p}")
    D = rho.dim
    mixed = p * rho.density_matrix() + (1.0 - p) * np.eye(D) / D
    return QuantumState.mixed(mixed, rho.dims)


@dataclass(frozen=True)
class NoiseReport:
    p: float
    clean_value: float
    noisy_value: float
    predicted: float
    classical_value: float | None
    critical_p: float | None

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "clean_value": self.clean_value,
            "noisy_value": self.noisy_value,
            "predicted": self.predicted,
            "classical_value": self.classical_value,
            "critical_p": self.critical_p,
            "violates": None if self.classical_value is None else self.noisy_value > self.classical_value,
        }


def check_traceless(obs: ObservableSet, tol: float = TRACELESS_TOL) -> None:
    for j, stack in enumerate(obs.stacks):
        for i, A in enumerate(stack):
            tr = abs(np.trace(A))
            if tr > tol:
                raise ValidationError(
                    f"observable (party {j}, setting {i}) has trace {tr:.3e}; "
                    "the p*K law needs traceless observables (see tensor_core.make_traceless)"
                )


def noisy_violation(
    T: BellFunctional,
    state: QuantumState,
    obs: ObservableSet,
    p: float,
    classical_value: float | None = None,
) -> NoiseReport:
    """Noisy value by direct evaluation, cross-checked against ``p * clean``."""
    check_traceless(obs)
    B = bell_operator(T, obs)
    clean = expectation(state, B)
    noisy = expectation(mix_white_noise(state, p), B)
    predicted = p * clean
    if abs(noisy - predicted) > AGREEMENT_TOL * max(1.0, abs(clean)):
        raise RuntimeError(f"noisy value {noisy!r} disagrees with p * clean = {predicted!r}")
    critical = None
    if classical_value is not None and clean > 0:
        critical = classical_value / clean
    return NoiseReport(p=p, clean_value=clean, noisy_value=noisy, predicted=predicted,
                       classical_value=classical_value, critical_p=critical)
