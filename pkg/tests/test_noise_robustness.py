from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellviol.bounds_lab import ghz_state
from bellviol.functionals import chsh, mermin, random_functional
from bellviol.noise_robustness import check_traceless, mix_white_noise, noisy_violation
from bellviol.random_states import haar_unitary, random_state_vector
from bellviol.tensor_core import (
    PAULI_Z,
    ObservableSet,
    QuantumState,
    ValidationError,
    make_traceless,
)


def test_p_one_and_zero():
    s = ghz_state(2, 3)
    assert np.allclose(mix_white_noise(s, 1.0).density, s.density_matrix())
    assert np.allclose(mix_white_noise(s, 0.0).density, np.eye(8) / 8)


def test_ghz_half_visibility_spectrum():
    rho = mix_white_noise(ghz_state(2, 3), 0.5).density
    # direct 8 x 8 arithmetic: 1/2 |GHZ><GHZ| + 1/16 * identity
    g = np.zeros(8)
    g[[0, 7]] = 1 / math.sqrt(2)
    direct = 0.5 * np.outer(g, g) + np.eye(8) / 16
    assert np.allclose(rho, direct, atol=1e-15)
    w = np.sort(np.linalg.eigvalsh(rho))
    assert np.allclose(w, [1 / 16] * 7 + [9 / 16], atol=1e-14)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_out_of_range(p):
    with pytest.raises(ValidationError):
        mix_white_noise(ghz_state(2, 3), p)


def test_chsh_critical_visibility(chsh_T, tsirelson):
    state, obs = tsirelson
    rep = noisy_violation(chsh_T, state, obs, 1 / math.sqrt(2), classical_value=2.0)
    assert rep.noisy_value == pytest.approx(2.0, abs=1e-9)
    assert rep.critical_p == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert rep.critical_p * (rep.clean_value / 2.0) == pytest.approx(1.0, abs=1e-12)


def test_mermin_half_visibility(mermin_T, mermin_opt):
    state, obs = mermin_opt
    rep = noisy_violation(mermin_T, state, obs, 0.5, classical_value=2.0)
    assert rep.noisy_value == pytest.approx(2.0, abs=1e-9)
    assert rep.critical_p == pytest.approx(0.5, abs=1e-12)
    assert rep.to_json()["violates"] is False


def test_non_traceless_rejected_with_location(chsh_T):
    obs = ObservableSet((np.stack([PAULI_Z, PAULI_Z]), np.stack([PAULI_Z, np.diag([1.0, 0.0])])))
    with pytest.raises(ValidationError, match=r"party 1, setting 1.*make_traceless"):
        noisy_violation(chsh_T, QuantumState.pure([1, 0, 0, 0], (2, 2)), obs, 0.5)
    fixed = ObservableSet((obs.stacks[0], np.stack([PAULI_Z, make_traceless(np.diag([1.0, 0.0]))[0]])))
    check_traceless(fixed)


def random_traceless_setup(seed: int, dims=(2, 3, 2), M=2):
    rng = np.random.default_rng(seed)
    T = random_functional(len(dims), M, seed)
    stacks = []
    for d in dims:
        ops = []
        for _ in range(M):
            U = haar_unitary(d, rng)
            A0, _ = make_traceless((U * rng.uniform(-1, 1, d)) @ U.conj().T)
            ops.append(A0 / max(1.0, np.linalg.norm(A0, 2)))
        stacks.append(np.stack(ops))
    state = QuantumState.pure(random_state_vector(int(np.prod(dims)), rng), dims)
    return T, state, ObservableSet(tuple(stacks))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0.0, 1.0))
def test_affine_law(seed, p):
    T, state, obs = random_traceless_setup(seed)
    pts = {q: noisy_violation(T, state, obs, q).noisy_value for q in (0.0, 0.5, 1.0)}
    assert abs(pts[0.0]) <= 1e-9
    assert abs(pts[0.5] - 0.5 * pts[1.0]) <= 1e-9
    rep = noisy_violation(T, state, obs, p)
    assert abs(rep.noisy_value - p * rep.clean_value) <= 1e-9
    assert rep.predicted == p * rep.clean_value


def test_mixed_input_state(mermin_T, mermin_opt):
    state, obs = mermin_opt
    half = mix_white_noise(state, 0.5)
    rep = noisy_violation(mermin_T, half, obs, 0.5)
    assert rep.clean_value == pytest.approx(2.0, abs=1e-12)
    assert rep.noisy_value == pytest.approx(1.0, abs=1e-12)


def test_report_json():
    js = noisy_violation(chsh(), *_tsirelson_parts(), 0.9).to_json()
    assert set(js) >= {"p", "clean_value", "noisy_value", "predicted", "critical_p"}
    assert js["critical_p"] is None


def _tsirelson_parts():
    from conftest import tsirelson_witness

    return tsirelson_witness()


def test_mermin4_on_ghz_is_traceless_law():
    T = mermin(4)
    state = ghz_state(2, 4)
    obs = ObservableSet(tuple(np.stack([np.diag([1.0, -1.0])] * 2) for _ in range(4)))
    rep = noisy_violation(T, state, obs, 0.3)
    assert rep.noisy_value == pytest.approx(0.3 * rep.clean_value, abs=1e-12)
