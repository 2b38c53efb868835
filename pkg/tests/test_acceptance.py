"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line (shown in the terminal summary and on
stdout) before asserting.
"""

from __future__ import annotations

import itertools
import json
import math
import time

import numpy as np
import pytest

from bellviol import cli
from bellviol.bounds_lab import ghz_violation_experiment, matrix_unit_family, rc_norm, sqrt_d_envelope
from bellviol.classical_value import classical_value_exact
from bellviol.comm_game import (
    GameSpec,
    QuantumStrategy,
    classical_spec,
    exact_success,
    quantum_spec,
    ratio_check,
    simulate_game,
)
from bellviol.functionals import add_trivial_party, chsh, mermin, random_functional
from bellviol.noise_robustness import noisy_violation
from bellviol.quantum_value import SeesawConfig, seesaw, verify_report
from bellviol.random_states import UnitaryFamily, chevet_bound, chevet_montecarlo, tripartite_state
from bellviol.tensor_core import BellFunctional, QuantumState, bell_operator, expectation, reduced_density

from conftest import ACCEPTANCE_LINES, mermin_witness, tsirelson_witness

GHZ_LIMIT = 10.0796  # 4 sqrt2 * 1.782 as printed; the exact product 10.0805 is looser
SQRT2 = math.sqrt(2)


def record(label: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def brute_force_chsh() -> float:
    T = chsh().coeffs
    return max(abs(sum(T[i, j] * a[i] * b[j] for i in range(2) for j in range(2)))
               for a in itertools.product((-1, 1), repeat=2) for b in itertools.product((-1, 1), repeat=2))


@pytest.fixture(scope="module")
def ghz_reports():
    """Criterion 3 sweep, shared with the envelope substitute of criterion 10."""
    start = time.perf_counter()
    reports = [ghz_violation_experiment(n, M, trials=50, seed=1000 * n + M)
               for n in (2, 4, 8) for M in (2, 3, 4)]
    return reports, time.perf_counter() - start


def test_criterion_01_chsh_recovery():
    start = time.perf_counter()
    exact = classical_value_exact(chsh())
    rep = seesaw(chsh(), SeesawConfig(dims=(2, 2), restarts=20, seed=7), classical=exact)
    elapsed = time.perf_counter() - start
    oracle = brute_force_chsh()
    ok = (exact.value == 2.0 and oracle == 2.0 and rep.quantum_value >= 2 * SQRT2 - 1e-6
          and abs(rep.ratio - SQRT2) <= 1e-6 and elapsed < 5.0)
    record("1 (CHSH)", ok, f"classical={exact.value} oracle={oracle} quantum={rep.quantum_value:.12f} "
                           f"ratio={rep.ratio:.12f} time={elapsed:.2f}s")
    assert ok


def test_criterion_02_mermin():
    start = time.perf_counter()
    T = mermin(3)
    exact = classical_value_exact(T)
    rep = seesaw(T, SeesawConfig(dims=(2, 2, 2), restarts=16, seed=2), classical=exact)
    state, obs = mermin_witness()
    witness = expectation(state, bell_operator(T, obs))
    elapsed = time.perf_counter() - start
    ok = (exact.value == pytest.approx(2.0, abs=1e-12) and rep.quantum_value >= 4 - 1e-6
          and abs(rep.ratio - 2.0) <= 1e-6 and abs(witness - 4.0) <= 1e-12 and verify_report(rep)
          and elapsed < 10.0)
    record("2 (Mermin)", ok, f"classical={exact.value} quantum={rep.quantum_value:.12f} ratio={rep.ratio:.12f} "
                             f"GHZ witness={witness:.12f} time={elapsed:.2f}s")
    assert ok


def test_criterion_03_ghz_boundedness(ghz_reports):
    reports, elapsed = ghz_reports
    worst = max(r.max_ratio for r in reports)
    trials = min(sum(t.label.startswith("random") for t in r.trials) for r in reports)
    ok = all(r.max_ratio <= GHZ_LIMIT for r in reports) and trials >= 50 and elapsed < 600
    per = ", ".join(f"(n={r.n},M={r.M}) {r.max_ratio:.4f}" for r in reports)
    record("3 (GHZ bound)", ok, f"max ratio {worst:.6f} <= {GHZ_LIMIT} over 9 configs x {trials} random "
                                f"functionals + Mermin [{per}] time={elapsed:.1f}s")
    assert ok


def test_criterion_04_grothendieck_envelope():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(200):
        M = int(rng.integers(2, 7))
        d = int(rng.integers(2, 9))
        T = random_functional(2, M, 10_000 + k)
        rep = seesaw(T, SeesawConfig(dims=(d, d), restarts=3, max_iters=200, seed=k))
        assert verify_report(rep)
        worst = max(worst, rep.ratio)
    elapsed = time.perf_counter() - start
    ok = worst <= 1.782 + 1e-6 and elapsed < 600
    record("4 (Grothendieck)", ok, f"max bipartite ratio {worst:.6f} <= 1.782 over 200 instances "
                                   f"(M<=6, d<=8) time={elapsed:.1f}s")
    assert ok


def test_criterion_05_chevet():
    start = time.perf_counter()
    parts, ok = [], True
    for n, N in ((4, 8), (8, 16), (16, 32)):
        s = chevet_montecarlo(n, N, samples=100, seed=n * 100 + N)
        bound = chevet_bound(n, N)
        ok &= s.mean <= bound and s.max <= bound
        parts.append(f"({n},{N}) mean={s.mean:.4f} max={s.max:.4f} bound={bound:.3f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    record("5 (Chevet)", ok, "; ".join(parts) + f" time={elapsed:.1f}s")
    assert ok


def test_criterion_06_rc_norm():
    vals = {N: rc_norm(matrix_unit_family(N), flatten=True) for N in (2, 3, 4, 8)}
    four_term = {N: rc_norm(matrix_unit_family(N)) for N in (2, 3, 4, 8)}
    ok = all(abs(v - math.sqrt(N)) <= 1e-9 for N, v in vals.items())
    record("6 (RC norm)", ok, "flattened RC_{N^2} norm " + ", ".join(f"N={N}: {v!r}" for N, v in vals.items())
           + " (four-term max gives " + ", ".join(f"{v:.1f}" for v in four_term.values()) + ")")
    assert ok


def _random_state_pairs():
    rng = np.random.default_rng(77)
    for k in range(50):
        n, N = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        yield n, N, UnitaryFamily.haar(n, N, 500 + k)


def test_criterion_07_random_state_norm_and_marginals():
    norm_dev = diag_dev = side_dev = 0.0
    for n, N, fam in _random_state_pairs():
        psi = tripartite_state(fam)
        norm_dev = max(norm_dev, abs(np.vdot(psi.vector, psi.vector).real - 1))
        rho1 = reduced_density(psi, [0])
        diag_dev = max(diag_dev, float(np.max(np.abs(np.diag(rho1) - 1 / n))))
        for k in (1, 2):
            side_dev = max(side_dev, float(np.max(np.abs(reduced_density(psi, [k]) - np.eye(N) / N))))
    ok = norm_dev <= 1e-12 and diag_dev <= 1e-10 and side_dev <= 1e-10
    record("7 (random state: norm + forced marginals)", ok,
           f"50 pairs: max |<psi|psi>-1|={norm_dev:.1e}, max |diag(rho_1)-1/n|={diag_dev:.1e}, "
           f"max |rho_2,3 - 1/N|={side_dev:.1e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="party-1 marginal has off-diagonals tr(U_i^dagger U_i')/(nN); "
                                       "only its diagonal is fixed by unitarity")
def test_criterion_07_party1_marginal_is_maximally_mixed():
    worst = 0.0
    for n, N, fam in _random_state_pairs():
        rho1 = reduced_density(tripartite_state(fam), [0])
        worst = max(worst, float(np.max(np.abs(rho1 - np.eye(n) / n))))
    ok = worst <= 1e-10
    record("7 (random state: rho_1 = 1/n)", ok,
           f"max |rho_1 - 1/n| = {worst:.3e} over 50 pairs (tolerance 1e-10); known off-diagonal terms")
    assert ok


def test_criterion_08_noise_law():
    T = chsh()
    state, obs = tsirelson_witness()
    pts = {p: noisy_violation(T, state, obs, p, classical_value=2.0) for p in (0.0, 0.5, 1.0)}
    affine = abs(pts[0.0].noisy_value) <= 1e-9 and abs(pts[0.5].noisy_value - 0.5 * pts[1.0].noisy_value) <= 1e-9
    mstate, mobs = mermin_witness()
    mpts = {p: noisy_violation(mermin(3), mstate, mobs, p).noisy_value for p in (0.0, 0.5, 1.0)}
    affine &= abs(mpts[0.0]) <= 1e-9 and abs(mpts[0.5] - 0.5 * mpts[1.0]) <= 1e-9
    crit = pts[1.0].critical_p
    at_crit = noisy_violation(T, state, obs, 1 / SQRT2).noisy_value
    ok = affine and abs(crit - 1 / SQRT2) <= 1e-9 and abs(at_crit - 2.0) <= 1e-9
    record("8 (noise law)", ok, f"affine at p in {{0,1/2,1}}: {affine}; CHSH critical p={crit!r} "
                                f"(1/sqrt2={1 / SQRT2!r}); value at critical p={at_crit!r}")
    assert ok


def test_criterion_09_communication_game():
    T = chsh()
    c_chsh = classical_spec(T)
    q_chsh = quantum_spec(T, *tsirelson_witness())
    r_chsh = ratio_check(c_chsh, q_chsh)
    T3 = add_trivial_party(T)
    s, o = tsirelson_witness()
    q3 = quantum_spec(T3, QuantumState.pure(s.vector, (2, 2, 1)), type(o)(o.stacks + (np.ones((1, 1, 1)),)))
    r_chsh3 = ratio_check(classical_spec(T3), q3)
    c_m = classical_spec(mermin(3))
    q_m = quantum_spec(mermin(3), *mermin_witness())
    r_m = ratio_check(c_m, q_m)
    ratios_ok = (abs(r_chsh - SQRT2) <= 1e-9 and abs(r_chsh3 - SQRT2) <= 1e-9 and abs(r_m - 2.0) <= 1e-9
                 and exact_success(q_m).success_probability == pytest.approx(1.0, abs=1e-12))

    rounds = 100_000
    start = time.perf_counter()
    hits, runs = 0, 0
    for spec in (q_chsh, c_m):
        P = exact_success(spec).success_probability
        se = math.sqrt(P * (1 - P) / rounds)
        for seed in range(100):
            sim = simulate_game(spec, rounds, seed)
            hits += abs(sim.success_probability - P) <= 4 * se
            runs += 1
    frac = hits / runs
    ok = ratios_ok and frac >= 0.99
    record("9 (comm game)", ok, f"ratios chsh={r_chsh!r} chsh(3-party)={r_chsh3!r} mermin3={r_m!r}; "
                                f"{hits}/{runs} simulations within 4 SE ({time.perf_counter() - start:.1f}s)")
    assert ok


def test_criterion_10_substitute_sqrt_d_envelope(ghz_reports):
    # the unbounded violation itself is non-constructive; check the envelope on every report produced
    reports = [
        seesaw(mermin(3), SeesawConfig(dims=(2, 2, 2), restarts=8, seed=2)),
        seesaw(add_trivial_party(chsh()), SeesawConfig(dims=(2, 2, 1), restarts=10, seed=3)),
    ]
    for n, N, seed in ((2, 2, 0), (3, 2, 1), (4, 2, 2), (2, 3, 3)):
        state = tripartite_state(UnitaryFamily.haar(n, N, seed))
        T = random_functional(3, 2, seed)
        reports.append(seesaw(T, SeesawConfig(dims=state.dims, restarts=2, max_iters=200, seed=seed),
                              fixed_state=state))
    checks = [sqrt_d_envelope(r) for r in reports]
    ghz, _ = ghz_reports
    ghz_ok = all(t.ratio <= 10.0 * math.sqrt(r.n) for r in ghz for t in r.trials)
    ok = all(c.passed for c in checks) and ghz_ok
    record("10 (substitute: sqrt(d) envelope, C=10)", ok,
           f"{len(checks)} see-saw reports min margin {min(c.margin for c in checks):.3f}; "
           f"{sum(len(r.trials) for r in ghz)} GHZ trials within 10*sqrt(n): {ghz_ok}")
    assert ok


COMMANDS = [
    ["quantum", "--builtin", "chsh", "--dims", "2,2", "--restarts", "20", "--seed", "7"],
    ["quantum", "--builtin", "mermin3", "--dims", "2,2,2", "--restarts", "16", "--seed", "2"],
    ["ghz-bound", "--n", "2", "--M", "3", "--trials", "10", "--seed", "2003"],
    ["chevet", "--n", "4", "--N", "8", "--samples", "10", "--seed", "408", "--format", "json"],
    ["rc-check", "--N", "8"],
    ["randstate", "--n", "3", "--N", "4", "--seed", "500"],
    ["classical", "--builtin", "random(3,4,7)", "--heuristic", "--restarts", "16", "--seed", "1"],
    ["ccgame", "--builtin", "mermin3", "--rounds", "100000", "--seed", "9"],
]


def test_criterion_11_determinism(tmp_path):
    same = []
    for k, argv in enumerate(COMMANDS):
        payloads = []
        for rep in range(2):
            out = tmp_path / f"{k}_{rep}.json"
            assert cli.run([*argv, "--threads", str(1 + rep), "--output", str(out)]) == 0
            payloads.append(json.loads(out.read_text())["result"])
        same.append(payloads[0] == payloads[1])
    report = tmp_path / "report.json"
    cli.run([*COMMANDS[0], "--output", str(report)])
    noise = []
    for rep in range(2):
        out = tmp_path / f"noise_{rep}.json"
        assert cli.run(["noise", "--report", str(report), "--p", "0.7", "--output", str(out)]) == 0
        noise.append(json.loads(out.read_text())["result"])
    same.append(noise[0] == noise[1])
    ok = all(same)
    record("11 (determinism)", ok, f"{sum(same)}/{len(same)} commands reproduce identical result payloads "
                                   "(second run with a different --threads)")
    assert ok
