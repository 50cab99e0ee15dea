"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""

import time

import numpy as np
import pytest

from qcgoal.adaptive import AdaptiveConfig, run_adaptive
from qcgoal.estimator import (
    QuantityOfInterest,
    _solve_atomistic_displacement,
    _solve_mixed_displacement,
    estimate,
    exact_error,
    solve_dual,
)
from qcgoal.linalg import factorize, solve, weighted_norm
from qcgoal.model import ModelParams, Partition, assemble_system, build_reference_vectors, energy
from qcgoal.verify import check_gradient, check_identity, check_sandwich, dense_chain, dense_reference_solve

from conftest import BASELINE, random_instances, random_params, record_criterion

# region -> (|Q err|, eta1, eta1/err, eta2, eta2/err)
EFFICIENCY_REFERENCE = {
    None: (1.416421e-03, 6.860545e-03, 4.843577, 1.231314e-02, 8.693133),
    (-4, 10): (1.863104e-03, 6.107510e-03, 3.278136, 1.049800e-02, 5.634680),
    (-9, 20): (1.000572e-05, 3.358722e-04, 33.56803, 6.621488e-04, 66.17705),
    (-14, 30): (1.430363e-04, 3.187552e-04, 2.228492, 5.140285e-04, 3.593694),
    (-19, 40): (1.675490e-05, 2.626711e-05, 1.567727, 3.691344e-05, 2.203142),
    (-24, 50): (7.361419e-07, 1.190138e-06, 1.616723, 1.693910e-06, 2.301065),
    (-29, 60): (3.139276e-08, 5.157753e-08, 1.642975, 7.388556e-08, 2.353586),
    (-34, 70): (1.146997e-09, 2.001550e-09, 1.745035, 2.934377e-09, 2.558312),
}

# iteration -> (region, eta1); iteration 1 is fully continuum
ADAPTIVE_REFERENCE = [
    (None, 6.860546e-03),
    ((-26, 55), 1.238016e-07),
    ((-30, 60), 2.600112e-08),
    ((-34, 66), 3.922946e-09),
    ((-38, 73), 4.104868e-10),
    ((-43, 80), 4.105166e-11),
]

N_RANDOM = 100
RANDOM_SEED = 2024


def rel(a, b):
    return abs(a - b) / abs(b)


def partition_for(region):
    return Partition.continuum(500) if region is None else Partition.from_region(500, *region)


@pytest.fixture(scope="module")
def baseline_q():
    return QuantityOfInterest.indicator(500, 11, 30)


@pytest.fixture(scope="module")
def efficiency_rows(baseline_q):
    start = time.perf_counter()
    rows = {}
    for region in EFFICIENCY_REFERENCE:
        part = partition_for(region)
        report = estimate(BASELINE, part, baseline_q)
        rows[region] = (exact_error(BASELINE, part, baseline_q), report.eta1, report.eta2)
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def adaptive_run(baseline_q):
    start = time.perf_counter()
    result = run_adaptive(BASELINE, baseline_q, AdaptiveConfig(tau_gl=1e-10, tau_div=10.0))
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def instances():
    return random_instances(N_RANDOM, seed=RANDOM_SEED)


def test_c1_efficiency_reference(efficiency_rows):
    rows, elapsed = efficiency_rows
    worst = max(rel(got, ref) for region, (err, e1, _, e2, _) in EFFICIENCY_REFERENCE.items()
                for got, ref in zip(rows[region], (err, e1, e2)))
    ok = worst <= 1e-3 and elapsed < 10.0
    record_criterion("C1 efficiency reference values", ok,
                     f"max relative deviation {worst:.2e} (tol 1e-03) over 8 regions x 3 values, "
                     f"{elapsed:.2f} s (limit 10 s)")
    assert ok


def test_c2_adaptive_trace_structure(adaptive_run):
    result, elapsed = adaptive_run
    trace = result.trace
    n = len(trace)
    first = rel(trace[0].eta1, ADAPTIVE_REFERENCE[0][1])
    endpoint_dev = max(
        (max(abs(rec.atomistic_region[0] - ref[0]), abs(rec.atomistic_region[1] - ref[1]))
         for rec, (ref, _) in zip(trace[1:], ADAPTIVE_REFERENCE[1:])),
        default=np.inf,
    )
    ok = (result.converged and abs(n - 6) <= 1 and trace[0].region_label == "none"
          and first <= 1e-3 and endpoint_dev <= 3 and trace[-1].eta1 <= 1e-10 and elapsed < 30.0)
    regions = ", ".join(r.region_label for r in trace)
    record_criterion("C2 adaptive run: iterations, regions, final eta1", ok,
                     f"{n} iterations (6+-1), regions [{regions}], max endpoint offset {endpoint_dev} "
                     f"(tol 3), iteration-1 eta1 rel dev {first:.2e} (tol 1e-03), "
                     f"final eta1 {trace[-1].eta1:.3e} (<= 1e-10), {elapsed:.2f} s (limit 30 s)")
    assert ok


def test_c2_adaptive_eta1_per_iteration(adaptive_run):
    result, _ = adaptive_run
    devs = [rel(rec.eta1, ref) for rec, (_, ref) in zip(result.trace[1:], ADAPTIVE_REFERENCE[1:])]
    ok = len(devs) == 5 and max(devs) <= 5e-3
    record_criterion("C2 adaptive run: eta1 of iterations 2-6 within 0.5%", ok,
                     "relative deviations " + ", ".join(f"{d:.2e}" for d in devs))
    assert ok


def test_c3_duality_identity(instances):
    worst = max(check_identity(p, part, q).discrepancy for p, part, q in instances)
    ok = worst <= 1e-10
    record_criterion("C3 duality identity", ok,
                     f"worst relative discrepancy {worst:.2e} over {N_RANDOM} instances (tol 1e-10)")
    assert ok


def test_c4_bound_validity(instances):
    eta_failures, sandwich_failures = 0, 0
    for p, part, q in instances:
        err = exact_error(p, part, q)
        report = estimate(p, part, q)
        if err > report.eta1 * (1 + 1e-10) or err > report.eta2 * (1 + 1e-10):
            eta_failures += 1
        if not check_sandwich(p, part, q).ok:
            sandwich_failures += 1
    ok = eta_failures == 0 and sandwich_failures == 0
    record_criterion("C4 bound validity", ok,
                     f"{eta_failures} eta1/eta2 violations, {sandwich_failures} sandwich violations "
                     f"over {N_RANDOM} instances")
    assert ok


def test_c5_parallelogram_identity(instances):
    rng = np.random.default_rng(RANDOM_SEED + 1)
    worst = 0.0
    for p, part, q in instances:
        Ma = assemble_system(p, None, "Ea").matrix
        e = _solve_atomistic_displacement(p) - _solve_mixed_displacement(p, part)
        g_a = solve(factorize(Ma), q.q)
        e_hat = g_a - solve_dual(p, part, q)
        lhs = float(e_hat @ Ma.matvec(e))
        for sigma in rng.uniform(0.1, 10.0, size=10):
            plus = weighted_norm(sigma * e + e_hat / sigma, Ma) ** 2
            minus = weighted_norm(sigma * e - e_hat / sigma, Ma) ** 2
            scale = max(abs(lhs), 0.25 * plus, 0.25 * minus)
            if scale > 0:
                worst = max(worst, abs(lhs - 0.25 * plus + 0.25 * minus) / scale)
    ok = worst <= 1e-10
    record_criterion("C5 parallelogram identity", ok,
                     f"worst relative mismatch {worst:.2e} over {N_RANDOM} instances x 10 sigma "
                     "(tol 1e-10)")
    assert ok


def test_c6_degeneracy(baseline_q):
    rng = np.random.default_rng(RANDOM_SEED + 2)
    cases = [(ModelParams(M=500, k2=0.0), Partition.continuum(500), baseline_q),
             (ModelParams(M=500, k2=0.0), Partition.from_region(500, -34, 70), baseline_q),
             (BASELINE, Partition.atomistic(500), baseline_q)]
    for _ in range(10):
        p = random_params(rng, 16)
        p0 = ModelParams(M=16, a0=p.a0, k0=p.k0, k1=p.k1 + 2 * abs(p.k2), k2=0.0)
        q = QuantityOfInterest(rng.normal(size=32))
        cases.append((p0, Partition(rng.random(32) < 0.5), q))
        cases.append((p, Partition.atomistic(16), q))
    worst = 0.0
    for p, part, q in cases:
        r = estimate(p, part, q)
        worst = max(worst, r.eta1, r.eta2, exact_error(p, part, q))
    ok = worst <= 1e-12
    record_criterion("C6 degeneracy (k2=0, all atomistic)", ok,
                     f"largest of eta1/eta2/error {worst:.2e} over {len(cases)} cases (tol 1e-12)")
    assert ok


def test_c7_gradient_and_energy_forms():
    rng = np.random.default_rng(RANDOM_SEED + 3)
    worst_grad, worst_form = 0.0, 0.0
    for _ in range(20):
        p = random_params(rng, 8)
        part = Partition(rng.random(16) < 0.5)
        y = build_reference_vectors(p)[0] + rng.normal(scale=0.5, size=16)
        worst_grad = max(worst_grad, check_gradient(p, part, y).max_rel)
        for atomwise, matrix in (("atomistic_atomwise", "atomistic_matrix"),
                                 ("mixed_atomwise", "mixed_matrix")):
            a, b = energy(p, part, y, atomwise), energy(p, part, y, matrix)
            worst_form = max(worst_form, rel(a, b))
    ok = worst_grad <= 1e-6 and worst_form <= 1e-12
    record_criterion("C7 gradient/assembly consistency", ok,
                     f"finite-difference gradient rel dev {worst_grad:.2e} (tol 1e-06), "
                     f"atomwise vs matrix energy rel dev {worst_form:.2e} (tol 1e-12), "
                     "20 configurations at M=8")
    assert ok


def test_c8_efficiency_trend(efficiency_rows):
    rows, _ = efficiency_rows
    err, e1, e2 = rows[(-34, 70)]
    spike_err, spike_e1, _ = rows[(-9, 20)]
    devs = (rel(e1 / err, 1.745035), rel(e2 / err, 2.558312), rel(spike_e1 / spike_err, 33.56803))
    ok = max(devs) <= 1e-2
    record_criterion("C8 efficiency trend", ok,
                     f"-34..70 eta1/err {e1 / err:.7g}, eta2/err {e2 / err:.7g}; -9..20 eta1/err "
                     f"{spike_e1 / spike_err:.7g}; max rel dev {max(devs):.2e} (tol 1e-02)")
    assert ok


def test_c9_solver_contract():
    rng = np.random.default_rng(RANDOM_SEED + 4)
    worst = 0.0
    for _ in range(50):
        M = int(rng.integers(2, 33))
        p = random_params(rng, M)
        part = Partition(rng.random(2 * M) < rng.uniform(0, 1))
        system = assemble_system(p, part, "Eac")
        b = rng.normal(size=2 * M)
        x = solve(factorize(system.matrix), b)
        ref = dense_reference_solve(dense_chain(p, part).Mac, b)
        worst = max(worst, np.abs(x - ref).max() / np.abs(ref).max())
    ok = worst <= 1e-10
    record_criterion("C9 solver contract", ok,
                     f"worst relative deviation from dense oracle {worst:.2e} over 50 systems, "
                     "M <= 32 (tol 1e-10)")
    assert ok
