"""Acceptance criteria, one test each; results are summarised at the end of the run."""

import json
import math

import numpy as np
import pytest

from fockinject.analysis import (
    PipelineCircuit,
    dof_curve,
    dof_max,
    dof_trials,
    layered_mesh_pipeline,
    output_state,
    purity_bound_experiment,
    birthday_check,
    realify,
    state_jacobian,
)
from fockinject.channel import (
    DensityMatrix,
    apply_unitary,
    distinguishability_bound,
    fock_density,
    identity_injection,
    outcome_probabilities,
    purity,
    random_density,
    state_injection,
    trace_distance,
)
from fockinject.circuit import ParamCircuit, beamsplitter, gate_matrix, haar_unitary, phaseshifter, with_random_beamsplitters
from fockinject.cli import main
from fockinject.fock import enumerate_basis
from fockinject.lift import lift_matrix, lift_unitary, transition_probability
from fockinject.permanent import gurvits_estimate, permanent_exact, permanent_naive
from fockinject.probestim import (
    EFFICIENT,
    HARD,
    UNREACHABLE,
    classify_regime,
    equivalent_from_pipeline,
    output_distribution,
    simulate_injection_pipeline,
)
from oracles import random_complex, random_unitary


def random_pipeline(rng, m, n, p, injections):
    per_block = max(1, p // (injections + 1))
    stages = []
    for b in range(injections + 1):
        block = with_random_beamsplitters(ParamCircuit(m, (), 0), per_block, rng)
        gates = list(block.gates) + [phaseshifter(int(rng.integers(m)), slot=block.parameter_count)]
        stages.append(ParamCircuit(m, tuple(gates), block.parameter_count + 1))
        if b < injections:
            stages.append(identity_injection([int(rng.integers(m))]))
    t = [0] * m
    for _ in range(n):
        t[int(rng.integers(m))] += 1
    return PipelineCircuit(m, n, tuple(stages), tuple(t))


def test_01_permanent_oracle(acceptance):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        A = random_complex(rng, int(rng.integers(1, 8)))
        ref = permanent_naive(A)
        worst = max(worst, abs(permanent_exact(A) - ref) / abs(ref))
    assert acceptance(1, "permanent oracle equivalence", worst <= 1e-10, f"max relative error {worst:.2e}")


def test_02_hong_ou_mandel(acceptance):
    bs = gate_matrix(beamsplitter(0, 1, slot=0), math.pi / 4, 2)
    p = transition_probability(bs, (1, 1), (1, 1))
    assert acceptance(2, "Hong-Ou-Mandel", p <= 1e-12, f"Pr[(1,1)->(1,1)] = {p:.2e}")


def test_03_homomorphism(acceptance):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        m, n = int(rng.integers(1, 6)), int(rng.integers(0, 4))
        U, V = random_unitary(rng, m), random_unitary(rng, m)
        b = enumerate_basis(m, n)
        worst = max(worst, np.max(np.abs(lift_matrix(U @ V, b) - lift_matrix(U, b) @ lift_matrix(V, b))))
    assert acceptance(3, "homomorphism law", worst <= 1e-10, f"max error {worst:.2e} over 50 pairs")


def test_04_single_injection_purity(acceptance):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        m, n = int(rng.integers(2, 7)), int(rng.integers(1, 4))
        b = enumerate_basis(m, n)
        t = b[int(rng.integers(b.dim))]
        q = int(rng.integers(m))
        rho = apply_unitary(fock_density(b, t), lift_unitary(haar_unitary(m, rng), b))
        probs = outcome_probabilities(rho, [q])
        out = state_injection(rho, identity_injection([q]))
        worst = max(worst, abs(purity(out) - sum(p * p for p in probs.values())))
    assert acceptance(4, "single-injection purity law", worst <= 1e-10, f"max |purity - sum Pr^2| = {worst:.2e}")


def test_05_worst_case_purity(acceptance):
    mins = {}
    for L in (1, 2, 3):
        rep = purity_bound_experiment(6, 3, L, 100, seed=[5, L])
        mins[L] = (float(rep.purities.min()), rep.worst_case_bound, rep.worst_case_ok)
    ok = all(v[2] for v in mins.values())
    detail = "; ".join(f"L={L}: min {v[0]:.4f} >= {v[1]:.4f}" for L, v in mins.items())
    assert acceptance(5, "worst-case purity bound", ok, detail)


def test_06_no_collision_purity(acceptance):
    parts, ok = [], True
    for L in (1, 2):
        rep = purity_bound_experiment(9, 2, L, 200, seed=[6, L])
        ok &= bool(rep.haar_ok)
        parts.append(f"L={L}: mean {rep.mean:.4f} - 3se >= {rep.haar_bound:.2e}")
    assert acceptance(6, "mean purity bound for m > 2n^2", ok, "; ".join(parts))


def test_07_birthday_bound(acceptance):
    parts, ok = [], True
    for m in (12, 16):
        rep = birthday_check(m, 2, 300, seed=[7, m])
        ok &= rep.ok
        parts.append(f"m={m}: {rep.mean:.4f} < {rep.bound:.4f}")
    assert acceptance(7, "boson birthday bound", ok, "; ".join(parts))


def test_08_linear_optics_limit_and_injection_gain(acceptance):
    m = 6
    pc = layered_mesh_pipeline(m, 3, injections=2, extra_beamsplitters=5, seed=0)
    plain = pc.without_injections()
    assert plain.input_state == (3, 0, 0, 0, 0, 0)
    curve_plain = dof_curve(plain, 1)
    curve_si = dof_curve(pc, 1)
    plateau = True
    for b in range(3):
        seg = [pt.rank for pt in curve_plain if 15 + 20 * b <= pt.gate_count <= 20 * (b + 1)]
        plateau &= len(set(seg)) == 1
    no_si = dof_max(plain, 3, seed=8)
    with_si = dof_max(pc, 3, seed=8)
    ok = no_si <= m * m - 1 and plateau and with_si > no_si and curve_si[-1].rank > curve_plain[-1].rank
    detail = f"no-SI DoF_max {no_si} <= 35, plateau {plateau}; with 2 SI layers DoF_max {with_si}"
    assert acceptance(8, "linear-optics limit and injection gain", ok, detail)


def test_09_rank_constancy(acceptance):
    rng = np.random.default_rng(9)
    bad = 0
    for i in range(20):
        pc = random_pipeline(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)), int(rng.integers(3, 12)),
                             int(rng.integers(0, 3)))
        if len({r.rank for r in dof_trials(pc, 3, seed=[9, i])}) != 1:
            bad += 1
    assert acceptance(9, "rank constancy over draws", bad == 0, f"{20 - bad}/20 pipelines agree across 3 draws")


def test_10_jacobian_finite_differences(acceptance):
    rng = np.random.default_rng(10)
    worst, h = 0.0, 1e-5
    for _ in range(20):
        pc = random_pipeline(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)), int(rng.integers(2, 11)),
                             int(rng.integers(0, 3)))
        assert pc.parameter_count <= 12
        theta = rng.uniform(0, 2 * math.pi, pc.parameter_count)
        cols = []
        for a in range(pc.parameter_count):
            e = np.zeros_like(theta)
            e[a] = h
            cols.append((output_state(pc, theta + e) - output_state(pc, theta - e)) / (2 * h))
        worst = max(worst, np.max(np.abs(state_jacobian(pc, theta) - realify(np.array(cols)))))
    assert acceptance(10, "Jacobian vs finite differences", worst <= 1e-6, f"max abs discrepancy {worst:.2e}")


def _with_purity_at_most(rho, gamma, d):
    p = float(np.sum(np.abs(rho) ** 2))
    if p <= gamma:
        return rho
    lam = 1.0 - math.sqrt((gamma - 1.0 / d) / (p - 1.0 / d))
    return (1.0 - lam) * rho + lam * np.eye(d) / d


def test_11_distinguishability_bound(acceptance):
    rng = np.random.default_rng(11)
    violations, worst_ratio, points = 0, 0.0, 0
    for d in (2, 3, 4, 6, 10):
        b = enumerate_basis(d, 1)
        for frac in (0.05, 0.3, 0.7, 1.0):
            gamma = 1.0 / d + frac * (1.0 - 1.0 / d)
            bound = distinguishability_bound(d, gamma)
            points += 1
            for _ in range(1000):
                r1, r2 = (int(rng.integers(1, d + 1)) for _ in range(2))
                rho = _with_purity_at_most(random_density(d, rng, r1), gamma, d)
                sigma = _with_purity_at_most(random_density(d, rng, r2), gamma, d)
                D = trace_distance(DensityMatrix(b, rho), DensityMatrix(b, sigma))
                violations += D > bound + 1e-12
                worst_ratio = max(worst_ratio, D / bound)
    # equality: orthogonal pure qubit states at gamma = 1
    qb = enumerate_basis(2, 1)
    D = trace_distance(fock_density(qb, (1, 0)), fock_density(qb, (0, 1)))
    tight = abs(D - distinguishability_bound(2, 1.0)) <= 0.05 * distinguishability_bound(2, 1.0)
    ok = violations == 0 and tight
    detail = (f"{violations} violations over {points} grid points x 1000 pairs (max D/bound {worst_ratio:.3f}); "
              f"d=2 orthogonal pure states give {D:.3f} vs bound 2")
    assert acceptance(11, "distinguishability bound", ok, detail)


def test_12_equivalent_model(acceptance):
    rng = np.random.default_rng(12)
    worst, norm_err = 0.0, 0.0
    for _ in range(20):
        m, n, k = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(0, 3))
        layers = [haar_unitary(m, rng) for _ in range(k + 1)]
        b = enumerate_basis(m, n)
        t = b[int(rng.integers(b.dim))]
        q = int(rng.integers(m))
        _, model = output_distribution(equivalent_from_pipeline(layers, q), t)
        direct = simulate_injection_pipeline(layers, t, q)
        worst = max(worst, float(np.max(np.abs(model - direct))))
        norm_err = max(norm_err, abs(model.sum() - 1), abs(direct.sum() - 1))
    ok = worst <= 1e-9 and norm_err <= 1e-8
    assert acceptance(12, "equivalent-model pattern sums", ok,
                      f"max pointwise gap {worst:.2e}, max normalisation error {norm_err:.2e}")


def test_13_gurvits_concentration(acceptance):
    hits, ratios = 0, []
    for i in range(100):
        U = haar_unitary(6, [13, i])
        exact = permanent_exact(U)
        est = gurvits_estimate(U, 20_000, seed=[13, i, 0])
        hits += abs(est.value - exact) <= 5 * est.empirical_std_error
        ratios.append(est.empirical_std_error / gurvits_estimate(U, 80_000, seed=[13, i, 1]).empirical_std_error)
    ratio = float(np.mean(ratios))
    ok = hits >= 99 and abs(ratio - 2.0) <= 0.1
    assert acceptance(13, "Gurvits concentration", ok,
                      f"{hits}/100 within 5 se; mean se ratio at 4x samples {ratio:.3f}")


TABLE = {
    ("const", "const"): EFFICIENT, ("log m", "const"): EFFICIENT, ("linear m", "const"): EFFICIENT,
    ("const", "log m"): EFFICIENT, ("log m", "log m"): EFFICIENT, ("linear m", "log m"): HARD,
    ("const", "linear m"): EFFICIENT, ("log m", "linear m"): HARD, ("linear m", "linear m"): HARD,
    ("const", "m log m"): UNREACHABLE, ("log m", "m log m"): HARD, ("linear m", "m log m"): HARD,
    ("const", "m^2"): UNREACHABLE, ("log m", "m^2"): UNREACHABLE, ("linear m", "m^2"): HARD,
}


def test_14_regime_table(acceptance):
    wrong = [cell for cell, v in TABLE.items() if classify_regime(*cell) != v]
    marked = sum(v != UNREACHABLE for v in TABLE.values())
    ok = not wrong
    assert acceptance(14, "regime table", ok,
                      f"{len(TABLE) - len(wrong)}/{len(TABLE)} cells ({marked} marked, "
                      f"{len(TABLE) - marked} unreachable) returned verbatim")


CLI_CONFIGS = [
    {"experiment": "dof-curve", "modes": 6, "photons": 3, "preset": {"injections": 2, "extra_beamsplitters": 5}},
    {"experiment": "purity-bounds", "modes": 9, "photons": 2, "layers": [2], "trials": 50},
    {"experiment": "birthday", "modes": [12, 16], "photons": 2, "samples": 50},
    {"experiment": "probestim", "modes": 3, "input": [1, 1, 0], "injections": 2, "method": "gurvits",
     "samples": 2000},
    {"experiment": "perm-bench", "sizes": [3, 6], "trials": 3, "samples": 5000},
    {"experiment": "dof-max", "modes": 4, "photons": 2, "trials": 3},
]


def test_15_cli_reproducibility(acceptance, tmp_path, monkeypatch):
    same = []
    for i, body in enumerate(CLI_CONFIGS):
        cfg = {"schema_version": 1, "seed": 15, "output": f"run{i}.csv", **body}
        path = tmp_path / f"c{i}.json"
        path.write_text(json.dumps(cfg))
        outputs = []
        for threads in ("1", "1", "4"):
            monkeypatch.setenv("FOCKINJECT_THREADS", threads)
            assert main(["run", str(path)]) == 0
            outputs.append((tmp_path / cfg["output"]).read_bytes())
        same.append(outputs[0] == outputs[1] == outputs[2])
    ok = all(same)
    assert acceptance(15, "CLI reproducibility", ok,
                      f"{sum(same)}/{len(same)} experiments byte-identical over 3 runs (1, 1, 4 threads)")
