"""Acceptance suite.  Each test prints one PASS/FAIL line for its criterion.

The end-to-end criteria share module-scoped reconstructions of the 32x32x8
moving-square scene; the whole module takes several minutes on one core.

The conditional full-size check runs only when ``DESCI_KOBE`` points at the
Kobe test sequence (a ``.mat`` file with ``orig`` and optionally ``mask``
arrays, or a SCICUBE frame cube).
"""
import os
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from desci.data import FrameCube, MaskCube, load_cube
from desci.metrics import psnr, spectral_correlation
from desci.projection import SplitState, admm_theta_update, gap_project
from desci.scenes import SPECTRAL_REGIONS, moving_square, spectral_blobs
from desci.sensing import (SensingOperator, forward, gen_shifting_binary_mask,
                           gen_spectral_shift_masks, noise_sigma_for_snr, psi_diag)
from desci.solver import SolverConfig, desci_run, gamma_for_snr
from desci.tv import TvConfig, gaptv_run
from desci.wnnm import weighted_nuclear_objective, wnnm_shrink

from conftest import dense_phi


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title}  [{detail}]")
        assert ok, f"criterion {number} failed: {detail}"
    return emit


# ---------------------------------------------------------------- 1, 2

def _random_instances(seed, count):
    rng = np.random.default_rng(seed)
    for i in range(count):
        nx, ny = rng.integers(1, 9, size=2)
        B = int(rng.integers(1, 5))
        if i % 2:
            m = (rng.random((B, nx, ny)) < 0.5).astype(float)
            m[0][m.sum(axis=0) == 0] = 1.0
        else:
            m = rng.random((B, nx, ny)) + 0.05
        yield rng, MaskCube(m)


def test_closed_form_projection_oracle(verdict):
    t0 = time.perf_counter()
    worst_admm = worst_gap = worst_res = 0.0
    for rng, masks in _random_instances(11, 20):
        op = SensingOperator(masks)
        Phi = dense_phi(masks.values)
        n, N = Phi.shape
        y = rng.normal(size=n) * 50
        x, b = rng.normal(size=N) * 50, rng.normal(size=N) * 5
        gamma = float(rng.choice([0.24, 1.2, 6.0, 30.0, 150.0]))
        shape = masks.shape
        st = SplitState(x=x.reshape(shape), theta=np.zeros(shape), b=b.reshape(shape), gamma=gamma)
        theta = admm_theta_update(st, op, y.reshape(masks.nx, masks.ny)).ravel()
        dense = np.linalg.solve(Phi.T @ Phi + gamma * np.eye(N), Phi.T @ y + gamma * (x + b))
        worst_admm = max(worst_admm, np.linalg.norm(theta - dense) / np.linalg.norm(dense))

        proj = gap_project(x.reshape(shape), op, y.reshape(masks.nx, masks.ny)).ravel()
        worst_res = max(worst_res, np.max(np.abs(Phi @ proj - y)) / np.max(np.abs(y)))
        kkt = np.block([[np.eye(N), Phi.T], [Phi, np.zeros((n, n))]])
        oracle = np.linalg.solve(kkt, np.concatenate([x, y]))[:N]
        worst_gap = max(worst_gap, np.linalg.norm(proj - oracle) / np.linalg.norm(oracle))
    elapsed = time.perf_counter() - t0
    ok = worst_admm <= 1e-8 and worst_res <= 1e-10 and worst_gap <= 1e-8 and elapsed < 5
    verdict(1, "closed-form projection matches dense oracles", ok,
            f"admm rel {worst_admm:.1e}, gap residual {worst_res:.1e}, "
            f"gap vs KKT {worst_gap:.1e}, {elapsed:.2f} s")


def test_gram_matrix_is_diagonal(verdict):
    # binary and dyadic (k/16) gains make every product and sum exact in
    # float64, so the diagonal must match bit for bit
    rng = np.random.default_rng(22)
    exact, checked, worst_real = True, 0, 0.0
    for i in range(30):
        nx, ny = rng.integers(1, 9, size=2)
        B = int(rng.integers(1, 5))
        if i % 2:
            m = (rng.random((B, nx, ny)) < 0.5).astype(float)
        else:
            m = rng.integers(0, 17, size=(B, nx, ny)) / 16.0
        m[0][m.sum(axis=0) == 0] = 1.0
        masks = MaskCube(m)
        gram = dense_phi(masks.values) @ dense_phi(masks.values).T
        exact &= not (gram - np.diag(np.diag(gram))).any()
        exact &= np.array_equal(np.diag(gram), psi_diag(masks).ravel())
        checked += 1
    for _, masks in _random_instances(23, 20):
        gram = dense_phi(masks.values) @ dense_phi(masks.values).T
        exact &= not (gram - np.diag(np.diag(gram))).any()
        psi = psi_diag(masks).ravel()
        worst_real = max(worst_real, np.max(np.abs(np.diag(gram) - psi) / psi))
    ok = bool(exact) and worst_real <= 8 * np.finfo(float).eps
    verdict(2, "Phi Phi^T exactly diagonal with diagonal psi", ok,
            f"{checked} exact-arithmetic instances; 20 real-gain instances, "
            f"diagonal within {worst_real / np.finfo(float).eps:.1f} ulp")


# ---------------------------------------------------------------- 3

def _scalar_min(sigma, w):
    grid = np.linspace(0.0, sigma + 1.0, 4001)
    vals = 0.5 * (sigma - grid) ** 2 + w * grid
    k = int(np.argmin(vals))
    res = minimize_scalar(lambda s: 0.5 * (sigma - s) ** 2 + w * s,
                          bounds=(grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    return min(vals[k], res.fun)


def test_wnnm_optimality(verdict):
    worst = 0.0
    for m in range(1, 5):
        for n in range(1, 5):
            for seed in range(100):
                rng = np.random.default_rng(seed * 31 + m * 7 + n)
                R = rng.normal(size=(m, n)) * 3
                w = np.sort(rng.random(min(m, n)) * 3)
                got = weighted_nuclear_objective(R, wnnm_shrink(R, w), w)
                s = np.linalg.svd(R, compute_uv=False)
                oracle = sum(_scalar_min(a, b) for a, b in zip(s, w))
                worst = max(worst, abs(got - oracle))
    beaten = 0
    for seed in range(5):
        rng = np.random.default_rng(1000 + seed)
        R = rng.normal(size=(6, 8)) * 3
        w = np.sort(rng.random(6) * 3)
        Z = wnnm_shrink(R, w)
        best = weighted_nuclear_objective(R, Z, w)
        for j in range(1000):
            scale = (1e-3, 1e-2, 1e-1, 1.0)[j % 4]
            if weighted_nuclear_objective(R, Z + scale * rng.normal(size=Z.shape), w) < best:
                beaten += 1
    ok = worst <= 1e-8 and beaten == 0
    verdict(3, "WNNM shrinkage is the weighted nuclear norm minimiser", ok,
            f"max gap to scalar oracle {worst:.1e} over 1600 instances, "
            f"{beaten} of 5000 perturbations better")


# ---------------------------------------------------------------- 4

def test_gap_admm_equivalence(verdict):
    truth = moving_square(16, 16, 4, side=6)
    op = SensingOperator(gen_shifting_binary_mask(16, 16, 4, 0.5, seed=7))
    y = forward(op, truth)
    iterates = {}
    for mode in ("gap", "admm"):
        seen = []
        desci_run(op, y, SolverConfig(mode=mode, gamma=0.0, max_iter=3, sigma_schedule=[100.0]),
                  callback=lambda rep, x: seen.append(x.copy()))
        iterates[mode] = seen[1:4]
    diff = max(np.max(np.abs(a - b)) for a, b in zip(iterates["gap"], iterates["admm"]))
    verdict(4, "GAP and ADMM(gamma=0) iterates coincide", diff <= 1e-10 and len(iterates["gap"]) == 3,
            f"max difference over 3 iterates {diff:.1e}")


# ---------------------------------------------------------------- 5, 6, 7

@pytest.fixture(scope="module")
def scene():
    truth = moving_square(32, 32, 8)
    masks = gen_shifting_binary_mask(32, 32, 8, 0.5, seed=0)
    return truth, masks


@pytest.fixture(scope="module")
def noiseless_runs(scene):
    truth, masks = scene
    op = SensingOperator(masks)
    y = forward(op, truth)
    t0 = time.perf_counter()
    _, desci_reports = desci_run(op, y, SolverConfig(), truth=truth)
    t1 = time.perf_counter()
    _, tv_reports = gaptv_run(op, y, TvConfig(), truth=truth)
    t2 = time.perf_counter()
    return desci_reports, tv_reports, t1 - t0, t2 - t1


def test_desci_beats_gaptv(verdict, noiseless_runs):
    d, tv, td, ttv = noiseless_runs
    ok = d[-1].psnr >= tv[-1].psnr + 1.0 and d[-1].psnr > 28.0 and td + ttv < 600
    verdict(5, "DeSCI >= GAP-TV + 1 dB and > 28 dB, noiseless 32x32x8", ok,
            f"DeSCI {d[-1].psnr:.2f} dB ({td:.0f} s), GAP-TV {tv[-1].psnr:.2f} dB ({ttv:.0f} s)")


def _noisy_pair(scene, snr_db):
    truth, masks = scene
    op = SensingOperator(masks)
    if snr_db is None:
        y = forward(op, truth)
    else:
        sigma = noise_sigma_for_snr(op.A(truth.values), snr_db)
        y = forward(SensingOperator(masks, noise_sigma=sigma), truth, rng=np.random.default_rng(1))
    out = {}
    for mode, gamma in (("admm", gamma_for_snr(snr_db)), ("gap", 0.0)):
        _, reps = desci_run(op, y, SolverConfig(mode=mode, gamma=gamma), truth=truth)
        out[mode] = reps[-1].psnr
    return out


def test_admm_robust_to_noise(verdict, scene):
    rows, ok = [], True
    for snr in (10.0, 0.0, None):
        r = _noisy_pair(scene, snr)
        if snr is None:
            ok &= abs(r["admm"] - r["gap"]) <= 0.05
        else:
            ok &= r["admm"] >= r["gap"]
        label = "noiseless" if snr is None else f"{snr:.0f} dB"
        rows.append(f"{label}: ADMM {r['admm']:.2f} / GAP {r['gap']:.2f}")
    verdict(6, "ADMM >= GAP under noise, equal when noiseless", bool(ok), "; ".join(rows))


def test_stage_means_non_decreasing(verdict, noiseless_runs):
    reports = noiseless_runs[0][1:]
    stages = sorted({r.stage for r in reports})
    means = [np.mean([r.psnr for r in reports if r.stage == s]) for s in stages]
    ok = len(stages) == 4 and all(b >= a for a, b in zip(means, means[1:]))
    verdict(7, "per-stage mean PSNR non-decreasing over the sigma schedule", ok,
            ", ".join(f"{m:.2f}" for m in means))


# ---------------------------------------------------------------- 8

def _load_kobe(path):
    if path.endswith(".mat"):
        from scipy.io import loadmat
        data = loadmat(path)
        frames = np.moveaxis(np.asarray(data["orig"], dtype=np.float64), -1, 0)
        masks = data.get("mask")
        masks = None if masks is None else np.moveaxis(np.asarray(masks, dtype=np.float64), -1, 0)
    else:
        frames, masks = np.asarray(load_cube(path).values, dtype=np.float64), None
    B = 8 if masks is None else masks.shape[0]
    if masks is None:
        masks = gen_shifting_binary_mask(frames.shape[1], frames.shape[2], B, 0.5, seed=0).values
    return frames, MaskCube(masks), B


def test_kobe_table_values(verdict, capsys):
    if not os.environ.get("DESCI_KOBE"):
        with capsys.disabled():
            print("\nSKIP criterion 8: Kobe benchmark needs DESCI_KOBE (conditional)")
        pytest.skip("set DESCI_KOBE to the Kobe data")
    frames, masks, B = _load_kobe(os.environ["DESCI_KOBE"])
    op = SensingOperator(masks)
    workers = int(os.environ.get("DESCI_THREADS", "1"))
    scores = {"desci": [], "gap-tv": []}
    for start in range(0, frames.shape[0] - B + 1, B):
        truth = FrameCube(frames[start:start + B])
        y = forward(op, truth)
        rec, _ = desci_run(op, y, SolverConfig(workers=workers))
        scores["desci"].append(psnr(truth, rec)[1])
        rec, _ = gaptv_run(op, y, TvConfig())
        scores["gap-tv"].append(psnr(truth, rec)[1])
    d, g = np.mean(scores["desci"]), np.mean(scores["gap-tv"])
    ok = abs(d - 33.25) <= 1.0 and abs(g - 26.45) <= 1.5
    verdict(8, "Kobe: DeSCI 33.25 +/- 1.0 dB, GAP-TV 26.45 +/- 1.5 dB", ok,
            f"DeSCI {d:.2f} dB, GAP-TV {g:.2f} dB over {len(scores['desci'])} blocks")


# ---------------------------------------------------------------- 9

def test_spectral_correlation(verdict):
    truth = spectral_blobs(64, 64, 16)
    op = SensingOperator(gen_spectral_shift_masks(64, 64, 16, 0.5, seed=0))
    y = forward(op, truth)
    # default noise schedule, half the iterations per level to bound runtime
    rec, _ = desci_run(op, y, SolverConfig(max_iter=30))
    corr = [spectral_correlation(rec, truth, region) for region in SPECTRAL_REGIONS]
    verdict(9, "64x64x16 spectral cube: per-region spectral correlation >= 0.99",
            min(corr) >= 0.99, ", ".join(f"{c:.4f}" for c in corr))
