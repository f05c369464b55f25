"""Built-in property suites: metric oracles, gradient checks, SMO-vs-QP,
and augmentation/masking invariants.

Each suite prints its worst observed error; any failure names the suite and
the whole run exits nonzero. The optional gradient-fault hook corrupts one
dense backward pass on purpose so callers can confirm the checker catches
a planted bug.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .dataio import FeatureSequence, csa_sample, downsample_every_k, pad_truncate, ssa_sample
from .encoders import build_encoder, default_config
from .fusion import dual_objective, rbf_kernel_matrix, solve_svr_dual
from .metrics import ccc, pearson
from .nn.gradcheck import ConcatOutputs, PrimaryOutput, gradient_check
from .nn.layers import (Activation, AttentionPool, Conv1dMultiWidth, Dense,
                        GlobalPool, Lstm, MultiHeadAttention)
from .nn.losses import LossSpec, loss_eval
from .qp_reference import solve_svr_dual_reference
from .rng import stream


def _suite_metrics() -> tuple[bool, str]:
    rng = stream(0, "selftest.metrics")
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 65))
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        mx, my = sum(x) / n, sum(y) / n
        cov = sum((a - mx) * (b - my) for a, b in zip(x, y)) / n
        vx = sum((a - mx) ** 2 for a in x) / n
        vy = sum((b - my) ** 2 for b in y) / n
        worst = max(worst, abs(pearson(x, y) - cov / math.sqrt(vx * vy)))
        worst = max(worst, abs(ccc(x, y) - 2 * cov / (vx + vy + (mx - my) ** 2)))
    worst = max(worst, abs(ccc([1, 2, 3], [2, 3, 4]) - 4 / 7))
    worst = max(worst, abs(pearson([1, 2, 3], [1, 3, 2]) - 0.5))
    return worst <= 1e-12, f"max abs err {worst:.3e}"


def _suite_gradients(inject_fault: bool = False) -> tuple[bool, str]:
    worst = 0.0
    failed = []
    for seed in range(3):
        r = stream(seed, "selftest.grad")
        cases = [
            ("dense", Dense(4, 5, r), r.standard_normal((3, 4)), None, 1e-6),
            ("relu", Activation("relu"), r.standard_normal((3, 4)), None, 1e-6),
            ("tanh", Activation("tanh"), r.standard_normal((3, 4)), None, 1e-6),
            ("softmax", Activation("softmax_lastdim"), r.standard_normal((3, 4)), None, 1e-6),
            ("conv1d", ConcatOutputs(Conv1dMultiWidth(3, 2, (1, 2), r)),
             r.standard_normal((5, 3)), None, 1e-6),
            ("maxpool", GlobalPool("max"), r.standard_normal((5, 3)),
             np.array([1, 1, 0, 1, 0], bool), 1e-6),
            ("avgpool", GlobalPool("avg"), r.standard_normal((5, 3)),
             np.array([1, 1, 0, 1, 0], bool), 1e-6),
            ("lstm", Lstm(3, 4, r), r.standard_normal((5, 3)),
             np.array([1, 1, 1, 0, 0], bool), 1e-5),
            ("attention", PrimaryOutput(AttentionPool(4, 3, r)),
             r.standard_normal((5, 4)), np.array([1, 1, 1, 1, 0], bool), 1e-6),
            ("mha", MultiHeadAttention(6, 2, 2, r), r.standard_normal((4, 6)),
             np.array([1, 1, 1, 0], bool), 1e-6),
        ]
        if inject_fault and seed == 0:
            dense = cases[0][1]
            original = dense.backward

            def corrupted(grad):
                gx = original(grad)
                dense.grads["w"] *= 2.0  # planted bug
                return gx
            dense.backward = corrupted
        for name, layer, x, mask, tol in cases:
            report = gradient_check(layer, x, mask=mask, tolerance=tol, seed=seed)
            worst = max(worst, report.max_rel_err)
            if not report.passed:
                failed.append(f"{name}({report.worst_param})")
    rng = stream(7, "selftest.gradloss")
    for kind in ("mse", "mae", "ccc", "ccc_plus_mse", "ccc_plus_mae"):
        spec = LossSpec(kind=kind)
        p = rng.standard_normal((8, 2))
        t = rng.standard_normal((8, 2))
        _, g = loss_eval(p, t, spec)
        h = 1e-6
        for i in range(p.shape[0]):
            for j in range(p.shape[1]):
                pp = p.copy()
                pp[i, j] += h
                up = loss_eval(pp, t, spec)[0]
                pp[i, j] -= 2 * h
                down = loss_eval(pp, t, spec)[0]
                fd = (up - down) / (2 * h)
                err = abs(fd - g[i, j]) / max(abs(fd), abs(g[i, j]), 1e-2)
                worst = max(worst, err)
                if err > 1e-5:
                    failed.append(f"loss:{kind}")
    detail = f"max rel err {worst:.3e}"
    if failed:
        detail += f", failed: {sorted(set(failed))}"
    return not failed, detail


def _suite_smo_vs_qp() -> tuple[bool, str]:
    rng = stream(1, "selftest.smo")
    worst_obj = worst_pred = 0.0
    for _ in range(5):
        n = int(rng.integers(4, 11))
        X = rng.standard_normal((n, 3))
        y = rng.standard_normal(n)
        C, eps = 2.0, 0.1
        K = rbf_kernel_matrix(X, X, 1.0 / 3)
        sol = solve_svr_dual(K, y, C, eps, tol=1e-4)
        ref = solve_svr_dual_reference(K, y, C, eps)
        o1 = dual_objective(K, y, sol.beta, eps)
        o2 = dual_objective(K, y, ref.beta, eps)
        worst_obj = max(worst_obj, abs(o1 - o2) / max(1.0, abs(o2)))
        worst_pred = max(worst_pred, float(np.abs(
            (K @ sol.beta + sol.bias) - (K @ ref.beta + ref.bias)).max()))
    ok = worst_obj <= 1e-3 and worst_pred <= 1e-3
    return ok, f"obj rel {worst_obj:.3e}, pred diff {worst_pred:.3e}"


def _suite_augmentation() -> tuple[bool, str]:
    rng = stream(2, "selftest.aug")
    checks = 0
    for _ in range(20):
        n = int(rng.integers(6, 40))
        d = int(rng.integers(1, 8))
        seq = FeatureSequence(rng.standard_normal((n, d)))
        chunk = int(rng.integers(2, 7))
        out = ssa_sample(seq, chunk, rng)
        assert out.frames == math.ceil(n / chunk)
        for i, row in enumerate(out.data):
            lo, hi = i * chunk, min((i + 1) * chunk, n)
            assert any(np.array_equal(row, seq.data[j]) for j in range(lo, hi))
        window = int(rng.integers(2, 12))
        cout = csa_sample(seq, window, rng)
        if n >= window:
            starts = [s for s in range(n - window + 1)
                      if np.array_equal(cout.data, seq.data[s:s + window])]
            assert starts, "contiguity violated"
        k = int(rng.integers(1, 6))
        assert downsample_every_k(seq, k).frames == math.ceil(n / k)
        target = int(rng.integers(2, 30))
        padded = pad_truncate(seq, target)
        twice = pad_truncate(padded.seq, target)
        assert np.array_equal(padded.seq.data, twice.seq.data)
        checks += 1
    # mask invariance: appending padding never changes a tiny encoder's output
    cfg = default_config("vis_cnn1d", "selftest", input_dim=6, seq_len=8,
                         conv_widths=(2, 3), conv_channels=4, fc_dim=8, seed=3)
    enc = build_encoder(cfg)
    for _ in range(20):
        frames = int(rng.integers(3, 8))
        raw = rng.standard_normal((frames, 6))
        grown = np.zeros((frames + 4, 6))
        grown[:frames] = raw
        mask_a = np.arange(frames + 0) < frames
        mask_b = np.arange(frames + 4) < frames
        pa, ra = enc.forward(raw, mask_a)
        pb, rb = enc.forward(grown, mask_b)
        assert np.array_equal(pa, pb) and np.array_equal(ra, rb)
        checks += 1
    return True, f"{checks} randomized cases"


def run_selftest(inject_gradient_fault: bool = False) -> int:
    suites = [
        ("metrics", lambda: _suite_metrics()),
        ("nncore-gradients", lambda: _suite_gradients(inject_gradient_fault)),
        ("smo-vs-qp", lambda: _suite_smo_vs_qp()),
        ("augmentation-masking", lambda: _suite_augmentation()),
    ]
    failures = []
    for name, run in suites:
        start = time.time()
        try:
            ok, detail = run()
        except AssertionError as exc:
            ok, detail = False, f"assertion: {exc}"
        status = "pass" if ok else "FAIL"
        print(f"[{status}] {name}: {detail} ({time.time() - start:.1f}s)")
        if not ok:
            failures.append(name)
    if failures:
        print(f"selftest failed: {', '.join(failures)}")
        return 2
    print("selftest passed")
    return 0
