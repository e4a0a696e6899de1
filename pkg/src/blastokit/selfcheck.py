"""Built-in verification suites for the `selfcheck` command.

Three suites: finite-difference gradient checks for every layer kernel
(64-bit mode), the planted-linear-model recovery check for the explanation
engine, and metric oracles (pair-counting AUC vs. the trapezoidal rule plus
a fixed confusion-matrix vector).  Each check prints one PASS/FAIL line.

``tamper_layer`` corrupts the analytic gradient of the named layer before
comparison; it exists so the failure path itself is testable.
"""
from __future__ import annotations

import numpy as np

from . import lime as bl
from .imgcore.image import Image
from .metrics import confusion, metrics, roc_auc
from .nn import ops
from .nn.gradcheck import check_gradients
from .rng import stream

GRAD_TOLERANCES = {
    "conv2d": 1e-6,
    "batchnorm": 1e-6,
    "relu": 1e-6,
    "maxpool": 1e-6,
    "avgpool": 1e-6,
    "depth_concat": 1e-6,
    "lstm": 1e-5,
    "fully_connected": 1e-7,
    "softmax_xent": 1e-6,
}
INSTANCES_PER_LAYER = 5


def _tamper_fn(tamper_layer, layer_name):
    if tamper_layer != layer_name:
        return None

    def corrupt(name, grad):
        bad = grad.copy()
        bad.ravel()[0] += 0.5 + abs(bad.ravel()[0])
        return bad

    return corrupt


def gradient_suite(tamper_layer: str | None = None):
    """[(check name, max rel error, tolerance)] for all layer kernels."""
    results = []

    def run(layer, instance_fn):
        worst = 0.0
        for i in range(INSTANCES_PER_LAYER):
            rng = stream(2024, "selfcheck", layer, i)
            fwd, bwd, arrays = instance_fn(rng)
            err = check_gradients(fwd, bwd, arrays, tamper=_tamper_fn(tamper_layer, layer))
            worst = max(worst, err)
        results.append((f"gradient:{layer}", worst, GRAD_TOLERANCES[layer]))

    def conv_instance(rng):
        n, ci, co = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
        h, w = rng.integers(3, 7), rng.integers(3, 7)
        x = rng.standard_normal((n, ci, h, w))
        wt = rng.standard_normal((co, ci, 3, 3))
        b = rng.standard_normal(co)
        return (lambda: ops.conv2d(x, wt, b)[0],
                lambda p: list(ops.conv2d(x, wt, b)[1](p)),
                [("x", x), ("w", wt), ("b", b)])

    def bn_instance(rng):
        n, c = rng.integers(2, 4), rng.integers(1, 4)
        h, w = rng.integers(2, 5), rng.integers(2, 5)
        x = rng.standard_normal((n, c, h, w))
        g = rng.standard_normal(c)
        b = rng.standard_normal(c)
        return (lambda: ops.batchnorm(x, g, b, "train")[0],
                lambda p: list(ops.batchnorm(x, g, b, "train")[1](p)),
                [("x", x), ("g", g), ("b", b)])

    def relu_instance(rng):
        x = rng.standard_normal((rng.integers(2, 5), rng.integers(2, 8))) + 0.05
        return (lambda: ops.relu(x)[0],
                lambda p: list(ops.relu(x)[1](p)), [("x", x)])

    def pool_instance(kind):
        def make(rng):
            win = int(rng.choice([3, 5]))
            h = int(rng.integers(win, win + 5))
            w = int(rng.integers(win, win + 5))
            x = rng.standard_normal((rng.integers(1, 3), rng.integers(1, 3), h, w))
            return (lambda: ops.pool(x, kind, win, 2)[0],
                    lambda p: list(ops.pool(x, kind, win, 2)[1](p)), [("x", x)])
        return make

    def concat_instance(rng):
        n, h, w = rng.integers(1, 3), rng.integers(2, 4), rng.integers(2, 4)
        a = rng.standard_normal((n, rng.integers(1, 4), h, w))
        b = rng.standard_normal((n, rng.integers(1, 4), h, w))
        return (lambda: ops.depth_concat(a, b)[0],
                lambda p: list(ops.depth_concat(a, b)[1](p)),
                [("a", a), ("b", b)])

    def lstm_instance(rng):
        t, f, hsz = rng.integers(1, 4), rng.integers(2, 5), rng.integers(2, 5)
        seq = rng.standard_normal((t, f))
        wx = rng.standard_normal((4 * hsz, f)) * 0.5
        wh = rng.standard_normal((4 * hsz, hsz)) * 0.5
        b = rng.standard_normal(4 * hsz) * 0.1
        return (lambda: ops.lstm_forward(seq, wx, wh, b)[0],
                lambda p: list(ops.lstm_forward(seq, wx, wh, b)[1](p)),
                [("seq", seq), ("wx", wx), ("wh", wh), ("b", b)])

    def fc_instance(rng):
        fi, fo = rng.integers(2, 6), rng.integers(1, 5)
        x = rng.standard_normal(fi)
        wt = rng.standard_normal((fo, fi))
        b = rng.standard_normal(fo)
        return (lambda: ops.fully_connected(x, wt, b)[0],
                lambda p: list(ops.fully_connected(x, wt, b)[1](p)),
                [("x", x), ("w", wt), ("b", b)])

    run("conv2d", conv_instance)
    run("batchnorm", bn_instance)
    run("relu", relu_instance)
    run("maxpool", pool_instance("max"))
    run("avgpool", pool_instance("avg"))
    run("depth_concat", concat_instance)
    run("lstm", lstm_instance)
    run("fully_connected", fc_instance)

    # softmax+xent: loss gradient directly (scalar output)
    worst = 0.0
    for i in range(INSTANCES_PER_LAYER):
        rng = stream(2024, "selfcheck", "softmax_xent", i)
        n = int(rng.integers(2, 6))
        logits = rng.standard_normal((n, 2))
        labels = np.zeros((n, 2))
        labels[np.arange(n), rng.integers(0, 2, n)] = 1.0
        _, _, back = ops.softmax_xent(logits, labels)
        analytic = back()[0]
        tam = _tamper_fn(tamper_layer, "softmax_xent")
        if tam is not None:
            analytic = tam("logits", analytic)
        from .nn.gradcheck import finite_diff, rel_error

        numeric = finite_diff(lambda: ops.softmax_xent(logits, labels)[1], logits)
        worst = max(worst, rel_error(analytic, numeric))
    results.append(("gradient:softmax_xent", worst, GRAD_TOLERANCES["softmax_xent"]))
    return results


def lime_linear_suite():
    """Planted linear model: selection, 5% weight recovery, fidelity >= 0.99."""
    rng = stream(2024, "selfcheck", "lime")
    h, w, d = 40, 50, 20
    labels = (np.arange(h)[:, None] // 10) * 5 + (np.arange(w)[None, :] // 10)
    base = rng.random((h, w, 3)).astype(np.float32)
    counts = np.bincount(labels.ravel(), minlength=d)
    means = np.stack(
        [np.bincount(labels.ravel(), weights=base[..., c].ravel(), minlength=d) / counts
         for c in range(3)], axis=1).astype(np.float32)
    spmap = bl.SuperpixelMap(labels.astype(np.int64), d, counts.astype(np.int64), means)
    planted = [2, 5, 9, 14, 18]
    w_true = np.zeros(d)
    w_true[planted] = [0.16, -0.13, 0.11, -0.08, 0.06]
    seg_masks = [labels == s for s in range(d)]

    def predict_fn(batch):
        z = np.empty((len(batch), d))
        for i, img in enumerate(batch):
            for s in range(d):
                z[i, s] = float(np.array_equal(img[seg_masks[s]], base[seg_masks[s]]))
        p = 0.5 + z @ w_true
        return np.stack([1 - p, p], axis=1)

    cfg = bl.LimeConfig(n_samples=1000, k=5, seed=7)
    exp = bl.explain(predict_fn, Image(base), cfg, superpixels=spmap)
    sel_ok = sorted(exp.segment_ids) == planted
    rel = max(
        abs(wg - w_true[s]) / abs(w_true[s])
        for s, wg in zip(exp.segment_ids, exp.segment_weights)
    ) if sel_ok else float("inf")
    return [
        ("lime:selection", 0.0 if sel_ok else 1.0, 0.5),
        ("lime:weights-5pct", rel, 0.05),
        ("lime:fidelity>=0.99", 1.0 - exp.fidelity, 0.01),
    ]


def paircount_auc(scores, labels) -> float:
    """Mann-Whitney statistic: concordant pairs count 1, ties 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        total += float((p > neg).sum()) + 0.5 * float((p == neg).sum())
    return total / (len(pos) * len(neg))


def metric_suite():
    worst = 0.0
    for i in range(100):
        rng = stream(2024, "selfcheck", "auc", i)
        n = int(rng.integers(4, 51))
        labels = np.zeros(n, dtype=np.int64)
        labels[: max(1, int(rng.integers(1, n)))] = 1
        rng.shuffle(labels)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.random(n), 2)  # rounding forces ties
        _, auc = roc_auc(scores, labels)
        worst = max(worst, abs(auc - paircount_auc(scores, labels)))
    table_row = metrics(confusion(["poor"] * 12 + ["good"] * 8,
                                  ["poor"] * 10 + ["good"] * 10, "poor"))
    expected = (0.900, 0.83333333, 1.0, 0.90909090, 1.0)
    got = (table_row.accuracy, table_row.precision, table_row.recall,
           table_row.f1, table_row.sensitivity)
    table_err = max(abs(a - b) for a, b in zip(got, expected))
    return [
        ("metrics:auc-paircount-1e9", worst, 1e-9),
        ("metrics:fixed-confusion-row", table_err, 5e-4),
    ]


def run_selfcheck(tamper_layer: str | None = None, emit=print) -> bool:
    """Run every suite, print one line per check; True iff all pass."""
    checks = gradient_suite(tamper_layer) + lime_linear_suite() + metric_suite()
    all_ok = True
    for name, err, tol in checks:
        ok = err < tol
        all_ok &= ok
        emit(f"{'PASS' if ok else 'FAIL'} {name}: err={err:.3e} tol={tol:.0e}")
    return all_ok
