import numpy as np
import pytest

from boxrefine.geometry import Box


def random_box(rng, lo=-500.0, hi=500.0, min_size=1e-3):
    l, t = rng.uniform(lo, hi, size=2)
    w, h = rng.uniform(min_size, hi - lo, size=2)
    return Box(float(l), float(l + w), float(t), float(t + h))


def random_inner_box(rng, S, margin=0.5, min_size=2.0):
    """Map-coordinate box with all edges strictly inside [margin, S - margin]."""
    def span():
        while True:
            a, b = np.sort(rng.uniform(margin, S - margin, size=2))
            if b - a >= min_size:
                return float(a), float(b)

    l, r = span()
    t, b = span()
    return Box(l, r, t, b)


def max_matching(ious, threshold):
    """Largest number of prediction/truth pairs with IoU >= threshold (exhaustive)."""
    n_pred, n_gt = ious.shape

    def best(p, used):
        if p == n_pred:
            return 0
        top = best(p + 1, used)
        for g in range(n_gt):
            if not used & (1 << g) and ious[p, g] >= threshold:
                top = max(top, 1 + best(p + 1, used | (1 << g)))
        return top

    return best(0, 0)


def random_instance(rng, n_truth, n_pred, extent=100.0):
    truths = []
    for _ in range(n_truth):
        l, t = rng.uniform(0, extent * 0.7, 2)
        w, h = rng.uniform(10, extent * 0.3, 2)
        truths.append((l, l + w, t, t + h))
    preds = []
    for k in range(n_pred):
        if truths and rng.random() < 0.7:
            l, r, t, b = truths[rng.integers(len(truths))]
            w, h = r - l, b - t
            j = rng.normal(0, 0.15, 4) * [w, w, h, h]
            box = (l + j[0], max(l + j[0] + 1, r + j[1]), t + j[2], max(t + j[2] + 1, b + j[3]))
        else:
            l, t = rng.uniform(0, extent * 0.7, 2)
            w, h = rng.uniform(10, extent * 0.3, 2)
            box = (l, l + w, t, t + h)
        preds.append(box)
    return np.array(preds).reshape(-1, 4), np.array(truths).reshape(-1, 4), rng.random(n_pred)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance summary: one line per criterion at the end of the run
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0][1:])):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")
