"""Independent brute-force reference implementations used by the tests."""
import itertools
import math
from fractions import Fraction


def f1_brute(y_true, y_pred):
    """Per-class F1 from explicit counting; macro over classes seen in either vector.

    Precision and recall are kept as exact fractions so the result is the correctly rounded value.
    """
    classes = sorted(set(y_true) | set(y_pred))
    scores = []
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else Fraction(0))
    return float(sum(scores) / len(scores)) if scores else 0.0


def auc_brute(y_true, scores):
    """Fraction of (positive, negative) pairs ranked correctly; ties count one half."""
    pos = [s for t, s in zip(y_true, scores) if t == 1]
    neg = [s for t, s in zip(y_true, scores) if t == 0]
    total = 0.0
    for a, b in itertools.product(pos, neg):
        total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def weighted_pearson_direct(x, y, w):
    """Weighted covariance over the product of weighted standard deviations, written out in full."""
    sw = sum(w)
    mx = sum(wi * xi for wi, xi in zip(w, x)) / sw
    my = sum(wi * yi for wi, yi in zip(w, y)) / sw
    cov = sum(wi * (xi - mx) * (yi - my) for wi, xi, yi in zip(w, x, y)) / sw
    vx = sum(wi * (xi - mx) ** 2 for wi, xi in zip(w, x)) / sw
    vy = sum(wi * (yi - my) ** 2 for wi, yi in zip(w, y)) / sw
    return cov / math.sqrt(vx * vy)
