"""Independent O(n^2) reference implementations built on scipy's cdist."""

import numpy as np
from scipy.spatial.distance import cdist


def chamfer_l2(R, T):
    d = cdist(R, T, "sqeuclidean")
    return d.min(axis=1).mean() + d.min(axis=0).mean()


def chamfer_l1(R, T):
    d = cdist(R, T)
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


def f_score(R, T, d):
    dist = cdist(R, T)
    p = (dist.min(axis=1) < d).mean()
    r = (dist.min(axis=0) < d).mean()
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def fidelity(inp, out):
    return cdist(inp, out, "sqeuclidean").min(axis=1).mean()
