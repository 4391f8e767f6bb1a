"""Hierarchical reconciliation operators and coherence diagnostics.

A hierarchy is a 0/1 summing matrix ``S`` (m nodes x b leaves) mapping leaf
values ``z`` to the full node vector ``x = S z``. Coherent vectors are the
column space of ``S``.
"""

from dataclasses import dataclass, field
import json

import numpy as np
from scipy import linalg

COND_LIMIT = 1e12


class HierarchyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Hierarchy:
    S: np.ndarray
    root: int
    bottom: tuple
    labels: tuple = None
    _chol: tuple = field(default=None, repr=False)

    def __post_init__(self):
        S = np.array(self.S, dtype=np.float64)
        if S.ndim != 2:
            raise HierarchyError("S must be a 2-D matrix")
        m, b = S.shape
        if not m > b >= 1:
            raise HierarchyError(f"need m > b >= 1, got m={m}, b={b}")
        if not np.all((S == 0) | (S == 1)):
            raise HierarchyError("S entries must be 0 or 1")
        bottom = tuple(int(i) for i in self.bottom)
        if len(bottom) != b or len(set(bottom)) != b:
            raise HierarchyError("need exactly one distinct bottom row per column of S")
        if not np.array_equal(S[list(bottom)], np.eye(b)):
            raise HierarchyError("bottom rows of S must form the identity")
        root = int(self.root)
        if not 0 <= root < m or not np.all(S[root] == 1):
            raise HierarchyError("root row of S must be all ones")
        gram = S.T @ S
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise HierarchyError(f"S is rank deficient (cond(S^T S) = {cond:.3g})")
        labels = tuple(self.labels) if self.labels is not None else tuple(f"n{i}" for i in range(m))
        if len(labels) != m:
            raise HierarchyError("one label per node required")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "bottom", bottom)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_chol", linalg.cho_factor(gram))

    @property
    def m(self):
        return self.S.shape[0]

    @property
    def b(self):
        return self.S.shape[1]

    def bottom_of(self, x):
        return np.asarray(x, dtype=np.float64)[..., list(self.bottom)]

    def ls_bottom(self, x):
        """Least-squares leaf vector ``(S^T S)^{-1} S^T x``."""
        x = np.asarray(x, dtype=np.float64)
        return linalg.cho_solve(self._chol, self.S.T @ x.T).T

    def to_json(self):
        return {"labels": list(self.labels), "S": self.S.astype(int).tolist(),
                "root": self.root, "bottom": list(self.bottom)}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(np.array(obj["S"], dtype=np.float64), obj["root"], tuple(obj["bottom"]),
                   tuple(obj["labels"]))

    @classmethod
    def tree(cls, levels, fanout):
        """Balanced tree with ``levels`` levels (root is level 0), nodes in BFS order."""
        if levels < 2 or fanout < 2:
            raise HierarchyError("need levels >= 2 and fanout >= 2")
        paths = [()]
        for lvl in range(1, levels):
            paths += [p + (c,) for p in paths if len(p) == lvl - 1 for c in range(fanout)]
        leaves = [p for p in paths if len(p) == levels - 1]
        S = np.array([[1.0 if leaf[:len(p)] == p else 0.0 for leaf in leaves] for p in paths])
        labels = ["root" if not p else "root." + ".".join(map(str, p)) for p in paths]
        bottom = tuple(paths.index(p) for p in leaves)
        return cls(S, 0, bottom, tuple(labels))


def validate_proportions(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise HierarchyError("proportions must be non-negative and sum to 1")
    return p


def historical_proportions(h, series):
    """Per-leaf mean share of the root over the whole history, ``series`` is (T, m)."""
    series = np.asarray(series, dtype=np.float64)
    shares = h.bottom_of(series) / series[:, [h.root]]
    p = shares.mean(axis=0)
    return p / p.sum()


def reconcile_ols(h, x):
    """Orthogonal projection onto the coherent subspace, ``S (S^T S)^{-1} S^T x``."""
    return h.ls_bottom(x) @ h.S.T


def reconcile_bottom_up(h, x):
    return h.bottom_of(x) @ h.S.T


def reconcile_top_down(h, p, x, alpha=1.0):
    """``x + alpha * (S p x_root - x)``; alpha = 1 is full top-down."""
    p = validate_proportions(p)
    if not 0.0 <= alpha <= 1.0:
        raise HierarchyError(f"alpha must lie in [0, 1], got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    td = np.multiply.outer(x[..., h.root], h.S @ p)
    if alpha == 1.0:
        return td
    return x + alpha * (td - x)


def coherence_rms(h, x):
    x = np.asarray(x, dtype=np.float64)
    r = x - h.ls_bottom(x) @ h.S.T
    return float(np.sqrt(np.mean(r * r)))


def hier_distortion(h, op, targets):
    """Mean over coherent targets of ``|op(y) - y|^2``."""
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    d = [float(np.sum((op(y) - y) ** 2)) for y in targets]
    return float(np.mean(d))


def operator_matrix(h, op):
    """Dense matrix of a linear node-space operator (small hierarchies only)."""
    return np.stack([op(e) for e in np.eye(h.m)], axis=1)
