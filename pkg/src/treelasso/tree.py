"""Weighted directed hierarchical trees over predictors.

A tree is stored in topological order (every parent index is smaller than
its child indices), which makes the adjacency matrix strictly upper
triangular and the influence matrix unit upper triangular.  The influence
matrix is the inverse of (I - A); its (i, j) entry is the product of edge
weights along the unique path from i down to j, i.e. the cumulative
influence an ancestor exerts on a descendant.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property
from numbers import Integral
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    CovarianceNotPD,
    CycleDetected,
    DimensionMismatch,
    DuplicateLabel,
    InvalidLevels,
    MultipleParents,
    NonpositiveSd,
    UnknownLabel,
    ZeroWeightEdge,
)


class Edge(NamedTuple):
    parent: int
    child: int
    weight: float


@dataclass(frozen=True)
class NodeRole:
    """Classification of a node together with its neighbor sets."""

    kind: str  # "root" | "internal" | "leaf"
    parents: frozenset
    children: frozenset

    @property
    def is_root(self):
        return not self.parents

    @property
    def is_leaf(self):
        return not self.children

    @property
    def is_internal(self):
        return bool(self.parents) and bool(self.children)


@dataclass(frozen=True)
class Tree:
    """Immutable weighted hierarchical tree in topological node order.

    Construct through :func:`build_tree`, which validates the edge set and
    sorts the nodes; direct construction assumes indices already satisfy
    parent < child with at most one parent per node.
    """

    labels: tuple
    edges: tuple

    def __post_init__(self):
        seen_child = set()
        for e in self.edges:
            if not (0 <= e.parent < self.p and 0 <= e.child < self.p):
                raise UnknownLabel(f"edge {e} out of range for p={self.p}")
            if e.parent >= e.child:
                raise CycleDetected(f"edge {e} violates topological order")
            if e.child in seen_child:
                raise MultipleParents(self.labels[e.child])
            seen_child.add(e.child)

    @property
    def p(self):
        return len(self.labels)

    @cached_property
    def parent(self):
        """Parent index per node, None for roots."""
        out = [None] * self.p
        for e in self.edges:
            out[e.child] = e.parent
        return tuple(out)

    @cached_property
    def children(self):
        out = [[] for _ in range(self.p)]
        for e in self.edges:
            out[e.parent].append(e.child)
        return tuple(tuple(c) for c in out)

    @cached_property
    def roles(self):
        out = []
        for j in range(self.p):
            ps = frozenset(() if self.parent[j] is None else (self.parent[j],))
            cs = frozenset(self.children[j])
            kind = "root" if not ps else ("leaf" if not cs else "internal")
            out.append(NodeRole(kind, ps, cs))
        return tuple(out)

    @cached_property
    def levels(self):
        """Depth of each node; roots are level 0."""
        out = [0] * self.p
        for e in self.edges:  # parents precede children, one pass suffices
            out[e.child] = out[e.parent] + 1
        return tuple(out)

    @cached_property
    def roots(self):
        return tuple(j for j in range(self.p) if self.parent[j] is None)

    def index(self, label):
        try:
            return self._label_index[label]
        except KeyError:
            raise UnknownLabel(f"unknown node label {label!r}") from None

    @cached_property
    def _label_index(self):
        return {lab: j for j, lab in enumerate(self.labels)}

    def ancestors(self, j):
        """Indices of strict ancestors of node j, nearest first."""
        out = []
        k = self.parent[j]
        while k is not None:
            out.append(k)
            k = self.parent[k]
        return tuple(out)

    def adjacency(self):
        """Weighted adjacency matrix, strictly upper triangular."""
        A = np.zeros((self.p, self.p))
        for e in self.edges:
            A[e.parent, e.child] = e.weight
        A.flags.writeable = False
        return A

    def influence(self):
        return influence_matrix(self)


@dataclass(frozen=True)
class InfluenceEstimate:
    """Influence matrix estimated from data, with regularization flag."""

    matrix: np.ndarray
    regularized: bool


def _resolve(ref, labels, index):
    if isinstance(ref, str):
        try:
            return index[ref]
        except KeyError:
            raise UnknownLabel(f"unknown node label {ref!r}") from None
    if isinstance(ref, Integral) and not isinstance(ref, bool):
        k = int(ref)
        if not 0 <= k < len(labels):
            raise UnknownLabel(f"node index {k} out of range for p={len(labels)}")
        return k
    raise UnknownLabel(f"edge endpoint {ref!r} is neither a label nor an index")


def build_tree(labels, edges):
    """Validate an edge list and return the tree in topological order.

    Parameters
    ----------
    labels : sequence of str
        Distinct node names, one per node.
    edges : iterable of (parent, child, weight)
        Endpoints may be labels or 0-based positions in ``labels``.

    Raises
    ------
    DuplicateLabel, UnknownLabel, ZeroWeightEdge, MultipleParents,
    CycleDetected
    """
    labels = tuple(str(x) for x in labels)
    if len(set(labels)) != len(labels):
        raise DuplicateLabel("node labels must be distinct")
    index = {lab: j for j, lab in enumerate(labels)}
    p = len(labels)

    parent = [None] * p
    weight = {}
    children = [[] for _ in range(p)]
    for parent_ref, child_ref, w in edges:
        i = _resolve(parent_ref, labels, index)
        j = _resolve(child_ref, labels, index)
        w = float(w)
        if w == 0.0 or not math.isfinite(w):
            raise ZeroWeightEdge(
                f"edge {labels[i]!r} -> {labels[j]!r} must have a finite nonzero weight"
            )
        if i == j:
            raise CycleDetected(f"self-loop at node {labels[i]!r}")
        if parent[j] is not None:
            raise MultipleParents(labels[j])
        parent[j] = i
        weight[(i, j)] = w
        children[i].append(j)

    # stable topological order (Kahn with an index heap)
    ready = [j for j in range(p) if parent[j] is None]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in children[i]:
            heapq.heappush(ready, j)
    if len(order) < p:
        stuck = [labels[j] for j in range(p) if j not in set(order)]
        raise CycleDetected(f"cycle detected among nodes {stuck}")

    new_pos = {old: new for new, old in enumerate(order)}
    sorted_edges = sorted(
        Edge(new_pos[i], new_pos[j], w) for (i, j), w in weight.items()
    )
    return Tree(
        labels=tuple(labels[i] for i in order),
        edges=tuple(sorted_edges),
    )


def influence_matrix(tree):
    """Influence matrix (I - A)^(-1) by triangular back-substitution."""
    A = tree.adjacency()
    if tree.p == 0:
        return np.zeros((0, 0))
    D = solve_triangular(
        np.eye(tree.p) - A, np.eye(tree.p), lower=False, unit_diagonal=True
    )
    D.flags.writeable = False
    return D


def make_binary_tree(levels, weight=1.0):
    """Full binary tree with 2**levels - 1 nodes and uniform edge weights.

    Nodes are labeled X1..Xp in breadth-first order, so node k (1-based)
    has children 2k and 2k+1.
    """
    if not isinstance(levels, Integral) or isinstance(levels, bool) or levels < 1:
        raise InvalidLevels(f"levels must be an integer >= 1, got {levels!r}")
    weight = float(weight)
    if weight == 0.0 or not math.isfinite(weight):
        raise ZeroWeightEdge("edge weight must be finite and nonzero")
    p = 2 ** int(levels) - 1
    labels = [f"X{k}" for k in range(1, p + 1)]
    edges = []
    for i in range((p - 1) // 2):
        edges.append((i, 2 * i + 1, weight))
        edges.append((i, 2 * i + 2, weight))
    return build_tree(labels, edges)


def compositional_adjacency(topology, column_sds):
    """Reweight each edge to the child-over-parent standard deviation ratio.

    Volumes that sum across segmentation levels induce these weights on the
    standardized scale: edge (i, j) gets sd_j / sd_i.
    """
    sds = np.asarray(column_sds, dtype=float)
    if sds.shape != (topology.p,):
        raise DimensionMismatch(
            f"expected {topology.p} standard deviations, got shape {sds.shape}"
        )
    if np.any(sds <= 0) or not np.all(np.isfinite(sds)):
        raise NonpositiveSd("column standard deviations must be positive and finite")
    edges = tuple(
        Edge(e.parent, e.child, sds[e.child] / sds[e.parent]) for e in topology.edges
    )
    return Tree(labels=topology.labels, edges=edges)


def estimate_influence_from_data(X, tree=None, ridge=True, mask_to_tree_support=False):
    """Estimate the influence matrix from data whose columns are in tree order.

    The sample covariance S of X (columns ordered parents-before-children)
    is factored as S = U'U with U upper triangular; normalizing the rows of
    U to unit diagonal recovers the influence matrix, since the model implies
    Cov(x) = D' Omega D with Omega diagonal.

    Parameters
    ----------
    X : (n, p) array
    tree : Tree, optional
        Supplies the expected dimension and, with ``mask_to_tree_support``,
        the ancestor structure used to zero entries off the known paths.
    ridge : bool
        When the covariance is not positive definite, add
        1e-8 * trace(S)/p to the diagonal and flag the result instead of
        raising.

    Returns
    -------
    InfluenceEstimate
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("X must be a 2-d array")
    n, p = X.shape
    if tree is not None and tree.p != p:
        raise DimensionMismatch(f"tree has {tree.p} nodes but X has {p} columns")
    if mask_to_tree_support and tree is None:
        raise DimensionMismatch("mask_to_tree_support requires a tree")

    S = np.atleast_2d(np.cov(X, rowvar=False))
    regularized = False
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        if not ridge:
            raise CovarianceNotPD(
                f"sample covariance is not positive definite (n={n}, p={p})"
            ) from None
        delta = 1e-8 * np.trace(S) / p
        try:
            L = np.linalg.cholesky(S + delta * np.eye(p))
        except np.linalg.LinAlgError:
            raise CovarianceNotPD(
                "sample covariance is not positive definite even after "
                f"adding {delta:.3e} to the diagonal"
            ) from None
        regularized = True

    U = L.T
    D = U / np.diag(U)[:, None]
    if mask_to_tree_support:
        keep = np.eye(p, dtype=bool)
        for j in range(p):
            for a in tree.ancestors(j):
                keep[a, j] = True
        D = np.where(keep, D, 0.0)
    D.flags.writeable = False
    return InfluenceEstimate(matrix=D, regularized=regularized)
