"""Graph algebra for edge-based formation control.

Incidence matrices, edge/graph Laplacians, spanning-tree partition and the
spectral certificate used by the controller's stability conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class GraphError(ValueError):
    pass


class TopologyClass(Enum):
    DIRECTED_SPANNING_TREE = "directed_spanning_tree"
    DIRECTED_CYCLE = "directed_cycle"
    CONNECTED_UNDIRECTED = "connected_undirected"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class Topology:
    """Node/edge structure with orientation.

    Edges are (tail, head) pairs with 1-indexed nodes; for undirected graphs the
    pair fixes the orientation used to build the incidence matrix.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    directed: bool = True

    def __post_init__(self):
        if self.num_nodes < 1:
            raise GraphError("num_nodes must be positive")
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop ({i},{j}) not allowed")
            if not (1 <= i <= self.num_nodes and 1 <= j <= self.num_nodes):
                raise GraphError(f"edge ({i},{j}) out of range [1,{self.num_nodes}]")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i},{j})")
            seen.add((i, j))

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class IncidenceSet:
    E: np.ndarray       # N x m, {0, +-1}
    E_in: np.ndarray    # entries 0/-1 at terminal nodes
    E_out: np.ndarray   # entries 0/+1 at initial nodes


@dataclass(frozen=True)
class LaplacianSet:
    L_e: np.ndarray      # m x m edge Laplacian
    L: np.ndarray        # N x N graph Laplacian
    L_e_sym: np.ndarray  # (E^T E_in + E_in^T E) / 2


@dataclass(frozen=True)
class TreePartition:
    edge_permutation: tuple[int, ...]  # tree edges first, then co-tree
    E_t: np.ndarray
    E_c: np.ndarray
    T_mat: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class SpectralCertificate:
    topology_class: TopologyClass
    lam_min: float
    lam_max: float
    passed: bool
    matrix_name: str


def build_incidence(top: Topology) -> IncidenceSet:
    N, m = top.num_nodes, top.num_edges
    E = np.zeros((N, m))
    E_in = np.zeros((N, m))
    E_out = np.zeros((N, m))
    for k, (i, j) in enumerate(top.edges):
        E[i - 1, k] = 1.0
        E[j - 1, k] = -1.0
        E_out[i - 1, k] = 1.0
        E_in[j - 1, k] = -1.0
    return IncidenceSet(E=E, E_in=E_in, E_out=E_out)


def build_laplacians(inc: IncidenceSet, directed: bool) -> LaplacianSet:
    E, E_in = inc.E, inc.E_in
    if directed:
        L_e = E.T @ E_in
        L = E_in @ E.T
    else:
        L_e = E.T @ E
        L = E @ E.T
    L_e_sym = 0.5 * (E.T @ E_in + E_in.T @ E)
    return LaplacianSet(L_e=L_e, L=L, L_e_sym=L_e_sym)


def adjacency_laplacian(top: Topology) -> np.ndarray:
    """Graph Laplacian via degree minus adjacency, independent of incidence.

    For the directed convention used here an edge (i, j) means node j receives
    from node i, so row j of the adjacency picks up a_ji = 1.
    """
    N = top.num_nodes
    A = np.zeros((N, N))
    for i, j in top.edges:
        A[j - 1, i - 1] = 1.0
        if not top.directed:
            A[i - 1, j - 1] = 1.0
    deg = np.diag(A.sum(axis=1))
    return deg - A


def _undirected_adjacency_lists(top: Topology) -> list[list[tuple[int, int]]]:
    # node -> list of (neighbor, edge index), ignoring orientation
    adj: list[list[tuple[int, int]]] = [[] for _ in range(top.num_nodes)]
    for k, (i, j) in enumerate(top.edges):
        adj[i - 1].append((j - 1, k))
        adj[j - 1].append((i - 1, k))
    return adj


def is_connected(top: Topology) -> bool:
    if top.num_nodes == 1:
        return True
    adj = _undirected_adjacency_lists(top)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w, _ in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == top.num_nodes


def _is_directed_cycle(top: Topology) -> bool:
    N, m = top.num_nodes, top.num_edges
    if m != N or N < 2:
        return False
    succ = {}
    for i, j in top.edges:
        if i in succ:
            return False  # out-degree > 1
        succ[i] = j
    if len(succ) != N:
        return False
    # follow the unique successor map; must return to start after N hops
    node, start = 1, 1
    for _ in range(N):
        if node not in succ:
            return False
        node = succ[node]
    return node == start and is_connected(top)


def classify_topology(top: Topology) -> TopologyClass:
    if not top.directed:
        return TopologyClass.CONNECTED_UNDIRECTED if is_connected(top) else TopologyClass.UNSUPPORTED
    if is_connected(top) and top.num_edges == top.num_nodes - 1:
        return TopologyClass.DIRECTED_SPANNING_TREE
    if _is_directed_cycle(top):
        return TopologyClass.DIRECTED_CYCLE
    return TopologyClass.UNSUPPORTED


def tree_partition(top: Topology, inc: IncidenceSet | None = None) -> TreePartition:
    """Split edges into a deterministic spanning tree and co-tree.

    The tree is grown depth-first from node 1 over the undirected skeleton,
    taking incident edges in input order, so results are reproducible.
    """
    if not is_connected(top):
        raise GraphError("tree_partition requires a connected graph")
    if inc is None:
        inc = build_incidence(top)
    adj = _undirected_adjacency_lists(top)
    tree_edges: list[int] = []
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w, k in adj[v]:
            if w not in seen:
                seen.add(w)
                tree_edges.append(k)
                stack.append(w)
    cotree_edges = [k for k in range(top.num_edges) if k not in set(tree_edges)]
    perm = tuple(tree_edges + cotree_edges)
    E_t = inc.E[:, tree_edges]
    E_c = inc.E[:, cotree_edges]
    T_mat = np.linalg.solve(E_t.T @ E_t, E_t.T @ E_c)
    R = np.hstack([np.eye(top.num_nodes - 1), T_mat])
    E_perm = inc.E[:, perm]
    if not np.allclose(E_perm, E_t @ R, atol=1e-10, rtol=0):
        raise GraphError("incidence reconstruction E = E_t R failed")
    return TreePartition(edge_permutation=perm, E_t=E_t, E_c=E_c, T_mat=T_mat, R=R)


def lemma1_certificate(top: Topology) -> SpectralCertificate:
    """Spectral report backing the controller's positive-definiteness requirement.

    Spanning trees are certified on the symmetrized edge Laplacian; cycles and
    undirected graphs on the tree-edge Gramian E_t^T E_t.
    """
    cls = classify_topology(top)
    if cls is TopologyClass.UNSUPPORTED:
        raise GraphError("unsupported topology: not a spanning tree, directed cycle, "
                         "or connected undirected graph")
    inc = build_incidence(top)
    if cls is TopologyClass.DIRECTED_SPANNING_TREE:
        lap = build_laplacians(inc, directed=True)
        mat, name = lap.L_e_sym, "L_e_sym"
    else:
        part = tree_partition(top, inc)
        mat, name = part.E_t.T @ part.E_t, "Et^T Et"
    eig = np.linalg.eigvalsh(mat)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    return SpectralCertificate(topology_class=cls, lam_min=lam_min, lam_max=lam_max,
                               passed=lam_min > 1e-9, matrix_name=name)
