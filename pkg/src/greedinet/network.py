"""Network topology, combination weights, and synchronous exchange.

Combination matrices follow the column convention: column k holds the
weights w_{r,k} with which node k scales the values received from its
neighbors r, so a combine step is x_k <- sum_r W[r, k] x_r.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Topology",
    "build_metropolis",
    "build_uniform",
    "verify_consensus_conditions",
    "ConsensusReport",
    "synchronous_combine",
    "RoundBuffer",
]


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph with self-loops on every node."""

    n_nodes: int
    adjacency: np.ndarray  # (N, N) bool, symmetric, True diagonal

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        n = self.n_nodes
        if adj.shape != (n, n):
            raise ValueError(f"adjacency shape {adj.shape} != ({n}, {n})")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not adj.diagonal().all():
            raise ValueError("every node must be its own neighbor (self-loops)")
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise ValueError(f"topology must be connected, found {n_comp} components")
        object.__setattr__(self, "adjacency", adj)

    def neighbors(self, k):
        """Indices of N_k (includes k itself)."""
        return np.flatnonzero(self.adjacency[k])

    def degrees(self):
        """|N_k| for every node, self-inclusive."""
        return self.adjacency.sum(axis=1)

    @staticmethod
    def from_edges(n_nodes, edges):
        """Build from an iterable of undirected (u, v) pairs."""
        adj = np.eye(n_nodes, dtype=bool)
        for u, v in edges:
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError(f"edge ({u}, {v}) outside [0, {n_nodes})")
            adj[u, v] = adj[v, u] = True
        return Topology(n_nodes, adj)

    @staticmethod
    def from_edge_file(path):
        """Load an edge list: one 0-indexed "u v" pair per line, # comments."""
        edges = []
        n = 0
        with open(path) as f:
            for line in f:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(f"bad edge line in {path!r}: {line!r}")
                u, v = int(parts[0]), int(parts[1])
                edges.append((u, v))
                n = max(n, u + 1, v + 1)
        if not edges:
            raise ValueError(f"no edges found in {path!r}")
        return Topology.from_edges(n, edges)

    @staticmethod
    def complete(n_nodes):
        return Topology(n_nodes, np.ones((n_nodes, n_nodes), dtype=bool))

    @staticmethod
    def path(n_nodes):
        idx = np.arange(n_nodes - 1)
        return Topology.from_edges(n_nodes, zip(idx, idx + 1))

    @staticmethod
    def ring(n_nodes):
        idx = np.arange(n_nodes)
        return Topology.from_edges(n_nodes, zip(idx, (idx + 1) % n_nodes))

    @staticmethod
    def star(n_nodes):
        return Topology.from_edges(n_nodes, ((0, v) for v in range(1, n_nodes)))

    @staticmethod
    def random_geometric(n_nodes, radius, rng, max_tries=200):
        """Nodes uniform in the unit square, edges within `radius`.

        Redraws until the graph is connected; raises after max_tries.
        Deployment positions come from `rng`, so the graph is seeded.
        """
        for _ in range(max_tries):
            pos = rng.uniform(size=(n_nodes, 2))
            d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
            adj = d2 <= radius ** 2
            np.fill_diagonal(adj, True)
            if connected_components(adj, directed=False)[0] == 1:
                return Topology(n_nodes, adj)
        raise ValueError(
            f"no connected geometric graph in {max_tries} tries (n={n_nodes}, radius={radius})"
        )


def build_metropolis(topology):
    """Metropolis combination matrix: w_{r,k} = 1/max(|N_k|, |N_r|) off-diagonal.

    Diagonal entries absorb the remainder so every column sums to 1.
    The result is symmetric and doubly stochastic.
    """
    adj = topology.adjacency
    deg = topology.degrees().astype(float)
    W = np.where(adj, 1.0 / np.maximum(deg[:, None], deg[None, :]), 0.0)
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(W, 1.0 - W.sum(axis=0))
    return W


def build_uniform(topology):
    """Uniform combination matrix: column k puts weight 1/|N_k| on each neighbor."""
    adj = topology.adjacency
    deg = topology.degrees().astype(float)
    return np.where(adj, 1.0 / deg[None, :], 0.0)


@dataclass(frozen=True)
class ConsensusReport:
    """Result of checking the consensus conditions on a combination matrix."""

    columns_stochastic: bool   # 1^T W = 1^T
    rows_stochastic: bool      # W 1 = 1
    spectral_value: float      # max |eig(W - 11^T/N)|
    spectral_lt_one: bool
    tol: float = 1e-9

    @property
    def all_ok(self):
        return self.columns_stochastic and self.rows_stochastic and self.spectral_lt_one

    def failed_conditions(self):
        out = []
        if not self.columns_stochastic:
            out.append("column sums != 1 (1^T W = 1^T violated)")
        if not self.rows_stochastic:
            out.append("row sums != 1 (W 1 = 1 violated)")
        if not self.spectral_lt_one:
            out.append(f"max |eig(W - 11^T/N)| = {self.spectral_value:.6g} >= 1")
        return out


def verify_consensus_conditions(W, tol=1e-9):
    """Check 1^T W = 1^T, W 1 = 1, and max |eig(W - 11^T/N)| < 1.

    Report-only: never raises on a failing matrix.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"combination matrix must be square, got {W.shape}")
    n = W.shape[0]
    cols = np.allclose(W.sum(axis=0), 1.0, atol=tol)
    rows = np.allclose(W.sum(axis=1), 1.0, atol=tol)
    dev = W - np.full((n, n), 1.0 / n)
    lam = float(np.abs(np.linalg.eigvals(dev)).max())
    return ConsensusReport(cols, rows, lam, lam < 1.0 - 1e-12, tol)


def synchronous_combine(values, W):
    """One synchronous combine round: out_k = sum_r W[r, k] * values[r].

    `values` holds one array per node (stacked on axis 0 or given as a
    sequence of equal-shape arrays). Outputs are computed from the
    round-start snapshot only, so there are no intra-round ordering
    effects.
    """
    V = np.asarray(values, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"combination matrix must be square, got {W.shape}")
    if V.shape[0] != W.shape[0]:
        raise ValueError(f"{V.shape[0]} node values vs {W.shape[0]}x{W.shape[0]} matrix")
    return np.tensordot(W, V, axes=(0, 0))


class RoundBuffer:
    """Per-node outbox/inbox realizing one synchronous exchange round.

    Every node posts exactly one message per round; `deliver` enforces the
    barrier and hands node k the round's messages from its neighborhood.
    """

    def __init__(self, topology):
        self.topology = topology
        self._outbox = [None] * topology.n_nodes
        self._posted = np.zeros(topology.n_nodes, dtype=bool)

    def post(self, node, message):
        if self._posted[node]:
            raise ValueError(f"node {node} already posted this round")
        self._outbox[node] = message
        self._posted[node] = True

    def deliver(self):
        """Return [{r: message_r for r in N_k} for each node k] and reset."""
        if not self._posted.all():
            missing = np.flatnonzero(~self._posted).tolist()
            raise ValueError(f"round barrier violated: nodes {missing} have not posted")
        inboxes = [
            {int(r): self._outbox[r] for r in self.topology.neighbors(k)}
            for k in range(self.topology.n_nodes)
        ]
        self._outbox = [None] * self.topology.n_nodes
        self._posted[:] = False
        return inboxes
