"""Batch distributed hard-thresholding pursuit (DiHaT).

One iteration alternates: combine measurement averages over the network,
select a support from the gradient proxy, solve restricted least squares,
fuse estimates, and prune back to s nonzeros. Three cooperation variants:

- ``full``: measurements and estimates are both exchanged,
- ``estimate_only``: nodes keep their local (y_k, A_k) and only fuse
  estimates,
- ``non_cooperative``: no exchange at all.

States are stored stacked across nodes (axis 0) for speed; per-node views
are available through DihatState.node().
"""

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .linalg import LS_RCOND, require_finite, topk_support
from .network import build_metropolis, synchronous_combine

__all__ = [
    "DihatConfig",
    "DihatState",
    "DihatNodeState",
    "DihatResult",
    "init_dihat_state",
    "dihat_proxy",
    "dihat_iteration",
    "run_dihat",
    "dihat_trace_csv",
]

VARIANTS = ("full", "estimate_only", "non_cooperative")


@dataclass(frozen=True)
class DihatConfig:
    s: int
    max_iters: int = 300
    rel_change_tol: float = 1e-8
    variant: str = "full"

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("sparsity s must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_change_tol < 0:
            raise ValueError("rel_change_tol must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant {self.variant!r} not in {VARIANTS}")


class DihatNodeState(NamedTuple):
    h: np.ndarray        # current s-sparse estimate
    y_bar: np.ndarray    # averaged measurements
    A_bar: np.ndarray    # averaged sensing matrix
    support: np.ndarray  # proxy-selected support S_{k,n}


@dataclass
class DihatState:
    """All node states stacked: H (N,m), Y_bar (N,l), A_bar (N,l,m)."""

    H: np.ndarray
    Y_bar: np.ndarray
    A_bar: np.ndarray
    supports: np.ndarray  # (N, s) after the first iteration, (N, 0) before

    @property
    def n_nodes(self):
        return self.H.shape[0]

    def node(self, k):
        return DihatNodeState(self.H[k], self.Y_bar[k], self.A_bar[k], self.supports[k])


def init_dihat_state(data):
    """h = 0, averaged measurements start at the local ones, empty supports."""
    N = len(data)
    l, m = data[0].A.shape
    H = np.zeros((N, m))
    Y = np.stack([nd.y for nd in data])
    A = np.stack([nd.A for nd in data])
    if Y.shape != (N, l) or A.shape != (N, l, m):
        raise ValueError("nodes disagree on measurement dimensions")
    return DihatState(H, Y, A, np.empty((N, 0), dtype=int))


def dihat_proxy(state):
    """Gradient proxy h + A_bar^T (y_bar - A_bar h) for one node state."""
    h, y, A = state.h, state.y_bar, state.A_bar
    return h + A.T @ (y - A @ h)


def _restricted_ls_batch(A_bar, Y_bar, supports):
    """Min-norm restricted LS per node, batched over the stacked axis.

    SVD with relative cutoff LS_RCOND, matching np.linalg.lstsq semantics
    for rank-deficient restricted systems.
    """
    As = np.take_along_axis(A_bar, supports[:, None, :], axis=2)  # (N, l, s)
    U, sv, Vt = np.linalg.svd(As, full_matrices=False)
    cutoff = LS_RCOND * sv[:, :1]
    inv = np.where(sv > cutoff, 1.0 / np.where(sv > 0, sv, 1.0), 0.0)
    coef = np.einsum("nij,ni->nj", Vt, inv * np.einsum("nli,nl->ni", U, Y_bar))
    H_hat = np.zeros((A_bar.shape[0], A_bar.shape[2]))
    np.put_along_axis(H_hat, supports, coef, axis=1)
    return H_hat


def dihat_iteration(state, data, W1, W2, cfg, return_fused=False):
    """One full Table-style iteration on all nodes.

    Steps: (1-2) combine y_bar/A_bar via W1 (skipped unless variant is
    full), (3) support from the proxy, (4) restricted LS, (5) combine
    estimates via W2 (skipped for non_cooperative), (6) prune to s.
    """
    if data is not None and len(data) != state.n_nodes:
        raise ValueError("data/state node count mismatch")
    if state.H.shape[1] < cfg.s:
        raise ValueError("sparsity exceeds signal dimension")
    if cfg.variant == "full":
        Y_bar = synchronous_combine(state.Y_bar, W1)
        A_bar = synchronous_combine(state.A_bar, W1)
    else:
        Y_bar, A_bar = state.Y_bar, state.A_bar

    resid = Y_bar - np.matmul(A_bar, state.H[:, :, None])[:, :, 0]
    proxy = state.H + np.matmul(A_bar.transpose(0, 2, 1), resid[:, :, None])[:, :, 0]
    supports = topk_support(proxy, cfg.s)

    H_hat = _restricted_ls_batch(A_bar, Y_bar, supports)
    H_fused = H_hat if cfg.variant == "non_cooperative" else synchronous_combine(H_hat, W2)

    pruned = topk_support(H_fused, cfg.s)
    H = np.zeros_like(H_fused)
    np.put_along_axis(H, pruned, np.take_along_axis(H_fused, pruned, axis=1), axis=1)

    new = DihatState(H, Y_bar, A_bar, supports)
    return (new, H_fused) if return_fused else new


@dataclass
class DihatResult:
    state: DihatState
    msd: np.ndarray                  # per-iteration normalized MSD (empty without truth)
    support_correct: np.ndarray      # (iters, N) bool flags S_{k,n} == supp(h*)
    iters: int
    diagnostics: dict = field(default_factory=dict)


def run_dihat(data, topology, cfg, truth=None, W1=None, W2=None, collect_diagnostics=False):
    """Iterate DiHaT until max_iters or the relative estimate change drops
    below rel_change_tol.

    The relative change is networkwise: ||H_n - H_{n-1}||_F / ||H_{n-1}||_F
    (infinite when the previous estimate is all zero but the new one is
    not). With truth given, records the normalized MSD
    (1/N) sum_k ||h_k - h*||^2 / ||h*||^2 and per-node support recovery
    each iteration. collect_diagnostics adds per-iteration networkwise
    error, pruning ratios, and measurement-consensus deviations.
    """
    W1 = build_metropolis(topology) if W1 is None else W1
    W2 = build_metropolis(topology) if W2 is None else W2
    state = init_dihat_state(data)
    N = state.n_nodes

    msd, correct = [], []
    err, prune_ratio, y_dev, A_dev = [], [], [], []
    if collect_diagnostics:
        y_mean = state.Y_bar.mean(axis=0)
        A_mean = state.A_bar.mean(axis=0)

    for it in range(1, cfg.max_iters + 1):
        H_prev = state.H
        state, H_fused = dihat_iteration(state, data, W1, W2, cfg, return_fused=True)
        require_finite(state.H, "estimates")

        if truth is not None:
            diff = state.H - truth.h_star
            msd.append(float((diff * diff).sum()) / (N * truth.norm_sq()))
            correct.append((state.supports == truth.support[None, :]).all(axis=1))
            if collect_diagnostics:
                e = float(np.sqrt((diff * diff).sum()))
                err.append(e)
                fd = H_fused - truth.h_star
                fe = float(np.sqrt((fd * fd).sum()))
                prune_ratio.append(e / fe if fe > 0 else 0.0)
        if collect_diagnostics:
            y_dev.append(float(np.abs(state.Y_bar - y_mean).max()))
            A_dev.append(float(np.sqrt(((state.A_bar - A_mean) ** 2).sum(axis=(1, 2))).max()))

        chg = float(np.sqrt(((state.H - H_prev) ** 2).sum()))
        base = float(np.sqrt((H_prev * H_prev).sum()))
        rel = 0.0 if chg == 0.0 else (np.inf if base == 0.0 else chg / base)
        if rel < cfg.rel_change_tol:
            break

    diag = {}
    if collect_diagnostics:
        diag = {
            "err": np.array(err),
            "prune_ratio": np.array(prune_ratio),
            "y_dev": np.array(y_dev),
            "A_dev": np.array(A_dev),
        }
    return DihatResult(
        state,
        np.array(msd),
        np.array(correct, dtype=bool).reshape(len(correct), N) if correct else np.empty((0, N), bool),
        it,
        diag,
    )


def dihat_trace_csv(result, path):
    """CSV rows: iter, msd, then one support-recovery flag per node."""
    N = result.support_correct.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iter", "msd"] + [f"recovered_{k}" for k in range(N)])
        for i in range(len(result.msd)):
            w.writerow(
                [i + 1, repr(float(result.msd[i]))]
                + [int(x) for x in result.support_correct[i]]
            )
