"""Online sparse diffusion estimation: the GreeDi-LMS recursions.

Each node feeds a stream of scalar measurements y_k(n) = a_k(n)^T h* + v_k(n)
into exponentially weighted correlation estimates

    p_k(n) = (n/(n+1)) zeta p_k(n-1) + a_k(n) y_k(n) / (n+1)
    R_k(n) = (n/(n+1)) zeta R_k(n-1) + a_k(n) a_k(n)^T / (n+1)

which neighbors average every round. The averaged pair drives a gradient
proxy h + mu_tilde (p_bar - R_bar h) whose s largest-magnitude entries
select the working support; a restricted LMS step adapts on that support,
estimates diffuse through the network, and pruning keeps every iterate
s-sparse. Estimates with norm above the threshold D enter the proxy
normalized (the branch is counted per step).

Two proxy modes: "full" maintains the m x m averaged autocorrelation,
O(m^2) per node per step; "light" replaces it with the O(m) recursive
gradient g(n) = zeta g(n-1) + a(n) (y(n) - a(n)^T h(n-1)). The proxy
step size mu_tilde is either fixed or the trace-based adaptive schedule
mu_tilde_k = 1 / (sum_l w_lk trace(R_l)/m), which whitens the proxy for
white inputs.

run_greedi is the vectorized engine: node states are stacked and the
combine of the autocorrelations is fused into one recursion on the
averaged state (exact up to rounding, since combining is linear). The
module-level operations plus run_greedi_reference express the same
pipeline one node at a time; they are the readable form and the oracle
the engine is tested against. run_greedi_centralized is the
fusion-center baseline every decentralized curve is compared to.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import require_finite, topk_support
from .network import build_metropolis, synchronous_combine
from .scenario import Schedule

__all__ = [
    "GreediConfig",
    "GreediNodeState",
    "GreediResult",
    "init_greedi_states",
    "update_correlations",
    "combine_correlations",
    "lemma1_step_size",
    "greedi_proxy_support",
    "restricted_lms_adapt",
    "combine_and_prune",
    "light_proxy_update",
    "run_greedi",
    "run_greedi_reference",
    "run_greedi_centralized",
    "greedi_trace_csv",
]

PROXY_MODES = ("full", "light")
STEP_SCHEDULES = ("fixed", "lemma1_adaptive")

# Below this the trace average counts as cold start and mu_tilde falls back to 1.
NU_FLOOR = 1e-12


@dataclass(frozen=True)
class GreediConfig:
    s: int
    mu: object = 1.0  # scalar or per-node sequence of LMS step sizes
    zeta: float = 1.0
    D: float = 100.0
    proxy_mode: str = "full"
    step_schedule: str = "fixed"
    mu_tilde: float = 1.0

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("sparsity s must be >= 1")
        if not 0.0 < self.zeta <= 1.0:
            raise ValueError("forgetting factor zeta must be in (0, 1]")
        if self.D <= 0:
            raise ValueError("proxy threshold D must be positive")
        if self.proxy_mode not in PROXY_MODES:
            raise ValueError(f"proxy_mode {self.proxy_mode!r} not in {PROXY_MODES}")
        if self.step_schedule not in STEP_SCHEDULES:
            raise ValueError(
                f"step_schedule {self.step_schedule!r} not in {STEP_SCHEDULES}"
            )
        if self.mu_tilde <= 0:
            raise ValueError("mu_tilde must be positive")
        if np.any(np.asarray(self.mu, dtype=float) <= 0):
            raise ValueError("LMS step sizes must be positive")

    def mu_per_node(self, n_nodes):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim == 0:
            return np.full(n_nodes, float(mu))
        if mu.shape != (n_nodes,):
            raise ValueError(f"mu has shape {mu.shape}, expected ({n_nodes},)")
        return mu.copy()


@dataclass
class GreediNodeState:
    """One node's evolving state: estimate, correlation accumulators,
    their neighborhood averages, the current proxy support, and (light
    mode) the recursive gradient g."""

    h: np.ndarray
    p: np.ndarray
    R: np.ndarray
    p_bar: Optional[np.ndarray] = None
    R_bar: Optional[np.ndarray] = None
    support: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None


def init_greedi_states(n_nodes, m):
    return [
        GreediNodeState(h=np.zeros(m), p=np.zeros(m), R=np.zeros((m, m)))
        for _ in range(n_nodes)
    ]


def update_correlations(state, sample, zeta, n):
    """Exponentially weighted correlation recursions at time n >= 1.

    With zeta = 1 the accumulators equal n/(n+1) times the running sample
    means of a y and a a^T.
    """
    if n < 1:
        raise ValueError("time index n starts at 1")
    c1 = zeta * n / (n + 1.0)
    c2 = 1.0 / (n + 1.0)
    state.p = c1 * state.p + (c2 * sample.y) * sample.a
    state.R = c1 * state.R + c2 * np.outer(sample.a, sample.a)
    return state


def combine_correlations(states, W):
    """Neighborhood averages of p and R under the weight matrix W."""
    P = np.stack([st.p for st in states])
    R = np.stack([st.R for st in states])
    P_bar = synchronous_combine(P, W)
    R_bar = synchronous_combine(R, W)
    for k, st in enumerate(states):
        st.p_bar = P_bar[k]
        st.R_bar = R_bar[k]
    return states


def lemma1_step_size(states, W):
    """Adaptive proxy step sizes mu_tilde_k = 1 / nu_k with
    nu_k = sum_l w_lk trace(R_l)/m, from the raw (uncombined)
    accumulators. Cold start (nu below 1e-12) falls back to 1."""
    m = states[0].h.shape[0]
    tr = np.array([np.trace(st.R) for st in states])
    nu = (tr @ W) / m
    mt = np.ones(len(states))
    warm = nu >= NU_FLOOR
    mt[warm] = 1.0 / nu[warm]
    return mt


def _effective_h(h, D):
    """The proxy's h term, normalized when the estimate norm exceeds D."""
    nrm = float(np.linalg.norm(h))
    if nrm > D:
        return h / nrm, True
    return h, False


def greedi_proxy_support(state, mu_tilde, D, s):
    """Support of the s largest proxy entries; returns (support, flag)
    where the flag records whether the normalized branch was taken."""
    heff, normalized = _effective_h(state.h, D)
    proxy = heff + mu_tilde * (state.p_bar - state.R_bar @ heff)
    return topk_support(proxy, s), normalized


def restricted_lms_adapt(state, sample, support, mu):
    """LMS step confined to the given support: the prediction uses only
    the restricted coefficients, and the returned psi is zero elsewhere."""
    hS = state.h[support]
    aS = sample.a[support]
    err = sample.y - aS @ hS
    psi = np.zeros_like(state.h)
    psi[support] = hS + mu * aS * err
    return psi


def combine_and_prune(states, psis, W, s):
    """Diffuse the intermediate estimates and threshold back to s."""
    fused = synchronous_combine(np.stack(psis), W)
    sup = topk_support(fused, s)
    for k, st in enumerate(states):
        h = np.zeros_like(fused[k])
        h[sup[k]] = fused[k, sup[k]]
        st.h = h
    return states


def light_proxy_update(state, sample, zeta):
    """Recursive gradient of the light proxy:
    g(n) = zeta g(n-1) + a(n) (y(n) - a(n)^T h(n-1)). O(m) per step."""
    if state.g is None:
        state.g = np.zeros_like(state.h)
    innov = sample.y - sample.a @ state.h
    state.g = zeta * state.g + innov * sample.a
    return state.g


@dataclass
class GreediResult:
    H: np.ndarray                    # final estimates, one row per node
    supports: np.ndarray             # final proxy supports, one row per node
    msd: np.ndarray                  # (1/N) sum_k ||h_k(n) - h*(n)||^2 per step
    support_overlap: np.ndarray      # mean |S_hat intersect supp(h*)| / s per step
    normalized_counts: np.ndarray    # nodes taking the normalized branch per step
    correct_all: np.ndarray          # all nodes' proxy support == supp(h*) per step
    mu_tilde: np.ndarray             # proxy step sizes at the final step
    snapshots: list = field(default_factory=list)   # (n, H copy) pairs
    diagnostics: dict = field(default_factory=dict)


def _as_schedule(truth):
    if truth is None or isinstance(truth, Schedule):
        return truth
    return Schedule.stationary(truth)


def _pull(streams, Y, A):
    for k, st in enumerate(streams):
        y, a = next(st)
        Y[k] = y
        A[k] = a


def run_greedi(
    streams,
    topology,
    cfg,
    horizon,
    truth=None,
    W=None,
    W_c=None,
    m=None,
    collect_diagnostics=False,
    record_every=0,
):
    """Run the full pipeline for `horizon` steps on all node streams.

    truth may be a GroundTruth, a Schedule (time-varying truth), or None;
    with truth given the per-step MSD, mean support overlap, and
    exact-support flags are recorded against the truth active at each n.
    W combines the correlation state (and feeds the adaptive step sizes),
    W_c the estimates; both default to the Metropolis matrix of the
    topology. collect_diagnostics adds per-step proxy-error and
    innovation-magnitude traces (full mode maintains p_bar/R_bar, so the
    proxy error ||p_bar - R_bar h*|| is only available there).

    Implementation notes: all nodes are updated as stacked arrays, and
    only the combined autocorrelation R_bar is maintained, through
    R_bar_k(n) = c1 R_bar_k(n-1) + c2 sum_l w_lk a_l a_l^T, which equals
    combining the per-node recursions because both are linear. The raw
    traces needed by the adaptive schedule follow the scalar recursion
    tr_l(n) = c1 tr_l(n-1) + c2 ||a_l||^2 for the same reason.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    schedule = _as_schedule(truth)
    if m is None:
        if schedule is None:
            raise ValueError("either truth or m is required")
        m = schedule.m
    N = len(streams)
    s = cfg.s
    if s > m:
        raise ValueError("sparsity exceeds signal dimension")
    W = build_metropolis(topology) if W is None else np.asarray(W, dtype=float)
    W_c = W if W_c is None else np.asarray(W_c, dtype=float)
    mu = cfg.mu_per_node(N)
    adaptive = cfg.step_schedule == "lemma1_adaptive"
    light = cfg.proxy_mode == "light"

    WT = np.ascontiguousarray(W.T)
    WcT = np.ascontiguousarray(W_c.T)
    H = np.zeros((N, m))
    P = np.zeros((N, m))
    G = np.zeros((N, m))
    tr = np.zeros(N)
    Y = np.empty(N)
    A = np.empty((N, m))
    Pbar = np.empty((N, m))
    Psi = np.empty((N, m))
    mt = np.full(N, cfg.mu_tilde)
    if not light:
        # Fused-combine buffers: L[k,i,l] = c2 w_lk a_l[i]; M = L @ A.
        Rbar = np.zeros((N, m, m))
        L = np.empty((N, m, N))
        L2 = L.reshape(N * m, N)
        M = np.empty((N, m, m))
        M2 = M.reshape(N * m, m)
        RH = np.empty((N, m, 1))
    WT3 = WT[:, None, :]
    WTc = np.empty((N, 1, N))

    msd = np.zeros(horizon) if schedule else np.empty(0)
    overlap = np.zeros(horizon) if schedule else np.empty(0)
    correct = np.zeros(horizon, dtype=bool) if schedule else np.empty(0, dtype=bool)
    ncount = np.zeros(horizon, dtype=np.int64)
    diag_perr = np.zeros(horizon) if collect_diagnostics and not light else None
    diag_e0 = np.zeros(horizon) if collect_diagnostics else None
    snapshots = []

    events = list(schedule.events) if schedule else []
    ev = 0
    h_cur = mask = sup_true = None
    S = np.tile(np.arange(s), (N, 1))

    for n in range(1, horizon + 1):
        c1 = cfg.zeta * n / (n + 1.0)
        c2 = 1.0 / (n + 1.0)
        _pull(streams, Y, A)

        if light:
            innov = Y - np.einsum("ij,ij->i", A, H)
            G *= cfg.zeta
            G += innov[:, None] * A
        else:
            P *= c1
            P += (c2 * Y)[:, None] * A
            np.multiply(Rbar, c1, out=Rbar)
            np.multiply(WT3, c2, out=WTc)
            np.multiply(WTc, A.T[None, :, :], out=L)
            np.dot(L2, A, out=M2)
            np.add(Rbar, M, out=Rbar)
            np.dot(WT, P, out=Pbar)
        if adaptive:
            tr *= c1
            tr += c2 * np.einsum("ij,ij->i", A, A)
            nu = (tr @ W) / m
            mt = np.ones(N)
            warm = nu >= NU_FLOOR
            mt[warm] = 1.0 / nu[warm]

        nrm2 = np.einsum("ij,ij->i", H, H)
        over = nrm2 > cfg.D * cfg.D
        if over.any():
            Heff = H.copy()
            Heff[over] /= np.sqrt(nrm2[over])[:, None]
        else:
            Heff = H
        ncount[n - 1] = int(over.sum())

        if light:
            prox = Heff + mt[:, None] * np.dot(WT, G)
        else:
            np.matmul(Rbar, Heff[:, :, None], out=RH)
            prox = Heff + mt[:, None] * (Pbar - RH[:, :, 0])
        require_finite(prox, "proxy")
        S = topk_support(prox, s)

        hS = np.take_along_axis(H, S, 1)
        aS = np.take_along_axis(A, S, 1)
        err = Y - np.einsum("ij,ij->i", aS, hS)
        Psi.fill(0.0)
        np.put_along_axis(Psi, S, hS + (mu * err)[:, None] * aS, 1)
        fused = np.dot(WcT, Psi)
        Sp = topk_support(fused, s)
        H.fill(0.0)
        np.put_along_axis(H, Sp, np.take_along_axis(fused, Sp, 1), 1)

        if schedule:
            if ev < len(events) and n == events[ev][0]:
                gt = events[ev][1]
                h_cur = gt.h_star
                mask = np.zeros(m, dtype=bool)
                mask[gt.support] = True
                sup_true = np.sort(gt.support)
                ev += 1
            diff = H - h_cur
            msd[n - 1] = float(np.einsum("ij,ij->", diff, diff)) / N
            overlap[n - 1] = float(mask[S].sum()) / (N * s)
            if sup_true.shape[0] == s:
                correct[n - 1] = bool((S == sup_true[None, :]).all())
            if collect_diagnostics:
                diag_e0[n - 1] = float(np.abs(Y - A @ h_cur).mean())
                if not light:
                    perr = Pbar - np.matmul(Rbar, h_cur)
                    diag_perr[n - 1] = float(
                        np.sqrt(np.einsum("ij,ij->i", perr, perr).max())
                    )
        if record_every and n % record_every == 0:
            snapshots.append((n, H.copy()))

    require_finite(H, "estimates")
    diag = {}
    if collect_diagnostics:
        diag["e0_abs_mean"] = diag_e0
        if not light:
            diag["proxy_err_max"] = diag_perr
    return GreediResult(H, S, msd, overlap, ncount, correct, mt, snapshots, diag)


def run_greedi_reference(streams, topology, cfg, horizon, truth=None, W=None, W_c=None, m=None):
    """Same pipeline as run_greedi, composed from the single-node
    operations with per-node correlation state. Slow; kept as the oracle
    the stacked engine is checked against and as the readable form."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    schedule = _as_schedule(truth)
    if m is None:
        if schedule is None:
            raise ValueError("either truth or m is required")
        m = schedule.m
    N = len(streams)
    W = build_metropolis(topology) if W is None else np.asarray(W, dtype=float)
    W_c = W if W_c is None else np.asarray(W_c, dtype=float)
    mu = cfg.mu_per_node(N)
    light = cfg.proxy_mode == "light"
    states = init_greedi_states(N, m)

    msd = np.zeros(horizon) if schedule else np.empty(0)
    overlap = np.zeros(horizon) if schedule else np.empty(0)
    correct = np.zeros(horizon, dtype=bool) if schedule else np.empty(0, dtype=bool)
    ncount = np.zeros(horizon, dtype=np.int64)
    mt = np.full(N, cfg.mu_tilde)

    for n in range(1, horizon + 1):
        samples = [next(st) for st in streams]
        if light:
            for k, st in enumerate(states):
                light_proxy_update(st, samples[k], cfg.zeta)
        for k, st in enumerate(states):
            update_correlations(st, samples[k], cfg.zeta, n)
        if not light:
            combine_correlations(states, W)
        if cfg.step_schedule == "lemma1_adaptive":
            mt = lemma1_step_size(states, W)

        supports = []
        if light:
            G_bar = synchronous_combine(np.stack([st.g for st in states]), W)
            for k, st in enumerate(states):
                heff, normalized = _effective_h(st.h, cfg.D)
                supports.append(topk_support(heff + mt[k] * G_bar[k], cfg.s))
                ncount[n - 1] += normalized
                st.support = supports[k]
        else:
            for k, st in enumerate(states):
                sup, normalized = greedi_proxy_support(st, mt[k], cfg.D, cfg.s)
                supports.append(sup)
                ncount[n - 1] += normalized
                st.support = sup

        psis = [
            restricted_lms_adapt(states[k], samples[k], supports[k], mu[k])
            for k in range(N)
        ]
        combine_and_prune(states, psis, W_c, cfg.s)
        for st in states:
            require_finite(st.h, "estimates")

        if schedule:
            gt = schedule.active(n)
            sup_true = np.sort(gt.support)
            err2 = sum(float((st.h - gt.h_star) @ (st.h - gt.h_star)) for st in states)
            msd[n - 1] = err2 / N
            hits = sum(float(np.isin(sup, gt.support).sum()) for sup in supports)
            overlap[n - 1] = hits / (N * cfg.s)
            if sup_true.shape[0] == cfg.s:
                correct[n - 1] = all(
                    np.array_equal(sup, sup_true) for sup in supports
                )

    H = np.stack([st.h for st in states])
    S = np.stack([st.support for st in states])
    return GreediResult(H, S, msd, overlap, ncount, correct, mt)


def run_greedi_centralized(streams, cfg, horizon, truth=None, m=None, record_every=0):
    """Fusion-center baseline: one state per network iteration, fed the
    exact across-node averages -- correlation updates averaged over the N
    fresh samples, and the restricted LMS gradient averaged likewise. It
    sees the true network means instantly (no consensus transient) and
    its gradient noise is reduced N-fold, which is what pushes its floor
    below any decentralized variant. Result layout matches run_greedi
    with a single estimate row."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    schedule = _as_schedule(truth)
    if m is None:
        if schedule is None:
            raise ValueError("either truth or m is required")
        m = schedule.m
    N = len(streams)
    s = cfg.s
    mu_c = float(cfg.mu_per_node(N).mean())
    adaptive = cfg.step_schedule == "lemma1_adaptive"
    light = cfg.proxy_mode == "light"

    h = np.zeros(m)
    p = np.zeros(m)
    g = np.zeros(m)
    R = np.zeros((m, m)) if not light else None
    tr = 0.0
    mt = cfg.mu_tilde
    Y = np.empty(N)
    A = np.empty((N, m))

    msd = np.zeros(horizon) if schedule else np.empty(0)
    overlap = np.zeros(horizon) if schedule else np.empty(0)
    correct = np.zeros(horizon, dtype=bool) if schedule else np.empty(0, dtype=bool)
    ncount = np.zeros(horizon, dtype=np.int64)
    snapshots = []
    S = np.arange(s)[None, :]

    for n in range(1, horizon + 1):
        c1 = cfg.zeta * n / (n + 1.0)
        c2 = 1.0 / (n + 1.0)
        _pull(streams, Y, A)

        if light:
            innov = Y - A @ h
            g = cfg.zeta * g + (innov[:, None] * A).mean(axis=0)
        else:
            p = c1 * p + c2 * (A.T @ Y) / N
            R = c1 * R + c2 * (A.T @ A) / N
        if adaptive:
            tr = c1 * tr + c2 * float(np.einsum("ij,ij->", A, A)) / N
            nu = tr / m
            mt = 1.0 / nu if nu >= NU_FLOOR else 1.0

        heff, normalized = _effective_h(h, cfg.D)
        ncount[n - 1] = int(normalized)
        prox = heff + mt * (g if light else p - R @ heff)
        require_finite(prox, "proxy")
        S = topk_support(prox, s)[None, :]
        sup = S[0]

        hS = h[sup]
        aS = A[:, sup]
        errs = Y - aS @ hS
        psi = np.zeros(m)
        psi[sup] = hS + mu_c * (aS.T @ errs) / N
        pruned = topk_support(psi, s)
        h = np.zeros(m)
        h[pruned] = psi[pruned]

        if schedule:
            gt = schedule.active(n)
            diff = h - gt.h_star
            msd[n - 1] = float(diff @ diff)
            overlap[n - 1] = float(np.isin(S[0], gt.support).sum()) / s
            sup_true = np.sort(gt.support)
            if sup_true.shape[0] == s:
                correct[n - 1] = np.array_equal(S[0], sup_true)
        if record_every and n % record_every == 0:
            snapshots.append((n, h[None, :].copy()))

    require_finite(h, "estimates")
    return GreediResult(h[None, :], S, msd, overlap, ncount, correct, np.array([mt]), snapshots)


def greedi_trace_csv(result, path):
    """CSV rows: n, msd, mean support overlap, normalized-branch count."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["n", "msd", "support_overlap", "normalized_count"])
        for i in range(len(result.msd)):
            w.writerow(
                [
                    i + 1,
                    repr(float(result.msd[i])),
                    repr(float(result.support_overlap[i])),
                    int(result.normalized_counts[i]),
                ]
            )
