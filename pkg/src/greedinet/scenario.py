"""Reproducible scenario generation: ground truth, batch data, streams.

All randomness flows through the counter-based Philox generator
(``philox4x64``), and every consumer derives its own stream from
``(master_seed, role, node, ...)`` via SeedSequence spawn keys, so
per-node generation is order-independent and bit-reproducible across
platforms. The algorithm identifier is recorded in harness metadata.
"""

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "RNG_ALGORITHM",
    "derive_rng",
    "GroundTruth",
    "Schedule",
    "BatchNodeData",
    "StreamSample",
    "gen_ground_truth",
    "gen_batch_data",
    "gen_online_stream",
    "dump_batch_csv",
    "dump_stream_csv",
]

RNG_ALGORITHM = "philox4x64"

# Role codes keeping derived streams disjoint.
ROLE_TRUTH = 1
ROLE_MATRIX = 2
ROLE_NOISE = 3
ROLE_REGRESSOR = 4
ROLE_NOISEVAR = 5
ROLE_TOPOLOGY = 6
ROLE_RUN = 7


def _seedseq(seed, *path):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(path)
        )
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))


def derive_rng(seed, *path):
    """Philox generator for (seed, *path); path encodes role/node/run ids."""
    return np.random.Generator(np.random.Philox(_seedseq(seed, *path)))


@dataclass(frozen=True)
class GroundTruth:
    """The unknown s-sparse parameter vector shared by all nodes."""

    h_star: np.ndarray
    support: np.ndarray
    s: int

    def __post_init__(self):
        nz = np.flatnonzero(self.h_star)
        if len(nz) != self.s or not np.array_equal(np.sort(nz), np.sort(self.support)):
            raise ValueError("support must be the exact nonzero index set of size s")

    @property
    def m(self):
        return self.h_star.shape[0]

    def norm_sq(self):
        return float(self.h_star @ self.h_star)


@dataclass(frozen=True)
class Schedule:
    """Time-varying ground truth: (start_time, truth) events, times increasing.

    Event (t, h) means h is in force from sample t onward; the first event
    must start at t=1. active(n) looks up the truth generating sample n.
    """

    events: tuple

    def __post_init__(self):
        times = [t for t, _ in self.events]
        if not times or times[0] != 1:
            raise ValueError("first schedule event must start at n=1")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be strictly increasing")

    @staticmethod
    def stationary(truth):
        return Schedule(((1, truth),))

    def active(self, n):
        current = self.events[0][1]
        for t, truth in self.events:
            if t <= n:
                current = truth
            else:
                break
        return current

    @property
    def m(self):
        return self.events[0][1].m


class StreamSample(NamedTuple):
    y: float
    a: np.ndarray


@dataclass(frozen=True)
class BatchNodeData:
    """One node's batch measurements y = A h* + eta."""

    A: np.ndarray
    y: np.ndarray
    noise_var: float


def gen_ground_truth(m, s, rng):
    """Support uniform without replacement, nonzeros standard normal."""
    if not 1 <= s <= m:
        raise ValueError(f"sparsity s={s} outside [1, {m}]")
    support = np.sort(rng.choice(m, size=s, replace=False))
    values = rng.normal(size=s)
    while np.any(values == 0.0):  # measure-zero, but the support contract is exact
        values[values == 0.0] = rng.normal(size=np.count_nonzero(values == 0.0))
    h = np.zeros(m)
    h[support] = values
    return GroundTruth(h, support, s)


def gen_batch_data(truth, n_nodes, l, snr_db, seed):
    """Per-node sensing matrices and measurements at the target SNR.

    A_k has i.i.d. N(0,1) entries. The noise variance is calibrated
    against the realized per-node signal power P_k = ||A_k h*||^2 / l,
    i.e. sigma_k^2 = P_k / 10^(snr_db/10), so small-l runs are exactly
    calibrated. snr_db = inf (or None) switches the noise off exactly.
    """
    m = truth.m
    noiseless = snr_db is None or np.isinf(snr_db)
    data = []
    for k in range(n_nodes):
        A = derive_rng(seed, ROLE_MATRIX, k).normal(size=(l, m))
        clean = A @ truth.h_star
        if noiseless:
            data.append(BatchNodeData(A, clean, 0.0))
            continue
        power = float(clean @ clean) / l
        var = power / 10.0 ** (snr_db / 10.0)
        eta = np.sqrt(var) * derive_rng(seed, ROLE_NOISE, k).normal(size=l)
        data.append(BatchNodeData(A, clean + eta, var))
    return data


def node_noise_vars(noise_model, n_nodes, seed):
    """Per-node noise variances for an online run.

    noise_model: "paper" draws sigma_k^2 = 0.01 * U[0.5, 1] once per run,
    "none" is exactly zero, a float is a fixed variance for every node.
    """
    if noise_model == "paper":
        eta = derive_rng(seed, ROLE_NOISEVAR).uniform(0.5, 1.0, size=n_nodes)
        return 0.01 * eta
    if noise_model == "none":
        return np.zeros(n_nodes)
    var = float(noise_model)
    if var < 0:
        raise ValueError(f"noise variance must be >= 0, got {var}")
    return np.full(n_nodes, var)


def _node_stream(schedule, node, noise_sd, seed, chunk):
    reg = derive_rng(seed, ROLE_REGRESSOR, node)
    noi = derive_rng(seed, ROLE_NOISE, node)
    n = 1
    while True:
        A = reg.normal(size=(chunk, schedule.m))
        y = noise_sd * noi.normal(size=chunk) if noise_sd > 0 else np.zeros(chunk)
        # Vectorize y = A h* + noise per span of constant active truth.
        start = 0
        while start < chunk:
            truth = schedule.active(n + start)
            stop = chunk
            for t, _ in schedule.events:
                if n + start < t <= n + chunk - 1:
                    stop = min(stop, t - n)
            y[start:stop] += A[start:stop] @ truth.h_star
            start = stop
        for i in range(chunk):
            yield StreamSample(float(y[i]), A[i])
        n += chunk


def gen_online_stream(truth_or_schedule, n_nodes, noise_model, seed, chunk=512):
    """Per-node infinite streams of (y_k(n), a_k(n)) samples.

    Regressors are i.i.d. white N(0,1); each node's noise variance is
    drawn once per run from `noise_model` (see node_noise_vars). Returns
    (streams, noise_vars, schedule); streams are lazy generators whose
    randomness is derived per (seed, role, node), independent of n_nodes
    or consumption order of other nodes.
    """
    schedule = (
        truth_or_schedule
        if isinstance(truth_or_schedule, Schedule)
        else Schedule.stationary(truth_or_schedule)
    )
    variances = node_noise_vars(noise_model, n_nodes, seed)
    streams = [
        _node_stream(schedule, k, float(np.sqrt(variances[k])), seed, chunk)
        for k in range(n_nodes)
    ]
    return streams, variances, schedule


def dump_batch_csv(data, path):
    """Write batch node data as CSV rows: node, row, y, A_0..A_{m-1}."""
    m = data[0].A.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node", "row", "y"] + [f"A_{j}" for j in range(m)])
        for k, nd in enumerate(data):
            for i in range(nd.A.shape[0]):
                w.writerow([k, i, repr(float(nd.y[i]))] + [repr(float(x)) for x in nd.A[i]])


def dump_stream_csv(streams, n_samples, path):
    """Materialize the first n_samples of each stream as CSV."""
    rows = []
    m = None
    for k, stream in enumerate(streams):
        for n in range(1, n_samples + 1):
            y, a = next(stream)
            m = len(a)
            rows.append([k, n, y, a])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node", "n", "y"] + [f"a_{j}" for j in range(m)])
        for k, n, y, a in rows:
            w.writerow([k, n, repr(float(y))] + [repr(float(x)) for x in a])
