import numpy as np
import pytest

from greedinet.greedi import (
    GreediConfig,
    GreediNodeState,
    _effective_h,
    combine_and_prune,
    greedi_proxy_support,
    greedi_trace_csv,
    init_greedi_states,
    lemma1_step_size,
    light_proxy_update,
    restricted_lms_adapt,
    run_greedi,
    run_greedi_centralized,
    run_greedi_reference,
    update_correlations,
)
from greedinet.linalg import topk_support
from greedinet.network import Topology, build_metropolis
from greedinet.scenario import (
    ROLE_TRUTH,
    GroundTruth,
    Schedule,
    StreamSample,
    _seedseq,
    derive_rng,
    gen_ground_truth,
    gen_online_stream,
)


def test_correlation_recursion_examples():
    st = init_greedi_states(1, 2)[0]
    update_correlations(st, StreamSample(2.0, np.array([1.0, 0.0])), 0.5, 1)
    assert np.allclose(st.p, [1.0, 0.0])
    assert np.allclose(st.R, [[0.5, 0.0], [0.0, 0.0]])
    update_correlations(st, StreamSample(3.0, np.array([0.0, 1.0])), 0.5, 2)
    assert np.allclose(st.p, [1.0 / 3.0, 1.0])
    with pytest.raises(ValueError):
        update_correlations(st, StreamSample(0.0, np.zeros(2)), 0.5, 0)


def test_unit_forgetting_matches_scaled_sample_mean():
    # zeta = 1 turns the recursion into n/(n+1) times the running mean
    rng = np.random.default_rng(60)
    st = init_greedi_states(1, 3)[0]
    samples = [StreamSample(float(rng.normal()), rng.normal(size=3)) for _ in range(40)]
    for n, smp in enumerate(samples, start=1):
        update_correlations(st, smp, 1.0, n)
    n = len(samples)
    mean_p = np.mean([smp.y * smp.a for smp in samples], axis=0)
    assert np.allclose(st.p, mean_p * n / (n + 1.0), rtol=1e-12)


def test_lemma1_step_sizes():
    states = [
        GreediNodeState(h=np.zeros(1), p=np.zeros(1), R=np.array([[4.0]])),
        GreediNodeState(h=np.zeros(1), p=np.zeros(1), R=np.array([[2.0]])),
    ]
    mt = lemma1_step_size(states, np.eye(2))
    assert np.allclose(mt, [0.25, 0.5])
    cold = init_greedi_states(2, 1)
    assert np.allclose(lemma1_step_size(cold, np.eye(2)), [1.0, 1.0])


def test_effective_h_normalization():
    h = np.array([3.0, 4.0])
    heff, flag = _effective_h(h, 2.0)
    assert flag and np.allclose(heff, [0.6, 0.8])
    heff, flag = _effective_h(h, 5.0)  # norm == D stays unnormalized
    assert not flag and heff is h
    heff, flag = _effective_h(h, 10.0)
    assert not flag and heff is h


def test_restricted_lms_example():
    st = GreediNodeState(h=np.array([0.5, 0.0]), p=np.zeros(2), R=np.zeros((2, 2)))
    psi = restricted_lms_adapt(
        st, StreamSample(1.5, np.array([2.0, 1.0])), np.array([0]), 0.2
    )
    assert np.allclose(psi, [0.7, 0.0])


def test_light_gradient_examples():
    st = init_greedi_states(1, 2)[0]
    g = light_proxy_update(st, StreamSample(1.0, np.array([1.0, 0.0])), 0.5)
    assert np.allclose(g, [1.0, 0.0])
    g = light_proxy_update(st, StreamSample(2.0, np.array([0.0, 1.0])), 0.5)
    assert np.allclose(g, [0.5, 2.0])


def test_combine_and_prune_keeps_s_sparse():
    states = init_greedi_states(3, 4)
    psis = [np.array([1.0, -2.0, 0.5, 0.0]),
            np.array([0.0, 1.0, 3.0, 0.0]),
            np.array([2.0, 0.0, 0.0, -1.0])]
    W = build_metropolis(Topology.ring(3))
    combine_and_prune(states, psis, W, 2)
    for st in states:
        assert np.count_nonzero(st.h) <= 2


def test_proxy_support_oracle_1000():
    """greedi_proxy_support against the written-out formula, plus the
    norm bound the D-threshold guarantees."""
    rng = np.random.default_rng(1007)
    for _ in range(1000):
        m = int(rng.integers(2, 12))
        s = int(rng.integers(1, m + 1))
        D = float(rng.uniform(0.5, 3.0))
        mt = float(rng.uniform(0.1, 2.0))
        h = rng.normal(size=m) * rng.choice([0.3, 4.0])
        B = rng.normal(size=(m, m))
        st = GreediNodeState(h=h, p=np.zeros(m), R=np.zeros((m, m)),
                             p_bar=rng.normal(size=m), R_bar=B @ B.T / m)
        sup, flag = greedi_proxy_support(st, mt, D, s)
        assert flag == (np.linalg.norm(h) > D)
        heff = h / np.linalg.norm(h) if flag else h
        prox = heff + mt * (st.p_bar - st.R_bar @ heff)
        assert np.all(np.isfinite(prox))
        bound = max(D, 1.0) + mt * np.linalg.norm(st.p_bar - st.R_bar @ heff)
        assert np.linalg.norm(prox) <= bound + 1e-9
        expected = sorted(range(m), key=lambda i: (-abs(prox[i]), i))[:s]
        assert np.array_equal(sup, np.sort(expected))


def test_correlation_estimates_whiten():
    # white unit-variance regressors: R(n) -> n/(n+1) I, p(n) -> n/(n+1) h*
    rng = np.random.default_rng(61)
    m, n_samples = 6, 10_000
    h = np.zeros(m)
    h[[1, 4]] = [1.0, -2.0]
    st = init_greedi_states(1, m)[0]
    for n in range(1, n_samples + 1):
        a = rng.normal(size=m)
        update_correlations(st, StreamSample(float(a @ h), a), 1.0, n)
    scale = (n_samples + 1.0) / n_samples
    R = st.R * scale
    assert np.allclose(np.diag(R), 1.0, atol=0.05)
    off = R - np.diag(np.diag(R))
    assert np.abs(off).max() < 0.05
    assert np.allclose(st.p * scale, h, atol=0.1)


def _switch_setup(master=5):
    t1 = gen_ground_truth(12, 3, derive_rng(master, ROLE_TRUTH))
    t2 = gen_ground_truth(12, 4, derive_rng(master, ROLE_TRUTH, 2))
    schedule = Schedule(((1, t1), (31, t2)))
    top = Topology.ring(4)
    return schedule, top


@pytest.mark.parametrize("proxy_mode", ["full", "light"])
@pytest.mark.parametrize("step_schedule", ["fixed", "lemma1_adaptive"])
def test_engine_matches_reference(proxy_mode, step_schedule):
    """The stacked engine and the single-node composition must agree to
    rounding on a switching scenario exercising every branch."""
    schedule, top = _switch_setup()
    cfg = GreediConfig(s=3, mu=0.3, zeta=0.95, D=2.0, proxy_mode=proxy_mode,
                       step_schedule=step_schedule, mu_tilde=0.8)
    sa, _, _ = gen_online_stream(schedule, 4, "paper", _seedseq(5, 7, 0))
    sb, _, _ = gen_online_stream(schedule, 4, "paper", _seedseq(5, 7, 0))
    ra = run_greedi(sa, top, cfg, 60, truth=schedule)
    rb = run_greedi_reference(sb, top, cfg, 60, truth=schedule)
    assert np.abs(ra.H - rb.H).max() <= 1e-12
    assert np.array_equal(ra.supports, rb.supports)
    assert np.allclose(ra.msd, rb.msd, rtol=1e-9, atol=1e-15)
    assert np.allclose(ra.support_overlap, rb.support_overlap)
    assert np.array_equal(ra.normalized_counts, rb.normalized_counts)
    assert np.array_equal(ra.correct_all, rb.correct_all)
    assert np.allclose(ra.mu_tilde, rb.mu_tilde, rtol=1e-12)


def test_run_is_deterministic():
    schedule, top = _switch_setup()
    cfg = GreediConfig(s=3, mu=0.3, zeta=0.95)
    outs = []
    for _ in range(2):
        st, _, _ = gen_online_stream(schedule, 4, "paper", _seedseq(5, 7, 1))
        outs.append(run_greedi(st, top, cfg, 50, truth=schedule))
    assert outs[0].msd.tobytes() == outs[1].msd.tobytes()
    assert np.array_equal(outs[0].H, outs[1].H)


def test_estimates_stay_sparse_every_step():
    schedule, top = _switch_setup(master=6)
    cfg = GreediConfig(s=3, mu=0.3, zeta=0.95)
    st, _, _ = gen_online_stream(schedule, 4, "paper", _seedseq(6, 7, 0))
    res = run_greedi(st, top, cfg, 40, truth=schedule, record_every=1)
    assert len(res.snapshots) == 40
    for n, H in res.snapshots:
        assert (np.count_nonzero(H, axis=1) <= 3).all()
    assert res.supports.shape == (4, 3)


def test_support_locks_on_stationary_truth():
    truth = gen_ground_truth(20, 3, derive_rng(44, ROLE_TRUTH))
    st, _, _ = gen_online_stream(truth, 4, "paper", _seedseq(44, 7, 0))
    cfg = GreediConfig(s=3, mu=0.15, zeta=1.0, step_schedule="lemma1_adaptive")
    res = run_greedi(st, Topology.ring(4), cfg, 1200, truth=truth)
    assert res.correct_all[-200:].all()
    assert res.support_overlap[-1] == 1.0
    assert res.msd[-1] < res.msd[0]


def _onehot_streams(truth, n_nodes):
    m = truth.h_star.shape[0]

    def stream(k):
        n = 0
        while True:
            a = np.zeros(m)
            a[(n + k) % m] = 1.0
            yield StreamSample(float(a @ truth.h_star), a)
            n += 1

    return [stream(k) for k in range(n_nodes)]


def test_light_and_full_agree_on_rotating_basis():
    """Noiseless one-hot regressors sweep every coordinate, so both proxy
    modes must identify the same support and drive every node to it."""
    rng = derive_rng(33, 5)
    support = np.sort(rng.choice(12, size=3, replace=False))
    h = np.zeros(12)
    h[support] = rng.uniform(1.0, 2.0, size=3) * rng.choice([-1.0, 1.0], size=3)
    truth = GroundTruth(h, support, 3)
    top = Topology.ring(4)
    results = {}
    for mode in ("full", "light"):
        cfg = GreediConfig(s=3, mu=0.6, zeta=1.0, proxy_mode=mode, mu_tilde=2.0)
        results[mode] = run_greedi(_onehot_streams(truth, 4), top, cfg, 480, truth=truth)
    assert np.array_equal(results["full"].supports, results["light"].supports)
    for res in results.values():
        assert (res.supports == support[None, :]).all()
        assert res.correct_all[-24:].all()


def test_centralized_result_layout():
    truth = gen_ground_truth(15, 2, derive_rng(45, ROLE_TRUTH))
    st, _, _ = gen_online_stream(truth, 5, "paper", _seedseq(45, 7, 0))
    cfg = GreediConfig(s=2, mu=0.2, zeta=0.99, step_schedule="lemma1_adaptive")
    res = run_greedi_centralized(st, cfg, 30, truth=truth, record_every=10)
    assert res.H.shape == (1, 15)
    assert np.count_nonzero(res.H) <= 2
    assert res.supports.shape == (1, 2)
    assert res.msd.shape == (30,)
    assert [n for n, _ in res.snapshots] == [10, 20, 30]
    assert all(np.count_nonzero(H) <= 2 for _, H in res.snapshots)


def test_centralized_light_mode_runs():
    truth = gen_ground_truth(15, 2, derive_rng(46, ROLE_TRUTH))
    st, _, _ = gen_online_stream(truth, 5, "paper", _seedseq(46, 7, 0))
    cfg = GreediConfig(s=2, mu=0.2, zeta=0.99, proxy_mode="light")
    res = run_greedi_centralized(st, cfg, 30, truth=truth)
    assert np.isfinite(res.msd).all()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_proxy_raises():
    truth = gen_ground_truth(10, 2, derive_rng(47, ROLE_TRUTH))
    st, _, _ = gen_online_stream(truth, 3, "paper", _seedseq(47, 7, 0))
    cfg = GreediConfig(s=2, mu=1e8, zeta=1.0, mu_tilde=1e8)
    with pytest.raises(FloatingPointError):
        run_greedi(st, Topology.ring(3), cfg, 200, truth=truth)


def test_config_validation():
    with pytest.raises(ValueError):
        GreediConfig(s=0)
    with pytest.raises(ValueError):
        GreediConfig(s=1, zeta=0.0)
    with pytest.raises(ValueError):
        GreediConfig(s=1, zeta=1.5)
    with pytest.raises(ValueError):
        GreediConfig(s=1, D=0.0)
    with pytest.raises(ValueError):
        GreediConfig(s=1, proxy_mode="sparse")
    with pytest.raises(ValueError):
        GreediConfig(s=1, step_schedule="annealed")
    with pytest.raises(ValueError):
        GreediConfig(s=1, mu_tilde=0.0)
    with pytest.raises(ValueError):
        GreediConfig(s=1, mu=-0.1)
    cfg = GreediConfig(s=1, mu=[0.1, 0.2])
    assert np.allclose(cfg.mu_per_node(2), [0.1, 0.2])
    with pytest.raises(ValueError):
        cfg.mu_per_node(3)


def test_run_argument_validation():
    truth = gen_ground_truth(4, 1, derive_rng(48, ROLE_TRUTH))
    st, _, _ = gen_online_stream(truth, 2, "paper", _seedseq(48, 7, 0))
    with pytest.raises(ValueError, match="horizon"):
        run_greedi(st, Topology.complete(2), GreediConfig(s=1), 0, truth=truth)
    with pytest.raises(ValueError, match="truth or m"):
        run_greedi(st, Topology.complete(2), GreediConfig(s=1), 5)
    with pytest.raises(ValueError, match="sparsity"):
        run_greedi(st, Topology.complete(2), GreediConfig(s=9), 5, truth=truth)


def test_trace_csv(tmp_path):
    truth = gen_ground_truth(10, 2, derive_rng(49, ROLE_TRUTH))
    st, _, _ = gen_online_stream(truth, 3, "paper", _seedseq(49, 7, 0))
    res = run_greedi(st, Topology.ring(3), GreediConfig(s=2, mu=0.2), 5, truth=truth)
    p = tmp_path / "trace.csv"
    greedi_trace_csv(res, str(p))
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "n,msd,support_overlap,normalized_count"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert float(first[1]) == res.msd[0]
