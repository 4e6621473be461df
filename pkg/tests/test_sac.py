import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intsac.distributions import RngStream
from intsac.integer_reparam import IntegerActionSpec, critic_input
from intsac.sac import CONTINUOUS, INTEGER, Batch, ReplayBuffer, SacAgent, SacConfig

from _oracles import total_variation

SPEC = IntegerActionSpec((9, 5), (True, True))


def agent(mode=INTEGER, spec=SPEC, obs_dim=3, seed=0, **kw):
    cfg = SacConfig(hidden=(16, 16), batch_size=32, **kw)
    if mode == INTEGER:
        return SacAgent(obs_dim, INTEGER, cfg, RngStream(seed), spec=spec)
    return SacAgent(obs_dim, CONTINUOUS, cfg, RngStream(seed), action_dim=spec.dims)


def random_batch(n=32, obs_dim=3, spec=SPEC, seed=1, done=None):
    rng = np.random.default_rng(seed)
    idx = np.stack([rng.integers(0, b, n) for b in spec.bins], axis=-1)
    return Batch(
        obs=rng.normal(size=(n, obs_dim)),
        indices=idx,
        action=critic_input(idx, spec),
        reward=rng.normal(size=(n, 1)),
        next_obs=rng.normal(size=(n, obs_dim)),
        done=np.zeros((n, 1)) if done is None else np.full((n, 1), float(done)),
    )


@pytest.mark.parametrize("mode", [INTEGER, CONTINUOUS])
def test_myopic_target_is_reward(mode):
    a = agent(mode, gamma=0.0, alpha=0.0)
    b = random_batch()
    np.testing.assert_array_equal(a.td_target(b), b.reward)


@pytest.mark.parametrize("mode", [INTEGER, CONTINUOUS])
def test_terminal_kills_bootstrap(mode):
    a = agent(mode, alpha=0.2)
    b = random_batch(done=1)
    np.testing.assert_array_equal(a.td_target(b), b.reward)
    live = a.td_target(random_batch(done=0))
    assert not np.array_equal(live, b.reward)


def test_critic_update_rejects_empty_batch():
    b = random_batch(n=0)
    with pytest.raises(ValueError):
        agent().critic_update(b)


def test_critic_update_moves_toward_target():
    a = agent(gamma=0.0, alpha=0.0, lr=1e-2)
    b = random_batch()
    first = a.critic_update(b)
    for _ in range(100):
        last = a.critic_update(b)
    assert last[0] < first[0] and last[1] < first[1]


@pytest.mark.parametrize("mode", [INTEGER, CONTINUOUS])
def test_actor_loss_grads_reach_actor_only(mode):
    a = agent(mode)
    a.actor_loss(random_batch()).backward()
    assert any(np.abs(p.grad).max() > 0 for p in a.actor.parameters() if p.grad is not None)
    for q in (a.q1, a.q2, a.q1_target, a.q2_target):
        assert all(p.grad is None for p in q.parameters())


def test_flat_critic_gives_zero_actor_gradient():
    a = agent(alpha=0.0)
    for q in (a.q1, a.q2):
        w = q.net.layers[0][0]
        w.data[a.obs_dim :] = 0.0  # first layer ignores the action inputs
    a.actor_loss(random_batch()).backward()
    grads = [p.grad for p in a.actor.parameters() if p.grad is not None]
    assert max(np.abs(g).max() for g in grads) < 1e-12


def test_polyak_one_copies_exactly():
    a = agent(polyak=1.0)
    for p in a.q1.parameters():
        p.data = p.data + 1.0
    a.polyak_update()
    for p, t in zip(a.q1.parameters() + a.q2.parameters(), a.q1_target.parameters() + a.q2_target.parameters()):
        np.testing.assert_array_equal(p.data, t.data)


def test_polyak_geometric_convergence():
    a = agent(polyak=0.005)
    for p in a.q1.parameters():
        p.data = p.data + 1.0
    pairs = list(zip(a.q1.parameters(), a.q1_target.parameters()))
    gap0 = np.sqrt(sum(np.sum((p.data - t.data) ** 2) for p, t in pairs))
    shapes = [t.data.shape for _, t in pairs]
    n = 200
    for _ in range(n):
        a.polyak_update()
    gap = np.sqrt(sum(np.sum((p.data - t.data) ** 2) for p, t in pairs))
    assert gap == pytest.approx(gap0 * 0.995**n, rel=1e-9)
    assert [t.data.shape for _, t in pairs] == shapes


def test_update_keeps_alpha_fixed():
    a = agent(alpha=0.05)
    for _ in range(5):
        a.update(random_batch())
    assert a.alpha == 0.05 and a.config.alpha == 0.05 and a.steps == 5


def test_deterministic_act_is_pure():
    a = agent()
    obs = np.array([0.3, -0.2, 1.0])
    first = a.act(obs, deterministic=True)[0]
    for s in range(5):
        np.testing.assert_array_equal(a.act(obs, deterministic=True, rng=RngStream(s))[0], first)
    c = agent(CONTINUOUS)
    np.testing.assert_array_equal(c.act(obs, deterministic=True)[0], c.act(obs, deterministic=True)[0])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(2, 12), min_size=1, max_size=4), st.integers(0, 2**16))
def test_stochastic_integer_actions_in_range(bins, seed):
    spec = IntegerActionSpec(tuple(bins), (True,) * len(bins))
    a = agent(spec=spec, seed=seed)
    rng = RngStream(seed, (1,))
    for _ in range(10):
        idx, crit = a.act(np.zeros(3), rng=rng)
        assert idx.shape == (len(bins),)
        assert np.all(idx >= 0) and np.all(idx < np.array(bins))
        assert np.all(np.abs(crit) <= 1.0)


def test_continuous_actions_inside_box():
    a = agent(CONTINUOUS)
    rng = RngStream(3)
    for _ in range(50):
        env_a, crit = a.act(np.random.default_rng(0).normal(size=3) * 10, rng=rng)
        assert np.all(np.abs(env_a) < 1.0) and env_a.shape == (2,)


def test_uniform_heads_give_uniform_marginals():
    a = agent()
    w, b, _ = a.actor.head.layers[-1]
    w.data[:] = 0.0
    b.data[:] = 0.0
    n = 100_000
    _, _, idx = a.policy_sample(np.zeros((n, 3)), RngStream(11))
    for k, bins in enumerate(SPEC.bins):
        freq = np.bincount(idx[:, k], minlength=bins) / n
        assert total_variation(freq, np.full(bins, 1.0 / bins)) < 0.02


def test_entropy_within_bounds():
    a = agent()
    obs = np.random.default_rng(0).normal(size=(64, 3)) * 5
    h = a.entropy(obs)
    assert 0.0 <= h <= np.log(9) + np.log(5) + 1e-12


def test_exact_entropy_flag_changes_log_prob_term():
    a = agent(exact_entropy=True)
    obs = np.zeros((4, 3))
    _, logp, _ = a.policy_sample(obs)
    np.testing.assert_allclose(-logp.data.mean(), a.entropy(obs), rtol=1e-12)


def test_replay_fifo_eviction():
    buf = ReplayBuffer(3, 1, 1, RngStream(0))
    for i in range(5):
        buf.add([i], [0], [0.0], float(i), [i + 1], False)
    assert len(buf) == 3
    assert sorted(buf.reward[:, 0].tolist()) == [2.0, 3.0, 4.0]


def test_replay_sampling_without_replacement():
    buf = ReplayBuffer(100, 1, 1, RngStream(0))
    for i in range(50):
        buf.add([i], [0], [0.0], float(i), [i], False)
    b = buf.sample(50)
    assert len(set(b.reward[:, 0].tolist())) == 50
    assert len(buf.sample(500).reward) == 50
    with pytest.raises(ValueError):
        ReplayBuffer(4, 1, 1, RngStream(0)).sample(2)


def test_updates_never_mutate_buffer():
    a = agent()
    buf = ReplayBuffer(64, 3, SPEC.dims, RngStream(5))
    src = random_batch(n=64)
    for row in zip(*src):
        buf.add(row[0], row[1], row[2], row[3][0], row[4], row[5][0])
    before = [x.copy() for x in (buf.obs, buf.indices, buf.action, buf.reward, buf.next_obs, buf.done)]
    for _ in range(3):
        a.update(buf.sample(16))
    after = (buf.obs, buf.indices, buf.action, buf.reward, buf.next_obs, buf.done)
    for x, y in zip(before, after):
        np.testing.assert_array_equal(x, y)


def test_modes_share_critics_and_update_path():
    i, c = agent(INTEGER), agent(CONTINUOUS)
    for q in ("q1", "q2", "q1_target", "q2_target"):
        si = [p.data.shape for p in getattr(i, q).parameters()]
        sc = [p.data.shape for p in getattr(c, q).parameters()]
        assert si == sc
    assert type(i) is type(c)
    # the same batch layout feeds both modes
    b = random_batch()
    i.update(b)
    c.update(b)


def test_checkpoint_round_trip(tmp_path):
    a = agent()
    a.update(random_batch())
    path = tmp_path / "ckpt.json"
    a.save(path)
    b = agent(seed=9)
    meta = b.load(path)
    assert meta["alpha"] == a.alpha and meta["gamma"] == 0.99 and meta["polyak"] == 0.005 and meta["steps"] == 1
    for (n1, p1), (n2, p2) in zip(a.named_parameters().items(), b.named_parameters().items()):
        assert n1 == n2
        np.testing.assert_array_equal(p1.data, p2.data)


@pytest.mark.parametrize("bad", [dict(alpha=-1.0), dict(gamma=1.0), dict(polyak=0.0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        agent(**bad)
