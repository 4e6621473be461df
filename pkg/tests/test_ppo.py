import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intsac import autodiff as ad
from intsac.distributions import RngStream
from intsac.integer_reparam import IntegerActionSpec, joint_log_prob
from intsac.ppo import PpoAgent, PpoConfig, RolloutBatch, clipped_surrogate, gae_advantages, normalize

SPEC = IntegerActionSpec((4, 3), (True, True))


def rollout(n, seed=0, ends_at=(), dones_at=()):
    rng = np.random.default_rng(seed)
    dones = np.zeros(n)
    ends = np.zeros(n)
    dones[list(dones_at)] = 1.0
    ends[list(ends_at) + list(dones_at)] = 1.0
    return RolloutBatch(
        obs=rng.normal(size=(n, 2)),
        indices=np.stack([rng.integers(0, b, n) for b in SPEC.bins], axis=-1),
        log_prob_old=np.zeros(n),
        rewards=rng.normal(size=n),
        values=rng.normal(size=n),
        next_values=rng.normal(size=n),
        dones=dones,
        ends=ends,
    )


def brute_force_gae(b, gamma, lam):
    n = len(b)
    delta = b.rewards + gamma * b.next_values * (1 - b.dones) - b.values
    adv = np.zeros(n)
    for t in range(n):
        total, coef = 0.0, 1.0
        for u in range(t, n):
            total += coef * delta[u]
            if b.ends[u]:
                break
            coef *= gamma * lam
        adv[t] = total
    return adv


def test_lambda_zero_is_td_error():
    b = rollout(10)
    gae_advantages(b, 0.9, 0.0)
    np.testing.assert_allclose(b.advantages, b.rewards + 0.9 * b.next_values - b.values, rtol=0, atol=1e-15)
    np.testing.assert_allclose(b.returns, b.advantages + b.values)


def test_undiscounted_zero_value_is_reward_to_go():
    b = rollout(6, dones_at=(5,))
    b.values[:] = 0.0
    b.next_values[:] = 0.0
    gae_advantages(b, 1.0, 1.0)
    np.testing.assert_allclose(b.advantages, np.cumsum(b.rewards[::-1])[::-1], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(0, 2**31 - 1),
    st.floats(0.0, 0.999),
    st.floats(0.0, 1.0),
    st.sets(st.integers(0, 4), max_size=2),
    st.sets(st.integers(0, 4), max_size=2),
)
def test_gae_matches_double_loop(seed, gamma, lam, ends, dones):
    b = rollout(5, seed, ends_at=tuple(ends), dones_at=tuple(dones))
    gae_advantages(b, gamma, lam)
    np.testing.assert_allclose(b.advantages, brute_force_gae(b, gamma, lam), rtol=0, atol=1e-12)


def test_normalized_advantages():
    x = np.random.default_rng(0).normal(3.0, 7.0, size=2048)
    z = normalize(x)
    assert abs(z.mean()) < 1e-10
    assert abs(z.std() - 1.0) < 1e-6


def agent(seed=0, **kw):
    return PpoAgent(2, SPEC, PpoConfig(hidden=(16,), **kw), RngStream(seed))


def test_ratio_is_one_before_any_update():
    a = agent()
    b = rollout(32)
    for t in range(32):
        idx, logp, _ = a.act(b.obs[t])
        b.indices[t] = idx
        b.log_prob_old[t] = logp
    logp_new = joint_log_prob(a.actor(b.obs), b.indices)
    rho = np.exp(logp_new.data[:, 0] - b.log_prob_old)
    np.testing.assert_allclose(rho, 1.0, rtol=0, atol=1e-12)
    adv = np.random.default_rng(1).normal(size=32)
    unclipped = ad.mul(ad.exp(ad.sub(logp_new, b.log_prob_old.reshape(-1, 1))), adv.reshape(-1, 1))
    clipped = clipped_surrogate(logp_new, b.log_prob_old, adv, 0.2)
    np.testing.assert_allclose(clipped.data, unclipped.data, atol=1e-12)


@pytest.mark.parametrize("shift, sign", [(-0.3, 1.0), (0.3, -1.0)])
def test_zero_clip_kills_gradient_where_clipped(shift, sign):
    # rho > 1 with A > 0, or rho < 1 with A < 0: the clipped branch is active
    a = agent()
    b = rollout(16)
    b.log_prob_old = joint_log_prob(a.actor(b.obs), b.indices).data[:, 0] + shift
    adv = np.full(16, sign)
    loss = ad.neg(ad.mean(clipped_surrogate(joint_log_prob(a.actor(b.obs), b.indices), b.log_prob_old, adv, 0.0)))
    loss.backward()
    assert all(p.grad is None or np.all(p.grad == 0) for p in a.actor.parameters())


def test_zero_clip_at_ratio_one_is_vanilla_policy_gradient():
    b = rollout(16)
    adv = np.random.default_rng(2).normal(size=16)
    a1, a2 = agent(), agent()
    logp = joint_log_prob(a1.actor(b.obs), b.indices)
    old = logp.data[:, 0].copy()
    # the minimum picks the unclipped branch on ties, so the gradient is rho * A * grad log pi
    ad.neg(ad.mean(clipped_surrogate(logp, old, adv, 0.0))).backward()
    ref = ad.neg(ad.mean(ad.mul(joint_log_prob(a2.actor(b.obs), b.indices), adv.reshape(-1, 1))))
    ref.backward()
    for p, q in zip(a1.actor.parameters(), a2.actor.parameters()):
        np.testing.assert_allclose(p.grad, q.grad, rtol=1e-10, atol=1e-14)


def test_sampled_indices_carry_no_gradient():
    a = agent()
    idx, logp, v = a.act(np.zeros(2))
    assert isinstance(idx, np.ndarray) and idx.dtype.kind == "i"
    assert isinstance(logp, float) and isinstance(v, float)
    b = rollout(8)
    loss = a.policy_loss(b.obs, b.indices, b.log_prob_old, np.ones(8))
    loss.backward()
    assert isinstance(b.indices, np.ndarray)  # never wrapped in a Tensor


def test_update_requires_advantages():
    with pytest.raises(ValueError):
        agent().ppo_update(rollout(8))


def test_update_returns_finite_losses_and_regresses_values():
    a = agent(epochs=30, minibatch=16, lr=1e-2)
    b = rollout(32)
    gae_advantages(b, 0.9, 0.9)
    _, lv0 = a.ppo_update(b)
    _, lv1 = a.ppo_update(b)
    assert np.isfinite(lv0) and lv1 < lv0


def test_ppo_checkpoint_round_trip(tmp_path):
    a = agent()
    a.save(tmp_path / "p.json")
    b = agent(seed=4)
    meta = b.load(tmp_path / "p.json")
    assert meta["agent"] == "ppo_integer"
    for p, q in zip(a.named_parameters().values(), b.named_parameters().values()):
        np.testing.assert_array_equal(p.data, q.data)
