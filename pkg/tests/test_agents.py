import hashlib
import math

import numpy as np
import pytest

from phasefront import agents as ag
from phasefront import env as rlenv
from phasefront import numkernel as nk
from phasefront import predictor as pd
from phasefront.errors import (EmptySetError, InsufficientBufferError,
                               ShapeError)
from phasefront.evaluator import SyntheticEvaluator


WEIGHTS = rlenv.RewardWeights(mu=0.5, q=500, beta=5.0)
TINY = ag.AgentConfig(hidden=(16, 16), batch_size=8, sync_every=5, episode_max=10)


def env_factory_for(graphs, scale=10.0):
    bundle = pd.make_bundle(feature_mode=pd.EXTENDED, seed=0, energy_scale=scale)
    evaluator = SyntheticEvaluator()

    def factory(graph_id):
        return rlenv.DirectiveEnv(graphs[graph_id], bundle, WEIGHTS,
                                  reward_mode=rlenv.GROUND_TRUTH,
                                  evaluator=evaluator)
    return factory


# --- dqn_target ---

def test_dqn_target_examples():
    qnet = ag.QNetwork(4, 3, hidden=(8,), seed=1)
    obs = np.ones(4)
    assert ag.dqn_target(-1.6, obs, True, qnet, 0.95) == -1.6
    maxq = float(np.max(qnet.target_q(obs)))
    assert ag.dqn_target(1.0, obs, False, qnet, 0.95) == pytest.approx(1.0 + 0.95 * maxq)
    assert ag.dqn_target(0.3, obs, False, qnet, 0.0) == pytest.approx(0.3)


def test_dqn_target_hand_value():
    class Fixed:
        def target_q(self, obs):
            return np.array([[0.0, 2.0, 1.0]])
    assert ag.dqn_target(1.0, np.zeros(1), False, Fixed(), 0.95) == pytest.approx(2.9)


# --- dqn update ---

def test_dqn_zero_gradient_when_targets_match():
    qnet = ag.QNetwork(3, 2, hidden=(8,), seed=2)
    rng = nk.make_rng(0)
    states = rng.normal(size=(6, 3))
    actions = rng.integers(2, size=6)
    out, _ = qnet.net.forward(states)  # same batched path the loss uses
    batch = [ag.Transition(states[i], int(actions[i]), float(out[i, actions[i]]),
                           states[i], True) for i in range(6)]
    loss, grads = ag.dqn_loss_and_grads(qnet, batch, gamma=0.95)
    assert loss == pytest.approx(0.0, abs=1e-20)
    for g in grads.values():
        assert np.all(g == 0.0)


def test_dqn_scalar_net_update_direction():
    qnet = ag.QNetwork(1, 1, hidden=(), seed=0)  # Q = s*w + b
    w0 = float(qnet.net.params["W0"][0, 0])
    s = np.array([1.0])
    q0 = float(qnet.q_values(s)[0])
    for y in (q0 + 1.0, q0 - 1.0):
        _, grads = ag.dqn_loss_and_grads(
            qnet, [ag.Transition(s, 0, y, s, True)], gamma=0.9)
        # gradient descent moves w toward y: dL/dw has the opposite sign of y - q
        assert np.sign(grads["W0"][0, 0]) == -np.sign(y - q0)
    assert qnet.net.params["W0"][0, 0] == w0  # loss computation never mutates


def test_dqn_sync_every_update():
    graphs = {"g": None}
    qnet = ag.QNetwork(3, 2, hidden=(4,), seed=5)
    buffer = ag.ReplayBuffer(16)
    rng = nk.make_rng(1)
    for _ in range(8):
        s = rng.normal(size=3)
        buffer.push(ag.Transition(s, int(rng.integers(2)), rng.normal(), s, True))
    cfg = ag.AgentConfig(hidden=(4,), batch_size=4, sync_every=1)
    adam = nk.AdamState(qnet.net.params, base_lr=0.01, decay=1.0)
    step = 0
    for _ in range(3):
        step, _ = ag.dqn_update(buffer, qnet, adam, cfg, rng, step)
        for k in qnet.net.params:
            assert np.array_equal(qnet.net.params[k], qnet.target.params[k])


def test_dqn_gradients_match_finite_differences():
    rng = nk.make_rng(77)
    qnet = ag.QNetwork(6, 3, hidden=(8, 8), seed=3)
    batch = []
    for _ in range(5):
        s = rng.normal(size=6)
        s2 = rng.normal(size=6)
        batch.append(ag.Transition(s, int(rng.integers(3)), float(rng.normal()),
                                   s2, bool(rng.random() < 0.5)))

    def f(params):
        return ag.dqn_loss_and_grads(qnet, batch, gamma=0.9)[0]

    _, grads = ag.dqn_loss_and_grads(qnet, batch, gamma=0.9)
    err = nk.finite_diff_check(f, qnet.net.params, grads, h=1e-6)
    assert err < 1e-4


# --- epsilon greedy ---

def test_epsilon_greedy_exploit_and_ties():
    rng = nk.make_rng(0)
    assert ag.epsilon_greedy([1.0, 3.0, 2.0], 0.0, rng) == 1
    assert ag.epsilon_greedy([5.0, 5.0], 0.0, rng) == 0


def test_epsilon_greedy_uniform_at_one():
    rng = nk.make_rng(123)
    counts = np.zeros(3)
    n = 10_000
    for _ in range(n):
        counts[ag.epsilon_greedy([9.0, 0.0, 0.0], 1.0, rng)] += 1
    expected = n / 3
    sigma = math.sqrt(n * (1 / 3) * (2 / 3))
    assert np.all(np.abs(counts - expected) <= 3 * sigma)


# --- replay buffer ---

def test_replay_buffer_fifo_and_capacity():
    buf = ag.ReplayBuffer(3)
    for i in range(5):
        buf.push(ag.Transition(np.array([float(i)]), 0, 0.0, np.array([0.0]), True))
    assert len(buf) == 3
    stored = sorted(t.state[0] for t in buf._items)
    assert stored == [2.0, 3.0, 4.0]  # strict FIFO eviction
    with pytest.raises(InsufficientBufferError):
        buf.sample(4, nk.make_rng(0))


# --- gae ---

def test_gae_hand_example():
    adv = ag.gae([-1.6], [-1.0, 0.0], gamma=0.95, lam=0.95)
    assert adv[0] == pytest.approx(-0.6, abs=1e-12)


def test_gae_zero_case_and_shapes():
    assert np.all(ag.gae([0.0, 0.0], [0.0, 0.0, 0.0], 0.9, 0.9) == 0.0)
    with pytest.raises(ShapeError):
        ag.gae([1.0], [0.0], 0.9, 0.9)


def brute_force_gae(rewards, values, gamma, lam):
    t_max = len(rewards)
    deltas = [rewards[t] + gamma * values[t + 1] - values[t] for t in range(t_max)]
    return [sum((gamma * lam) ** l * deltas[t + l] for l in range(t_max - t))
            for t in range(t_max)]


def test_gae_matches_brute_force_double_sum():
    rng = nk.make_rng(9)
    for _ in range(100):
        t_len = int(rng.integers(1, 11))
        rewards = rng.normal(size=t_len)
        values = np.append(rng.normal(size=t_len), 0.0)
        gamma = float(rng.uniform(0.5, 1.0))
        lam = float(rng.uniform(0.0, 1.0))
        fast = ag.gae(rewards, values, gamma, lam)
        slow = brute_force_gae(list(rewards), list(values), gamma, lam)
        assert np.max(np.abs(fast - np.asarray(slow))) <= 1e-12


def test_gae_lambda_limits():
    rng = nk.make_rng(10)
    rewards = rng.normal(size=6)
    values = np.append(rng.normal(size=6), 0.0)
    gamma = 0.9
    mc = ag.gae(rewards, values, gamma, 1.0)
    returns = np.array([sum(gamma ** l * rewards[t + l] for l in range(6 - t))
                        for t in range(6)])
    assert np.allclose(mc, returns - values[:-1], atol=1e-12)
    one_step = ag.gae(rewards, values, gamma, 0.0)
    deltas = rewards + gamma * values[1:] - values[:-1]
    assert np.allclose(one_step, deltas, atol=1e-12)


# --- ppo loss ---

def ppo_setup(seed=0, n=4, state_dim=6, actions=3):
    rng = nk.make_rng(seed)
    nets = ag.PolicyValueNets(state_dim, actions, hidden=(8, 8), seed=seed)
    states = rng.normal(size=(n, state_dim))
    acts = rng.integers(actions, size=n)
    return rng, nets, states, acts


def test_ppo_ratio_one_gives_plain_advantage():
    _, nets, states, acts = ppo_setup()
    logp = ag.log_softmax(nets.policy.forward(states)[0])
    old = logp[np.arange(len(acts)), acts]
    adv = np.array([0.5, -1.0, 2.0, 0.25])
    cfg = ag.AgentConfig(c1=0.0, c2=0.0)
    vt = np.zeros(len(acts))
    total, _, _ = ag.ppo_loss(nets, states, acts, old, adv, vt, cfg)
    assert total == pytest.approx(-adv.mean(), abs=1e-12)


@pytest.mark.parametrize("rho,adv,expected", [(1.3, 1.0, 1.2), (0.5, -1.0, -0.8)])
def test_ppo_surrogate_hand_examples(rho, adv, expected):
    _, nets, states, acts = ppo_setup(n=1)
    logp = ag.log_softmax(nets.policy.forward(states)[0])
    old = logp[np.arange(1), acts] - math.log(rho)
    cfg = ag.AgentConfig(c1=0.0, c2=0.0, clip_eps=0.2)
    total, _, _ = ag.ppo_loss(nets, states, acts, old, [adv], [0.0], cfg)
    assert total == pytest.approx(-expected, abs=1e-12)


def test_ppo_gradients_match_finite_differences():
    rng, nets, states, acts = ppo_setup(seed=4, n=5)
    logp = ag.log_softmax(nets.policy.forward(states)[0])
    # ratios firmly away from the 1 +/- eps clip boundaries
    rhos = np.array([0.6, 1.0, 1.35, 0.9, 1.1])
    old = logp[np.arange(5), acts] - np.log(rhos)
    adv = rng.normal(size=5)
    vt = rng.normal(size=5)
    cfg = ag.AgentConfig(clip_eps=0.2, c1=0.5, c2=0.01)

    def f(params):
        return ag.ppo_loss(nets, states, acts, old, adv, vt, cfg)[0]

    _, gpi, gv = ag.ppo_loss(nets, states, acts, old, adv, vt, cfg)
    params = {**nets.policy.params, **nets.value.params}
    grads = {**gpi, **gv}
    err = nk.finite_diff_check(f, params, grads, h=1e-6)
    assert err < 1e-4


def test_policy_is_distribution_after_updates(corpus_graphs):
    graphs = {"g": corpus_graphs["add_ret.ll"]}
    factory = env_factory_for(graphs)
    tuples = rlenv.make_tuples(["g"], [2.0, 2.2], m=2, seed=1)
    cfg = ag.AgentConfig(hidden=(16, 16), episode_max=12)
    agent, _ = ag.train_agent("ppo", tuples, factory, cfg, seed=3)
    env = factory("g")
    obs = env.reset(2.0).observation
    probs, _ = agent.nets.probs_and_logits(obs)
    assert abs(probs.sum() - 1.0) <= 1e-9
    assert np.all(probs >= 0.0)


# --- training driver ---

def test_train_agent_zero_episodes(corpus_graphs):
    graphs = {"g": corpus_graphs["add_ret.ll"]}
    factory = env_factory_for(graphs)
    cfg = ag.AgentConfig(hidden=(8, 8), episode_max=0)
    agent, curve = ag.train_agent("dqn", [("g", 2.0)], factory, cfg, seed=0)
    fresh = ag.DqnAgent(rlenv.OBS_DIM, 3, cfg, seed=0)
    assert curve == []
    for k in agent.qnet.net.params:
        assert np.array_equal(agent.qnet.net.params[k], fresh.qnet.net.params[k])


@pytest.mark.parametrize("kind", ["dqn", "ppo"])
def test_train_agent_deterministic(kind, corpus_graphs):
    graphs = {"g": corpus_graphs["add_ret.ll"]}

    def run():
        factory = env_factory_for(graphs)
        tuples = rlenv.make_tuples(["g"], [1.9, 2.1], m=3, seed=2)
        return ag.train_agent(kind, tuples, factory, TINY, seed=11)

    (a1, c1), (a2, c2) = run(), run()
    assert c1 == c2
    w1, w2 = a1.weight_arrays(), a2.weight_arrays()
    for group in w1:
        for k in w1[group]:
            assert np.array_equal(w1[group][k], w2[group][k])


def test_greedy_rollout_deterministic(corpus_graphs):
    graphs = {"g": corpus_graphs["memory.ll"]}
    factory = env_factory_for(graphs)
    agent = ag.DqnAgent(rlenv.OBS_DIM, 3, ag.AgentConfig(hidden=(8, 8)), seed=4)
    env = factory("g")
    a1, r1 = ag.greedy_rollout(agent, env, 6.0)
    a2, r2 = ag.greedy_rollout(agent, env, 6.0)
    assert a1 == a2 and r1 == r2
    assert len(a1) == graphs["g"].n_instructions


def test_generalization_score(corpus_graphs):
    graphs = {"a": corpus_graphs["add_ret.ll"], "b": corpus_graphs["memory.ll"]}
    factory = env_factory_for(graphs)
    envs = {gid: factory(gid) for gid in graphs}
    agent = ag.DqnAgent(rlenv.OBS_DIM, 3, ag.AgentConfig(hidden=(8, 8)), seed=6)
    j_single = ag.generalization_score(agent, {"a": envs["a"]}, [2.0])
    _, r = ag.greedy_rollout(agent, envs["a"], 2.0)
    assert j_single == pytest.approx(r)
    j_both = ag.generalization_score(agent, envs, [2.0])
    _, rb = ag.greedy_rollout(agent, envs["b"], 2.0)
    assert j_both == pytest.approx((r + rb) / 2)
    # duplicating a graph with equal rewards leaves the mean unchanged
    j_dup = ag.generalization_score(agent, {"a": envs["a"], "a2": envs["a"]}, [2.0])
    assert j_dup == pytest.approx(j_single)
    with pytest.raises(EmptySetError):
        ag.generalization_score(agent, {}, [2.0])


def test_fine_tune_copy_on_write(tmp_path, corpus_graphs):
    graphs = {"g": corpus_graphs["add_ret.ll"]}
    factory = env_factory_for(graphs)
    agent = ag.DqnAgent(rlenv.OBS_DIM, 3, TINY, seed=8)
    ckpt = tmp_path / "agent.json"
    ag.save_agent(agent, ckpt)
    digest_before = hashlib.sha256(ckpt.read_bytes()).hexdigest()

    same = ag.fine_tune(agent, "g", [2.0], factory, budget=0)
    for k in agent.qnet.net.params:
        assert np.array_equal(same.qnet.net.params[k], agent.qnet.net.params[k])

    tuned = ag.fine_tune(agent, "g", [2.0], factory, budget=6, seed=1)
    assert tuned is not agent
    assert hashlib.sha256(ckpt.read_bytes()).hexdigest() == digest_before


@pytest.mark.parametrize("kind", ["dqn", "ppo"])
def test_agent_checkpoint_round_trip(tmp_path, kind, corpus_graphs):
    graphs = {"g": corpus_graphs["add_ret.ll"]}
    factory = env_factory_for(graphs)
    tuples = rlenv.make_tuples(["g"], [2.0], m=2, seed=0)
    agent, _ = ag.train_agent(kind, tuples, factory, TINY, seed=15)
    path = tmp_path / f"{kind}.json"
    ag.save_agent(agent, path)
    back = ag.load_agent(path)
    env = factory("g")
    obs = env.reset(2.0).observation
    if kind == "dqn":
        assert np.array_equal(agent.qnet.q_values(obs), back.qnet.q_values(obs))
    else:
        p1, _ = agent.nets.probs_and_logits(obs)
        p2, _ = back.nets.probs_and_logits(obs)
        assert np.array_equal(p1, p2)
