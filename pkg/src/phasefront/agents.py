"""Value- and policy-based explorers over the directive-assignment MDP.

Two learners share the training driver: a Q-network with replay buffer and
periodically synced target copy, and a clipped-surrogate policy-gradient
learner with generalized advantage estimation. Both keep analytic gradients
that are checked against finite differences in the test suite.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import numkernel as nk
from .errors import (CheckpointVersionError, ConfigError, EmptySetError,
                     InsufficientBufferError, NumericError, ShapeError)
from .evaluator import DIRECTIVES
from .mlp import Mlp

CHECKPOINT_VERSION = 1


@dataclass
class AgentConfig:
    hidden: tuple = (256, 256)
    gamma: float = 0.95
    lr: float = 0.008
    epsilon: float = 0.08
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.01
    buffer_capacity: int = 10_000
    batch_size: int = 64
    sync_every: int = 100
    ppo_epochs: int = 4
    minibatch: int = 64
    episodes_per_batch: int = 8
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    c1: float = 0.5
    c2: float = 0.01
    episode_max: int = 3000

    def digest_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    log_prob: float | None = None
    value: float | None = None


class ReplayBuffer:
    """FIFO ring buffer with uniform without-replacement batch sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if batch_size > len(self._items):
            raise InsufficientBufferError(
                f"buffer has {len(self._items)} < batch {batch_size}")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]


class QNetwork:
    """MLP state -> action values, with a frozen copy for bootstrap targets."""

    def __init__(self, state_dim: int, n_actions: int, hidden=(256, 256), seed: int = 0):
        rng = nk.make_rng(seed, stream=3)
        self.net = Mlp((state_dim,) + tuple(hidden) + (n_actions,), rng)
        self.target = self.net.copy()
        self.n_actions = n_actions

    def q_values(self, obs) -> np.ndarray:
        out, _ = self.net.forward(obs)
        return out[0] if out.shape[0] == 1 and np.asarray(obs).ndim == 1 else out

    def target_q(self, obs) -> np.ndarray:
        out, _ = self.target.forward(obs)
        return out

    def sync(self) -> None:
        for k, v in self.net.params.items():
            self.target.params[k] = v.copy()


class PolicyValueNets:
    """Softmax policy and scalar value estimator over the same state space."""

    def __init__(self, state_dim: int, n_actions: int, hidden=(256, 256), seed: int = 0):
        self.policy = Mlp((state_dim,) + tuple(hidden) + (n_actions,),
                          nk.make_rng(seed, stream=7), prefix="pi_")
        self.value = Mlp((state_dim,) + tuple(hidden) + (1,),
                         nk.make_rng(seed, stream=9), prefix="v_")
        self.n_actions = n_actions

    def probs_and_logits(self, obs):
        logits, _ = self.policy.forward(obs)
        return softmax(logits), logits

    def state_value(self, obs) -> float:
        out, _ = self.value.forward(obs)
        return float(out[0, 0])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def epsilon_greedy(qvalues, eps: float, rng: np.random.Generator) -> int:
    """Uniform action with probability eps, else argmax (ties -> lowest index)."""
    if not 0.0 <= eps <= 1.0:
        raise ConfigError(f"epsilon must be in [0, 1], got {eps}")
    qvalues = np.asarray(qvalues)
    if rng.random() < eps:
        return int(rng.integers(qvalues.shape[-1]))
    return int(np.argmax(qvalues))


def dqn_target(reward: float, next_obs, done: bool, qnet: QNetwork, gamma: float) -> float:
    """Bootstrap target r + gamma * max_a Q(s', a; frozen), zero beyond terminals."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    if done:
        return float(reward)
    return float(reward + gamma * np.max(qnet.target_q(next_obs)))


def dqn_loss_and_grads(qnet: QNetwork, batch: list[Transition], gamma: float):
    """Mean squared TD error over a batch, plus analytic parameter gradients."""
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch])
    targets = np.array([dqn_target(t.reward, t.next_state, t.done, qnet, gamma)
                        for t in batch])
    out, cache = qnet.net.forward(states)
    chosen = out[np.arange(len(batch)), actions]
    err = chosen - targets
    loss = float(np.mean(err * err))
    dout = np.zeros_like(out)
    dout[np.arange(len(batch)), actions] = 2.0 * err / len(batch)
    grads, _ = qnet.net.backward(cache, dout)
    return loss, grads


def dqn_update(buffer: ReplayBuffer, qnet: QNetwork, adam: nk.AdamState,
               cfg: AgentConfig, rng: np.random.Generator, step: int) -> tuple[int, float]:
    """One sampled gradient step; the frozen copy re-syncs every sync_every steps."""
    batch = buffer.sample(cfg.batch_size, rng)
    loss, grads = dqn_loss_and_grads(qnet, batch, cfg.gamma)
    nk.adam_step(adam, qnet.net.params, grads)
    step += 1
    if step % cfg.sync_every == 0:
        qnet.sync()
    return step, loss


def gae(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """Backward-recursion advantage estimates, truncated at the episode end.

    `values` must hold one bootstrap entry beyond the last reward (zero for
    finished episodes).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.size != rewards.size + 1:
        raise ShapeError(f"need len(values) == len(rewards)+1, got "
                         f"{values.size} vs {rewards.size}")
    deltas = rewards + gamma * values[1:] - values[:-1]
    adv = np.zeros_like(rewards)
    acc = 0.0
    for t in reversed(range(rewards.size)):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


def ppo_loss(nets: PolicyValueNets, states, actions, old_log_probs, advantages,
             value_targets, cfg: AgentConfig):
    """Total loss = -clip objective + c1 * value loss - c2 * entropy.

    Minimizing it ascends the surrogate and descends the value error.
    Returns (total, policy grads, value grads).
    """
    states = np.atleast_2d(states)
    actions = np.asarray(actions)
    old_log_probs = np.asarray(old_log_probs, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    value_targets = np.asarray(value_targets, dtype=np.float64)
    n = states.shape[0]

    logits, pi_cache = nets.policy.forward(states)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    rows = np.arange(n)
    ratio = np.exp(logp[rows, actions] - old_log_probs)
    if not np.all(np.isfinite(ratio)):
        raise NumericError("non-finite probability ratio")
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    unclipped_term = ratio * advantages
    clipped_term = clipped * advantages
    surrogate = np.minimum(unclipped_term, clipped_term)
    entropy = -(probs * logp).sum(axis=1)

    vout, v_cache = nets.value.forward(states)
    v = vout[:, 0]
    v_err = v - value_targets

    total = float(-surrogate.mean() + cfg.c1 * np.mean(v_err * v_err)
                  - cfg.c2 * entropy.mean())

    # d(-surrogate)/dlogits: gradient flows only where the unclipped branch wins
    use_unclipped = (unclipped_term <= clipped_term).astype(np.float64)
    dratio = -use_unclipped * advantages / n
    one_hot = np.zeros_like(probs)
    one_hot[rows, actions] = 1.0
    dlogits = (dratio * ratio)[:, None] * (one_hot - probs)
    # entropy term: dH/dlogits_j = -p_j (log p_j + H)
    dlogits += cfg.c2 / n * probs * (logp + entropy[:, None])
    pi_grads, _ = nets.policy.backward(pi_cache, dlogits)

    dv = (2.0 * cfg.c1 / n) * v_err
    v_grads, _ = nets.value.backward(v_cache, dv[:, None])
    return total, pi_grads, v_grads


class DqnAgent:
    kind = "dqn"

    def __init__(self, state_dim: int, n_actions: int = len(DIRECTIVES),
                 config: AgentConfig | None = None, seed: int = 0):
        self.config = config or AgentConfig()
        self.seed = seed
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.qnet = QNetwork(state_dim, n_actions, self.config.hidden, seed)
        self.buffer = ReplayBuffer(self.config.buffer_capacity)
        self.adam = nk.AdamState(self.qnet.net.params, base_lr=self.config.lr, decay=1.0)
        self.epsilon = self.config.epsilon
        self.global_step = 0

    def act(self, obs, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.qnet.q_values(obs), self.epsilon, rng)

    def act_greedy(self, obs) -> int:
        return int(np.argmax(self.qnet.q_values(obs)))

    def observe(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def learn_step(self, rng: np.random.Generator) -> None:
        if len(self.buffer) >= self.config.batch_size:
            self.global_step, _ = dqn_update(self.buffer, self.qnet, self.adam,
                                             self.config, rng, self.global_step)

    def end_episode(self) -> None:
        self.epsilon = max(self.config.epsilon_floor,
                           self.epsilon * self.config.epsilon_decay)

    def clone(self) -> "DqnAgent":
        return copy.deepcopy(self)

    def weight_arrays(self):
        return {"q": self.qnet.net.params, "q_target": self.qnet.target.params}


class PpoAgent:
    kind = "ppo"

    def __init__(self, state_dim: int, n_actions: int = len(DIRECTIVES),
                 config: AgentConfig | None = None, seed: int = 0):
        self.config = config or AgentConfig()
        self.seed = seed
        self.state_dim = state_dim
        self.n_actions = n_actions
        self.nets = PolicyValueNets(state_dim, n_actions, self.config.hidden, seed)
        self.adam_pi = nk.AdamState(self.nets.policy.params, base_lr=self.config.lr, decay=1.0)
        self.adam_v = nk.AdamState(self.nets.value.params, base_lr=self.config.lr, decay=1.0)

    def act(self, obs, rng: np.random.Generator):
        probs, _ = self.nets.probs_and_logits(obs)
        p = probs[0]
        a = int(np.searchsorted(np.cumsum(p), rng.random()))
        a = min(a, self.n_actions - 1)
        return a, float(np.log(p[a])), self.nets.state_value(obs)

    def act_greedy(self, obs) -> int:
        probs, _ = self.nets.probs_and_logits(obs)
        return int(np.argmax(probs[0]))

    def end_episode(self) -> None:
        pass

    def update_from_episodes(self, episodes: list[list[Transition]],
                             rng: np.random.Generator) -> None:
        """One clipped-surrogate update round over a batch of whole episodes.

        Advantages are estimated per episode (each truncates at its own end)
        and normalized jointly across the batch, so the contrast is between
        better and worse episodes rather than within one.
        """
        cfg = self.config
        adv_parts, vt_parts = [], []
        for traj in episodes:
            rewards = [t.reward for t in traj]
            values = [t.value for t in traj] + [0.0]
            adv_parts.append(gae(rewards, values, cfg.gamma, cfg.gae_lambda))
            vt_parts.append(np.asarray(rewards) + cfg.gamma * np.asarray(values[1:]))
        advantages = np.concatenate(adv_parts)
        value_targets = np.concatenate(vt_parts)
        if advantages.size > 1:
            std = advantages.std()
            advantages = (advantages - advantages.mean()) / (std if std > 0 else 1.0)
        flat = [t for traj in episodes for t in traj]
        states = np.stack([t.state for t in flat])
        actions = np.array([t.action for t in flat])
        old_logp = np.array([t.log_prob for t in flat])
        n = len(flat)
        for _ in range(cfg.ppo_epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.minibatch):
                mb = order[start:start + cfg.minibatch]
                _, gpi, gv = ppo_loss(self.nets, states[mb], actions[mb],
                                      old_logp[mb], advantages[mb],
                                      value_targets[mb], cfg)
                nk.adam_step(self.adam_pi, self.nets.policy.params, gpi)
                nk.adam_step(self.adam_v, self.nets.value.params, gv)

    def clone(self) -> "PpoAgent":
        return copy.deepcopy(self)

    def weight_arrays(self):
        return {"policy": self.nets.policy.params, "value": self.nets.value.params}


def make_agent(kind: str, state_dim: int, n_actions: int = len(DIRECTIVES),
               config: AgentConfig | None = None, seed: int = 0):
    if kind == "dqn":
        return DqnAgent(state_dim, n_actions, config, seed)
    if kind == "ppo":
        return PpoAgent(state_dim, n_actions, config, seed)
    raise ConfigError(f"unknown agent kind {kind!r}")


def _run_training(agent, tuples, env_for, episode_max: int,
                  rng: np.random.Generator) -> list[float]:
    if not tuples:
        raise EmptySetError("no training tuples")
    curve = []
    pending: list[list[Transition]] = []
    for episode in range(episode_max):
        graph_id, target = tuples[episode % len(tuples)]
        env = env_for(graph_id)
        state = env.reset(target)
        done = env.horizon == 0
        traj: list[Transition] = []
        terminal = 0.0
        while not done:
            obs = state.observation
            if agent.kind == "dqn":
                action = agent.act(obs, rng)
                nxt, reward, done = env.step(state, action)
                agent.observe(Transition(obs, action, reward, nxt.observation, done))
                agent.learn_step(rng)
            else:
                action, logp, value = agent.act(obs, rng)
                nxt, reward, done = env.step(state, action)
                traj.append(Transition(obs, action, reward, nxt.observation, done,
                                       log_prob=logp, value=value))
            terminal = reward
            state = nxt
        if agent.kind == "ppo" and traj:
            pending.append(traj)
            if len(pending) >= agent.config.episodes_per_batch:
                agent.update_from_episodes(pending, rng)
                pending = []
        agent.end_episode()
        curve.append(terminal)
    if agent.kind == "ppo" and pending:
        agent.update_from_episodes(pending, rng)
    return curve


def train_agent(kind: str, tuples, env_factory, config: AgentConfig | None = None,
                seed: int = 0, state_dim: int | None = None):
    """Run the episode loop: fetch tuple, roll to the horizon, update per method.

    env_factory maps a graph id to a DirectiveEnv; returns the trained agent
    and the per-episode terminal-reward curve.
    """
    config = config or AgentConfig()
    envs: dict = {}

    def env_for(graph_id):
        if graph_id not in envs:
            envs[graph_id] = env_factory(graph_id)
        return envs[graph_id]

    if state_dim is None:
        from .env import OBS_DIM
        state_dim = OBS_DIM
    agent = make_agent(kind, state_dim, len(DIRECTIVES), config, seed)
    rng = nk.make_rng(seed, stream=21)
    curve = _run_training(agent, list(tuples), env_for, config.episode_max, rng)
    return agent, curve


def greedy_rollout(agent, env, energy_target: float):
    """Deterministic rollout with argmax action selection."""
    state = env.reset(energy_target)
    done = env.horizon == 0
    reward = 0.0
    while not done:
        action = agent.act_greedy(state.observation)
        state, reward, done = env.step(state, action)
    return state.assignment, reward


def generalization_score(agent, envs_by_graph: dict, energy_targets,
                         episodes: int = 1) -> float:
    """Mean over graphs of the mean greedy episodic reward across targets."""
    if not envs_by_graph:
        raise EmptySetError("no graphs to score")
    per_graph = []
    for env in envs_by_graph.values():
        rewards = []
        for target in energy_targets:
            for _ in range(episodes):
                rewards.append(greedy_rollout(agent, env, target)[1])
        per_graph.append(float(np.mean(rewards)))
    return float(np.mean(per_graph))


def fine_tune(agent, graph_id, energy_targets, env_factory, budget: int,
              seed: int = 0):
    """Continue training a copy on a single graph; the input agent is untouched."""
    adapted = agent.clone()
    if budget <= 0:
        return adapted
    from .env import make_tuples
    tuples = make_tuples([graph_id], energy_targets, m=1, seed=seed)
    envs: dict = {}

    def env_for(gid):
        if gid not in envs:
            envs[gid] = env_factory(gid)
        return envs[gid]

    rng = nk.make_rng(seed, stream=23)
    _run_training(adapted, tuples, env_for, budget, rng)
    return adapted


def save_agent(agent, path) -> None:
    doc = {
        "format": "phasefront-agent",
        "version": CHECKPOINT_VERSION,
        "header": {
            "kind": agent.kind,
            "state_dim": agent.state_dim,
            "hidden": list(agent.config.hidden),
            "n_actions": agent.n_actions,
            "seed": agent.seed,
            "config": agent.config.digest_dict(),
            "epsilon": getattr(agent, "epsilon", None),
        },
        "weights": {group: [[k, v.tolist()] for k, v in params.items()]
                    for group, params in agent.weight_arrays().items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_agent(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "phasefront-agent" or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported agent checkpoint: {path}")
    h = doc["header"]
    cfg_d = dict(h["config"])
    cfg_d["hidden"] = tuple(cfg_d["hidden"])
    config = AgentConfig(**cfg_d)
    agent = make_agent(h["kind"], h["state_dim"], h["n_actions"], config, h["seed"])
    if h.get("epsilon") is not None:
        agent.epsilon = h["epsilon"]
    groups = agent.weight_arrays()
    for group, entries in doc["weights"].items():
        for k, value in entries:
            arr = np.asarray(value, dtype=np.float64)
            if groups[group][k].shape != arr.shape:
                raise CheckpointVersionError(f"weight {group}/{k} has shape {arr.shape}")
            groups[group][k][...] = arr
    return agent
