"""Sequential directive-assignment MDP over a CDFG.

One episode walks the instruction nodes in ascending id order, assigning one
directive per step. All intermediate rewards are zero; the terminal reward
scores the fully assigned graph against the energy target, either from
predictor outputs (training-by-prediction) or from a metric backend
(ground-truth mode). Transitions are deterministic; the only stochasticity
lives in the policy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import predictor as pd
from .errors import ConfigError, EpisodeDoneError, FeatureModeError, PredictorError
from .evaluator import DIRECTIVES
from .irgraph import Cdfg, adjacency
from .numkernel import make_rng

OBS_DIM = pd.FUSED_DIM + 5 + 1 + 1  # fused | metadata | node_index | energy_target
PREDICTED, GROUND_TRUTH = "predicted", "ground_truth"


@dataclass(frozen=True)
class RewardWeights:
    """Terminal-reward coefficients; alpha and lam are always derived."""
    mu: float
    q: int
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError(f"mu must be in [0, 1], got {self.mu}")
        if not (isinstance(self.q, int) and self.q >= 1):
            raise ConfigError(f"q must be a positive integer, got {self.q!r}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")

    @property
    def alpha(self) -> float:
        return self.mu / self.q

    @property
    def lam(self) -> float:
        return 1.0 - self.mu


def terminal_reward(weights: RewardWeights, code_size: float, exec_time: float,
                    energy: float, energy_target: float) -> float:
    return (-weights.alpha * code_size
            - weights.beta * abs(energy_target - energy)
            - weights.lam * exec_time)


@dataclass(frozen=True)
class EnvState:
    assignment: tuple
    t: int
    observation: np.ndarray
    energy_target: float

    @property
    def node_index(self) -> float:
        return float(self.observation[-2])


class DirectiveEnv:
    """Environment bound to one graph; energy target varies per reset.

    Fused embeddings are memoized per assignment prefix, so repeated visits
    to the same partial assignment cost nothing.
    """

    def __init__(self, graph: Cdfg, bundle: pd.PredictorBundle,
                 weights: RewardWeights, reward_mode: str = PREDICTED,
                 evaluator=None, energy_target: float = 0.0,
                 energy_scale: float | None = None):
        if bundle.feature_mode != pd.EXTENDED:
            raise FeatureModeError(
                "environment needs predictors with directive feature channels")
        if reward_mode not in (PREDICTED, GROUND_TRUTH):
            raise ConfigError(f"unknown reward mode {reward_mode!r}")
        if reward_mode == GROUND_TRUTH and evaluator is None:
            raise ConfigError("ground-truth reward mode needs an evaluator")
        self.graph = graph
        self.bundle = bundle
        self.weights = weights
        self.reward_mode = reward_mode
        self.evaluator = evaluator
        self.energy_target = energy_target
        self.energy_scale = energy_scale if energy_scale is not None else bundle.energy_scale
        if self.energy_scale <= 0:
            raise ConfigError("energy_scale must be positive")
        self.horizon = graph.n_instructions
        self._norm = pd.normalize_adjacency(adjacency(graph, symmetrize=True))
        self._meta = graph.metadata.as_vector()
        self._fused_cache: dict[tuple, np.ndarray] = {}
        self._reward_cache: dict[tuple, float] = {}

    def _fused(self, prefix: tuple) -> np.ndarray:
        hit = self._fused_cache.get(prefix)
        if hit is not None:
            return hit
        feats = pd.extended_features(self.graph, prefix)
        parts = []
        for model in self.bundle.model_list():
            _, emb = pd.predict_prepared(model, self._norm, feats)
            parts.append(emb)
        fused = np.concatenate(parts)
        if fused.shape != (pd.FUSED_DIM,) or not np.all(np.isfinite(fused)):
            raise PredictorError("fused embedding is malformed")
        self._fused_cache[prefix] = fused
        return fused

    def _observe(self, prefix: tuple, energy_target: float) -> np.ndarray:
        t = len(prefix)
        node_index = t / self.horizon if self.horizon else 1.0
        return np.concatenate([
            self._fused(prefix), self._meta,
            [node_index], [energy_target / self.energy_scale]])

    def reset(self, energy_target: float | None = None) -> EnvState:
        if energy_target is not None:
            self.energy_target = float(energy_target)
        return EnvState((), 0, self._observe((), self.energy_target), self.energy_target)

    def _terminal_reward(self, assignment: tuple, energy_target: float) -> float:
        key = (assignment, energy_target)
        hit = self._reward_cache.get(key)
        if hit is not None:
            return hit
        if self.reward_mode == GROUND_TRUTH:
            m = self.evaluator.evaluate(self.graph, assignment)
            cs, et, en = m.code_size, m.exec_time, m.energy
        else:
            feats = pd.extended_features(self.graph, assignment)
            preds = {}
            for metric, model in self.bundle.models.items():
                y, _ = pd.predict_prepared(model, self._norm, feats)
                preds[metric] = y
            cs, et, en = preds["code_size"], preds["exec_time"], preds["energy"]
        r = terminal_reward(self.weights, cs, et, en, energy_target)
        self._reward_cache[key] = r
        return r

    def step(self, state: EnvState, action) -> tuple[EnvState, float, bool]:
        if state.t >= self.horizon:
            raise EpisodeDoneError(f"episode over after {self.horizon} steps")
        directive = DIRECTIVES[action] if isinstance(action, (int, np.integer)) else action
        if directive not in DIRECTIVES:
            raise ConfigError(f"unknown directive {directive!r}")
        prefix = state.assignment + (directive,)
        t = state.t + 1
        done = t == self.horizon
        reward = self._terminal_reward(prefix, state.energy_target) if done else 0.0
        nxt = EnvState(prefix, t, self._observe(prefix, state.energy_target),
                       state.energy_target)
        return nxt, reward, done


def make_tuples(graph_ids, energy_targets, m: int, seed: int) -> list[tuple]:
    """Cartesian (graph, target) pairs duplicated m times, seeded shuffle."""
    if m < 1:
        raise ConfigError(f"duplication m must be >= 1, got {m}")
    tuples = [(g, float(t)) for g in graph_ids for t in energy_targets] * m
    rng = make_rng(seed, stream=5)
    order = rng.permutation(len(tuples))
    return [tuples[i] for i in order]
