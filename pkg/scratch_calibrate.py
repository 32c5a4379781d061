"""Scratch calibration for acceptance criteria 5 and 6 (not shipped)."""
import itertools
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from phasefront import agents as ag
from phasefront import baselines as bl
from phasefront import env as rlenv
from phasefront import irgraph
from phasefront import predictor as pd
from phasefront.evaluator import DIRECTIVES, SyntheticEvaluator, synth_evaluate

THREE_NODE = (
    "define i32 @tiny(i32 %a) {\n"
    "entry:\n"
    "  %x = add i32 %a, 1\n"
    "  %y = mul i32 %x, 2\n"
    "  ret i32 %y\n"
    "}\n")

graph = irgraph.parse_ir(THREE_NODE)
W = rlenv.RewardWeights(mu=0.5, q=500, beta=5.0)
TARGET = 6.0

ev = SyntheticEvaluator()
best_r = max(
    rlenv.terminal_reward(W, *(lambda m: (m.code_size, m.exec_time, m.energy))(
        synth_evaluate(graph, a)), TARGET)
    for a in itertools.product(DIRECTIVES, repeat=3))
print("brute-force optimal reward:", best_r)

bundle = pd.make_bundle(feature_mode=pd.EXTENDED, seed=0, energy_scale=7.2)
GRAPHS = {"g": graph}


def factory(gid):
    return rlenv.DirectiveEnv(GRAPHS[gid], bundle, W, reward_mode=rlenv.GROUND_TRUTH,
                              evaluator=ev)


def trial(kind, episodes, hidden, batch, seeds=10):
    wins = 0
    t0 = time.time()
    for seed in range(seeds):
        cfg = ag.AgentConfig(hidden=hidden, batch_size=batch, episode_max=episodes)
        agent, curve = ag.train_agent(kind, [("g", TARGET)], factory, cfg, seed=seed)
        _, r = ag.greedy_rollout(agent, factory("g"), TARGET)
        wins += abs(r - best_r) < 1e-9
    dt = time.time() - t0
    print(f"{kind} ep={episodes} hidden={hidden} batch={batch}: "
          f"{wins}/{seeds} optimal, {dt:.1f}s total")
    return wins, dt


trial("dqn", 400, (64, 64), 32)
trial("dqn", 800, (64, 64), 32)
trial("ppo", 800, (64, 64), 32)
trial("ppo", 1500, (64, 64), 32)
