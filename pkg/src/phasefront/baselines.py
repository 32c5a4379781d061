"""Learning-free searchers over the assignment space: genetic search,
particle-swarm search, and exact enumeration for in-cap instances.

All searchers minimize the same penalized scalarization the RL reward
negates, so comparisons are like-for-like.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import numkernel as nk
from .analytics import utility
from .errors import ConfigError, SpaceTooLargeError
from .evaluator import DIRECTIVES
from .env import RewardWeights

BRUTE_FORCE_CAP = 3 ** 8


@dataclass
class GaConfig:
    population: int = 32
    generations: int = 60
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # default 1/T per gene
    tournament: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ConfigError("population must be >= 2")
        for name in ("crossover_rate",):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must be in [0, 1]")


@dataclass
class PsoConfig:
    swarm: int = 32
    iterations: int = 60
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.swarm < 2:
            raise ConfigError("swarm must be >= 2")
        if not 0.0 < self.inertia <= 1.0:
            raise ConfigError("inertia must be in (0, 1]")


def make_fitness(graph, evaluator, weights: RewardWeights, energy_target: float):
    """Scalar objective: utility plus the weighted absolute energy gap.

    Exactly the negation of the terminal episode reward, so searcher scores
    and agent rewards are directly comparable.
    """
    def fitness(assignment) -> float:
        m = evaluator.evaluate(graph, assignment)
        return (utility(m.code_size, m.exec_time, weights.mu, weights.q)
                + weights.beta * abs(energy_target - m.energy))
    return fitness


def brute_force(graph, fitness, cap: int = BRUTE_FORCE_CAP):
    """Exact minimum by enumeration; ties break to the lexicographically
    smallest assignment in directive-alphabet order."""
    t_len = graph.n_instructions
    space = len(DIRECTIVES) ** t_len
    if space > cap:
        raise SpaceTooLargeError(f"{space} assignments exceed cap {cap}")
    best = None
    best_fit = None
    for assignment in itertools.product(DIRECTIVES, repeat=t_len):
        fit = fitness(assignment)
        if best_fit is None or fit < best_fit:
            best, best_fit = assignment, fit
    return best, best_fit


def ga_search(graph, fitness, cfg: GaConfig, seed_population=None):
    """Tournament selection, one-point crossover, per-gene uniform mutation,
    elitism of one. Returns (best assignment, best fitness, per-gen curve).

    `seed_population` warm-starts the search from known genomes."""
    t_len = graph.n_instructions
    rng = nk.make_rng(cfg.seed, stream=41)
    n_dir = len(DIRECTIVES)
    mut = cfg.mutation_rate if cfg.mutation_rate is not None else (
        1.0 / t_len if t_len else 0.0)
    if seed_population is not None:
        pop = np.array([[DIRECTIVES.index(d) for d in genome]
                        for genome in seed_population])
        if pop.shape != (cfg.population, t_len):
            raise ConfigError("seed population shape mismatch")
    else:
        pop = rng.integers(n_dir, size=(cfg.population, max(t_len, 1)))[:, :t_len]

    def decode(genome):
        return tuple(DIRECTIVES[g] for g in genome)

    fits = np.array([fitness(decode(g)) for g in pop])
    best_idx = int(np.argmin(fits))
    best, best_fit = pop[best_idx].copy(), float(fits[best_idx])
    history = [best_fit]

    def tournament():
        contenders = rng.integers(cfg.population, size=cfg.tournament)
        return pop[contenders[np.argmin(fits[contenders])]]

    for _ in range(cfg.generations):
        children = [best.copy()]  # elitism of 1
        while len(children) < cfg.population:
            a, b = tournament().copy(), tournament().copy()
            if t_len > 1 and rng.random() < cfg.crossover_rate:
                cut = int(rng.integers(1, t_len))
                a[cut:], b[cut:] = b[cut:].copy(), a[cut:].copy()
            for child in (a, b):
                mask = rng.random(t_len) < mut
                if mask.any():
                    child[mask] = rng.integers(n_dir, size=int(mask.sum()))
                if len(children) < cfg.population:
                    children.append(child)
        pop = np.array(children)
        fits = np.array([fitness(decode(g)) for g in pop])
        gen_best = int(np.argmin(fits))
        if fits[gen_best] < best_fit:
            best, best_fit = pop[gen_best].copy(), float(fits[gen_best])
        history.append(best_fit)
    return decode(best), best_fit, history


def pso_search(graph, fitness, cfg: PsoConfig, init_positions=None,
               init_velocities=None):
    """Continuous relaxation: one logit vector per gene, argmax decoding.

    Standard inertia/cognitive/social velocity updates; returns the best
    decoded assignment ever evaluated. Initial positions/velocities may be
    injected to warm-start the swarm."""
    t_len = graph.n_instructions
    rng = nk.make_rng(cfg.seed, stream=43)
    n_dir = len(DIRECTIVES)
    shape = (cfg.swarm, max(t_len, 1), n_dir)
    pos = (np.array(init_positions, dtype=float) if init_positions is not None
           else rng.uniform(-1.0, 1.0, size=shape))
    vel = (np.array(init_velocities, dtype=float) if init_velocities is not None
           else rng.uniform(-0.5, 0.5, size=shape))
    if pos.shape != shape or vel.shape != shape:
        raise ConfigError(f"swarm arrays must have shape {shape}")

    def decode(p):
        return tuple(DIRECTIVES[int(np.argmax(p[i]))] for i in range(t_len))

    def evaluate(p):
        return fitness(decode(p))

    fits = np.array([evaluate(p) for p in pos])
    pbest = pos.copy()
    pbest_fit = fits.copy()
    g_idx = int(np.argmin(fits))
    gbest = pos[g_idx].copy()
    best_assignment, best_fit = decode(gbest), float(fits[g_idx])
    history = [best_fit]

    for _ in range(cfg.iterations):
        r1 = rng.random(size=shape)
        r2 = rng.random(size=shape)
        vel = (cfg.inertia * vel
               + cfg.cognitive * r1 * (pbest - pos)
               + cfg.social * r2 * (gbest[None] - pos))
        pos = pos + vel
        fits = np.array([evaluate(p) for p in pos])
        improved = fits < pbest_fit
        pbest[improved] = pos[improved]
        pbest_fit[improved] = fits[improved]
        g_idx = int(np.argmin(pbest_fit))
        gbest = pbest[g_idx].copy()
        if pbest_fit[g_idx] < best_fit:
            best_assignment, best_fit = decode(gbest), float(pbest_fit[g_idx])
        history.append(best_fit)
    return best_assignment, best_fit, history
