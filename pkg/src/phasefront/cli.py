"""Command-line orchestration of the full loop:
extract -> gendb -> train-gnn -> train-rl -> search/explore -> pareto -> report.

Every artifact-producing run writes a manifest (config snapshot, seeds,
input/output digests) next to its primary output. Configuration layers as
defaults < config file < PHASEFRONT_* environment < explicit flags.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import pathlib
import statistics
import sys
import time

import numpy as np

from . import __version__, agents, analytics, baselines, datagen, irgraph, predictor
from . import env as rlenv
from .errors import ConfigError, Error
from .evaluator import (DIRECTIVES, FIXED_LEVELS, SyntheticEvaluator,
                        energy_range, fixed_level_metrics, synth_evaluate)

ENV_PREFIX = "PHASEFRONT_"


def digest_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(primary_output, subcommand: str, config: dict, seeds,
                   inputs, outputs, started: float) -> str:
    """Atomic manifest next to the primary output."""
    path = str(primary_output) + ".manifest.json"
    doc = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config": config,
        "seeds": list(seeds),
        "inputs": {str(p): digest_file(p) for p in inputs},
        "outputs": {str(p): digest_file(p) for p in outputs},
        "started": started,
        "finished": time.time(),
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def layered_config(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < environment < explicit flags."""
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        for k, v in file_cfg.items():
            if k in cfg:
                cfg[k] = v
    for k in cfg:
        env_val = os.environ.get(ENV_PREFIX + k.upper().replace("-", "_"))
        if env_val is not None:
            current = cfg[k]
            if isinstance(current, bool):
                cfg[k] = env_val.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                cfg[k] = int(env_val)
            elif isinstance(current, float):
                cfg[k] = float(env_val)
            else:
                cfg[k] = env_val
    for k in cfg:
        flag_val = getattr(args, k.replace("-", "_"), None)
        if flag_val is not None:
            cfg[k] = flag_val
    return cfg


def load_graph_map(paths):
    """Graph files (or directories of them) indexed by source hash.

    Returns (graphs, file list); the file list feeds manifest input digests.
    """
    out = {}
    used = []
    for p in paths:
        p = pathlib.Path(p)
        files = (sorted(f for f in p.glob("*.json")
                        if not f.name.endswith(".manifest.json"))
                 if p.is_dir() else [p])
        for f in files:
            g = irgraph.load_graph(f)
            out[g.source_hash] = g
            used.append(f)
    if not out:
        raise ConfigError(f"no graph files found under {list(paths)}")
    return out, used


def bundle_dir_paths(gnn_dir):
    gnn_dir = pathlib.Path(gnn_dir)
    return {m: gnn_dir / f"{m}.json" for m in predictor.METRICS}


def load_bundle(gnn_dir) -> predictor.PredictorBundle:
    paths = bundle_dir_paths(gnn_dir)
    models = {}
    for metric, path in paths.items():
        if not path.exists():
            raise ConfigError(f"missing predictor checkpoint: {path}")
        models[metric] = predictor.load_model(path)
    meta_path = pathlib.Path(gnn_dir) / "bundle.json"
    scale = 1.0
    if meta_path.exists():
        scale = json.loads(meta_path.read_text()).get("energy_scale", 1.0)
    return predictor.PredictorBundle(models, energy_scale=scale)


def target_grid(graphs, n: int) -> list[float]:
    """Evenly spaced quantiles of the achievable synthetic energy range."""
    lo = min(energy_range(g)[0] for g in graphs)
    hi = max(energy_range(g)[1] for g in graphs)
    if n == 1:
        return [hi]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def weights_from(cfg) -> rlenv.RewardWeights:
    return rlenv.RewardWeights(mu=cfg["mu"], q=cfg["q"], beta=cfg["beta"])


def env_factory_from(graphs, bundle, weights, reward_mode):
    evaluator = SyntheticEvaluator()

    def factory(graph_id):
        return rlenv.DirectiveEnv(graphs[graph_id], bundle, weights,
                                  reward_mode=reward_mode, evaluator=evaluator)
    return factory


# --- subcommand handlers ---

def cmd_extract(args) -> int:
    cfg = layered_config({"symmetrize": True}, args)
    if args.no_symmetrize:
        cfg["symmetrize"] = False
    started = time.time()
    text = pathlib.Path(args.input).read_text(encoding="utf-8")
    graph = irgraph.parse_ir(text)
    irgraph.save_graph(graph, args.output, symmetrize=cfg["symmetrize"])
    write_manifest(args.output, "extract", cfg, [], [args.input], [args.output], started)
    print(f"extracted {len(graph.nodes)} nodes, {len(graph.edges)} edges "
          f"-> {args.output}")
    return 0


GENDB_DEFAULTS = {"episodes": 20, "policy": "random", "evaluator": "synthetic",
                  "seed": 0, "grid": 10, "mu": 0.5, "beta": 5.0, "q": 500,
                  "epoch": ""}


def cmd_gendb(args) -> int:
    cfg = layered_config(GENDB_DEFAULTS, args)
    started = time.time()
    graphs, graph_files = load_graph_map(args.graphs)
    if cfg["evaluator"] != "synthetic":
        raise ConfigError("gendb currently drives the synthetic backend; "
                          "use the library API for external toolchains")
    evaluator = SyntheticEvaluator()
    if cfg["policy"] == "random":
        policy = datagen.random_policy(cfg["seed"])
    elif cfg["policy"] == "enumerate":
        policy = datagen.enumerating_policy()
    elif cfg["policy"] in ("dqn", "ppo"):
        if not args.agent_ckpt or not args.gnn:
            raise ConfigError("--policy dqn|ppo needs --agent-ckpt and --gnn")
        agent = agents.load_agent(args.agent_ckpt)
        bundle = load_bundle(args.gnn)
        weights = weights_from(cfg)
        factory = env_factory_from(graphs, bundle, weights, rlenv.GROUND_TRUTH)
        targets = target_grid(graphs.values(), cfg["grid"])
        policy = datagen.agent_rollout_policy(agent, factory, targets, cfg["seed"])
    else:
        raise ConfigError(f"unknown policy {cfg['policy']!r}")
    store = datagen.RecordStore(args.db)
    stamp = cfg["epoch"] or None
    appended = datagen.generate(list(graphs.values()), cfg["episodes"], policy,
                                evaluator, store, agent_tag=cfg["policy"],
                                timestamp=stamp)
    write_manifest(args.db, "gendb", cfg, [cfg["seed"]],
                   graph_files, [args.db], started)
    print(f"appended {appended} records ({len(store)} total) -> {args.db}")
    return 0


TRAIN_GNN_DEFAULTS = {"metric": "all", "epochs": 200, "batch": 32, "lr": 0.01,
                      "decay": 0.98, "seed": 0, "feature_mode": "extended"}


def cmd_train_gnn(args) -> int:
    cfg = layered_config(TRAIN_GNN_DEFAULTS, args)
    started = time.time()
    store = datagen.RecordStore(args.db)
    records = store.records()
    graphs, graph_files = load_graph_map(args.graphs)
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = list(predictor.METRICS) if cfg["metric"] == "all" else [cfg["metric"]]
    outputs = []
    for metric in metrics:
        model = predictor.PredictorModel(metric, cfg["feature_mode"], seed=cfg["seed"])
        curve = predictor.train(model, records, graphs, epochs=cfg["epochs"],
                                batch_size=cfg["batch"], seed=cfg["seed"],
                                base_lr=cfg["lr"], decay=cfg["decay"])
        path = out_dir / f"{metric}.json"
        predictor.save_model(model, path)
        outputs.append(path)
        final = curve[-1] if curve else float("nan")
        print(f"trained {metric}: final epoch loss {final:.6g} -> {path}")
    scale = max((r.metrics.energy for r in records), default=1.0)
    meta_path = out_dir / "bundle.json"
    meta_path.write_text(json.dumps({"energy_scale": scale}, sort_keys=True) + "\n")
    outputs.append(meta_path)
    write_manifest(out_dir / "bundle.json", "train-gnn", cfg, [cfg["seed"]],
                   [args.db] + graph_files, outputs, started)
    return 0


TRAIN_RL_DEFAULTS = {"agent": "dqn", "mu": 0.5, "beta": 5.0, "q": 500,
                     "episodes": 3000, "seed": 0, "grid": 10, "m": 1,
                     "reward_mode": "ground_truth", "hidden": "256,256",
                     "lr": 0.008, "epsilon": 0.08, "gamma": 0.95}


def cmd_train_rl(args) -> int:
    cfg = layered_config(TRAIN_RL_DEFAULTS, args)
    started = time.time()
    graphs, graph_files = load_graph_map(args.graphs)
    bundle = load_bundle(args.gnn)
    weights = weights_from(cfg)
    targets = ([float(t) for t in args.energy_target]
               if args.energy_target else target_grid(graphs.values(), cfg["grid"]))
    tuples = rlenv.make_tuples(sorted(graphs), targets, m=cfg["m"], seed=cfg["seed"])
    hidden = tuple(int(h) for h in str(cfg["hidden"]).split(","))
    agent_cfg = agents.AgentConfig(hidden=hidden, episode_max=cfg["episodes"],
                                   lr=cfg["lr"], epsilon=cfg["epsilon"],
                                   gamma=cfg["gamma"])
    factory = env_factory_from(graphs, bundle, weights, cfg["reward_mode"])
    agent, curve = agents.train_agent(cfg["agent"], tuples, factory,
                                      agent_cfg, seed=cfg["seed"])
    agents.save_agent(agent, args.out)
    write_manifest(args.out, "train-rl", cfg, [cfg["seed"]],
                   graph_files, [args.out], started)
    tail = statistics.fmean(curve[-50:]) if curve else float("nan")
    print(f"trained {cfg['agent']} for {len(curve)} episodes; "
          f"mean terminal reward (last 50): {tail:.4f} -> {args.out}")
    return 0


SEARCH_DEFAULTS = {"method": "brute", "mu": 0.5, "beta": 5.0, "q": 500,
                   "energy_target": 0.0, "seed": 0, "population": 32,
                   "generations": 60, "swarm": 32, "iterations": 60}


def _solution_row(method, mu, seed, graph, assignment, target):
    m = synth_evaluate(graph, assignment)
    return analytics.SolutionPoint(
        exec_time=m.exec_time, code_size=m.code_size, energy=m.energy,
        provenance={"method": method, "mu": mu, "seed": seed,
                    "graph_id": graph.source_hash, "energy_target": target,
                    "assignment": ",".join(assignment)})


def cmd_search(args) -> int:
    cfg = layered_config(SEARCH_DEFAULTS, args)
    started = time.time()
    graph = irgraph.load_graph(args.graph)
    weights = weights_from(cfg)
    target = cfg["energy_target"] or energy_range(graph)[0]
    fitness = baselines.make_fitness(graph, SyntheticEvaluator(), weights, target)
    if cfg["method"] == "brute":
        assignment, _ = baselines.brute_force(graph, fitness)
    elif cfg["method"] == "ga":
        assignment, _, _ = baselines.ga_search(
            graph, fitness, baselines.GaConfig(population=cfg["population"],
                                               generations=cfg["generations"],
                                               seed=cfg["seed"]))
    elif cfg["method"] == "pso":
        assignment, _, _ = baselines.pso_search(
            graph, fitness, baselines.PsoConfig(swarm=cfg["swarm"],
                                                iterations=cfg["iterations"],
                                                seed=cfg["seed"]))
    else:
        raise ConfigError(f"unknown method {cfg['method']!r}")
    row = _solution_row(cfg["method"], cfg["mu"], cfg["seed"], graph, assignment, target)
    analytics.write_solutions(args.out, [row])
    write_manifest(args.out, "search", cfg, [cfg["seed"]], [args.graph],
                   [args.out], started)
    print(f"{cfg['method']} best: time={row.exec_time:.4g} size={row.code_size:.4g} "
          f"energy={row.energy:.4g} -> {args.out}")
    return 0


EXPLORE_DEFAULTS = {"agent": "none", "method": "brute", "beta": 5.0, "q": 500,
                    "seed": 0, "grid": 10, "finetune": 0, "levels": False,
                    "reward_mode": "ground_truth", "population": 32,
                    "generations": 60, "swarm": 32, "iterations": 60}


def cmd_explore(args) -> int:
    cfg = layered_config(EXPLORE_DEFAULTS, args)
    started = time.time()
    graphs, graph_files = load_graph_map(args.graphs)
    mus = [float(m) for m in (args.mu or [0.5])]
    inputs = list(graph_files)
    rows = []
    agent = None
    bundle = None
    if cfg["agent"] != "none":
        if not args.agent_ckpt or not args.gnn:
            raise ConfigError("--agent dqn|ppo needs --agent-ckpt and --gnn")
        agent = agents.load_agent(args.agent_ckpt)
        bundle = load_bundle(args.gnn)
        inputs.append(args.agent_ckpt)
    targets = ([float(t) for t in args.energy_target]
               if args.energy_target else target_grid(graphs.values(), cfg["grid"]))
    evaluator = SyntheticEvaluator()
    for mu in mus:
        weights = rlenv.RewardWeights(mu=mu, q=cfg["q"], beta=cfg["beta"])
        factory = (env_factory_from(graphs, bundle, weights, cfg["reward_mode"])
                   if agent is not None else None)
        envs = {}
        for gid in sorted(graphs):
            graph = graphs[gid]
            if agent is not None and gid not in envs:
                envs[gid] = factory(gid)
            for target in targets:
                if agent is not None:
                    acting = agent
                    if cfg["finetune"] > 0:
                        acting = agents.fine_tune(agent, gid, [target], factory,
                                                  budget=cfg["finetune"],
                                                  seed=cfg["seed"])
                    assignment, _ = agents.greedy_rollout(acting, envs[gid], target)
                    method = agent.kind
                else:
                    fitness = baselines.make_fitness(graph, evaluator, weights, target)
                    if cfg["method"] == "brute":
                        assignment, _ = baselines.brute_force(graph, fitness)
                    elif cfg["method"] == "ga":
                        assignment, _, _ = baselines.ga_search(
                            graph, fitness,
                            baselines.GaConfig(population=cfg["population"],
                                               generations=cfg["generations"],
                                               seed=cfg["seed"]))
                    elif cfg["method"] == "pso":
                        assignment, _, _ = baselines.pso_search(
                            graph, fitness,
                            baselines.PsoConfig(swarm=cfg["swarm"],
                                                iterations=cfg["iterations"],
                                                seed=cfg["seed"]))
                    else:
                        raise ConfigError(f"unknown method {cfg['method']!r}")
                    method = cfg["method"]
                rows.append(_solution_row(method, mu, cfg["seed"], graph,
                                          assignment, target))
            if cfg["levels"]:
                for level in FIXED_LEVELS:
                    m = fixed_level_metrics(level, graph)
                    for target in targets:
                        rows.append(analytics.SolutionPoint(
                            exec_time=m.exec_time, code_size=m.code_size,
                            energy=m.energy,
                            provenance={"method": level, "mu": mu,
                                        "seed": cfg["seed"],
                                        "graph_id": gid,
                                        "energy_target": target,
                                        "assignment": ""}))
    analytics.write_solutions(args.out, rows)
    write_manifest(args.out, "explore", cfg, [cfg["seed"]], inputs,
                   [args.out], started)
    print(f"wrote {len(rows)} solution rows -> {args.out}")
    return 0


def cmd_pareto(args) -> int:
    cfg = layered_config({"objectives": "time,energy"}, args)
    started = time.time()
    points = analytics.read_solutions(args.input)
    objectives = tuple(cfg["objectives"].split(","))
    front = analytics.pareto_front(points, objectives=objectives)
    analytics.write_solutions(args.out, front)
    write_manifest(args.out, "pareto", cfg, [], [args.input], [args.out], started)
    print(f"front has {len(front)} of {len(points)} points -> {args.out}")
    return 0


REPORT_DEFAULTS = {"tolerance": 0.05, "reference_method": "O3",
                   "plot_data": False}


def _group_rows(points, key_fields):
    groups = {}
    for p in points:
        key = tuple(p.provenance.get(k) for k in key_fields)
        groups.setdefault(key, []).append(p)
    return groups


def cmd_report(args) -> int:
    cfg = layered_config(REPORT_DEFAULTS, args)
    started = time.time()
    run_files = []
    for spec in args.runs:
        p = pathlib.Path(spec)
        run_files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    if not run_files:
        raise ConfigError(f"no solution CSVs under {args.runs}")
    points = []
    for f in run_files:
        points.extend(analytics.read_solutions(f))
    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    tol = cfg["tolerance"]

    # Pareto fronts over all methods, per objective pairing
    for name, objectives in (("front_time_energy", ("time", "energy")),
                             ("front_size_energy", ("size", "energy")),
                             ("front_3d", ("time", "size", "energy"))):
        front = analytics.pareto_front(points, objectives=objectives)
        path = out_dir / f"{name}.csv"
        analytics.write_solutions(path, front)
        outputs.append(path)

    # Matching rate per (method, mu, seed, graph)
    matching_rows = []
    for (method, mu, seed, gid), rows in sorted(
            _group_rows(points, ("method", "mu", "seed", "graph_id")).items()):
        by_target = sorted(rows, key=lambda p: p.provenance["energy_target"])
        constraints = [analytics.ConstraintSpec(p.provenance["energy_target"], tol)
                       for p in by_target]
        rate = analytics.matching_rate(by_target, constraints)
        matching_rows.append((method, mu, seed, gid, rate))
    match_path = out_dir / "matching.csv"
    with open(match_path, "w", encoding="utf-8") as fh:
        fh.write("method,mu,seed,graph_id,matching_rate,tolerance\n")
        for method, mu, seed, gid, rate in matching_rows:
            fh.write(f"{method},{mu!r},{seed},{gid},{rate!r},{tol!r}\n")
    outputs.append(match_path)

    # Hypervolume (time, energy) per (method, mu, seed) with a shared reference
    times = [p.exec_time for p in points]
    energies = [p.energy for p in points]
    ref = (max(times) * 1.05 + 1e-9, max(energies) * 1.05 + 1e-9)
    hv_path = out_dir / "hypervolume.csv"
    with open(hv_path, "w", encoding="utf-8") as fh:
        fh.write("method,mu,seed,hypervolume,ref_time,ref_energy\n")
        for (method, mu, seed), rows in sorted(
                _group_rows(points, ("method", "mu", "seed")).items()):
            hv = analytics.hypervolume([(p.exec_time, p.energy) for p in rows], ref)
            fh.write(f"{method},{mu!r},{seed},{hv!r},{ref[0]!r},{ref[1]!r}\n")
    outputs.append(hv_path)

    # Execution-time comparison against the reference method per constraint
    ref_method = cfg["reference_method"]
    ref_rows = {(p.provenance["mu"], p.provenance["graph_id"],
                 p.provenance["energy_target"]): p
                for p in points if p.provenance["method"] == ref_method}
    red_path = out_dir / "time_reduction.csv"
    with open(red_path, "w", encoding="utf-8") as fh:
        fh.write("method,mu,seed,graph_id,energy_target,reduction_pct,"
                 "reference_feasible\n")
        for p in points:
            prov = p.provenance
            if prov["method"] == ref_method:
                continue
            key = (prov["mu"], prov["graph_id"], prov["energy_target"])
            ref_point = ref_rows.get(key)
            if ref_point is None:
                continue
            budget = analytics.ConstraintSpec(prov["energy_target"], tol)
            if not budget.satisfied_by(p.energy):
                continue
            if budget.satisfied_by(ref_point.energy):
                red = analytics.time_reduction(p, ref_point, budget)
                fh.write(f"{prov['method']},{prov['mu']!r},{prov['seed']},"
                         f"{prov['graph_id']},{prov['energy_target']!r},"
                         f"{red!r},1\n")
            else:
                fh.write(f"{prov['method']},{prov['mu']!r},{prov['seed']},"
                         f"{prov['graph_id']},{prov['energy_target']!r},,0\n")
    outputs.append(red_path)

    summary = {
        "n_points": len(points),
        "methods": sorted({p.provenance["method"] for p in points}),
        "tolerance": tol,
        "median_matching_rate": {},
    }
    by_method_mu = {}
    for method, mu, seed, gid, rate in matching_rows:
        by_method_mu.setdefault((method, mu), []).append(rate)
    for (method, mu), rates in sorted(by_method_mu.items()):
        summary["median_matching_rate"][f"{method}@mu={mu}"] = statistics.median(rates)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    outputs.append(summary_path)

    if cfg["plot_data"]:
        plot_path = out_dir / "plot_points.csv"
        with open(plot_path, "w", encoding="utf-8") as fh:
            fh.write("method,mu,exec_time,code_size,energy\n")
            for p in points:
                fh.write(f"{p.provenance['method']},{p.provenance['mu']!r},"
                         f"{p.exec_time!r},{p.code_size!r},{p.energy!r}\n")
        outputs.append(plot_path)

    write_manifest(out_dir / "summary.json", "report", cfg, [],
                   run_files, outputs, started)
    print(f"report with {len(outputs)} artifacts -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasefront",
        description="Multi-objective compiler phase-ordering toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("extract", help="parse IR text into a graph file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--no-symmetrize", action="store_true")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("gendb", help="populate the record store by exploration")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--episodes", type=int)
    p.add_argument("--policy", choices=["random", "enumerate", "dqn", "ppo"])
    p.add_argument("--evaluator", choices=["synthetic", "external"])
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--epoch", help="fixed record timestamp for reproducible runs")
    p.add_argument("--agent-ckpt")
    p.add_argument("--gnn")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_gendb)

    p = sub.add_parser("train-gnn", help="fit metric predictors on the store")
    p.add_argument("--db", required=True)
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--metric", choices=list(predictor.METRICS) + ["all"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--feature-mode", dest="feature_mode",
                   choices=["static", "extended"])
    p.add_argument("--config")
    p.set_defaults(handler=cmd_train_gnn)

    p = sub.add_parser("train-rl", help="train a directive-assignment agent")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--gnn", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--agent", choices=["dqn", "ppo"])
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--energy-target", action="append", dest="energy_target")
    p.add_argument("--reward-mode", dest="reward_mode",
                   choices=["predicted", "ground_truth"])
    p.add_argument("--hidden")
    p.add_argument("--lr", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--config")
    p.set_defaults(handler=cmd_train_rl)

    p = sub.add_parser("search", help="learning-free search on one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["ga", "pso", "brute"])
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--energy-target", type=float, dest="energy_target")
    p.add_argument("--seed", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--swarm", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--config")
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser("explore", help="emit solution rows per (mu, target)")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--agent", choices=["none", "dqn", "ppo"])
    p.add_argument("--agent-ckpt")
    p.add_argument("--gnn")
    p.add_argument("--method", choices=["ga", "pso", "brute"])
    p.add_argument("--mu", action="append")
    p.add_argument("--energy-target", action="append", dest="energy_target")
    p.add_argument("--grid", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--finetune", type=int)
    p.add_argument("--levels", action="store_true", default=None,
                   help="also emit fixed-level reference rows")
    p.add_argument("--reward-mode", dest="reward_mode",
                   choices=["predicted", "ground_truth"])
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--swarm", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--config")
    p.set_defaults(handler=cmd_explore)

    p = sub.add_parser("pareto", help="filter a solutions CSV to its front")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--objectives")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_pareto)

    p = sub.add_parser("report", help="summarize solution runs into a report dir")
    p.add_argument("--runs", nargs="+", required=True,
                   help="solution CSVs or directories of them")
    p.add_argument("--out", required=True)
    p.add_argument("--db")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--reference-method", dest="reference_method")
    p.add_argument("--plot-data", dest="plot_data", action="store_true",
                   default=None)
    p.add_argument("--config")
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
