"""Multi-objective post-processing: scalar utility, Pareto filtering,
constraint matching, time reduction, and hypervolume."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (BudgetMismatchError, CardinalityError, DomainError,
                     EmptyInputError, ReferenceDominatedError)

OBJECTIVES = ("time", "size", "energy")
_FIELD_FOR = {"time": "exec_time", "size": "code_size", "energy": "energy"}


@dataclass(frozen=True)
class SolutionPoint:
    exec_time: float
    code_size: float
    energy: float
    provenance: dict = field(default_factory=dict, compare=False)

    def objective(self, name: str) -> float:
        return getattr(self, _FIELD_FOR[name])


@dataclass(frozen=True)
class ConstraintSpec:
    energy_target: float
    tolerance: float = 0.05

    def __post_init__(self):
        if self.tolerance < 0:
            raise DomainError(f"tolerance must be >= 0, got {self.tolerance}")

    def satisfied_by(self, energy: float) -> bool:
        return energy <= self.energy_target * (1.0 + self.tolerance)


def assignment_digest(assignment) -> str:
    return hashlib.sha256(",".join(assignment).encode()).hexdigest()[:16]


def utility(code_size: float, exec_time: float, mu: float, q: int) -> float:
    """Weighted scalarization mu*size/q + (1-mu)*time; smaller is better."""
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"mu must be in [0, 1], got {mu}")
    if not (isinstance(q, (int, np.integer)) and q >= 1):
        raise DomainError(f"q must be a positive integer, got {q!r}")
    return mu * code_size / q + (1.0 - mu) * exec_time


def _objective_matrix(points, objectives):
    for name in objectives:
        if name not in OBJECTIVES:
            raise DomainError(f"unknown objective {name!r}")
    return np.array([[p.objective(name) for name in objectives] for p in points])


def pareto_front(points, objectives=("time", "size", "energy")):
    """Non-dominated subset under minimization, original order preserved.

    Exact duplicates are all kept: dominance requires strict improvement in
    at least one objective.
    """
    points = list(points)
    if not points:
        raise EmptyInputError("pareto_front needs at least one point")
    vecs = _objective_matrix(points, objectives)
    order = np.lexsort(vecs.T[::-1])  # lexicographic by first objective, then next
    front_rows = []
    dominated = np.zeros(len(points), dtype=bool)
    for idx in order:
        v = vecs[idx]
        if front_rows:
            f = np.array(front_rows)
            dom = np.any(np.all(f <= v, axis=1) & np.any(f < v, axis=1))
        else:
            dom = False
        if dom:
            dominated[idx] = True
        else:
            front_rows.append(v)
    return [p for p, d in zip(points, dominated) if not d]


def matching_rate(solutions, constraints) -> float:
    """Fraction of constraints whose paired solution stays within the
    tolerance slack above the energy target."""
    solutions = list(solutions)
    constraints = list(constraints)
    if len(solutions) != len(constraints):
        raise CardinalityError(
            f"{len(solutions)} solutions for {len(constraints)} constraints")
    if not constraints:
        raise EmptyInputError("no constraints to match")
    hits = sum(1 for s, c in zip(solutions, constraints)
               if c.satisfied_by(s.energy))
    return hits / len(constraints)


def time_reduction(candidate: SolutionPoint, reference: SolutionPoint,
                   budget: ConstraintSpec) -> float:
    """Percent execution-time reduction versus a reference under one shared
    energy budget; regressions come back negative, never clipped."""
    if not (budget.satisfied_by(candidate.energy) and budget.satisfied_by(reference.energy)):
        raise BudgetMismatchError(
            f"both solutions must satisfy the {budget.energy_target} budget")
    if reference.exec_time <= 0:
        raise DomainError("reference exec_time must be positive")
    return 100.0 * (reference.exec_time - candidate.exec_time) / reference.exec_time


def _front_2d(points2d, ref):
    """Union area of [p, ref] boxes via the staircase sweep."""
    pts = sorted({(x, y) for x, y in points2d})
    area = 0.0
    best_y = ref[1]
    for x, y in pts:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


def hypervolume(points, reference) -> float:
    """Exact dominated volume against a reference point, 2 or 3 objectives."""
    points = [tuple(float(c) for c in p) for p in points]
    ref = tuple(float(c) for c in reference)
    if not points:
        raise EmptyInputError("hypervolume needs at least one point")
    dims = {len(p) for p in points} | {len(ref)}
    if len(dims) != 1 or next(iter(dims)) not in (2, 3):
        raise DomainError("hypervolume supports 2 or 3 objectives")
    for p in points:
        if any(pc > rc for pc, rc in zip(p, ref)):
            raise ReferenceDominatedError(f"point {p} does not dominate reference {ref}")
    d = len(ref)
    if d == 2:
        return _front_2d(points, ref)
    zs = sorted({p[2] for p in points})
    volume = 0.0
    for k, z in enumerate(zs):
        z_next = zs[k + 1] if k + 1 < len(zs) else ref[2]
        active = [(p[0], p[1]) for p in points if p[2] <= z]
        volume += _front_2d(active, ref) * (z_next - z)
    return volume


CSV_COLUMNS = ("method", "mu", "seed", "graph_id", "energy_target",
               "assignment", "exec_time", "code_size", "energy")


def write_solutions(path, points) -> None:
    """One row per SolutionPoint, provenance flattened, repr-exact floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for p in points:
            prov = p.provenance
            writer.writerow([
                prov.get("method", ""), repr(float(prov.get("mu", 0.0))),
                prov.get("seed", 0), prov.get("graph_id", ""),
                repr(float(prov.get("energy_target", 0.0))),
                prov.get("assignment", ""),
                repr(p.exec_time), repr(p.code_size), repr(p.energy),
            ])


def read_solutions(path) -> list[SolutionPoint]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(SolutionPoint(
                exec_time=float(row["exec_time"]),
                code_size=float(row["code_size"]),
                energy=float(row["energy"]),
                provenance={"method": row["method"], "mu": float(row["mu"]),
                            "seed": int(row["seed"]), "graph_id": row["graph_id"],
                            "energy_target": float(row["energy_target"]),
                            "assignment": row["assignment"]},
            ))
    return out
