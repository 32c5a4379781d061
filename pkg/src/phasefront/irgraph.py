"""Textual IR parsing into control-and-data-flow graphs.

The supported grammar is a deliberate subset of LLVM-style IR: one module,
named functions, labeled basic blocks, SSA assignments, branch/return
terminators. Anything outside the nine encoded opcodes is kept as `other`,
so richer constructs parse without contributing feature signal.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import EmptyModuleError, ParseError, ShapeError, UndefinedValueError

BASIC_BLOCK = "basic_block"
INSTRUCTION = "instruction"
CONTROL = "control"
DATA = "data"

# Feature slots 1..9, in frozen order. Slot 0 marks basic-block nodes.
OPCODES = ("alloca", "load", "store", "add", "sub", "mul", "div", "icmp", "call")
OTHER = "other"
FEATURE_DIM = 10

# Division and float-arith variants fold onto the encoded arithmetic slots.
_OPCODE_ALIASES = {
    "sdiv": "div", "udiv": "div", "fdiv": "div",
    "fadd": "add", "fsub": "sub", "fmul": "mul",
}

GRAPH_FORMAT_VERSION = 1

_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$-]*):$")
_DEFINE_RE = re.compile(r"^define\b")
_ASSIGN_RE = re.compile(r"^%([\w.$-]+)\s*=\s*(.+)$")
_LOCAL_RE = re.compile(r"%([\w.$-]+)")


@dataclass(frozen=True)
class Instruction:
    id: int
    opcode: str
    operands: tuple[str, ...]
    result: str | None
    parent_block: int


@dataclass(frozen=True)
class CdfgNode:
    id: int
    kind: str
    opcode: str | None
    features: tuple[int, ...]


@dataclass(frozen=True)
class CdfgEdge:
    src: int
    dst: int
    kind: str


@dataclass(frozen=True)
class GraphMetadata:
    n_input: int
    n_intermediate: int
    n_output: int
    n_edges: int
    n_mul: int

    def as_vector(self) -> np.ndarray:
        return np.array([self.n_input, self.n_intermediate, self.n_output,
                         self.n_edges, self.n_mul], dtype=np.float64)


@dataclass(frozen=True)
class Cdfg:
    nodes: tuple[CdfgNode, ...]
    edges: tuple[CdfgEdge, ...]
    metadata: GraphMetadata
    source_hash: str

    @property
    def instruction_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.kind == INSTRUCTION)

    @property
    def n_instructions(self) -> int:
        return sum(1 for n in self.nodes if n.kind == INSTRUCTION)

    def feature_matrix(self) -> np.ndarray:
        return np.array([n.features for n in self.nodes], dtype=np.float64)


def canonical_opcode(raw: str) -> str:
    raw = _OPCODE_ALIASES.get(raw, raw)
    return raw if raw in OPCODES else OTHER


def encode_features(kind: str, opcode: str | None = None) -> tuple[int, ...]:
    """10-bit node encoding: slot 0 = basic block, slots 1..9 one-hot opcode."""
    feats = [0] * FEATURE_DIM
    if kind == BASIC_BLOCK:
        feats[0] = 1
    else:
        op = canonical_opcode(opcode or OTHER)
        if op != OTHER:
            feats[1 + OPCODES.index(op)] = 1
    return tuple(feats)


def _strip(line: str) -> str:
    if ";" in line:
        line = line.split(";", 1)[0]
    return line.strip()


class _PendingInstr:
    __slots__ = ("node_id", "opcode", "operand_names", "result", "block_id",
                 "successors", "line")

    def __init__(self, node_id, opcode, operand_names, result, block_id, successors, line):
        self.node_id = node_id
        self.opcode = opcode
        self.operand_names = operand_names
        self.result = result
        self.block_id = block_id
        self.successors = successors
        self.line = line


def _parse_branch(body: str):
    """Return (value operands, successor labels) for a br instruction."""
    labels = re.findall(r"label\s+%([\w.$-]+)", body)
    cond = []
    m = re.match(r"br\s+i1\s+%([\w.$-]+)\s*,", body)
    if m:
        cond.append(m.group(1))
    return cond, labels


def _parse_instruction_body(body: str):
    """Split an instruction body into (opcode, operand names, successor labels)."""
    opcode_raw = body.split(None, 1)[0]
    if opcode_raw == "br":
        cond, labels = _parse_branch(body)
        return OTHER, cond, labels
    opcode = canonical_opcode(opcode_raw)
    # %names are value operands; `label %x` references never appear outside br
    # in the supported subset, and phi-style block refs resolve as labels later.
    operands = _LOCAL_RE.findall(body[len(opcode_raw):])
    return opcode, operands, []


def parse_ir(text: str) -> Cdfg:
    """Parse IR text into a Cdfg with control and SSA def-use data edges."""
    nodes: list[CdfgNode] = []
    edges: set[tuple[int, int, str]] = set()
    any_instruction = False

    in_function = False
    params: set[str] = set()
    defs: dict[str, int] = {}
    labels: dict[str, int] = {}
    blocks: list[list[_PendingInstr]] = []
    block_ids: list[int] = []
    pending: list[_PendingInstr] = []

    def add_block_node(label_name: str, lineno: int) -> int:
        node_id = len(nodes)
        nodes.append(CdfgNode(node_id, BASIC_BLOCK, None, encode_features(BASIC_BLOCK)))
        if label_name in labels:
            raise ParseError(f"duplicate block label %{label_name}", line=lineno)
        labels[label_name] = node_id
        block_ids.append(node_id)
        blocks.append([])
        return node_id

    def close_function(lineno: int):
        nonlocal in_function
        for block_id, instrs in zip(block_ids, blocks):
            if not instrs:
                raise ParseError("basic block has no instructions", line=lineno)
            edges.add((block_id, instrs[0].node_id, CONTROL))
            for prev, nxt in zip(instrs, instrs[1:]):
                edges.add((prev.node_id, nxt.node_id, CONTROL))
        for instr in pending:
            for succ in instr.successors:
                if succ not in labels:
                    raise UndefinedValueError(
                        f"branch to undefined label %{succ} (line {instr.line})")
                edges.add((instr.node_id, labels[succ], CONTROL))
            for name in instr.operand_names:
                if name in params:
                    continue  # defined by the function signature, no source node
                if name in defs:
                    edges.add((defs[name], instr.node_id, DATA))
                elif name in labels:
                    continue  # block reference inside a rich construct
                else:
                    raise UndefinedValueError(
                        f"use of undefined value %{name} (line {instr.line})")
        in_function = False
        params.clear()
        defs.clear()
        labels.clear()
        blocks.clear()
        block_ids.clear()
        pending.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if _DEFINE_RE.match(line):
            if in_function:
                raise ParseError("nested function definition", line=lineno)
            if not line.endswith("{"):
                raise ParseError("expected '{' at end of define", line=lineno)
            in_function = True
            lparen = line.find("(")
            rparen = line.rfind(")")
            if lparen < 0 or rparen < lparen:
                raise ParseError("malformed parameter list", line=lineno)
            params.update(_LOCAL_RE.findall(line[lparen:rparen + 1]))
            continue
        if line == "}":
            if not in_function:
                raise ParseError("unmatched '}'", line=lineno)
            close_function(lineno)
            continue
        if line.startswith(("declare", "target", "source_filename", "attributes",
                            "!", "@")):
            continue
        if not in_function:
            raise ParseError(f"statement outside a function: {line!r}", line=lineno)

        m = _LABEL_RE.match(line)
        if m:
            add_block_node(m.group(1), lineno)
            continue
        if not blocks:
            add_block_node("entry", lineno)  # implicit entry block

        result = None
        body = line
        m = _ASSIGN_RE.match(line)
        if m:
            result, body = m.group(1), m.group(2).strip()
            if not body:
                raise ParseError("assignment with empty right-hand side", line=lineno)
        opcode, operand_names, successors = _parse_instruction_body(body)
        node_id = len(nodes)
        nodes.append(CdfgNode(node_id, INSTRUCTION, opcode,
                              encode_features(INSTRUCTION, opcode)))
        any_instruction = True
        instr = _PendingInstr(node_id, opcode, tuple(operand_names), result,
                              block_ids[-1], tuple(successors), lineno)
        blocks[-1].append(instr)
        pending.append(instr)
        if result is not None:
            if result in defs or result in params:
                raise ParseError(f"redefinition of %{result}", line=lineno)
            defs[result] = node_id

    if in_function:
        raise ParseError("unterminated function (missing '}')")
    if not any_instruction:
        raise EmptyModuleError("no function body in module")

    edge_tuple = tuple(CdfgEdge(s, d, k)
                       for s, d, k in sorted(edges, key=lambda e: (e[0], e[1], e[2])))
    meta = compute_metadata(tuple(nodes), edge_tuple)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Cdfg(tuple(nodes), edge_tuple, meta, digest)


def compute_metadata(nodes, edges) -> GraphMetadata:
    """Recount metadata from scratch; data edges drive the io classification."""
    instr_ids = [n.id for n in nodes if n.kind == INSTRUCTION]
    data_in = {i: 0 for i in instr_ids}
    data_out = {i: 0 for i in instr_ids}
    for e in edges:
        if e.kind == DATA:
            if e.dst in data_in:
                data_in[e.dst] += 1
            if e.src in data_out:
                data_out[e.src] += 1
    n_input = sum(1 for i in instr_ids if data_in[i] == 0)
    n_output = sum(1 for i in instr_ids if data_out[i] == 0)
    n_inter = sum(1 for i in instr_ids if data_in[i] > 0 and data_out[i] > 0)
    n_mul = sum(1 for n in nodes if n.kind == INSTRUCTION and n.opcode == "mul")
    return GraphMetadata(n_input, n_inter, n_output, len(edges), n_mul)


def adjacency(graph: Cdfg, symmetrize: bool = True) -> np.ndarray:
    """0/1 adjacency over all edge kinds; optionally A := max(A, A^T)."""
    n = len(graph.nodes)
    a = np.zeros((n, n), dtype=np.float64)
    for e in graph.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            raise ShapeError(f"edge endpoint out of range: {e}")
        a[e.src, e.dst] = 1.0
    if symmetrize:
        a = np.maximum(a, a.T)
    return a


def to_document(graph: Cdfg, symmetrize: bool = True) -> dict:
    return {
        "version": GRAPH_FORMAT_VERSION,
        "nodes": [{"id": n.id, "kind": n.kind, "opcode": n.opcode,
                   "features": list(n.features)} for n in graph.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind} for e in graph.edges],
        "metadata": {"n_input": graph.metadata.n_input,
                     "n_intermediate": graph.metadata.n_intermediate,
                     "n_output": graph.metadata.n_output,
                     "n_edges": graph.metadata.n_edges,
                     "n_mul": graph.metadata.n_mul},
        "source_hash": graph.source_hash,
        "symmetrize": bool(symmetrize),
    }


def from_document(doc: dict) -> Cdfg:
    if doc.get("version") != GRAPH_FORMAT_VERSION:
        raise ParseError(f"unsupported graph file version {doc.get('version')!r}")
    nodes = tuple(CdfgNode(d["id"], d["kind"], d["opcode"], tuple(d["features"]))
                  for d in doc["nodes"])
    edges = tuple(CdfgEdge(d["src"], d["dst"], d["kind"]) for d in doc["edges"])
    md = doc["metadata"]
    meta = GraphMetadata(md["n_input"], md["n_intermediate"], md["n_output"],
                         md["n_edges"], md["n_mul"])
    recomputed = compute_metadata(nodes, edges)
    if recomputed != meta:
        raise ParseError("graph file metadata inconsistent with nodes/edges")
    return Cdfg(nodes, edges, meta, doc["source_hash"])


def save_graph(graph: Cdfg, path, symmetrize: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_document(graph, symmetrize), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_graph(path) -> Cdfg:
    with open(path, encoding="utf-8") as fh:
        return from_document(json.load(fh))
