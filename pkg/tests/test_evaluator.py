import itertools

import pytest

from phasefront import evaluator as ev
from phasefront import irgraph
from phasefront.errors import ShapeError, ToolchainMissingError

from conftest import ADD_RET, IR_DIR


def test_all_none_on_add_ret(add_ret_graph):
    m = ev.synth_evaluate(add_ret_graph, ("none", "none"))
    assert m.as_tuple() == (2.0, 2.0, 2.0)


def test_empty_instruction_set_is_zero():
    # a graph cannot be empty through the parser, so build one directly
    block = irgraph.CdfgNode(0, "basic_block", None, irgraph.encode_features("basic_block"))
    g = irgraph.Cdfg((block,), (), irgraph.compute_metadata((block,), ()), "0" * 64)
    assert ev.synth_evaluate(g, ()).as_tuple() == (0.0, 0.0, 0.0)


def test_single_flip_none_to_speed(add_ret_graph):
    base = ev.synth_evaluate(add_ret_graph, ("none", "none"))
    flipped = ev.synth_evaluate(add_ret_graph, ("speed", "none"))
    assert flipped.exec_time == pytest.approx(base.exec_time - 0.3, abs=1e-12)
    assert flipped.code_size == pytest.approx(base.code_size + 0.4, abs=1e-12)


def test_assignment_length_checked(add_ret_graph):
    with pytest.raises(ShapeError):
        ev.synth_evaluate(add_ret_graph, ("none",))
    with pytest.raises(ShapeError):
        ev.synth_evaluate(add_ret_graph, ("none", "turbo"))


def test_purity(add_ret_graph):
    a = ev.synth_evaluate(add_ret_graph, ("size", "speed"))
    b = ev.synth_evaluate(add_ret_graph, ("size", "speed"))
    assert a == b


def test_monotone_directive_dominance(corpus_graphs):
    for name, g in corpus_graphs.items():
        n = g.n_instructions
        if n > 30:
            continue
        base = ev.synth_evaluate(g, ("none",) * n)
        for i in range(n):
            speed = list(("none",) * n)
            speed[i] = "speed"
            ms = ev.synth_evaluate(g, tuple(speed))
            assert ms.exec_time < base.exec_time, name
            assert ms.code_size > base.code_size, name
            size = list(("none",) * n)
            size[i] = "size"
            mz = ev.synth_evaluate(g, tuple(size))
            assert mz.exec_time > base.exec_time, name
            assert mz.code_size < base.code_size, name


def test_additivity_over_disjoint_union(add_ret_graph):
    g1 = add_ret_graph
    g2 = irgraph.parse_ir("define i32 @g(i32 %x) {\nentry:\n  %m = mul i32 %x, 2\n  ret i32 %m\n}\n")
    nodes = list(g1.nodes) + [
        irgraph.CdfgNode(n.id + len(g1.nodes), n.kind, n.opcode, n.features)
        for n in g2.nodes]
    edges = list(g1.edges) + [
        irgraph.CdfgEdge(e.src + len(g1.nodes), e.dst + len(g1.nodes), e.kind)
        for e in g2.edges]
    union = irgraph.Cdfg(tuple(nodes), tuple(edges),
                         irgraph.compute_metadata(tuple(nodes), tuple(edges)), "1" * 64)
    a1 = ("speed", "none")
    a2 = ("size", "none")
    mu = ev.synth_evaluate(union, a1 + a2)
    m1 = ev.synth_evaluate(g1, a1)
    m2 = ev.synth_evaluate(g2, a2)
    assert mu.exec_time == pytest.approx(m1.exec_time + m2.exec_time, abs=1e-12)
    assert mu.code_size == pytest.approx(m1.code_size + m2.code_size, abs=1e-12)
    assert mu.energy == pytest.approx(m1.energy + m2.energy, abs=1e-12)


def test_fixed_levels(add_ret_graph):
    assert ev.fixed_level_metrics("O3", add_ret_graph).exec_time == pytest.approx(1.4)
    assert ev.fixed_level_metrics("O1", add_ret_graph).as_tuple() == (2.0, 2.0, 2.0)
    block = irgraph.CdfgNode(0, "basic_block", None, irgraph.encode_features("basic_block"))
    empty = irgraph.Cdfg((block,), (), irgraph.compute_metadata((block,), ()), "0" * 64)
    assert ev.fixed_level_metrics("O2", empty).as_tuple() == (0.0, 0.0, 0.0)


def test_lowering_majority_and_tiebreak(add_ret_graph):
    table = ev.DEFAULT_LOWERING_TABLE
    assert ev.lower_to_passes(("speed", "speed"), add_ret_graph) == table["speed"]
    assert ev.lower_to_passes(("none", "none"), add_ret_graph) == table["neutral"]
    # size/speed tie -> size wins
    assert ev.lower_to_passes(("speed", "size"), add_ret_graph) == table["size"]
    assert ev.lower_to_passes((), add_ret_graph) == table["neutral"]


def test_lowering_depends_only_on_table(add_ret_graph):
    custom = {"speed": ["a"], "size": ["b"], "neutral": ["c"]}
    assert ev.lower_to_passes(("speed", "speed"), add_ret_graph, custom) == ["a"]
    assert ev.table_hash(custom) != ev.table_hash()


def test_missing_toolchain_never_falls_back(add_ret_graph):
    cfg = ev.ToolchainConfig(compiler="definitely-not-a-compiler-xyz")
    ext = ev.ExternalEvaluator(cfg)
    with pytest.raises(ToolchainMissingError):
        ext.evaluate("whatever.c", ("none", "none"), add_ret_graph)


def test_external_smoke_compiles_and_measures(tmp_path, add_ret_graph):
    import shutil
    if not shutil.which("clang"):
        pytest.skip("clang not available")
    src = tmp_path / "unit.c"
    src.write_text("int main(void){volatile int s=0;for(int i=0;i<1000;i++)s+=i;return 0;}\n")
    cfg = ev.ToolchainConfig(compiler="clang", runs=1, timeout_s=60.0)
    ext = ev.ExternalEvaluator(cfg)
    m1 = ext.evaluate(str(src), ("none", "none"), add_ret_graph)
    m2 = ext.evaluate(str(src), ("none", "none"), add_ret_graph)
    assert m1.code_size > 0 and m1.exec_time > 0 and m1.energy > 0
    assert m1.code_size == m2.code_size  # deterministic compilation


def test_energy_range_brackets_all_assignments(add_ret_graph):
    lo, hi = ev.energy_range(add_ret_graph)
    for assignment in itertools.product(ev.DIRECTIVES, repeat=2):
        e = ev.synth_evaluate(add_ret_graph, assignment).energy
        assert lo - 1e-12 <= e <= hi + 1e-12
