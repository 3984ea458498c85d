import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relcoder.ontology import (
    EdgeTypeTable,
    MajorCodeIndex,
    OntologyError,
    edge_type,
    hop_distance,
    major_code_of,
    parse_ontology,
)


def random_forest(rng, n_nodes, n_roots=1):
    """Random parent assignment; returns (hierarchy text, node names, graph)."""
    names = [f"n{i}" for i in range(n_nodes)]
    lines = []
    graph = nx.Graph()
    graph.add_nodes_from(names)
    for i in range(n_roots, n_nodes):
        parent = names[rng.integers(0, i)]
        lines.append(f"{names[i]}\t{parent}")
        graph.add_edge(names[i], parent)
    return "\n".join(lines), names, graph


class TestParse:
    def test_single_edge_readback(self):
        ont = parse_ontology("250.03\t250", ["250.03"])
        assert ont.nodes == {"250.03", "250"}
        assert ont.parent["250.03"] == "250"
        assert ont.depth["250.03"] == 1

    def test_missing_code_becomes_root(self):
        ont = parse_ontology("", ["A"])
        assert "A" in ont.roots
        assert ont.depth["A"] == 0

    def test_comments_and_blanks_ignored(self):
        ont = parse_ontology("# header\n\na\tb\n", ["a"])
        assert ont.parent["a"] == "b"

    def test_depths_match_bfs_oracle(self):
        rng = np.random.default_rng(5)
        text, names, graph = random_forest(rng, 50)
        ont = parse_ontology(text, names)
        oracle = nx.single_source_shortest_path_length(graph, names[0])
        for node in names:
            assert ont.depth[node] == oracle[node]

    def test_cycle_rejected(self):
        with pytest.raises(OntologyError, match="cycle"):
            parse_ontology("a\tb\nb\tc\nc\ta", ["a"])

    def test_conflicting_parents_rejected(self):
        with pytest.raises(OntologyError, match="conflicting"):
            parse_ontology("a\tb\na\tc", ["a"])

    def test_malformed_line_reports_number(self):
        with pytest.raises(OntologyError, match="line 2"):
            parse_ontology("a\tb\nnotabs", ["a"])

    def test_whitespace_code_rejected(self):
        with pytest.raises(OntologyError):
            parse_ontology("", ["has space"])


class TestMajorCode:
    def test_dot_prefix(self):
        assert major_code_of("250.03") == "250"

    def test_no_dot_is_own_major(self):
        assert major_code_of("586") == "586"

    def test_letter_prefix(self):
        assert major_code_of("E850.0") == "E850"

    @given(st.text(alphabet="0123456789.EV", min_size=1, max_size=8))
    def test_idempotent(self, code):
        assert major_code_of(major_code_of(code)) == major_code_of(code)

    def test_index_order_and_uniqueness(self):
        idx = MajorCodeIndex.build(["250.03", "250.1", "586", "E850.0", "250.9"])
        assert idx.majors == ("250", "586", "E850")
        assert idx.major_of["250.9"] == "250"
        assert idx.count == 3


class TestHopDistance:
    @pytest.fixture
    def small(self):
        return parse_ontology("250.03\t250\n250.1\t250\n250\tchap", ["250.03", "250.1"])

    def test_identity_zero(self, small):
        assert hop_distance("250.03", "250.03", small) == 0

    def test_parent_edge(self, small):
        assert hop_distance("250.03", "250", small) == 1

    def test_siblings(self, small):
        assert hop_distance("250.03", "250.1", small) == 2

    def test_cross_tree_unrelated(self):
        ont = parse_ontology("", ["a", "b"])
        assert hop_distance("a", "b", ont) is None

    def test_unknown_code_named(self, small):
        with pytest.raises(OntologyError, match="nope"):
            hop_distance("nope", "250", small)

    def test_random_pairs_match_bfs(self):
        rng = np.random.default_rng(17)
        text, names, graph = random_forest(rng, 200, n_roots=4)
        ont = parse_ontology(text, names)
        for _ in range(100):
            a, b = rng.choice(names, size=2)
            expected = nx.shortest_path_length(graph, a, b) if nx.has_path(graph, a, b) else None
            assert hop_distance(a, b, ont) == expected

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_metric_properties(self, seed):
        rng = np.random.default_rng(seed)
        text, names, _ = random_forest(rng, 20, n_roots=1)
        ont = parse_ontology(text, names)
        a, b, c = rng.choice(names, size=3)
        dab, dba = hop_distance(a, b, ont), hop_distance(b, a, ont)
        assert dab == dba
        assert (dab == 0) == (a == b)
        assert dab <= hop_distance(a, c, ont) + hop_distance(c, b, ont)


class TestEdgeType:
    def test_parent_is_bucket_one(self):
        ont = parse_ontology("x.1\tx", ["x.1"])
        assert edge_type("x", "x.1", ont, EdgeTypeTable()) == 1

    def test_capping(self):
        table = EdgeTypeTable(cap=6)
        chain = "\n".join(f"c{i}\tc{i + 1}" for i in range(9))
        ont = parse_ontology(chain, ["c0"])
        assert hop_distance("c0", "c9", ont) == 9
        assert table.bucket(hop_distance("c0", "c9", ont)) == 6

    def test_cross_tree_sentinel(self):
        table = EdgeTypeTable(cap=6)
        ont = parse_ontology("", ["a", "b"])
        assert edge_type("a", "b", ont, table) == table.sentinel_unrelated
        assert table.num_buckets == 8

    def test_deterministic_across_runs(self):
        text = "a.1\ta\nb.1\tb\na\tr\nb\tr"
        first = [
            edge_type(m, v, parse_ontology(text, ["a.1", "b.1"]), EdgeTypeTable())
            for m in ("a", "b") for v in ("a.1", "b.1")
        ]
        second = [
            edge_type(m, v, parse_ontology(text, ["a.1", "b.1"]), EdgeTypeTable())
            for m in ("a", "b") for v in ("a.1", "b.1")
        ]
        assert first == second


def test_parent_chain_terminates_within_node_count():
    rng = np.random.default_rng(23)
    text, names, _ = random_forest(rng, 64, n_roots=2)
    ont = parse_ontology(text, names)
    for node in ont.nodes:
        assert len(ont.ancestors(node)) <= len(ont.nodes)
        assert ont.ancestors(node)[-1] in ont.roots
