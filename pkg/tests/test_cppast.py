import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudocpp.cppast import (
    AstNode,
    CppToken,
    DataflowGraph,
    enumerate_subtrees,
    extract_dataflow,
    lex_cpp,
    parse_code,
    parse_cpp_subset,
)


def test_lex_kinds():
    tokens = lex_cpp("int a;")
    assert [(t.text, t.kind) for t in tokens] == [
        ("int", "keyword"),
        ("a", "identifier"),
        (";", "punctuation"),
    ]


def test_lex_longest_match():
    assert [t.text for t in lex_cpp("cin >> a")] == ["cin", ">>", "a"]
    assert [t.kind for t in lex_cpp("cin >> a")] == ["identifier", "operator", "identifier"]


def test_lex_empty():
    assert lex_cpp("") == []


def test_lex_strings_and_comments():
    tokens = lex_cpp('cout << "two words"; // say hi\n/* gone */ int x;')
    assert [t.text for t in tokens] == ["cout", "<<", '"two words"', ";", "int", "x", ";"]


def test_lex_positions():
    tokens = lex_cpp("int a;\n  b = 1;")
    assert tokens[0].position == (1, 1)
    assert tokens[3].position == (2, 3)  # b


def test_lex_numbers():
    assert [t.kind for t in lex_cpp("3.14 12 x9")] == ["number", "number", "identifier"]


def test_lex_unknown_char_is_punctuation():
    assert lex_cpp("@")[0].kind == "punctuation"


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet="abz01 ;,(){}<>=+-*/&|!\"'\n._", max_size=50))
def test_lex_round_trip(text):
    tokens = lex_cpp(text)
    rejoined = " ".join(t.text for t in tokens)
    assert [t.text for t in lex_cpp(rejoined)] == [t.text for t in tokens]


# --- parser -----------------------------------------------------------------


def test_parse_simple_declaration():
    tree, diagnostics = parse_code("int a;")
    assert diagnostics == []
    kinds = [n.kind for n in tree.walk()]
    assert kinds == ["TranslationUnit", "Decl", "Declarator"]
    assert tree.children[0].label == "int"


def test_parse_totality_on_junk():
    tree, _ = parse_code("$$$ ??? for while +++")
    assert tree.kind == "TranslationUnit"


def test_parse_addition_clean(golden_programs):
    for name in ("addition_a", "addition_b"):
        tree, diagnostics = parse_code(golden_programs[name])
        assert tree.count("ErrorNode") == 0, diagnostics


def test_parse_arraysum_recovers(golden_programs):
    for name in ("arraysum_a", "arraysum_b"):
        tree, diagnostics = parse_code(golden_programs[name])
        assert tree.count("ErrorNode") >= 1
        assert len(diagnostics) >= 1
        # recovery keeps parsing past the malformed runs
        assert tree.count("StreamOut") >= 1
        assert tree.count("For") >= 1


def test_parse_all_goldens_total(golden_programs):
    assert len(golden_programs) == 8
    for code in golden_programs.values():
        tree, _ = parse_code(code)
        assert tree.kind == "TranslationUnit" and tree.children


def test_parse_fixture_references_clean(overfit_pairs):
    for pair in overfit_pairs:
        tree, diagnostics = parse_code(pair.code)
        assert tree.count("ErrorNode") == 0, (pair.id_str, diagnostics)


def _check_spans(node: AstNode):
    lo, hi = node.span
    assert lo <= hi
    previous_end = lo
    for child in node.children:
        c_lo, c_hi = child.span
        assert lo <= c_lo and c_hi <= hi, f"{child.kind} not inside {node.kind}"
        assert c_lo >= previous_end, f"{child.kind} overlaps a sibling"
        previous_end = c_hi
        _check_spans(child)


def test_span_invariants_on_goldens(golden_programs):
    for code in golden_programs.values():
        tree, _ = parse_code(code)
        _check_spans(tree)


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet="abn01 ;,(){}<>=+-*/&|!\"'\nforwhile", max_size=60))
def test_parser_total_and_spans_on_random_text(text):
    tree, _ = parse_code(text)
    _check_spans(tree)


def test_if_without_braces():
    tree, diagnostics = parse_code("int main (){\nif (a > b)\ncout << a;\nelse\ncout << b;\n}")
    assert diagnostics == []
    assert tree.count("If") == 1 and tree.count("StreamOut") == 2


def test_stream_chain_targets():
    tree, diagnostics = parse_code("cin >> a >> arr[i];")
    assert diagnostics == []
    stream = next(n for n in tree.walk() if n.kind == "StreamIn")
    assert len(stream.children) == 2
    assert stream.children[1].kind == "Index"


# --- subtree fingerprints -----------------------------------------------------


def test_enumerate_counts_every_node_at_min_one():
    tree, _ = parse_code("int a;")
    node_count = sum(1 for _ in tree.walk())
    assert sum(enumerate_subtrees(tree, min_nodes=1).values()) == node_count


def test_enumerate_alpha_renaming_invariant():
    one, _ = parse_code("int alpha; cin >> alpha; cout << alpha + 1;")
    two, _ = parse_code("int beta; cin >> beta; cout << beta + 1;")
    assert enumerate_subtrees(one) == enumerate_subtrees(two)


def test_enumerate_min_nodes_larger_than_tree():
    tree, _ = parse_code("int a;")
    assert enumerate_subtrees(tree, min_nodes=99) == {}


def test_fingerprints_differ_on_operator():
    plus, _ = parse_code("cout << a + b;")
    minus, _ = parse_code("cout << a - b;")
    assert enumerate_subtrees(plus) != enumerate_subtrees(minus)


def _random_tree(rng: random.Random, budget: int) -> AstNode:
    kinds = ["Block", "If", "BinaryOp", "Ident", "Literal"]
    kind = rng.choice(kinds)
    node = AstNode(kind)
    if kind == "BinaryOp":
        node.label = rng.choice(["+", "-"])
    if kind == "Literal":
        node.label = rng.choice(["number", "string"])
    if kind == "Ident":
        node.name = rng.choice(["a", "b", "c"])
    remaining = budget - 1
    if kind in ("Block", "If", "BinaryOp"):
        while remaining > 0 and rng.random() < 0.6:
            child_budget = rng.randint(1, remaining)
            child = _random_tree(rng, child_budget)
            node.children.append(child)
            remaining -= sum(1 for _ in child.walk())
    return node


def _structure(node: AstNode) -> tuple:
    label = node.label if node.kind != "Ident" else ""
    return (node.kind, label, tuple(_structure(c) for c in node.children))


def test_fingerprint_collision_oracle():
    rng = random.Random(1234)
    trees = [_random_tree(rng, rng.randint(1, 12)) for _ in range(300)]
    seen: dict[str, tuple] = {}
    for tree in trees:
        root_only = enumerate_subtrees(tree, min_nodes=sum(1 for _ in tree.walk()))
        (root_fp,) = root_only.keys()
        structure = _structure(tree)
        if root_fp in seen:
            assert seen[root_fp] == structure, "fingerprint collision"
        seen[root_fp] = structure


# --- dataflow ------------------------------------------------------------------


def test_dataflow_stream_in_to_stream_out():
    tree, _ = parse_code("int a; cin >> a; cout << a;")
    graph = extract_dataflow(tree)
    assert graph.normalization == {"a": "var_0"}
    assert len(graph.edges) == 1
    edge = next(iter(graph.edges))
    assert edge.variable == "var_0" and not edge.loop_carried


def test_dataflow_alpha_invariance():
    one = extract_dataflow(parse_code("int a; cin >> a; cout << a;")[0])
    two = extract_dataflow(parse_code("int b; cin >> b; cout << b;")[0])
    assert one.match_keys == two.match_keys
    assert set(one.normalization.values()) == set(two.normalization.values())


def test_dataflow_no_variables():
    graph = extract_dataflow(parse_code('cout << "hi";')[0])
    assert len(graph.edges) == 0 and graph.normalization == {}


def test_dataflow_plain_declaration_is_not_definition():
    graph = extract_dataflow(parse_code("int a; cout << a;")[0])
    assert len(graph.edges) == 0


def test_dataflow_initialized_declaration_defines():
    graph = extract_dataflow(parse_code("int a = 1; cout << a;")[0])
    assert len(graph.edges) == 1


def test_dataflow_loop_carried_back_edge():
    tree, diagnostics = parse_code("int main (){\nint n = 9;\nfor (int i = 0; i < n; i++) {\ncout << i;\n}\n}")
    assert diagnostics == []
    graph = extract_dataflow(tree)
    carried = [e for e in graph.edges if e.loop_carried]
    assert carried, "increment should feed the condition on the next iteration"
    assert all(e.variable == graph.normalization["i"] for e in carried)


def test_dataflow_compound_assignment_reads_target():
    tree, _ = parse_code("int s = 0; int x = 1; s += x; cout << s;")
    graph = extract_dataflow(tree)
    s_var = graph.normalization["s"]
    defs = {(e.variable, e.def_span) for e in graph.edges}
    assert len({d for d in defs if d[0] == s_var}) == 2  # init def and += def both used


def test_dataflow_error_nodes_contribute_nothing():
    clean = extract_dataflow(parse_code("int a = 1; cout << a;")[0])
    messy = extract_dataflow(parse_code("int a = 1; $$$ ; cout << a;")[0])
    assert clean.match_keys == messy.match_keys
