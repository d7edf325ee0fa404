import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conestab.cones import vec
from conestab.expr import (
    ArityError,
    Binary,
    EvaluationError,
    ExprSyntaxError,
    Num,
    Unary,
    UnknownIdentifierError,
    Var,
    parse_expression,
    pretty,
    tokenize,
)


def reference_eval(node, x):
    """Straightforward recursive evaluator, the oracle for compiled closures."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x[node.index - 1]
    if isinstance(node, Unary):
        v = reference_eval(node.operand, x)
        return {
            "neg": lambda: -v,
            "abs": lambda: abs(v),
            "sin": lambda: math.sin(v),
            "cos": lambda: math.cos(v),
            "sqrt": lambda: math.sqrt(v),
        }[node.op]()
    a = reference_eval(node.left, x)
    if node.op == "^":
        return a ** int(node.right.value)
    b = reference_eval(node.right, x)
    return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else math.nan}[node.op]


def random_source(rng, depth, dim):
    """Random expression text using minimal parentheses and random spacing."""
    sp = lambda: rng.choice(["", " ", "  "])  # noqa: E731
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.5:
            return f"x{rng.randint(1, dim)}"
        return rng.choice(["2", "0.5", "3.25", "1e-2", ".75", "10"])
    kind = rng.choice(["bin", "bin", "bin", "neg", "func", "pow", "paren"])
    if kind == "bin":
        op = rng.choice("+-*/")
        return f"{random_source(rng, depth - 1, dim)}{sp()}{op}{sp()}{random_source(rng, depth - 1, dim)}"
    if kind == "neg":
        return f"-{sp()}{random_source(rng, depth - 1, dim)}"
    if kind == "func":
        return f"{rng.choice(['abs', 'sin', 'cos', 'sqrt'])}({sp()}{random_source(rng, depth - 1, dim)}{sp()})"
    if kind == "pow":
        return f"({random_source(rng, depth - 1, dim)})^{rng.choice(['2', '3', '-1', '0'])}"
    return f"({random_source(rng, depth - 1, dim)})"


def build_corpus(n=100):
    """The first ``n`` distinct compound expressions over consecutive seeds."""
    out, seed = [], 0
    while len(out) < n:
        text = random_source(random.Random(seed), 4, 3)
        seed += 1
        if text not in out and any(c in text for c in "+-*/^("):
            out.append(text)
    return out


CORPUS = build_corpus()


class TestExamples:
    def test_valid(self):
        e = parse_expression("x1^2 + 0.1*sin(3*x1)")
        assert e.dimension == 1
        assert e(2.0) == pytest.approx(4 + 0.1 * math.sin(6.0), rel=1e-15)

    def test_syntax_offset(self):
        with pytest.raises(ExprSyntaxError) as info:
            parse_expression("x1 + * 2")
        assert info.value.offset == 5

    def test_unknown_variable(self):
        with pytest.raises(UnknownIdentifierError):
            parse_expression("x3", dimension=2)


class TestGrammar:
    def test_precedence(self):
        # ^ binds tighter than unary minus, which binds tighter than * and /
        assert parse_expression("-x1^2")(3.0) == -9.0
        assert parse_expression("2*-x1")(3.0) == -6.0
        assert parse_expression("1 + 2 * 3 ^ 2")(0.0) == 19.0

    def test_left_associative(self):
        assert parse_expression("8 - 4 - 2")(0.0) == 2.0
        assert parse_expression("8 / 4 / 2")(0.0) == 1.0
        assert parse_expression("2 ^ 3 ^ 2")(0.0) == 64.0

    def test_negative_exponent(self):
        assert parse_expression("x1^-2")(2.0) == 0.25

    def test_functions(self):
        e = parse_expression("abs(x1) + sqrt(x2) + cos(0)", dimension=2)
        assert e(vec(-2.0, 9.0)) == 6.0
        assert e.dimension == 2

    def test_ast_shape(self):
        root = parse_expression("x1 - 2 * x2").root
        assert root == Binary("-", Var(1), Binary("*", Num(2.0), Var(2)))
        assert parse_expression("-sin(x1)").root == Unary("neg", Unary("sin", Var(1)))

    def test_byte_offsets(self):
        # the non-ASCII character is two bytes in UTF-8
        with pytest.raises(ExprSyntaxError) as info:
            parse_expression("x1 + é")
        assert info.value.offset == 5
        toks = tokenize("x1 + 2")
        assert [t.offset for t in toks] == [0, 3, 5, 6]


class TestErrors:
    @pytest.mark.parametrize(
        "text, offset",
        [("", 0), ("x1 +", 4), ("(x1", 3), ("x1)", 2), ("x1 ^ 1.5", 5), ("x1 ^ x2", 5), ("2 3", 2), ("1e999", 0)],
    )
    def test_syntax(self, text, offset):
        with pytest.raises(ExprSyntaxError) as info:
            parse_expression(text)
        assert info.value.offset == offset

    @pytest.mark.parametrize("text", ["y", "x0", "pi", "exp(x1)"])
    def test_unknown(self, text):
        with pytest.raises(UnknownIdentifierError):
            parse_expression(text)

    @pytest.mark.parametrize("text", ["sin()", "cos(x1, x1)", "abs(1,2,3)"])
    def test_arity(self, text):
        with pytest.raises(ArityError):
            parse_expression(text)

    def test_evaluation_errors_are_not_parse_errors(self):
        e = parse_expression("1 / x1 + sqrt(x1 - 1)")
        with pytest.raises(EvaluationError):
            e(0.0)
        with pytest.raises(EvaluationError):
            parse_expression("sqrt(x1)")(-1.0)
        with pytest.raises(EvaluationError):
            parse_expression("x1^-1")(0.0)

    def test_wrong_point_dimension(self):
        with pytest.raises(EvaluationError):
            parse_expression("x1 + x2")(vec(1.0))

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            parse_expression("x1", dimension=0)


class TestCorpus:
    def test_corpus_size(self):
        assert len(CORPUS) == len(set(CORPUS)) == 100

    @pytest.mark.parametrize("text", CORPUS)
    def test_round_trip(self, text):
        e = parse_expression(text, dimension=3)
        again = parse_expression(pretty(e.root), dimension=3)
        assert again.root == e.root
        assert pretty(again.root) == pretty(e.root)

    @pytest.mark.parametrize("text", CORPUS)
    def test_matches_python(self, text):
        # Python agrees on precedence once ^ becomes ** inside explicit parentheses
        e = parse_expression(text, dimension=3)
        x = (0.75, -1.5, 2.25)
        env = {"x1": x[0], "x2": x[1], "x3": x[2], "abs": abs, "sin": math.sin, "cos": math.cos, "sqrt": math.sqrt}
        try:
            expected = eval(text.replace("^", "**"), {"__builtins__": {}}, env)  # noqa: S307
        except (ZeroDivisionError, ValueError, OverflowError):
            return
        if isinstance(expected, complex):
            return
        try:
            got = e(x)
        except EvaluationError:
            pytest.fail(f"{text!r} raised but Python evaluated it")
        if math.isfinite(expected):
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(st.integers(0, 10**6), st.lists(st.floats(-4, 4), min_size=3, max_size=3))
@settings(max_examples=300)
def test_compiled_matches_reference(seed, x):
    text = random_source(random.Random(seed), 4, 3)
    e = parse_expression(text, dimension=3)
    try:
        got = e(x)
    except (EvaluationError, OverflowError):
        return
    try:
        ref = reference_eval(e.root, x)
    except (ValueError, ZeroDivisionError, OverflowError):
        return
    if math.isnan(ref) or isinstance(ref, complex):
        return
    if math.isinf(ref):
        assert got == ref
    else:
        assert abs(got - ref) <= math.ulp(ref)
