"""Expression language: grammar, evaluation, errors, round trips."""

import math
import random

import numpy as np
import pytest

from pendavg.expr import (
    BinOp,
    Call,
    Const,
    EvalEnv,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    Num,
    Var,
    compile_expr,
    evaluate,
    format_expr,
    parse,
)

ENV = EvalEnv(tau=0.7, th1=0.3, th1d=-0.2, th2=1.1, th2d=0.4)


def test_parse_corollary1_forcing_structure():
    e = parse("(1 - th1^2) * sin(w1 * tau)")
    assert e == BinOp(
        "*",
        BinOp("-", Num(1.0), BinOp("^", Var("th1"), Num(2.0))),
        Call("sin", BinOp("*", Const("w1"), Var("tau"))),
    )


def test_parse_corollary2_forcing_structure():
    e = parse("th2d + th1^2 * cos(w2 * tau)")
    assert e == BinOp(
        "+",
        Var("th2d"),
        BinOp("*", BinOp("^", Var("th1"), Num(2.0)), Call("cos", BinOp("*", Const("w2"), Var("tau")))),
    )


def test_parse_zero_is_constant():
    assert parse("0") == Num(0.0)
    assert evaluate(parse("0"), ENV) == 0.0


def test_eval_reserved_constants():
    assert evaluate(parse("w1"), ENV) == math.sqrt(2.0 - math.sqrt(2.0))
    assert evaluate(parse("w2"), ENV) == math.sqrt(2.0 + math.sqrt(2.0))
    assert evaluate(parse("sin(pi/2)"), ENV) == 1.0


def test_precedence_and_unary_minus():
    assert evaluate(parse("1 + 2 * 3"), ENV) == 7.0
    assert evaluate(parse("-th1^2"), ENV) == -(0.3**2)
    assert evaluate(parse("2 * -3"), ENV) == -6.0
    assert evaluate(parse("2^-2"), ENV) == 0.25
    assert evaluate(parse("th1^(-2)"), ENV) == 0.3**-2
    assert evaluate(parse("1 - 2 - 3"), ENV) == -4.0
    assert evaluate(parse("12 / 2 / 3"), ENV) == 2.0


@pytest.mark.parametrize(
    "text",
    ["2x", "(1 + ", "sin th1", "1 +* 2", "", "foo + 1", "sin(th1, th2)", "th1^th2", "th1("],
)
def test_syntax_errors_carry_offsets(text):
    with pytest.raises(ExprSyntaxError) as err:
        parse(text)
    assert err.value.offset >= 0


def test_unknown_identifier_message():
    with pytest.raises(ExprSyntaxError, match="unknown identifier 'theta'"):
        parse("theta + 1")


def test_arity_mismatch_message():
    with pytest.raises(ExprSyntaxError, match="takes 1 argument"):
        parse("sin(1, 2)")


def test_implicit_multiplication_rejected():
    with pytest.raises(ExprSyntaxError, match="implicit multiplication"):
        parse("2 th1")


@pytest.mark.parametrize(
    "text",
    ["sqrt(0 - 1)", "1 / (th1 - th1)", "0^(-1)", "(0 - 2)^0.5", "exp(1e308)"],
)
def test_domain_errors_are_raised_not_nan(text):
    with pytest.raises(ExprDomainError):
        evaluate(parse(text), ENV)


def test_integer_exponent_allows_negative_base():
    assert evaluate(parse("(0 - 2)^3"), ENV) == -8.0
    assert evaluate(parse("(0 - 2)^2"), ENV) == 4.0


def test_nonfinite_env_rejected():
    with pytest.raises(ExprDomainError):
        evaluate(parse("th1"), EvalEnv(tau=0.0, th1=math.inf, th1d=0.0, th2=0.0, th2d=0.0))


def test_eval_is_pure():
    e = parse("sin(w1 * tau) * exp(th1) - th2d / 3")
    assert evaluate(e, ENV) == evaluate(e, ENV)


_CORPUS = [
    "0",
    "w1",
    "(1 - th1^2) * sin(w1 * tau)",
    "th2d + th1^2 * cos(w2 * tau)",
    "-(th1 + th2) / (1 + tau)",
    "exp(-tau) * abs(th1d - th2d)",
    "sqrt(th1^2 + 1) - 2 ^ -3",
    "1 - 2 - 3 - th1",
    "1 / 2 / (3 / tau)",
    "-sin(pi * tau) * -cos(pi * th2)",
]


@pytest.mark.parametrize("text", _CORPUS)
def test_format_round_trip_on_corpus(text):
    e = parse(text)
    assert parse(format_expr(e)) == e


def _random_expr(rng, depth):
    # Stays within the parser's image: literals are non-negative (a leading
    # minus always parses as negation, never as part of the number).
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(
            [
                Num(round(rng.uniform(0, 5), 3)),
                Var(rng.choice(["tau", "th1", "th1d", "th2", "th2d"])),
                Const(rng.choice(["pi", "w1", "w2"])),
            ]
        )
    kind = rng.random()
    if kind < 0.15:
        return Neg(_random_expr(rng, depth - 1))
    if kind < 0.35:
        return Call(rng.choice(["sin", "cos", "exp", "abs"]), _random_expr(rng, depth - 1))
    if kind < 0.45:
        return BinOp("^", _random_expr(rng, depth - 1), Num(float(rng.randint(0, 4))))
    op = rng.choice(["+", "-", "*", "/"])
    return BinOp(op, _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))


def test_format_round_trip_on_random_trees():
    rng = random.Random(1234)
    for _ in range(300):
        e = _random_expr(rng, 4)
        assert parse(format_expr(e)) == e


def test_parser_never_crashes_on_junk():
    # Whatever bytes arrive from a config file or flag, the parser either
    # returns an Expr or raises its own syntax error, nothing else.
    rng = random.Random(7)
    alphabet = "01234567890.+-*/^()abcdefgwxyz_ ,\tsincoexpqrtau"
    for _ in range(500):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 24)))
        try:
            parse(text)
        except ExprSyntaxError:
            pass


def test_compiled_matches_tree_walk():
    rng = random.Random(99)
    exprs = [parse(t) for t in _CORPUS if "/" not in t]  # avoid random zero divisors
    for e in exprs:
        fn = compile_expr(e)
        for _ in range(25):
            env = EvalEnv(*(rng.uniform(0.1, 2.0) for _ in range(5)))
            want = evaluate(e, env)
            got = float(fn(env.tau, env.th1, env.th1d, env.th2, env.th2d))
            assert math.isclose(want, got, rel_tol=1e-13, abs_tol=1e-13)


def test_compiled_broadcasts_over_arrays():
    fn = compile_expr(parse("(1 - th1^2) * sin(w1 * tau)"))
    taus = np.linspace(0.0, 5.0, 11)
    th1 = np.linspace(-1.0, 1.0, 11)
    out = fn(taus, th1, 0.0, 0.0, 0.0)
    assert out.shape == (11,)
    e = parse("(1 - th1^2) * sin(w1 * tau)")
    for i in range(11):
        env = EvalEnv(tau=taus[i], th1=th1[i], th1d=0.0, th2=0.0, th2d=0.0)
        assert math.isclose(out[i], evaluate(e, env), rel_tol=1e-14, abs_tol=1e-14)
