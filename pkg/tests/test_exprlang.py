import cmath
import math
import random

import pytest

from levichk.exprlang import (
    Add,
    Bindings,
    Call,
    Div,
    ExprDiffError,
    ExprEvalError,
    ExprSyntaxError,
    ImagUnit,
    Mul,
    Neg,
    Num,
    Param,
    Pow,
    Sub,
    Var,
    d_dt,
    depends_on_t,
    evaluate,
    eval_on_grid,
    param_names,
    parse,
    to_source,
    x_indices,
)

import numpy as np


# ---------------------------------------------------------------------------
# parsing


def test_parse_precedence_and_unary():
    # ^ binds tighter than unary minus, which binds tighter than * and /
    assert parse("-t^2") == Neg(Pow(Var("t"), Num(2.0)))
    assert parse("2*t + 1") == Add(Mul(Num(2.0), Var("t")), Num(1.0))
    assert parse("1 - 2 - 3") == Sub(Sub(Num(1.0), Num(2.0)), Num(3.0))
    assert parse("a*t^2") == Mul(Param("a"), Pow(Var("t"), Num(2.0)))


def test_power_right_associative():
    assert parse("2^3^2") == Pow(Num(2.0), Pow(Num(3.0), Num(2.0)))
    assert evaluate(parse("2^3^2"), Bindings()) == 512


def test_negative_exponent():
    e = parse("t^-2")
    assert e == Pow(Var("t"), Neg(Num(2.0)))
    assert evaluate(e, Bindings(t=2.0)) == 0.25


def test_parse_identifiers():
    assert parse("i") == ImagUnit()
    assert parse("t") == Var("t")
    assert parse("x1") == Var("x1")
    assert parse("x2") == Var("x2")
    assert parse("alpha") == Param("alpha")
    # a lone x is a parameter, not a space variable
    assert parse("x") == Param("x")


def test_parse_function_call():
    assert parse("sin(t)") == Call("sin", Var("t"))
    assert parse("sqrt(1 + t^2)") == Call("sqrt", Add(Num(1.0), Pow(Var("t"), Num(2.0))))


def test_no_implicit_multiplication():
    with pytest.raises(ExprSyntaxError):
        parse("2 t")
    with pytest.raises(ExprSyntaxError):
        parse("(1)(2)")


def test_unknown_function():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("tan(t)")
    assert "tan" in str(exc.value)


def test_syntax_error_offset_and_expected():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("sqrt(t")
    assert exc.value.offset == 6
    assert ")" in exc.value.expected


def test_trailing_garbage_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("1 + 2)")


def test_empty_input_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("")


# ---------------------------------------------------------------------------
# printing


def test_print_parse_roundtrip_simple():
    for src in ["-t^2", "1 - 2 - 3", "t^-2", "2^3^2", "sin(t)*cos(x1)", "a/(1 + t)"]:
        e = parse(src)
        assert parse(to_source(e)) == e


def _random_expr(rng, depth, dim=2):
    if depth == 0 or rng.random() < 0.25:
        choice = rng.randrange(5)
        if choice == 0:
            return Num(round(rng.uniform(0.2, 2.5), 3))
        if choice == 1:
            return Var("t")
        if choice == 2:
            return Var(f"x{rng.randrange(1, dim + 1)}")
        if choice == 3:
            return Param("a0")
        return ImagUnit()
    kind = rng.randrange(7)
    if kind == 0:
        return Neg(_random_expr(rng, depth - 1, dim))
    if kind == 1:
        return Add(_random_expr(rng, depth - 1, dim), _random_expr(rng, depth - 1, dim))
    if kind == 2:
        return Sub(_random_expr(rng, depth - 1, dim), _random_expr(rng, depth - 1, dim))
    if kind == 3:
        return Mul(_random_expr(rng, depth - 1, dim), _random_expr(rng, depth - 1, dim))
    if kind == 4:
        u = _random_expr(rng, depth - 1, dim)
        v = _random_expr(rng, depth - 1, dim)
        # keep the denominator away from zero
        return Div(u, Add(Mul(v, v), Num(1.0)))
    if kind == 5:
        return Pow(Call("cos", _random_expr(rng, depth - 1, dim)), Num(float(rng.randrange(2, 4))))
    return Call(rng.choice(["sin", "cos", "exp"]), _random_expr(rng, depth - 1, dim))


def test_print_parse_roundtrip_random():
    rng = random.Random(20240811)
    for _ in range(300):
        e = _random_expr(rng, rng.randrange(0, 6))
        src = to_source(e)
        assert parse(src) == e, src


# ---------------------------------------------------------------------------
# evaluation


def test_eval_documented_cases():
    b = Bindings(t=0.25)
    assert evaluate(parse("sqrt(t)"), b) == 0.5
    assert evaluate(parse("i^2"), Bindings()) == pytest.approx(-1.0)
    e = parse("exp(i*t)")
    val = evaluate(e, Bindings(t=math.pi))
    assert val == pytest.approx(-1.0)


def test_eval_unbound():
    with pytest.raises(ExprEvalError):
        evaluate(parse("x3"), Bindings(t=0.0, x=(1.0,)))
    with pytest.raises(ExprEvalError):
        evaluate(parse("alpha"), Bindings())


def test_eval_division_by_zero():
    with pytest.raises(ExprEvalError):
        evaluate(parse("1/t"), Bindings(t=0.0))


def test_eval_log_zero():
    with pytest.raises(ExprEvalError):
        evaluate(parse("log(t)"), Bindings(t=0.0))


def test_eval_deterministic():
    e = parse("sin(t)*exp(x1) + a/(1 + t^2)")
    b = Bindings(t=0.7, x=(0.3,), params={"a": 1.5})
    assert evaluate(e, b) == evaluate(e, b)


def test_eval_on_grid_matches_scalar():
    e = parse("sin(t)*cos(x1) + x2^2/(1 + a)")
    xs = np.linspace(-2, 2, 7)
    ys = np.linspace(0, 1, 7)
    grid = eval_on_grid(e, 0.3, [xs, ys], {"a": 2.0})
    for idx in range(7):
        expected = evaluate(e, Bindings(t=0.3, x=(xs[idx], ys[idx]), params={"a": 2.0}))
        assert grid[idx] == pytest.approx(expected, abs=1e-14)


# ---------------------------------------------------------------------------
# structural queries


def test_structure_queries():
    e = parse("sin(t)*x2 + beta*x1")
    assert depends_on_t(e)
    assert x_indices(e) == {1, 2}
    assert param_names(e) == {"beta"}
    assert not depends_on_t(parse("x1 + gamma"))


# ---------------------------------------------------------------------------
# differentiation


def test_d_dt_documented_cases():
    assert to_source(d_dt(parse("cos(t)"))) == "-sin(t)"
    assert d_dt(parse("x1^2")) == Num(0.0)
    assert d_dt(parse("42")) == Num(0.0)


def test_d_dt_power_rule():
    e = d_dt(parse("t^3"))
    assert evaluate(e, Bindings(t=2.0)) == pytest.approx(12.0)


def test_d_dt_symbolic_exponent():
    e = d_dt(parse("t^alpha"))
    b = Bindings(t=0.5, params={"alpha": 2.0})
    assert evaluate(e, b) == pytest.approx(1.0)


def test_d_dt_exponential_in_t():
    # a^u with t-free base
    e = d_dt(parse("2^t"))
    assert evaluate(e, Bindings(t=1.0)) == pytest.approx(2.0 * math.log(2.0))


def test_d_dt_both_dependent_rejected():
    with pytest.raises(ExprDiffError):
        d_dt(parse("t^t"))


def test_d_dt_abs():
    # abs over an x-only subtree is fine (derivative zero); over t it errors
    assert d_dt(parse("abs(x1)")) == Num(0.0)
    with pytest.raises(ExprDiffError):
        d_dt(parse("abs(t)"))
    with pytest.raises(ExprDiffError):
        d_dt(parse("x1*abs(sin(t))"))


def test_d_dt_matches_finite_differences():
    rng = random.Random(991)
    h = 1e-5
    checked = 0
    while checked < 200:
        e = _random_expr(rng, rng.randrange(0, 6))
        if not depends_on_t(e):
            continue
        try:
            de = d_dt(e)
        except ExprDiffError:
            continue
        t0 = rng.uniform(0.3, 0.9)
        b0 = Bindings(t=t0, x=(0.4, -0.7), params={"a0": 1.3})
        bp = Bindings(t=t0 + h, x=(0.4, -0.7), params={"a0": 1.3})
        bm = Bindings(t=t0 - h, x=(0.4, -0.7), params={"a0": 1.3})
        try:
            fp, fm = evaluate(e, bp), evaluate(e, bm)
            exact = evaluate(de, b0)
        except ExprEvalError:
            continue
        if max(abs(fp), abs(fm)) > 1e6:
            continue
        fd = (fp - fm) / (2 * h)
        assert abs(fd - exact) <= 1e-5 * (1.0 + abs(exact)), to_source(e)
        checked += 1


def test_d_dt_sqrt():
    e = d_dt(parse("sqrt(1 + t^2)"))
    t0 = 0.6
    expected = t0 / math.sqrt(1 + t0**2)
    assert evaluate(e, Bindings(t=t0)) == pytest.approx(expected)
