import random

import pytest

from fleetplan.ltl import (
    Atom,
    FleetSpec,
    FormulaError,
    and_,
    atom,
    eventually,
    not_,
    or_,
    parse_formula,
    pretty,
    release,
    to_nnf,
    until,
    TRUE,
)
from fleetplan.oracle import LassoWord, semantic_accepts

from helpers import all_lassos


PHI1 = "F (pi(2,1,2,1) & F pi(2,1,3,1)) & F pi(1,2,4) & (! pi(2,1,3)) U pi(1,2,4)"


def test_parse_example_formula():
    f = parse_formula(PHI1)
    # top level is a conjunction ending in the until constraint
    assert f.op == "and"
    assert f.children[1].op == "until"
    assert f.children[1].children[0].op == "not"


def test_parse_true():
    assert parse_formula("true") is TRUE


def test_parse_missing_region_fails():
    with pytest.raises(FormulaError):
        parse_formula("pi(1,1)")


def test_parse_zero_count_fails():
    with pytest.raises(FormulaError):
        parse_formula("pi(0,1,1)")


def test_parse_syntax_error_has_position():
    with pytest.raises(FormulaError) as err:
        parse_formula("F (pi(1,1,1) &")
    assert "column" in str(err.value)


def test_operator_precedence():
    f = parse_formula("pi(1,1,1) & pi(1,1,2) | pi(1,1,3)")
    assert f.op == "or"
    g = parse_formula("! pi(1,1,1) U pi(1,1,2)")
    assert g.op == "until"
    assert g.children[0].op == "not"
    # U is right associative
    h = parse_formula("pi(1,1,1) U pi(1,1,2) U pi(1,1,3)")
    assert h.children[1].op == "until"


def test_roundtrip_fixed_formulas():
    for text in [PHI1, "true", "G F (pi(1,1,2,1) & F pi(1,1,3,1))",
                 "X (pi(1,1,1) R pi(2,1,2))", "! (pi(1,1,1) | pi(1,1,2))"]:
        f = parse_formula(text)
        assert parse_formula(pretty(f)) == f


def test_roundtrip_random_asts():
    rng = random.Random(3)
    atoms = [atom(Atom(1, 1, 1)), atom(Atom(2, 1, 2, 1)), atom(Atom(1, 2, 3))]

    def gen(depth):
        if depth == 0 or rng.random() < 0.3:
            return rng.choice(atoms)
        op = rng.choice(["not", "and", "or", "next", "until", "release", "F", "G"])
        if op == "not":
            return not_(gen(depth - 1))
        if op == "next":
            return __import__("fleetplan.ltl", fromlist=["next_"]).next_(gen(depth - 1))
        if op == "F":
            return eventually(gen(depth - 1))
        if op == "G":
            from fleetplan.ltl import always
            return always(gen(depth - 1))
        mk = {"and": and_, "or": or_, "until": until, "release": release}[op]
        return mk(gen(depth - 1), gen(depth - 1))

    for _ in range(200):
        f = gen(4)
        assert parse_formula(pretty(f)) == f


def test_validate_example_formulas():
    fleet = FleetSpec({1: 3, 2: 2}, frozenset(range(6)))
    assert parse_formula(PHI1) is not None
    assert bool(__validate(PHI1, fleet))
    assert bool(__validate("G F (pi(1,1,2,1) & F pi(1,1,3,1))", fleet))
    # the two invalid bindings: count mismatch, then type mismatch
    assert not __validate("F (pi(1,1,2,1) & F pi(2,1,3,1))", fleet)
    assert not __validate("F (pi(2,2,2,1) & F pi(2,1,3,1))", fleet)


def test_validate_no_connector_is_fine():
    fleet = FleetSpec({1: 1}, frozenset({1}))
    assert bool(__validate("F pi(1,1,1,0)", fleet))


def test_validate_reports_unknown_type_and_region():
    fleet = FleetSpec({1: 1}, frozenset({1}))
    rep = __validate("F pi(1,9,7)", fleet)
    assert not rep.valid
    assert any("type 9" in v for v in rep.violations)
    assert any("region 7" in v for v in rep.violations)


def __validate(text, fleet):
    from fleetplan.ltl import validate
    return validate(parse_formula(text), fleet)


def test_nnf_de_morgan_and_duals():
    a, b = atom(Atom(1, 1, 1)), atom(Atom(1, 1, 2))
    assert to_nnf(not_(and_(a, b))) == or_(not_(a), not_(b))
    assert to_nnf(not_(until(a, b))) == release(not_(a), not_(b))
    assert to_nnf(not_(not_(a))) == a


def test_nnf_only_negates_atoms():
    f = parse_formula("! (F (pi(1,1,1) & G pi(1,1,2)) | pi(1,1,3) U pi(1,1,1))")
    g = to_nnf(f)

    def check(h, under_not=False):
        if h.op == "not":
            assert h.children[0].op == "atom"
        for c in h.children:
            check(c)

    check(g)


def test_nnf_preserves_lasso_semantics():
    """Brute-force semantic agreement of f and nnf(f) on small lasso words."""
    rng = random.Random(11)
    a1, a2 = Atom(1, 1, 1), Atom(1, 1, 2)
    alphabet = [frozenset(), frozenset({a1}), frozenset({a2}), frozenset({a1, a2})]
    words = all_lassos(alphabet, 4)

    def gen(depth):
        if depth == 0 or rng.random() < 0.35:
            return rng.choice([atom(a1), atom(a2), TRUE])
        op = rng.choice(["not", "and", "or", "next", "until", "release"])
        if op == "not":
            return not_(gen(depth - 1))
        if op == "next":
            from fleetplan.ltl import next_
            return next_(gen(depth - 1))
        mk = {"and": and_, "or": or_, "until": until, "release": release}[op]
        return mk(gen(depth - 1), gen(depth - 1))

    rng2 = random.Random(5)
    for trial in range(30):
        f = gen(3)
        g = to_nnf(f)
        for w in rng2.sample(words, 60):
            assert semantic_accepts(f, w) == semantic_accepts(g, w), (pretty(f), w)
