import json
import math
from dataclasses import replace

import numpy as np
import pytest

from picardbvp import expr as ex
from picardbvp.oracle import integrate_ivp
from picardbvp.polynomial import MultiPoly
from picardbvp.problem import (
    Boundary,
    InitCondition,
    PolynomializeError,
    ProblemFileError,
    Unknown,
    derived_inits,
    estimate_lipschitz,
    load_problem,
    polynomialize,
    problem_from_dict,
    system_to_dict,
    validate,
)

from .conftest import EXAMPLES


def var(arity, i):
    return MultiPoly.variable(arity, i)


def test_sin_system_shape():
    spec = polynomialize(0, math.pi / 8, "sin(y)", Boundary(0, 1))
    assert spec.state_names == ("y", "u", "sin(y)", "cos(y)")
    y, u, v, w = (var(5, i) for i in range(1, 5))
    assert spec.rhs == (u, v, u * w, -(u * v))
    assert derived_inits(spec, 0.0, 0.3) == [0.0, 0.3, 0.0, 1.0]
    assert validate(spec) == []


def test_exp_system_shape():
    spec = polynomialize(0, 1.2, "-exp(-2*y)", Boundary(0, math.log(math.cos(1.2))))
    assert spec.n_states == 3
    y, u, v = (var(4, i) for i in range(1, 4))
    assert spec.rhs[1] == -v
    assert spec.rhs[2] == -2.0 * u * v
    assert derived_inits(spec, 0.0, 0.0)[2] == 1.0
    assert derived_inits(spec, math.log(2), 0.0)[2] == pytest.approx(0.25)


def test_polynomial_rhs_adds_no_states():
    spec = polynomialize(0, 1, "16 + (3 - 2*t)^3 + 1/4*y*u", Boundary(43 / 3, 17))
    assert spec.state_names == ("y", "u")
    t, y, u = (var(3, i) for i in range(3))
    assert spec.f == 16 + (3 - 2 * t) ** 3 + 0.25 * y * u


def test_polynomialize_idempotent_on_polynomial_input():
    spec = polynomialize(0, 1, "y*u - t", Boundary(0, 1))
    again = problem_from_dict(
        {
            "interval": [0, 1],
            "equation": {"system": system_to_dict(spec)},
            "boundary": {"left": {"kind": "value", "value": 0}, "right": {"kind": "value", "value": 1}},
        }
    ).spec
    assert again == spec


def test_shared_function_nodes():
    spec = polynomialize(0, 1, "exp(y) + 2*exp(y) + sin(y)*cos(y)", Boundary(0, 1))
    assert spec.state_names == ("y", "u", "exp(y)", "sin(y)", "cos(y)")


def test_ln_introduces_reciprocal():
    spec = polynomialize(0, 1, "ln(1 + y^2)", Boundary(0, 1))
    assert spec.state_names[2:] == ("reciprocal((1.0 + y^2))", "ln((1.0 + y^2))")


def test_unsupported_node_rejected_by_name():
    with pytest.raises(ex.ParseError, match="'tanh'"):
        polynomialize(0, 1, "tanh(y)", Boundary(0, 1))
    with pytest.raises(PolynomializeError, match="'sqrt'"):
        polynomialize(0, 1, ex.Func("sqrt", ex.Var("y")), Boundary(0, 1))


def test_derived_init_domain_error_names_state():
    spec = polynomialize(0, 1, "ln(y)", Boundary(0, 1))
    with pytest.raises(ex.EvaluationError, match="reciprocal"):
        derived_inits(spec, 0.0, 1.0)


def test_validate_diagnostics():
    spec = polynomialize(0, 1, "sin(y)", Boundary(0, 1))
    bad_first = replace(spec, rhs=(spec.rhs[1],) + spec.rhs[1:])
    assert any("first equation must be y' = u" in d for d in validate(bad_first))
    empty = replace(spec, a=1.0, b=1.0)
    assert any("empty interval" in d for d in validate(empty))
    two_unknowns = replace(spec, init=(InitCondition.unknown(),) + spec.init[1:])
    assert any("unknown" in d for d in validate(two_unknowns))


def test_left_value_mode():
    spec = polynomialize(0, 1, "0", Boundary(2.0, 5.0), Unknown.LEFT_VALUE)
    assert spec.init[0].kind == "unknown"
    assert spec.known_left == 2.0
    assert validate(spec) == []


def test_lipschitz_examples():
    box = {"y": (-17, 17), "u": (-9, 9)}
    assert estimate_lipschitz(polynomialize(0, 1, "-y", Boundary(0, 1)), box) == pytest.approx(1.0)
    assert estimate_lipschitz(polynomialize(0, 1, "3", Boundary(0, 1)), box) == 0.0
    assert estimate_lipschitz(polynomialize(0, 1, "1/4*y*u", Boundary(0, 1)), box) == pytest.approx(6.5)


def test_lipschitz_rejects_aux_dependence():
    with pytest.raises(ValueError, match="auxiliary"):
        estimate_lipschitz(polynomialize(0, 1, "exp(y)", Boundary(0, 1)), {"y": (0, 1), "u": (0, 1)})


@pytest.mark.parametrize(
    "text, fn",
    [
        ("exp(y)", np.exp),
        ("sin(y)", np.sin),
        ("cos(y)", np.cos),
        ("1/(2 + y)", lambda y: 1 / (2 + y)),
        ("ln(2 + y)", lambda y: np.log(2 + y)),
    ],
)
def test_closure_rules_reproduce_functions(text, fn):
    # rhs uses the function so an aux state exists; the flow carries F(y(t))
    spec = polynomialize(0, 1, f"-y + 0*{text}", Boundary(0.3, 0.0))
    traj = integrate_ivp(spec, 0.3, 0.5, step=1e-3)
    idx = spec.state_names.index(ex.to_string(ex.parse(text).right if "/" in text else ex.parse(text)))
    np.testing.assert_allclose(traj.values[:, idx], fn(traj.y), atol=1e-8)


def test_sin_cos_invariant_conserved():
    spec = polynomialize(0, 1, "-sin(y)", Boundary(0.4, 0.0))
    traj = integrate_ivp(spec, 0.4, 1.0, step=1e-3)
    v, w = traj.values[:, 2], traj.values[:, 3]
    assert np.max(np.abs(v**2 + w**2 - 1.0)) <= 1e-8


# --- problem files -----------------------------------------------------------


def test_bundled_files_load():
    for name in ["ex41_pi8", "ex41_pi4", "ex42", "ex43", "linear", "pendulum", "harmonic_system"]:
        p = load_problem(EXAMPLES / f"{name}.json")
        assert validate(p.spec) == []
    p = load_problem(EXAMPLES / "ex43.json")
    assert p.spec.beta == pytest.approx(math.log(math.cos(1.2)))
    assert p.exact_y(0.5) == pytest.approx(math.log(math.cos(0.5)))
    assert p.bracket == (-1.0, 1.0)


def test_system_form_matches_expr_form():
    a = load_problem(EXAMPLES / "ex41_pi8.json").spec
    b = load_problem(EXAMPLES / "harmonic_system.json").spec
    assert a == b


def test_json_error_has_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"interval": [0, 1],\n  "equation": }')
    with pytest.raises(ProblemFileError) as info:
        load_problem(path)
    assert info.value.line == 2


def test_expression_error_located_in_file(tmp_path):
    doc = {
        "interval": [0, 1],
        "equation": {"expr": "y u"},
        "boundary": {"left": {"kind": "value", "value": 0}, "right": {"kind": "value", "value": 1}},
    }
    path = tmp_path / "bad.json"
    text = json.dumps(doc, indent=1)
    path.write_text(text)
    with pytest.raises(ProblemFileError) as info:
        load_problem(path)
    expected = next(i for i, line in enumerate(text.splitlines(), 1) if '"y u"' in line)
    assert info.value.line == expected
    assert "implicit" in str(info.value)


def test_right_boundary_must_be_value():
    doc = {
        "interval": [0, 1],
        "equation": {"expr": "y"},
        "boundary": {"left": {"kind": "value", "value": 0}, "right": {"kind": "slope", "value": 1}},
    }
    with pytest.raises(ProblemFileError, match="right boundary"):
        problem_from_dict(doc)


def test_slope_left_boundary_selects_left_value_mode():
    doc = {
        "interval": [0, 1],
        "equation": {"expr": "0"},
        "boundary": {"left": {"kind": "slope", "value": 2}, "right": {"kind": "value", "value": 3}},
    }
    assert problem_from_dict(doc).spec.unknown is Unknown.LEFT_VALUE
