import json

import pytest

from conftest import EXAMPLE_PROBLEM
from errors import InstanceValidationError, ProblemParseError
from problem_io import ProblemOptions, emit_problem, load_problem, parse_problem, to_instance


def minimal_doc(**overrides):
    doc = {
        'dimension': 2,
        'matrices': [{'name': 'A1', 'rows': [[2.0, 0.0], [0.0, 2.0]]},
                     {'name': 'A2', 'rows': [[0.0, 1.5], [1.5, 0.0]]}],
        'edges': [[1, 2], [2, 1]],
        'delta': 1,
        'Delta': 2,
    }
    doc.update(overrides)
    return doc


def test_load_bundled_problem(example_problem):
    assert example_problem.dimension == 2
    assert [m.name for m in example_problem.matrices] == ['A1', 'A2', 'A3', 'A4']
    assert example_problem.edges == [(1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 1)]
    assert (example_problem.delta, example_problem.Delta) == (2, 3)
    assert example_problem.options.combination == [1, 3, 2, 2]
    assert example_problem.options.lambda_ == pytest.approx(0.0001)
    instance = to_instance(example_problem)
    assert instance.family.size == 4


def test_empty_document():
    with pytest.raises(ProblemParseError) as exc:
        parse_problem("   \n")
    assert exc.value.line == 1


def test_malformed_json_reports_location():
    text = '{\n  "dimension": 2,\n  "matrices": [,\n}'
    with pytest.raises(ProblemParseError) as exc:
        parse_problem(text)
    assert exc.value.line == 3
    assert exc.value.column is not None


def test_missing_field():
    doc = minimal_doc()
    del doc['delta']
    with pytest.raises(ProblemParseError) as exc:
        parse_problem(json.dumps(doc))
    assert exc.value.field == 'delta'


def test_bad_matrix_entry_has_field_path():
    doc = minimal_doc()
    doc['matrices'][1]['rows'][0][1] = "x"
    with pytest.raises(ProblemParseError) as exc:
        parse_problem(json.dumps(doc))
    assert exc.value.field == 'matrices[1].rows[0][1]'


def test_wrong_row_count():
    doc = minimal_doc(dimension=3)
    with pytest.raises(ProblemParseError) as exc:
        parse_problem(json.dumps(doc))
    assert exc.value.field == 'matrices[0].rows'


def test_non_finite_literal_rejected():
    text = json.dumps(minimal_doc()).replace('1.5', 'NaN', 1)
    with pytest.raises(ProblemParseError):
        parse_problem(text)


def test_unknown_option_rejected():
    with pytest.raises(ProblemParseError) as exc:
        parse_problem(json.dumps(minimal_doc(options={'colour': 'red'})))
    assert exc.value.field == 'options'


def test_unknown_kind_rejected():
    with pytest.raises(ProblemParseError) as exc:
        parse_problem(json.dumps(minimal_doc(options={'kinds': ['corollary9']})))
    assert exc.value.field == 'options.kinds'


def test_out_of_range_edge_fails_validation():
    problem = parse_problem(json.dumps(minimal_doc(edges=[[1, 2], [1, 5]])))
    with pytest.raises(InstanceValidationError) as exc:
        to_instance(problem)
    assert any("5" in v for v in exc.value.violations)


def test_emit_then_parse_preserves_problem(example_problem):
    again = parse_problem(emit_problem(example_problem))
    assert again == example_problem


def test_options_to_dict_drops_unset():
    opts = ProblemOptions(horizon=200, lambda_=0.01)
    assert opts.to_dict() == {'horizon': 200, 'lambda': 0.01}


def test_load_problem_from_path():
    assert load_problem(EXAMPLE_PROBLEM).name.startswith("four unstable")
