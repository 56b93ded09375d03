import itertools
from math import factorial

import numpy as np
import pytest

from conftest import A1, A2
from errors import InstanceValidationError, InvalidInputError
from models import (DwellBounds, Path, SubsystemFamily, SwitchGraph, collect_violations, enumerate_cycles,
                    enumerate_paths, family_bound_M, interior_product, validate_instance)


def test_example_instance_is_valid(family, bounds, graph):
    instance = validate_instance(family, bounds, graph)
    assert instance.family.size == 4
    assert instance.family.dimension == 2
    assert len(instance.graph.edges) == 6


def test_equal_dwell_bounds_rejected(family, graph):
    with pytest.raises(InstanceValidationError) as exc:
        validate_instance(family, DwellBounds(3, 3), graph)
    assert any("delta" in v for v in exc.value.violations)


def test_stable_subsystem_rejected_unless_allowed():
    family = SubsystemFamily.from_lists([A1, np.diag([0.5, 0.5])])
    graph = SwitchGraph.from_edges(2, [(1, 2), (2, 1)])
    with pytest.raises(InstanceValidationError):
        validate_instance(family, DwellBounds(1, 2), graph)
    assert validate_instance(family, DwellBounds(1, 2), graph, allow_stable=True).allow_stable


def test_violations_are_collected_together():
    family = SubsystemFamily.from_lists([A1, np.eye(3) * 2])
    graph = SwitchGraph.from_edges(2, [(1, 5), (2, 2)])
    violations = collect_violations(family, DwellBounds(2, 1), graph)
    assert len(violations) == 4


def test_family_bound_M(family):
    assert family_bound_M(family) == pytest.approx(1.41, abs=0.005)
    assert family_bound_M(SubsystemFamily.from_lists([np.eye(2)])) == pytest.approx(1.0)
    pair = SubsystemFamily.from_lists([np.diag([2.0, 1.0]), np.diag([0.5, 3.0])])
    assert family_bound_M(pair) == pytest.approx(3.0)


def test_enumerate_paths_example_graph(graph):
    paths = enumerate_paths(graph, 3, 1, max_interior=2)
    assert [p.to_list() for p in paths] == [[3, 2, 1], [3, 4, 1]]
    assert all(p.length == 1 for p in paths)


def test_enumerate_paths_direct_edge_only():
    graph = SwitchGraph.from_edges(2, [(1, 2)])
    paths = enumerate_paths(graph, 1, 2, max_interior=0)
    assert [p.to_list() for p in paths] == [[1, 2]]
    assert paths[0].length == 0


def test_enumerate_paths_disconnected():
    graph = SwitchGraph.from_edges(3, [(1, 2)])
    assert enumerate_paths(graph, 1, 3, max_interior=1) == []


def test_enumerate_paths_rejects_equal_endpoints(graph):
    with pytest.raises(InvalidInputError):
        enumerate_paths(graph, 2, 2, max_interior=2)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_complete_digraph_path_count(n):
    edges = [(a, b) for a, b in itertools.permutations(range(1, n + 1), 2)]
    graph = SwitchGraph.from_edges(n, edges)
    paths = enumerate_paths(graph, 1, n, max_interior=n - 2)
    expected = sum(factorial(n - 2) // factorial(n - 2 - k) for k in range(n - 1))
    assert len(paths) == expected
    for p in paths:
        assert p.follows(graph)
        assert len(set(p.interior)) == len(p.interior)
        assert 1 not in p.interior and n not in p.interior


def test_enumerate_cycles(graph):
    assert enumerate_cycles(graph, 1, max_interior=2) == [Path((1, 2, 1))]
    assert enumerate_cycles(graph, 1, max_interior=0) == []


def test_interior_product(family):
    a1, a2 = np.array(A1), np.array(A2)
    np.testing.assert_array_equal(interior_product(family, Path((1, 3)), 2), np.eye(2))
    np.testing.assert_allclose(interior_product(family, Path((3, 2, 1)), 2), a2 @ a2, atol=1e-12)
    np.testing.assert_allclose(interior_product(family, Path((3, 1, 2, 4)), 2),
                               a2 @ a2 @ a1 @ a1, atol=1e-12)


def test_single_interior_vertex_matches_power(family):
    for w in (1, 2, 4):
        np.testing.assert_array_equal(interior_product(family, Path((3, w, 3)), 3), family.power(w, 3))


def test_path_needs_two_vertices():
    with pytest.raises(InvalidInputError):
        Path((1,))
