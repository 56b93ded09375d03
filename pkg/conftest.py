import os

import numpy as np
import pytest

from models import DwellBounds, Path, SubsystemFamily, SwitchGraph, validate_instance
from problem_io import load_problem
from stability_certificates import PathQuad, ResultKind, SearchOptions, search_certificate

ROOT = os.path.dirname(os.path.abspath(__file__))
EXAMPLE_PROBLEM = os.path.join(ROOT, 'problems', 'four_subsystems.json')

A1 = [[0.796323, -0.9122466], [-0.7126696, 0.1040671]]
A2 = [[0.9660338, -0.972049], [-0.6582197, -0.94077]]
A3 = [[-0.5085495, -0.6519882], [-0.7370684, -0.5013346]]
A4 = [[-0.990773, 0.8742857], [0.780567, 0.9401844]]
EXAMPLE_EDGES = [(1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 1)]


def example_family() -> SubsystemFamily:
    return SubsystemFamily.from_lists([A1, A2, A3, A4])


def example_graph() -> SwitchGraph:
    return SwitchGraph.from_edges(4, EXAMPLE_EDGES)


def example_quad() -> PathQuad:
    return PathQuad(Path((3, 2, 1)), Path((3, 4, 1)), Path((1, 2, 3)), Path((1, 2, 3)))


def example_options() -> SearchOptions:
    return SearchOptions(kinds=[ResultKind.THEOREM1], combination=(1, 3, 2, 2), lambda_=0.0001)


@pytest.fixture
def family():
    return example_family()


@pytest.fixture
def graph():
    return example_graph()


@pytest.fixture
def bounds():
    return DwellBounds(2, 3)


@pytest.fixture
def instance(family, bounds, graph):
    return validate_instance(family, bounds, graph)


@pytest.fixture
def quad():
    return example_quad()


@pytest.fixture
def certificate(instance):
    result = search_certificate(instance, example_options())
    assert result.found
    return result.certificate


@pytest.fixture
def example_problem():
    return load_problem(EXAMPLE_PROBLEM)


@pytest.fixture
def rng():
    return np.random.default_rng(2019)
