"""
Problem documents: JSON with matrices, edges, dwell bounds and run options.

{
  "dimension": 2,
  "matrices": [{"name": "A1", "rows": [[...], [...]]}, ...],
  "edges": [[1, 2], [2, 1]],
  "delta": 2,
  "Delta": 3,
  "options": {"m_max": 64, "horizon": 500, ...}
}
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from errors import ProblemParseError
from models import DwellBounds, ProblemInstance, SubsystemFamily, SwitchGraph, validate_instance
from stability_certificates import ResultKind

logger = logging.getLogger(__name__)

OPTION_FIELDS = ('m_max', 'max_interior', 'allow_stable', 'escalate_m', 'seed', 'horizon',
                 'trials', 'workers', 'kinds', 'combination', 'lambda')


@dataclass
class NamedMatrix:
    name: str
    rows: List[List[float]]


@dataclass
class ProblemOptions:
    m_max: Optional[int] = None
    max_interior: Optional[int] = None
    allow_stable: bool = False
    escalate_m: bool = False
    seed: Optional[int] = None
    horizon: Optional[int] = None
    trials: Optional[int] = None
    workers: Optional[int] = None
    kinds: Optional[List[str]] = None
    combination: Optional[List[int]] = None
    lambda_: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        raw = asdict(self)
        raw['lambda'] = raw.pop('lambda_')
        return {k: v for k, v in raw.items() if v is not None and v is not False}


@dataclass
class ProblemFile:
    dimension: int
    matrices: List[NamedMatrix]
    edges: List[Tuple[int, int]]
    delta: int
    Delta: int
    options: ProblemOptions = field(default_factory=ProblemOptions)
    name: Optional[str] = None


def _fail(message: str, field_name: str):
    raise ProblemParseError(message, field=field_name)


def _integer(value: Any, field_name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"expected an integer, got {value!r}", field_name)
    return value


def _real(value: Any, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"expected a number, got {value!r}", field_name)
    if not math.isfinite(value):
        _fail(f"non-finite number {value!r}", field_name)
    return float(value)


def _require(doc: Dict[str, Any], key: str) -> Any:
    if key not in doc:
        _fail("missing required field", key)
    return doc[key]


def _reject_constant(name: str):
    raise ValueError(f"non-finite literal {name}")


def _parse_matrices(raw: Any, d: int) -> List[NamedMatrix]:
    if not isinstance(raw, list) or not raw:
        _fail("expected a non-empty list of matrices", "matrices")
    parsed = []
    for k, entry in enumerate(raw):
        where = f"matrices[{k}]"
        if not isinstance(entry, dict):
            _fail("expected an object with 'rows'", where)
        name = entry.get('name', f"A{k + 1}")
        rows = entry.get('rows')
        if not isinstance(rows, list) or len(rows) != d:
            _fail(f"expected {d} rows", f"{where}.rows")
        values = []
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                _fail(f"expected {d} entries", f"{where}.rows[{r}]")
            values.append([_real(v, f"{where}.rows[{r}][{c}]") for c, v in enumerate(row)])
        parsed.append(NamedMatrix(name=str(name), rows=values))
    return parsed


def _parse_edges(raw: Any) -> List[Tuple[int, int]]:
    if not isinstance(raw, list):
        _fail("expected a list of [from, to] pairs", "edges")
    edges = []
    for k, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            _fail("expected a [from, to] pair", f"edges[{k}]")
        edges.append((_integer(pair[0], f"edges[{k}][0]"), _integer(pair[1], f"edges[{k}][1]")))
    return edges


def _parse_options(raw: Any) -> ProblemOptions:
    if raw is None:
        return ProblemOptions()
    if not isinstance(raw, dict):
        _fail("expected an object", "options")
    unknown = sorted(set(raw) - set(OPTION_FIELDS))
    if unknown:
        _fail(f"unknown option(s) {', '.join(unknown)}", "options")

    opts = ProblemOptions()
    for key in ('m_max', 'max_interior', 'seed', 'horizon', 'trials', 'workers'):
        if raw.get(key) is not None:
            setattr(opts, key, _integer(raw[key], f"options.{key}"))
    for key in ('allow_stable', 'escalate_m'):
        if key in raw:
            if not isinstance(raw[key], bool):
                _fail("expected true or false", f"options.{key}")
            setattr(opts, key, raw[key])
    if raw.get('kinds') is not None:
        valid = {k.value for k in ResultKind}
        kinds = raw['kinds']
        if not isinstance(kinds, list) or any(k not in valid for k in kinds):
            _fail(f"expected a list drawn from {sorted(valid)}", "options.kinds")
        opts.kinds = list(kinds)
    if raw.get('combination') is not None:
        combo = raw['combination']
        if not isinstance(combo, list) or len(combo) != 4:
            _fail("expected [i, j, p, q]", "options.combination")
        opts.combination = [_integer(v, f"options.combination[{k}]") for k, v in enumerate(combo)]
    if raw.get('lambda') is not None:
        opts.lambda_ = _real(raw['lambda'], "options.lambda")
    return opts


def parse_problem(text: str) -> ProblemFile:
    """
    Parse a problem document.

    Raises:
        ProblemParseError with line/column for syntax errors and the field
        path for structural ones
    """
    if not text or not text.strip():
        raise ProblemParseError("empty problem document", line=1, column=1)
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ProblemParseError(f"malformed document: {e.msg}", line=e.lineno, column=e.colno)
    except ValueError as e:
        raise ProblemParseError(f"malformed number: {e}")
    if not isinstance(doc, dict):
        raise ProblemParseError("top level must be an object", line=1, column=1)

    d = _integer(_require(doc, 'dimension'), 'dimension')
    if d < 1:
        _fail("dimension must be positive", 'dimension')

    return ProblemFile(
        dimension=d,
        matrices=_parse_matrices(_require(doc, 'matrices'), d),
        edges=_parse_edges(_require(doc, 'edges')),
        delta=_integer(_require(doc, 'delta'), 'delta'),
        Delta=_integer(_require(doc, 'Delta'), 'Delta'),
        options=_parse_options(doc.get('options')),
        name=doc.get('name'),
    )


def emit_problem(problem: ProblemFile) -> str:
    doc: Dict[str, Any] = {}
    if problem.name is not None:
        doc['name'] = problem.name
    doc.update({
        'dimension': problem.dimension,
        'matrices': [{'name': m.name, 'rows': m.rows} for m in problem.matrices],
        'edges': [list(e) for e in problem.edges],
        'delta': problem.delta,
        'Delta': problem.Delta,
    })
    options = problem.options.to_dict()
    if options:
        doc['options'] = options
    return json.dumps(doc, indent=2)


def load_problem(path: str) -> ProblemFile:
    with open(path, 'r') as f:
        text = f.read()
    problem = parse_problem(text)
    logger.info(f"Loaded problem from {path}: {len(problem.matrices)} subsystems, {len(problem.edges)} edges")
    return problem


def to_instance(problem: ProblemFile, allow_stable: Optional[bool] = None) -> ProblemInstance:
    """Build and validate the instance described by a problem document"""
    family = SubsystemFamily.from_lists([m.rows for m in problem.matrices],
                                        names=[m.name for m in problem.matrices])
    bounds = DwellBounds(problem.delta, problem.Delta)
    graph = SwitchGraph.from_edges(len(problem.matrices), problem.edges)
    stable = problem.options.allow_stable if allow_stable is None else allow_stable
    return validate_instance(family, bounds, graph, allow_stable=stable)
