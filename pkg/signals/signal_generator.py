import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import count
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidInputError, PreconditionError
from models import DwellBounds, SwitchGraph
from stability_certificates import Certificate, PathQuad, ResultKind

logger = logging.getLogger(__name__)

NONPERIODIC_KINDS = frozenset({ResultKind.THEOREM1, ResultKind.COROLLARY2A, ResultKind.COROLLARY3A})


class SignalKind(Enum):
    NONPERIODIC = "nonperiodic"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class SignalBlock:
    index: int
    dwell: int


@dataclass(frozen=True)
class SignalGenerator:
    """
    Lazy block stream.

    NONPERIODIC: seq1, then s copies of seq2, for s = 1, 2, 3, ...
    PERIODIC: seq1 repeated forever (seq2 is empty)
    """
    kind: SignalKind
    seq1: Tuple[SignalBlock, ...]
    seq2: Tuple[SignalBlock, ...] = ()

    def iter_blocks(self) -> Iterator[SignalBlock]:
        if self.kind == SignalKind.PERIODIC:
            while True:
                yield from self.seq1
        for s in count(1):
            yield from self.seq1
            for _ in range(s):
                yield from self.seq2

    @property
    def minimal_horizon(self) -> int:
        return sum(b.dwell for b in self.seq1) + sum(b.dwell for b in self.seq2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'seq1': [[b.index, b.dwell] for b in self.seq1],
            'seq2': [[b.index, b.dwell] for b in self.seq2],
        }


@dataclass(eq=False)
class SwitchingSignal:
    blocks: List[SignalBlock]
    horizon: int
    generator: Optional[SignalGenerator] = None
    starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dwells = [b.dwell for b in self.blocks]
        self.starts = np.concatenate(([0], np.cumsum(dwells)[:-1])).astype(int) if dwells else np.zeros(0, dtype=int)

    @property
    def switch_times(self) -> List[int]:
        return [int(s) for s in self.starts]

    @property
    def covered(self) -> int:
        return int(sum(b.dwell for b in self.blocks))

    def indices(self) -> List[int]:
        """Active subsystem at every t in [0, horizon)"""
        active = []
        for b in self.blocks:
            active.extend([b.index] * b.dwell)
        return active[:self.horizon]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'horizon': self.horizon,
            'blocks': [[b.index, b.dwell] for b in self.blocks],
            'generator': self.generator.to_dict() if self.generator else None,
        }


@dataclass(frozen=True)
class AdmissibilityViolation:
    tau: int
    block: int
    reason: str


@dataclass
class AdmissibilityReport:
    admissible: bool
    violations: List[AdmissibilityViolation] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'admissible': self.admissible,
            'violations': [{'tau': v.tau, 'block': v.block, 'reason': v.reason} for v in self.violations],
        }


def _sequence(j_to_i, i_to_j, p: int, q: int, delta: int) -> Tuple[SignalBlock, ...]:
    """Vertices of the j -> i path, then the interior of the i -> j path"""
    vertices = list(j_to_i.vertices) + list(i_to_j.interior)
    i_position = len(j_to_i.vertices) - 1
    blocks = []
    for pos, v in enumerate(vertices):
        if pos == 0:
            dwell = q
        elif pos == i_position:
            dwell = p
        else:
            dwell = delta
        blocks.append(SignalBlock(v, dwell))
    return tuple(blocks)


def build_generator(paths: PathQuad, p: int, q: int, delta: int, periodic: bool) -> SignalGenerator:
    """
    Generator from path choices: q on j, p on i, delta on interior vertices.

    Args:
        paths: the path quad; only the r = 1 pair is read when periodic
        p, q: dwells on i and j
        delta: dwell on interior vertices
        periodic: repeat one sequence instead of the growing seq1/seq2 schedule
    """
    seq1 = _sequence(paths.j_to_i_1, paths.i_to_j_1, p, q, delta)
    if periodic:
        return SignalGenerator(SignalKind.PERIODIC, seq1)
    seq2 = _sequence(paths.j_to_i_2, paths.i_to_j_2, p, q, delta)
    return SignalGenerator(SignalKind.NONPERIODIC, seq1, seq2)


def materialize(generator: SignalGenerator, horizon: int) -> SwitchingSignal:
    """Take whole blocks until [0, horizon) is covered"""
    if horizon < generator.minimal_horizon:
        raise PreconditionError(
            f"Horizon {horizon} is shorter than one {generator.kind.value} super-block "
            f"({generator.minimal_horizon} steps)")
    blocks = []
    start = 0
    for block in generator.iter_blocks():
        if start >= horizon:
            break
        blocks.append(block)
        start += block.dwell
    return SwitchingSignal(blocks=blocks, horizon=horizon, generator=generator)


def synthesize_nonperiodic(certificate: Certificate, horizon: int) -> SwitchingSignal:
    if certificate.kind not in NONPERIODIC_KINDS:
        raise PreconditionError(f"{certificate.kind.value} certificates use the periodic construction")
    c = certificate.combination
    generator = build_generator(certificate.paths, c.p, c.q, certificate.delta, periodic=False)
    signal = materialize(generator, horizon)
    logger.info(f"Synthesized non-periodic signal: {len(signal.blocks)} blocks over T={horizon}")
    return signal


def synthesize_periodic(certificate: Certificate, horizon: int) -> SwitchingSignal:
    if certificate.kind in NONPERIODIC_KINDS:
        raise PreconditionError(f"{certificate.kind.value} certificates use the non-periodic construction")
    c = certificate.combination
    generator = build_generator(certificate.paths, c.p, c.q, certificate.delta, periodic=True)
    signal = materialize(generator, horizon)
    logger.info(f"Synthesized periodic signal: {len(signal.blocks)} blocks over T={horizon}")
    return signal


def synthesize_signal(certificate: Certificate, horizon: int) -> SwitchingSignal:
    """Pick the construction matching the certificate kind"""
    if certificate.periodic:
        return synthesize_periodic(certificate, horizon)
    return synthesize_nonperiodic(certificate, horizon)


def signal_from_blocks(blocks: Sequence[Sequence[int]], horizon: Optional[int] = None) -> SwitchingSignal:
    """Wrap an explicit (index, dwell) list; horizon defaults to the covered length"""
    parsed = []
    for k, pair in enumerate(blocks):
        if len(pair) != 2:
            raise InvalidInputError(f"Block {k} must be an (index, dwell) pair, got {pair}")
        index, dwell = int(pair[0]), int(pair[1])
        if dwell <= 0:
            raise InvalidInputError(f"Block {k} has non-positive dwell {dwell}")
        parsed.append(SignalBlock(index, dwell))
    if not parsed:
        raise InvalidInputError("A signal needs at least one block")
    covered = sum(b.dwell for b in parsed)
    if horizon is None:
        horizon = covered
    if not 0 < horizon <= covered:
        raise InvalidInputError(f"Horizon {horizon} must lie in 1..{covered}")
    return SwitchingSignal(blocks=parsed, horizon=horizon)


def signal_at(signal: SwitchingSignal, t: int) -> int:
    """Subsystem active at step t"""
    if not 0 <= t < signal.horizon:
        raise InvalidInputError(f"t={t} outside [0, {signal.horizon})")
    k = int(np.searchsorted(signal.starts, t, side='right')) - 1
    return signal.blocks[k].index


def check_admissible(signal: SwitchingSignal, graph: SwitchGraph, bounds: DwellBounds) -> AdmissibilityReport:
    """Every switch must be an edge and every dwell must lie in [delta, Delta]"""
    violations = []
    starts = signal.switch_times
    for k, block in enumerate(signal.blocks):
        if not bounds.admits(block.dwell):
            violations.append(AdmissibilityViolation(
                tau=starts[k], block=k,
                reason=f"dwell {block.dwell} on subsystem {block.index} outside "
                       f"[{bounds.min_dwell}, {bounds.max_dwell}]"))
        if k > 0:
            prev = signal.blocks[k - 1]
            if not graph.has_edge(prev.index, block.index):
                violations.append(AdmissibilityViolation(
                    tau=starts[k], block=k,
                    reason=f"switch ({prev.index},{block.index}) is not an admissible edge"))

    if violations:
        logger.warning(f"Signal is not admissible: {len(violations)} violations")
    return AdmissibilityReport(admissible=not violations, violations=violations)
