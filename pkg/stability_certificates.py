"""
Stabilizability certificates for switched systems with unstable subsystems.

Searches for a Schur-stable combination A_i^p A_j^q, measures how far the
subsystem powers along connecting paths are from commuting, and checks the
resulting sufficient conditions (the general two-path-pair condition and its
single-pair, one-edge and two-edge specialisations) while maximising the
certified decay rate lambda.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from config import DEFAULT_M_MAX, DEFAULT_WORKERS, LAMBDA_TOL
from errors import InvalidInputError, PreconditionError
from linalg_core import commutator, eigenvalues, is_schur, matrix_power, spectral_norm
from models import (DwellBounds, Path, ProblemInstance, SubsystemFamily, enumerate_cycles,
                    enumerate_paths, family_bound_M, interior_product)

logger = logging.getLogger(__name__)


class ResultKind(Enum):
    THEOREM1 = "theorem1"
    COROLLARY1 = "corollary1"
    COROLLARY2A = "corollary2a"
    COROLLARY2B = "corollary2b"
    COROLLARY3A = "corollary3a"
    COROLLARY3B = "corollary3b"
    COROLLARY4 = "corollary4"

    @property
    def periodic(self) -> bool:
        return self in PERIODIC_KINDS


PERIODIC_KINDS = frozenset({ResultKind.COROLLARY1, ResultKind.COROLLARY2B,
                            ResultKind.COROLLARY3B, ResultKind.COROLLARY4})


@dataclass(eq=False)
class StableCombination:
    i: int
    j: int
    p: int
    q: int
    combo_matrix: np.ndarray
    m: int
    rho: float
    mbar: int

    @property
    def eigenvalues(self) -> List[complex]:
        return eigenvalues(self.combo_matrix)

    @property
    def key(self) -> Tuple[int, int, int, int]:
        return (self.i, self.j, self.p, self.q)

    def with_m(self, m: int) -> 'StableCombination':
        """Same combination certified with a different power m"""
        rho = spectral_norm(matrix_power(self.combo_matrix, m))
        return StableCombination(self.i, self.j, self.p, self.q, self.combo_matrix, m, rho, mbar_of(m))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'i': self.i, 'j': self.j, 'p': self.p, 'q': self.q,
            'm': self.m, 'rho': self.rho, 'mbar': self.mbar,
            'matrix': self.combo_matrix.tolist(),
            'eigenvalues': self.eigenvalues,
        }


@dataclass(frozen=True)
class PathQuad:
    """Paths j ->_r i and i ->_r j for r = 1, 2"""
    j_to_i_1: Path
    j_to_i_2: Path
    i_to_j_1: Path
    i_to_j_2: Path

    @classmethod
    def single(cls, j_to_i: Path, i_to_j: Path) -> 'PathQuad':
        return cls(j_to_i, j_to_i, i_to_j, i_to_j)

    @property
    def a1(self) -> int:
        return self.j_to_i_1.length

    @property
    def a2(self) -> int:
        return self.j_to_i_2.length

    @property
    def b1(self) -> int:
        return self.i_to_j_1.length

    @property
    def b2(self) -> int:
        return self.i_to_j_2.length

    @property
    def is_single(self) -> bool:
        return self.j_to_i_1 == self.j_to_i_2 and self.i_to_j_1 == self.i_to_j_2

    @property
    def total_length(self) -> int:
        return self.a1 + self.a2 + self.b1 + self.b2

    def sort_key(self) -> Tuple:
        return (self.total_length, self.j_to_i_1.vertices, self.j_to_i_2.vertices,
                self.i_to_j_1.vertices, self.i_to_j_2.vertices)

    def check_endpoints(self, i: int, j: int):
        for p in (self.j_to_i_1, self.j_to_i_2):
            if p.source != j or p.destination != i:
                raise InvalidInputError(f"Path {p} does not run from j={j} to i={i}")
        for p in (self.i_to_j_1, self.i_to_j_2):
            if p.source != i or p.destination != j:
                raise InvalidInputError(f"Path {p} does not run from i={i} to j={j}")

    def to_dict(self) -> Dict[str, List[int]]:
        return {
            'j_to_i_1': self.j_to_i_1.to_list(),
            'j_to_i_2': self.j_to_i_2.to_list(),
            'i_to_j_1': self.i_to_j_1.to_list(),
            'i_to_j_2': self.i_to_j_2.to_list(),
        }


@dataclass(frozen=True)
class CommutatorBounds:
    eps_j1i_i: float = 0.0
    eps_j2i_i: float = 0.0
    eps_j1i_j: float = 0.0
    eps_j2i_j: float = 0.0
    eps_i1j_i: float = 0.0
    eps_i2j_i: float = 0.0
    eps_i1j_j: float = 0.0
    eps_i2j_j: float = 0.0

    def scaled(self, s: float) -> 'CommutatorBounds':
        return CommutatorBounds(**{k: v * s for k, v in asdict(self).items()})

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


# Closed-form exponents. A value may be negative only where its coefficient
# in the condition is zero; such terms are skipped when assembling the LHS.

@dataclass(frozen=True)
class XiQuantities:
    xi_j1i_i: int
    xi_j2i_i: int
    xi_j1i_j: int
    xi_j2i_j: int
    xi_i1j_i: int
    xi_i2j_i: int
    xi_i1j_j: int
    xi_i2j_j: int
    xi_cycle1: int
    xi_cycle2: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class ZetaQuantities:
    zeta_ji_i: int
    zeta_ji_j: int
    zeta_ij_i: int
    zeta_ij_j: int
    zeta_cycle: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class KappaQuantities:
    kappa_j1i_i: int
    kappa_j2i_i: int
    kappa_j1i_j: int
    kappa_j2i_j: int
    kappa_cycle1: int
    kappa_cycle2: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class KappaBarQuantities:
    kappa_bar_ji_i: int
    kappa_bar_ji_j: int
    kappa_bar_cycle: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class ChiQuantities:
    chi_i1j_i: int
    chi_i2j_i: int
    chi_i1j_j: int
    chi_i2j_j: int
    chi_cycle1: int
    chi_cycle2: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class ChiBarQuantities:
    chi_bar_ij_i: int
    chi_bar_ij_j: int
    chi_bar_cycle: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


ZetaKappaChi = Union[ZetaQuantities, KappaQuantities, KappaBarQuantities, ChiQuantities, ChiBarQuantities]
Quantities = Union[XiQuantities, ZetaKappaChi]

QUANTITY_TYPES = {
    ResultKind.THEOREM1: XiQuantities,
    ResultKind.COROLLARY1: ZetaQuantities,
    ResultKind.COROLLARY4: ZetaQuantities,
    ResultKind.COROLLARY2A: KappaQuantities,
    ResultKind.COROLLARY2B: KappaBarQuantities,
    ResultKind.COROLLARY3A: ChiQuantities,
    ResultKind.COROLLARY3B: ChiBarQuantities,
}

def mbar_of(m: int) -> int:
    """Largest k with k(k+1)/2 <= m"""
    if m < 1:
        raise InvalidInputError(f"m must be a positive integer, got {m}")
    return (math.isqrt(8 * m + 1) - 1) // 2


def _smallest_contracting_power(combo: np.ndarray, m_max: int) -> Optional[Tuple[int, float]]:
    power = np.eye(combo.shape[0])
    for m in range(1, m_max + 1):
        power = power @ combo
        norm = spectral_norm(power)
        if norm < 1.0:
            return m, norm
    return None


def find_stable_combinations(family: SubsystemFamily, bounds: DwellBounds,
                             m_max: int = DEFAULT_M_MAX, allow_stable: bool = False) -> List[StableCombination]:
    """
    Enumerate Schur-stable products A_i^p A_j^q with p, q in [delta, Delta].

    Args:
        family: subsystem matrices
        bounds: dwell bounds supplying the admissible p, q
        m_max: largest power tried when looking for ||(A_i^p A_j^q)^m|| < 1
        allow_stable: also try i = j when A_i itself is Schur stable
    Returns:
        combinations ordered by ascending rho, then m, then (i, j, p, q)
    """
    combos = []
    for i in family.indices:
        for j in family.indices:
            if i == j and not (allow_stable and is_schur(family.matrix(i))):
                continue
            for p in bounds.dwells():
                for q in bounds.dwells():
                    product = family.power(i, p) @ family.power(j, q)
                    if not is_schur(product):
                        continue
                    found = _smallest_contracting_power(product, m_max)
                    if found is None:
                        logger.warning(f"A_{i}^{p} A_{j}^{q} is Schur but no m <= {m_max} gives a contraction")
                        continue
                    m, rho = found
                    combos.append(StableCombination(i, j, p, q, product, m, rho, mbar_of(m)))

    combos.sort(key=lambda c: (c.rho, c.m, c.i, c.j, c.p, c.q))
    logger.info(f"Found {len(combos)} stable combinations")
    return combos


def commutator_norm(family: SubsystemFamily, path: Path, ell: int, a: int, b: int) -> float:
    """||A_ell^a P - P A_ell^a|| with P the interior product of path at exponent b"""
    if ell in path.interior:
        raise InvalidInputError(f"Subsystem {ell} lies in the interior of path {path}")
    inner = interior_product(family, path, b)
    return spectral_norm(commutator(family.power(ell, a), inner))


def commutator_bounds(family: SubsystemFamily, paths: PathQuad, combo: StableCombination,
                      delta: int) -> CommutatorBounds:
    """Tightest epsilon values: the exact commutator norms for each path and endpoint"""
    i, j, p, q = combo.i, combo.j, combo.p, combo.q
    return CommutatorBounds(
        eps_j1i_i=commutator_norm(family, paths.j_to_i_1, i, p, delta),
        eps_j2i_i=commutator_norm(family, paths.j_to_i_2, i, p, delta),
        eps_j1i_j=commutator_norm(family, paths.j_to_i_1, j, q, delta),
        eps_j2i_j=commutator_norm(family, paths.j_to_i_2, j, q, delta),
        eps_i1j_i=commutator_norm(family, paths.i_to_j_1, i, p, delta),
        eps_i2j_i=commutator_norm(family, paths.i_to_j_2, i, p, delta),
        eps_i1j_j=commutator_norm(family, paths.i_to_j_1, j, q, delta),
        eps_i2j_j=commutator_norm(family, paths.i_to_j_2, j, q, delta),
    )


def xi_quantities(paths: PathQuad, combo: StableCombination, delta: int) -> XiQuantities:
    a1, a2, b1, b2 = paths.a1, paths.a2, paths.b1, paths.b2
    p, q, m, mb = combo.p, combo.q, combo.m, combo.mbar
    d = delta
    tail_i = p * (m - 1) + q * m
    tail_j = p * m + q * (m - 1)

    j1i = a1 * d * (mb - 1) + b1 * d * mb + (a2 + b2) * d * (m - mb)
    j2i = (a1 + b1) * d * mb + a2 * d * (m - mb - 1) + b2 * d * (m - mb)
    i1j = a1 * d * mb + b1 * d * (mb - 1) + (a2 + b2) * d * (m - mb)
    i2j = (a1 + b1) * d * mb + a2 * d * (m - mb) + b2 * d * (m - mb - 1)

    return XiQuantities(
        xi_j1i_i=j1i + tail_i,
        xi_j2i_i=j2i + tail_i,
        xi_j1i_j=j1i + tail_j,
        xi_j2i_j=j2i + tail_j,
        xi_i1j_i=i1j + tail_i,
        xi_i2j_i=i2j + tail_i,
        xi_i1j_j=i1j + tail_j,
        xi_i2j_j=i2j + tail_j,
        xi_cycle1=((a1 + b1) * d + p + q) * mb,
        xi_cycle2=((a2 + b2) * d + p + q) * (m - mb),
    )


def zeta_kappa_chi(paths: PathQuad, combo: StableCombination, delta: int, variant: str) -> ZetaKappaChi:
    """
    Exponents of the specialised conditions.

    variant 'zeta' reads the r = 1 pair; 'kappa'/'kappa_bar' read the j -> i
    paths only; 'chi'/'chi_bar' read the i -> j paths only.
    """
    p, q, m, mb = combo.p, combo.q, combo.m, combo.mbar
    d = delta
    tail_i = p * (m - 1) + q * m
    tail_j = p * m + q * (m - 1)

    if variant == 'zeta':
        a, b = paths.a1, paths.b1
        return ZetaQuantities(
            zeta_ji_i=a * d * (m - 1) + b * d * m + tail_i,
            zeta_ji_j=a * d * (m - 1) + b * d * m + tail_j,
            zeta_ij_i=a * d * m + b * d * (m - 1) + tail_i,
            zeta_ij_j=a * d * m + b * d * (m - 1) + tail_j,
            zeta_cycle=((a + b) * d + p + q) * m,
        )
    if variant == 'kappa':
        a1, a2 = paths.a1, paths.a2
        first = a1 * d * (mb - 1) + a2 * d * (m - mb)
        second = a1 * d * mb + a2 * d * (m - mb - 1)
        return KappaQuantities(
            kappa_j1i_i=first + tail_i,
            kappa_j2i_i=second + tail_i,
            kappa_j1i_j=first + tail_j,
            kappa_j2i_j=second + tail_j,
            kappa_cycle1=(a1 * d + p + q) * mb,
            kappa_cycle2=(a2 * d + p + q) * (m - mb),
        )
    if variant == 'kappa_bar':
        a = paths.a1
        return KappaBarQuantities(
            kappa_bar_ji_i=a * d * (m - 1) + tail_i,
            kappa_bar_ji_j=a * d * (m - 1) + tail_j,
            kappa_bar_cycle=(a * d + p + q) * m,
        )
    if variant == 'chi':
        b1, b2 = paths.b1, paths.b2
        first = b1 * d * (mb - 1) + b2 * d * (m - mb)
        second = b1 * d * mb + b2 * d * (m - mb - 1)
        return ChiQuantities(
            chi_i1j_i=first + tail_i,
            chi_i2j_i=second + tail_i,
            chi_i1j_j=first + tail_j,
            chi_i2j_j=second + tail_j,
            chi_cycle1=(b1 * d + p + q) * mb,
            chi_cycle2=(b2 * d + p + q) * (m - mb),
        )
    if variant == 'chi_bar':
        b = paths.b1
        return ChiBarQuantities(
            chi_bar_ij_i=b * d * (m - 1) + tail_i,
            chi_bar_ij_j=b * d * (m - 1) + tail_j,
            chi_bar_cycle=(b * d + p + q) * m,
        )
    raise InvalidInputError(f"Unknown quantity variant '{variant}'")


def quantities_for(kind: ResultKind, paths: PathQuad, combo: StableCombination, delta: int) -> Quantities:
    if kind == ResultKind.THEOREM1:
        return xi_quantities(paths, combo, delta)
    variant = {
        ResultKind.COROLLARY1: 'zeta',
        ResultKind.COROLLARY4: 'zeta',
        ResultKind.COROLLARY2A: 'kappa',
        ResultKind.COROLLARY2B: 'kappa_bar',
        ResultKind.COROLLARY3A: 'chi',
        ResultKind.COROLLARY3B: 'chi_bar',
    }[kind]
    return zeta_kappa_chi(paths, combo, delta, variant)


def _coefficients(m: int, mb: int) -> Tuple[int, int, int, int]:
    """Counts of each commutator term: (c_i1, c_1, c_i2, c_2)"""
    return (mb * (mb - 1) // 2,
            mb * (mb + 1) // 2,
            (m * (m - 1) - mb * (mb - 1)) // 2,
            (m * (m + 1) - mb * (mb + 1)) // 2)


def _condition_terms(kind: ResultKind, combo: StableCombination, qty: Quantities,
                     e: CommutatorBounds) -> Tuple[List[Tuple[int, int, float]], int]:
    """(coefficient, M exponent, epsilon) triples and the exponent of the e^{lambda .} factor"""
    expected = QUANTITY_TYPES[kind]
    if not isinstance(qty, expected):
        raise InvalidInputError(f"{kind.value} needs {expected.__name__}, got {type(qty).__name__}")

    m = combo.m
    ci1, c1, ci2, c2 = _coefficients(m, combo.mbar)
    lower, upper = m * (m - 1) // 2, m * (m + 1) // 2

    if kind == ResultKind.THEOREM1:
        terms = [(ci1, qty.xi_j1i_i, e.eps_j1i_i),
                 (c1, qty.xi_j1i_j, e.eps_j1i_j),
                 (c1, qty.xi_i1j_i, e.eps_i1j_i),
                 (c1, qty.xi_i1j_j, e.eps_i1j_j),
                 (ci2, qty.xi_j2i_i, e.eps_j2i_i),
                 (c2, qty.xi_j2i_j, e.eps_j2i_j),
                 (c2, qty.xi_i2j_i, e.eps_i2j_i),
                 (c2, qty.xi_i2j_j, e.eps_i2j_j)]
        return terms, qty.xi_cycle1 + qty.xi_cycle2

    if kind in (ResultKind.COROLLARY1, ResultKind.COROLLARY4):
        terms = [(lower, qty.zeta_ji_i, e.eps_j1i_i),
                 (upper, qty.zeta_ji_j, e.eps_j1i_j),
                 (upper, qty.zeta_ij_i, e.eps_i1j_i),
                 (upper, qty.zeta_ij_j, e.eps_i1j_j)]
        return terms, qty.zeta_cycle

    if kind == ResultKind.COROLLARY2A:
        terms = [(ci1, qty.kappa_j1i_i, e.eps_j1i_i),
                 (c1, qty.kappa_j1i_j, e.eps_j1i_j),
                 (ci2, qty.kappa_j2i_i, e.eps_j2i_i),
                 (c2, qty.kappa_j2i_j, e.eps_j2i_j)]
        return terms, qty.kappa_cycle1 + qty.kappa_cycle2

    if kind == ResultKind.COROLLARY2B:
        terms = [(lower, qty.kappa_bar_ji_i, e.eps_j1i_i),
                 (upper, qty.kappa_bar_ji_j, e.eps_j1i_j)]
        return terms, qty.kappa_bar_cycle

    if kind == ResultKind.COROLLARY3A:
        terms = [(c1, qty.chi_i1j_i, e.eps_i1j_i),
                 (c1, qty.chi_i1j_j, e.eps_i1j_j),
                 (c2, qty.chi_i2j_i, e.eps_i2j_i),
                 (c2, qty.chi_i2j_j, e.eps_i2j_j)]
        return terms, qty.chi_cycle1 + qty.chi_cycle2

    terms = [(upper, qty.chi_bar_ij_i, e.eps_i1j_i),
             (upper, qty.chi_bar_ij_j, e.eps_i1j_j)]
    return terms, qty.chi_bar_cycle


def _lhs_parts(kind: ResultKind, combo: StableCombination, quantities: Quantities,
               bounds: CommutatorBounds, M: float, lam: float) -> Tuple[float, float]:
    """(rho e^{lambda m}, commutator part) without checking any precondition"""
    terms, cycle = _condition_terms(kind, combo, quantities, bounds)
    with np.errstate(over='ignore', invalid='ignore'):
        base = float(combo.rho * np.exp(lam * combo.m))
        total = 0.0
        for coef, exponent, eps in terms:
            if coef == 0 or eps == 0:
                continue
            total += coef * float(np.power(np.float64(M), exponent)) * eps
        part = total * float(np.exp(lam * cycle)) if total else 0.0
    return base, part


def _lhs_unchecked(kind, combo, quantities, bounds, M, lam) -> float:
    base, part = _lhs_parts(kind, combo, quantities, bounds, M, lam)
    return base + part


def condition_lhs(kind: ResultKind, combo: StableCombination, quantities: Quantities,
                  bounds: CommutatorBounds, M: float, lam: float) -> float:
    """
    Left-hand side of the stabilizability inequality selected by kind.

    Raises:
        PreconditionError if rho e^{lambda m} >= 1
    """
    base, part = _lhs_parts(kind, combo, quantities, bounds, M, lam)
    if not base < 1.0:
        raise PreconditionError(f"rho*e^(lambda*m) = {base:.7g} must be < 1 (lambda={lam})")
    return base + part


def robustness_margin(kind: ResultKind, combo: StableCombination, quantities: Quantities,
                      bounds: CommutatorBounds, M: float, lam: float) -> float:
    """Largest uniform factor on every epsilon that keeps the condition satisfied"""
    base, part = _lhs_parts(kind, combo, quantities, bounds, M, lam)
    if not base < 1.0:
        raise PreconditionError(f"rho*e^(lambda*m) = {base:.7g} must be < 1 (lambda={lam})")
    if part == 0:
        return math.inf
    return (1.0 - base) / part


@dataclass
class LambdaSearch:
    feasible: bool
    lambda_max: Optional[float]
    limiting_lhs: float
    lhs_at_max: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def max_lambda(kind: ResultKind, combo: StableCombination, quantities: Quantities,
               bounds: CommutatorBounds, M: float, tol: float = LAMBDA_TOL) -> LambdaSearch:
    """
    Largest lambda with LHS(lambda) <= 1 and rho e^{lambda m} < 1.

    The LHS is increasing in lambda, so the boundary is found by bisection on
    [0, ln(1/rho)/m]. Infeasibility is reported, not raised.
    """
    limiting = _lhs_unchecked(kind, combo, quantities, bounds, M, 0.0)
    if not limiting < 1.0:
        return LambdaSearch(feasible=False, lambda_max=None, limiting_lhs=limiting)

    def excess(lam: float) -> float:
        return _lhs_unchecked(kind, combo, quantities, bounds, M, lam) - 1.0

    hi = math.log(1.0 / combo.rho) / combo.m
    if excess(hi) <= 0:
        root = hi
    else:
        root = bisect(excess, 0.0, hi, xtol=tol)

    lam = root - tol
    for _ in range(10000):
        if lam <= 0:
            break
        base, part = _lhs_parts(kind, combo, quantities, bounds, M, lam)
        if base < 1.0 and base + part <= 1.0:
            return LambdaSearch(feasible=True, lambda_max=lam, limiting_lhs=limiting, lhs_at_max=base + part)
        lam -= tol

    return LambdaSearch(feasible=False, lambda_max=None, limiting_lhs=limiting)


@dataclass
class SearchOptions:
    m_max: int = DEFAULT_M_MAX
    max_interior: Optional[int] = None
    allow_stable: bool = False
    escalate_m: bool = False
    kinds: Optional[List[ResultKind]] = None
    combination: Optional[Tuple[int, int, int, int]] = None
    lambda_: Optional[float] = None
    workers: int = DEFAULT_WORKERS
    tol: float = LAMBDA_TOL


@dataclass(eq=False)
class CandidateEvaluation:
    kind: ResultKind
    combination: StableCombination
    paths: PathQuad
    bounds: CommutatorBounds
    quantities: Quantities
    search: LambdaSearch
    lam: Optional[float]
    lhs: Optional[float]
    feasible: bool

    def to_dict(self) -> Dict[str, Any]:
        c = self.combination
        return {
            'kind': self.kind.value,
            'i': c.i, 'j': c.j, 'p': c.p, 'q': c.q, 'm': c.m, 'rho': c.rho,
            'paths': self.paths.to_dict(),
            'limiting_lhs': self.search.limiting_lhs,
            'lambda_max': self.search.lambda_max,
            'lambda': self.lam,
            'lhs': self.lhs,
            'feasible': self.feasible,
        }


@dataclass(eq=False)
class Certificate:
    kind: ResultKind
    combination: StableCombination
    paths: PathQuad
    bounds: CommutatorBounds
    quantities: Quantities
    delta: int
    lam: float
    lhs: float
    M: float
    lambda_max: Optional[float] = None
    margin: Optional[float] = None
    # rate confirmed on the synthesized signal; None until checked
    lambda_signal: Optional[float] = None

    @property
    def periodic(self) -> bool:
        return self.kind.periodic

    def with_lambda(self, lam: float, lambda_signal: Optional[float] = None) -> 'Certificate':
        """Same certificate at another decay rate; LHS and margin are recomputed"""
        lhs = _lhs_unchecked(self.kind, self.combination, self.quantities, self.bounds, self.M, lam)
        margin = robustness_margin(self.kind, self.combination, self.quantities, self.bounds, self.M, lam)
        return replace(self, lam=lam, lhs=lhs, margin=margin, lambda_signal=lambda_signal)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'combination': self.combination.to_dict(),
            'paths': self.paths.to_dict(),
            'epsilon': self.bounds.to_dict(),
            'quantities': self.quantities.to_dict(),
            'delta': self.delta,
            'lambda': self.lam,
            'lambda_max': self.lambda_max,
            'lambda_signal': self.lambda_signal,
            'lhs': self.lhs,
            'M': self.M,
            'robustness_margin': self.margin,
        }


@dataclass(eq=False)
class SearchResult:
    certificate: Optional[Certificate]
    candidates: List[CandidateEvaluation] = field(default_factory=list)
    combinations: List[StableCombination] = field(default_factory=list)
    M: float = 0.0
    message: str = ""

    @property
    def found(self) -> bool:
        return self.certificate is not None


class CertificateSearchEngine:
    """Ordered search over stable combinations, result kinds and path choices"""

    def __init__(self, instance: ProblemInstance, options: Optional[SearchOptions] = None):
        self.instance = instance
        self.family = instance.family
        self.graph = instance.graph
        self.delta = instance.bounds.min_dwell
        self.options = options or SearchOptions()
        if self.options.max_interior is None:
            self.max_interior = max(self.family.size - 2, 0)
            # a cycle through i may visit every other vertex
            self.max_cycle_interior = self.family.size - 1
        else:
            self.max_interior = self.options.max_interior
            self.max_cycle_interior = self.options.max_interior
        self.allow_stable = self.options.allow_stable or instance.allow_stable
        self.M = family_bound_M(self.family)
        self._path_cache: Dict[Tuple[int, int], List[Path]] = {}
        logger.info(f"Certificate search initialized: M={self.M:.7g}, m_max={self.options.m_max}, "
                    f"max_interior={self.max_interior}")

    def paths(self, u: int, v: int) -> List[Path]:
        if (u, v) not in self._path_cache:
            if u == v:
                found = enumerate_cycles(self.graph, u, self.max_cycle_interior)
            else:
                found = enumerate_paths(self.graph, u, v, self.max_interior)
            self._path_cache[(u, v)] = found
        return self._path_cache[(u, v)]

    def candidates_for(self, combo: StableCombination) -> Iterator[Tuple[ResultKind, PathQuad]]:
        """Result kinds and path choices to try for one combination, in search order"""
        i, j = combo.i, combo.j
        forward = i != j and self.graph.has_edge(i, j)
        backward = i != j and self.graph.has_edge(j, i)

        if forward and backward:
            yield ResultKind.COROLLARY4, PathQuad.single(Path((j, i)), Path((i, j)))
            return

        if forward:
            direct = Path((i, j))
            routes = self.paths(j, i)
            for route in _ordered(PathQuad.single(r, direct) for r in routes):
                yield ResultKind.COROLLARY2B, route
            for quad in _ordered(PathQuad(r1, r2, direct, direct)
                                 for r1 in routes for r2 in routes if r1 != r2):
                yield ResultKind.COROLLARY2A, quad
            return

        if backward:
            direct = Path((j, i))
            routes = self.paths(i, j)
            for route in _ordered(PathQuad.single(direct, r) for r in routes):
                yield ResultKind.COROLLARY3B, route
            for quad in _ordered(PathQuad(direct, direct, r1, r2)
                                 for r1 in routes for r2 in routes if r1 != r2):
                yield ResultKind.COROLLARY3A, quad
            return

        pairs = [(a, b) for a in self.paths(j, i) for b in self.paths(i, j)]
        for quad in _ordered(PathQuad.single(a, b) for a, b in pairs):
            yield ResultKind.COROLLARY1, quad
        for quad in _ordered(PathQuad(a1, a2, b1, b2)
                             for (a1, b1) in pairs for (a2, b2) in pairs if (a1, b1) != (a2, b2)):
            yield ResultKind.THEOREM1, quad

    def evaluate(self, kind: ResultKind, combo: StableCombination, paths: PathQuad) -> CandidateEvaluation:
        bounds = commutator_bounds(self.family, paths, combo, self.delta)
        quantities = quantities_for(kind, paths, combo, self.delta)
        search = max_lambda(kind, combo, quantities, bounds, self.M, self.options.tol)

        pinned = self.options.lambda_
        if pinned is None:
            lam = search.lambda_max
            lhs = search.lhs_at_max
            feasible = search.feasible
        else:
            lam = pinned
            base, part = _lhs_parts(kind, combo, quantities, bounds, self.M, pinned)
            lhs = base + part
            feasible = pinned > 0 and base < 1.0 and lhs <= 1.0

        logger.debug(f"{kind.value} {combo.key} paths={paths.to_dict()} "
                     f"limiting_lhs={search.limiting_lhs:.7g} feasible={feasible}")
        return CandidateEvaluation(kind, combo, paths, bounds, quantities, search, lam, lhs, feasible)

    def _combinations(self) -> List[StableCombination]:
        combos = find_stable_combinations(self.family, self.instance.bounds,
                                          self.options.m_max, self.allow_stable)
        if self.options.combination is not None:
            pinned = tuple(self.options.combination)
            combos = [c for c in combos if c.key == pinned]
            if not combos:
                logger.warning(f"Pinned combination {pinned} is not a stable combination")
        return combos

    def _work(self, combos: Sequence[StableCombination]) -> List[Tuple[ResultKind, StableCombination, PathQuad]]:
        kinds = set(self.options.kinds) if self.options.kinds else None
        work = []
        for combo in combos:
            for kind, paths in self.candidates_for(combo):
                if kinds is None or kind in kinds:
                    work.append((kind, combo, paths))
        return work

    def _first_feasible(self, work, evaluated: List[CandidateEvaluation]) -> Optional[CandidateEvaluation]:
        if self.options.workers > 1 and len(work) > 1:
            with ThreadPoolExecutor(max_workers=self.options.workers) as executor:
                results = list(executor.map(lambda w: self.evaluate(*w), work))
            for result in results:
                evaluated.append(result)
                if result.feasible:
                    return result
            return None

        for kind, combo, paths in work:
            result = self.evaluate(kind, combo, paths)
            evaluated.append(result)
            if result.feasible:
                return result
        return None

    def search(self) -> SearchResult:
        combos = self._combinations()
        evaluated: List[CandidateEvaluation] = []

        winner = self._first_feasible(self._work(combos), evaluated)
        if winner is None and self.options.escalate_m:
            escalated = [c.with_m(m) for c in combos for m in range(c.m + 1, self.options.m_max + 1)]
            escalated = [c for c in escalated if c.rho < 1.0]
            escalated.sort(key=lambda c: (c.rho, c.m, c.i, c.j, c.p, c.q))
            logger.info(f"Retrying with {len(escalated)} larger-m combinations")
            winner = self._first_feasible(self._work(escalated), evaluated)

        if winner is None:
            message = "no certificate found within caps"
            logger.warning(f"{message}: {len(combos)} combinations, {len(evaluated)} candidates")
            return SearchResult(None, evaluated, combos, self.M, message)

        certificate = Certificate(
            kind=winner.kind,
            combination=winner.combination,
            paths=winner.paths,
            bounds=winner.bounds,
            quantities=winner.quantities,
            delta=self.delta,
            lam=winner.lam,
            lhs=winner.lhs,
            M=self.M,
            lambda_max=winner.search.lambda_max,
            margin=robustness_margin(winner.kind, winner.combination, winner.quantities,
                                     winner.bounds, self.M, winner.lam),
        )
        c = certificate.combination
        logger.info(f"Certificate {certificate.kind.value} for (i={c.i}, j={c.j}, p={c.p}, q={c.q}), "
                    f"lambda={certificate.lam:.7g}, LHS={certificate.lhs:.7g}")
        return SearchResult(certificate, evaluated, combos, self.M, "certificate found")


def _ordered(quads: Iterator[PathQuad]) -> List[PathQuad]:
    return sorted(quads, key=PathQuad.sort_key)


def search_certificate(instance: ProblemInstance, options: Optional[SearchOptions] = None) -> SearchResult:
    """Run the ordered certificate search; the first feasible candidate wins"""
    return CertificateSearchEngine(instance, options).search()


def recheck_certificate(instance: ProblemInstance, certificate: Certificate) -> float:
    """Recompute the certificate's LHS from the raw matrices"""
    family = instance.family
    c = certificate.combination
    product = family.power(c.i, c.p) @ family.power(c.j, c.q)
    combo = StableCombination(c.i, c.j, c.p, c.q, product, c.m,
                              spectral_norm(matrix_power(product, c.m)), mbar_of(c.m))
    certificate.paths.check_endpoints(c.i, c.j)
    bounds = commutator_bounds(family, certificate.paths, combo, instance.bounds.min_dwell)
    quantities = quantities_for(certificate.kind, certificate.paths, combo, instance.bounds.min_dwell)
    return condition_lhs(certificate.kind, combo, quantities, bounds, family_bound_M(family), certificate.lam)
