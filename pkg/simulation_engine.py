import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from config import DEFAULT_HORIZON, DEFAULT_SEED, DEFAULT_TRIALS, LAMBDA_TOL, UNDERFLOW_NORM
from errors import InvalidInputError, PreconditionError
from linalg_core import spectral_norm
from models import SubsystemFamily
from signals import SignalKind, SwitchingSignal, build_generator, materialize
from stability_certificates import Certificate

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Trajectory:
    states: np.ndarray  # (T+1, d)
    norms: np.ndarray
    signal: SwitchingSignal

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': np.arange(len(self.norms)), 'norm': self.norms})


@dataclass
class DecayEstimate:
    c_hat: float
    lambda_hat: float
    satisfied: bool
    lam: float = 0.0
    horizon: int = 0
    steps: int = 0
    trials: int = 0
    early_stop: bool = False
    trial_violations: int = 0
    reasons: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class SimulationEngine:
    """Runs the switched dynamics under a fixed signal and checks the decay envelope"""

    def __init__(self, family: SubsystemFamily, seed: int = DEFAULT_SEED, workers: int = 1):
        self.family = family
        self.seed = seed
        self.workers = workers
        logger.info(f"Simulation engine initialized (d={family.dimension}, seed={seed})")

    def _active(self, signal: SwitchingSignal, T: int) -> List[int]:
        if T > signal.horizon:
            raise InvalidInputError(f"T={T} exceeds the signal horizon {signal.horizon}")
        return signal.indices()[:T]

    def simulate(self, signal: SwitchingSignal, x0: Any, T: Optional[int] = None) -> Trajectory:
        """x(t+1) = A_{sigma(t)} x(t) for t in [0, T)"""
        x = np.asarray(x0, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.family.dimension:
            raise InvalidInputError(f"x0 has dimension {x.shape[0]}, expected {self.family.dimension}")
        T = signal.horizon if T is None else T
        active = self._active(signal, T)

        states = np.empty((T + 1, x.shape[0]))
        states[0] = x
        for t, index in enumerate(active):
            states[t + 1] = self.family.matrix(index) @ states[t]
        norms = np.linalg.norm(states, axis=1)
        return Trajectory(states=states, norms=norms, signal=signal)

    def prefix_norms(self, signal: SwitchingSignal, T: Optional[int] = None) -> List[Tuple[int, float]]:
        """
        Spectral norms of A_{sigma(t-1)} ... A_{sigma(0)} for t = 1..T.

        Stops early once a norm drops below the underflow guard.
        """
        T = signal.horizon if T is None else T
        active = self._active(signal, T)
        product = np.eye(self.family.dimension)
        result = []
        for t, index in enumerate(active, start=1):
            product = self.family.matrix(index) @ product
            norm = spectral_norm(product)
            result.append((t, norm))
            if norm < UNDERFLOW_NORM:
                logger.warning(f"Prefix product underflow at t={t}; stopping early")
                break
        return result

    def random_initial_states(self, trials: int) -> np.ndarray:
        """Uniform draws from [-1, 1]^d"""
        rng = np.random.default_rng(self.seed)
        return rng.uniform(-1.0, 1.0, size=(trials, self.family.dimension))

    def verify_ges(self, signal: SwitchingSignal, certificate: Optional[Certificate] = None,
                   T: Optional[int] = None, trials: int = DEFAULT_TRIALS,
                   lam: Optional[float] = None) -> DecayEstimate:
        """
        Check ||W_t|| <= c e^{-lambda t} along the signal and on random trajectories.

        Args:
            signal: switching signal to run
            certificate: supplies lambda unless lam is given
            T: horizon, at least two super-blocks (defaults to the signal horizon)
            trials: number of random initial states
            lam: explicit decay rate
        Returns:
            DecayEstimate with the smallest overshoot c_hat for the given lambda
        """
        if lam is None:
            if certificate is None:
                raise PreconditionError("verify_ges needs a certificate or an explicit lambda")
            lam = certificate.lam
        if not lam > 0:
            raise PreconditionError(f"lambda must be positive, got {lam}")

        T = signal.horizon if T is None else T
        needed = _two_super_blocks(signal)
        if T < needed:
            raise PreconditionError(f"T={T} is shorter than two super-blocks ({needed} steps)")

        norms = self.prefix_norms(signal, T)
        steps = len(norms)
        early_stop = steps < T
        t, w = _series(norms)

        with np.errstate(over='ignore', invalid='ignore'):
            envelope = w * np.exp(lam * t)
        c_hat = float(np.max(envelope))
        reasons = []

        if not np.isfinite(c_hat):
            reasons.append("prefix norms overflow")
        elif not early_stop and _growth(t, w, lam) > 0:
            head, tail = _peaks(t, w, lam)
            reasons.append(f"envelope still growing: late peak {math.exp(tail):.7g} > "
                           f"early peak {math.exp(head):.7g}")

        violations = 0
        if not reasons:
            violations = self._trial_violations(signal, T, trials, c_hat, lam)
            if violations:
                reasons.append(f"{violations} trajectories leave the envelope")

        positive = w[1:] > 0
        lambda_hat = 0.0
        if np.count_nonzero(positive) >= 2:
            slope = np.polyfit(t[1:][positive], np.log(w[1:][positive]), 1)[0]
            lambda_hat = float(-slope)

        estimate = DecayEstimate(c_hat=c_hat, lambda_hat=lambda_hat, satisfied=not reasons, lam=lam,
                                 horizon=T, steps=steps, trials=trials, early_stop=early_stop,
                                 trial_violations=violations, reasons=reasons)
        if estimate.satisfied:
            logger.info(f"GES envelope satisfied: c_hat={c_hat:.7g}, lambda={lam:.7g}, "
                        f"fitted rate={lambda_hat:.7g}")
        else:
            logger.warning(f"GES envelope not satisfied: {'; '.join(reasons)}")
        return estimate

    def _trial_violations(self, signal: SwitchingSignal, T: int, trials: int, c_hat: float, lam: float) -> int:
        if trials <= 0:
            return 0
        x0s = self.random_initial_states(trials)
        decay = c_hat * np.exp(-lam * np.arange(T + 1))

        def outside(x0: np.ndarray) -> bool:
            traj = self.simulate(signal, x0, T)
            bound = decay * np.linalg.norm(x0)
            return bool(np.any(traj.norms > bound + 1e-9 * (1.0 + bound)))

        if self.workers > 1:
            count = 0
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = [executor.submit(outside, x0) for x0 in x0s]
                for future in as_completed(futures):
                    count += int(future.result())
            return count
        return sum(int(outside(x0)) for x0 in x0s)

    def trajectories(self, signal: SwitchingSignal, trials: int, T: Optional[int] = None) -> List[Trajectory]:
        """Trajectories from the seeded random initial states"""
        return [self.simulate(signal, x0, T) for x0 in self.random_initial_states(trials)]

    def signal_lambda(self, signal: SwitchingSignal, lam: float, T: Optional[int] = None,
                      tol: float = LAMBDA_TOL) -> Optional[float]:
        """
        Largest rate in (0, lam] whose envelope ||W_t|| e^{rate t} stops growing over T.

        This is the same envelope test verify_ges applies. Returns None when the
        signal shows no decay at any positive rate.
        """
        T = signal.horizon if T is None else T
        norms = self.prefix_norms(signal, T)
        if len(norms) < T or len(norms) < 2:
            # underflow: the products vanish faster than any envelope
            return lam
        t, w = _series(norms)
        if _growth(t, w, lam) <= 0:
            return lam
        if _growth(t, w, 0.0) > 0:
            return None

        rate = bisect(lambda x: _growth(t, w, x), 0.0, lam, xtol=tol)
        for _ in range(10000):
            if rate <= 0:
                break
            if _growth(t, w, rate) <= 0:
                return rate
            rate -= tol
        return None


def _series(norms: List[Tuple[int, float]]) -> Tuple[np.ndarray, np.ndarray]:
    t = np.array([0] + [k for k, _ in norms], dtype=float)
    w = np.array([1.0] + [n for _, n in norms])
    return t, w


def _peaks(t: np.ndarray, w: np.ndarray, lam: float) -> Tuple[float, float]:
    """Log of the envelope peak over the first and the second half of the horizon"""
    with np.errstate(divide='ignore'):
        log_envelope = np.log(w) + lam * t
    half = len(t) // 2
    return float(np.max(log_envelope[:half + 1])), float(np.max(log_envelope[half + 1:]))


def _growth(t: np.ndarray, w: np.ndarray, lam: float) -> float:
    """Positive when the late envelope peak exceeds the early one beyond rounding"""
    head, tail = _peaks(t, w, lam)
    return tail - head - math.log1p(1e-9)


def _two_super_blocks(signal: SwitchingSignal) -> int:
    gen = signal.generator
    if gen is None:
        return sum(b.dwell for b in signal.blocks[:2])
    first = sum(b.dwell for b in gen.seq1)
    second = sum(b.dwell for b in gen.seq2)
    if gen.kind == SignalKind.PERIODIC:
        return 2 * first
    return 2 * first + 3 * second


def simulate(family: SubsystemFamily, signal: SwitchingSignal, x0: Any) -> Trajectory:
    return SimulationEngine(family).simulate(signal, x0)


def prefix_norms(family: SubsystemFamily, signal: SwitchingSignal, T: Optional[int] = None) -> List[Tuple[int, float]]:
    return SimulationEngine(family).prefix_norms(signal, T)


def verify_ges(family: SubsystemFamily, signal: SwitchingSignal, certificate: Optional[Certificate] = None,
               T: Optional[int] = None, trials: int = DEFAULT_TRIALS, lam: Optional[float] = None,
               seed: int = DEFAULT_SEED) -> DecayEstimate:
    return SimulationEngine(family, seed=seed).verify_ges(signal, certificate, T, trials, lam)


def calibrate_certificate(family: SubsystemFamily, certificate: Certificate, T: int = DEFAULT_HORIZON) -> Certificate:
    """
    Cap the certificate's lambda at the rate its own signal is seen to decay at.

    The commutator condition can overstate the decay rate of the synthesized
    signal, so lambda is lowered to the largest value whose envelope passes
    the verify_ges growth test over max(T, two super-blocks) steps.
    """
    c = certificate.combination
    generator = build_generator(certificate.paths, c.p, c.q, certificate.delta, periodic=certificate.periodic)
    signal = materialize(generator, max(T, generator.minimal_horizon))
    needed = _two_super_blocks(signal)
    if signal.horizon < needed:
        signal = materialize(generator, needed)

    rate = SimulationEngine(family).signal_lambda(signal, certificate.lam)
    if rate is None:
        logger.warning(f"Signal for {certificate.kind.value} shows no decay over {signal.horizon} steps; "
                       f"keeping lambda={certificate.lam:.7g}")
        return replace(certificate, lambda_signal=0.0)
    if rate < certificate.lam:
        logger.warning(f"Certified lambda {certificate.lam:.7g} exceeds the observed signal decay; "
                       f"lowering it to {rate:.7g}")
        return certificate.with_lambda(rate, lambda_signal=rate)
    return replace(certificate, lambda_signal=rate)
