import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import SIGNIFICANT_DIGITS
from errors import InvalidInputError
from linalg_core import eigenvalues, spectral_radius
from models import ProblemInstance
from signals import SwitchingSignal
from simulation_engine import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class Report:
    stage: str
    instance: Dict[str, Any]
    M: Optional[float] = None
    combinations: List[Dict[str, Any]] = field(default_factory=list)
    certificate: Optional[Dict[str, Any]] = None
    candidates: List[Dict[str, Any]] = field(default_factory=list)
    message: str = ""
    signal: Optional[Dict[str, Any]] = None
    admissibility: Optional[Dict[str, Any]] = None
    verification: Optional[Dict[str, Any]] = None
    files: List[str] = field(default_factory=list)
    exit_code: int = 0

    def to_dict(self) -> Dict[str, Any]:
        raw = {
            'stage': self.stage,
            'exit_code': self.exit_code,
            'message': self.message,
            'instance': self.instance,
            'M': self.M,
            'stable_combinations': self.combinations,
            'certificate': self.certificate,
            'candidates': self.candidates,
            'signal': self.signal,
            'admissibility': self.admissibility,
            'verification': self.verification,
            'files': self.files,
        }
        return _rounded(raw)


def _rounded(value: Any) -> Any:
    """Floats to SIGNIFICANT_DIGITS, complex to [re, im], infinities to strings"""
    if value is None or isinstance(value, (bool, str, int)):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(value, complex):
        return [_rounded(value.real), _rounded(value.imag)]
    if isinstance(value, dict):
        return {k: _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    if isinstance(value, np.ndarray):
        return _rounded(value.tolist())
    return str(value)


def instance_summary(instance: ProblemInstance) -> Dict[str, Any]:
    summary = instance.to_dict()
    names = instance.family.names or [f"A{k}" for k in instance.family.indices]
    summary['subsystems'] = [
        {
            'index': k,
            'name': names[k - 1],
            'eigenvalues': eigenvalues(m),
            'spectral_radius': spectral_radius(m),
        }
        for k, m in zip(instance.family.indices, instance.family.matrices)
    ]
    return summary


def render_report(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2)


def export_report(report: Report, filename: str):
    with open(filename, 'w') as f:
        f.write(render_report(report))
    logger.info(f"Report exported to {filename}")


def _write(frame: pd.DataFrame, directory: str, filename: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, filename)
    frame.to_csv(path, index=False)
    return path


def signal_frame(signal: SwitchingSignal) -> pd.DataFrame:
    active = signal.indices()
    return pd.DataFrame({'t': np.arange(len(active)), 'index': active})


def blocks_frame(signal: SwitchingSignal) -> pd.DataFrame:
    return pd.DataFrame({'index': [b.index for b in signal.blocks],
                         'dwell': [b.dwell for b in signal.blocks]})


def write_signal_csvs(signal: SwitchingSignal, directory: str) -> List[str]:
    """signal.csv (t,index) and blocks.csv (index,dwell)"""
    return [_write(signal_frame(signal), directory, 'signal.csv'),
            _write(blocks_frame(signal), directory, 'blocks.csv')]


def write_trajectory_csvs(trajectories: List[Trajectory], directory: str) -> List[str]:
    return [_write(traj.to_frame(), directory, f"trajectory_{k}.csv")
            for k, traj in enumerate(trajectories)]


def write_prefix_norms_csv(norms: List[Tuple[int, float]], directory: str) -> str:
    frame = pd.DataFrame(norms, columns=['t', 'norm'])
    return _write(frame, directory, 'prefix_norms.csv')


def read_blocks_csv(path: str) -> List[Tuple[int, int]]:
    """Read an (index,dwell) block listing as written by write_signal_csvs"""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidInputError(f"Cannot read signal file {path}: {e}")
    missing = {'index', 'dwell'} - set(frame.columns)
    if missing:
        raise InvalidInputError(f"Signal file {path} lacks column(s) {', '.join(sorted(missing))}")
    return [(int(i), int(d)) for i, d in zip(frame['index'], frame['dwell'])]
