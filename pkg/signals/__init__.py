from .signal_generator import (
    AdmissibilityReport,
    AdmissibilityViolation,
    SignalBlock,
    SignalGenerator,
    SignalKind,
    SwitchingSignal,
    build_generator,
    check_admissible,
    materialize,
    signal_at,
    signal_from_blocks,
    synthesize_nonperiodic,
    synthesize_periodic,
    synthesize_signal,
)

__all__ = [
    'AdmissibilityReport', 'AdmissibilityViolation', 'SignalBlock', 'SignalGenerator',
    'SignalKind', 'SwitchingSignal', 'build_generator', 'check_admissible', 'materialize',
    'signal_at', 'signal_from_blocks', 'synthesize_nonperiodic', 'synthesize_periodic',
    'synthesize_signal',
]
