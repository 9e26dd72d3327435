"""
Finite-size sweeps, power-law extrapolation and result files.
"""

from .config import (
    SCHEMA_VERSION, DEFAULT_CONFIG_PATH, StudyConfig, TermPlan,
    load_study_config, parse_inline_overrides, environment_overrides,
    build_system, external_labels, config_hash,
)
from .fitting import (
    Verdict, ValidationResult, ExtrapolationReport,
    scalar_series, fit_power_law, validate_fit, extrapolate, predict,
)
from .sweep import (
    Selector, SweepRecord, SweepPoint, RecordJournal,
    parse_selector, plan_sweep, evaluate_point, run_sweep,
)
from .report import RESULT_COLUMNS, records_frame, build_reports, summary_document, emit_report, load_records

__all__ = [
    'SCHEMA_VERSION', 'DEFAULT_CONFIG_PATH', 'StudyConfig', 'TermPlan',
    'load_study_config', 'parse_inline_overrides', 'environment_overrides',
    'build_system', 'external_labels', 'config_hash',
    'Verdict', 'ValidationResult', 'ExtrapolationReport',
    'scalar_series', 'fit_power_law', 'validate_fit', 'extrapolate', 'predict',
    'Selector', 'SweepRecord', 'SweepPoint', 'RecordJournal',
    'parse_selector', 'plan_sweep', 'evaluate_point', 'run_sweep',
    'RESULT_COLUMNS', 'records_frame', 'build_reports', 'summary_document', 'emit_report', 'load_records',
]
