"""
Result files: results.csv, summary.json and per-term plot data.
"""

import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from .. import __version__
from .config import SCHEMA_VERSION, StudyConfig
from .fitting import ExtrapolationReport, extrapolate
from .sweep import SweepRecord

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['term', 'n_k', 'mesh', 're', 'im', 'err_vs_finest', 'wall_time', 'worker']
FLOAT_FORMAT = '%.17g'


def records_frame(records: Sequence[SweepRecord]) -> pd.DataFrame:
    """Records as a DataFrame with |value - value(finest mesh)| per term."""
    rows = [
        {'term': r.term, 'n_k': r.n_k, 'mesh': r.mesh, 're': r.re, 'im': r.im,
         'wall_time': r.wall_time, 'worker': r.worker}
        for r in records
    ]
    df = pd.DataFrame(rows, columns=[c for c in RESULT_COLUMNS if c != 'err_vs_finest'])
    if df.empty:
        df['err_vs_finest'] = pd.Series(dtype=float)
        return df[RESULT_COLUMNS]

    finest = {}
    for r in records:
        if r.term not in finest or r.mesh > finest[r.term].mesh:
            finest[r.term] = r
    df['err_vs_finest'] = [abs(r.value - finest[r.term].value) for r in records]
    return df[RESULT_COLUMNS]


def build_reports(records: Sequence[SweepRecord], config: StudyConfig) -> List[ExtrapolationReport]:
    """Fit and validate every term that has three fit meshes configured."""
    reports = []
    for plan in config.terms:
        if len(plan.fit_meshes) != 3:
            continue
        values = {r.mesh: r.value for r in records if r.term == plan.label}
        missing = [m for m in plan.fit_meshes if m not in values]
        if missing:
            logger.warning(f"{plan.label}: no records for fit meshes {missing}, skipping fit")
            continue
        reports.append(extrapolate(
            plan.label, values, plan.fit_meshes, plan.validation_meshes,
            config.reference_mode, config.candidate_exponents,
        ))
    return reports


def _file_safe(label: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.-]', '_', label)


def summary_document(reports: Sequence[ExtrapolationReport], config: Optional[StudyConfig] = None) -> dict:
    return {
        'schema_version': SCHEMA_VERSION,
        'version': __version__,
        'config_hash': config.config_hash() if config is not None else None,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'config': config.raw if config is not None else None,
        'fits': {r.term: [f.to_dict() for f in r.fits] for r in reports},
        'reports': [r.to_dict() for r in reports],
    }


def emit_report(
    records: Sequence[SweepRecord],
    reports: Sequence[ExtrapolationReport],
    out: Path,
    config: Optional[StudyConfig] = None,
) -> Dict[str, Path]:
    """
    Write results.csv, summary.json and plot_<term>.dat files.

    Args:
        records: Sweep records
        reports: Extrapolation reports
        out: Output directory (created if needed)
        config: Echoed with its hash into the summary

    Returns:
        Mapping of artifact name to path

    Raises:
        OSError: if the directory or a file cannot be written
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths: Dict[str, Path] = {}

    df = records_frame(records)
    paths['results'] = out / 'results.csv'
    df.to_csv(paths['results'], index=False, float_format=FLOAT_FORMAT)

    paths['summary'] = out / 'summary.json'
    paths['summary'].write_text(json.dumps(summary_document(reports, config), indent=2, default=str))

    for term, group in df.groupby('term', sort=False):
        finest_mesh = group['mesh'].max()
        rows = group[group['mesh'] != finest_mesh].sort_values('n_k')
        path = out / f"plot_{_file_safe(str(term))}.dat"
        lines = [f"# N_k |value - value(N_k={finest_mesh ** 3})|"]
        lines += [f"{int(n)} {FLOAT_FORMAT % e}" for n, e in zip(rows['n_k'], rows['err_vs_finest'])]
        path.write_text('\n'.join(lines) + '\n')
        paths[f'plot_{term}'] = path

    logger.info(f"Wrote {len(df)} records and {len(reports)} reports to {out}")
    return paths


def load_records(path: Path) -> List[SweepRecord]:
    """
    Read records back from results.csv or a records.jsonl journal.

    Raises:
        ValueError: for an unsupported or malformed file
    """
    path = Path(path)
    if path.suffix == '.jsonl':
        records = []
        for line in path.read_text().splitlines():
            if line.strip():
                records.append(SweepRecord.from_dict(json.loads(line)))
        return records
    if path.suffix == '.csv':
        df = pd.read_csv(path, float_precision='round_trip', keep_default_na=False)
        missing = {'term', 'mesh', 're', 'im'} - set(df.columns)
        if missing:
            raise ValueError(f"{path} lacks columns {sorted(missing)}")
        return [
            SweepRecord.from_dict({
                'term': row['term'], 'n_k': row.get('n_k', int(row['mesh']) ** 3), 'mesh': row['mesh'],
                're': row['re'], 'im': row['im'], 'wall_time': row.get('wall_time', 0.0) or 0.0,
                'worker': row.get('worker', ''),
            })
            for _, row in df.iterrows()
        ]
    raise ValueError(f"Unsupported records file {path}: expected .csv or .jsonl")
