"""
Study configuration: YAML loading, schema validation, inline overrides,
environment overrides and the reproducibility hash.

Precedence: file < environment (CCDFSE_THREADS, CCDFSE_BUDGET_GIB) <
command-line flags and --set overrides.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from ..amplitudes import OrbitalQuadruple
from ..eri import EriEngine
from ..lattice import KPoint, UnitCell
from ..meanfield import BandCache, EigensolverSettings, ModelSystem, PlanewaveBasis, PotentialSpec
from ..utils.errors import ConfigError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / 'config' / 'config.yaml'

ENV_THREADS = 'CCDFSE_THREADS'
ENV_BUDGET = 'CCDFSE_BUDGET_GIB'

DEFAULTS: Dict[str, Any] = {
    'schema_version': SCHEMA_VERSION,
    'system': {
        'cell': 1.0,
        'n_pw': 16,
        'n_occ': 1,
        'n_vir': 1,
        'n_bands': None,
        'potential': {
            'strength': -200.0,
            'center': [0.5, 0.5, 0.5],
            'sigma': [0.1, 0.2, 0.3],
        },
        'eigensolver': {
            'tol': 0.0,
            'max_iter': None,
            'residual_tol': 1e-9,
            'dense_limit': 1000,
        },
    },
    'meanfield': {
        'gap_mesh': 8,
        'k_points': [[0, 0, 0]],
        'path_points': 0,
        'band_cache': None,
    },
    'study': {
        'terms': [],
        'external': {
            'quadruple': [1, 1, 2, 2],
            'k_i': [0, 0, 0],
            'k_j': [0, 0, 0],
            'k_a': [0, 0, '1/2'],
        },
        'meshes': [],
        'fit_meshes': [],
        'validation_meshes': [],
        'scheme': 'gamma_centered',
        'reference_mode': 'finest',
        'candidate_exponents': [1.0, '1/3'],
    },
    'ccd': {
        'mesh': 2,
        'iterations': 4,
    },
    'quadlab': {
        'integral_class': 2,
        'dimension': 3,
        'orders': [-2.0],
        'meshes': [8, 16, 24, 32],
        'validation_meshes': [],
        'offset': 0.0,
        'shift': None,
        'sign': 1,
    },
    'runtime': {
        'threads': 1,
        'budget_gib': 4.0,
        'pair_cache_gib': 2.0,
        'out': 'outputs',
    },
}

TERM_KEYS = {'term', 'meshes', 'fit_meshes', 'validation_meshes', 'amplitude', 'permuted'}
REFERENCE_MODES = ('finest', 'real', 'imag', 'abs')


@dataclass
class TermPlan:
    """One selector with its own mesh lists."""

    selector: str
    meshes: List[int]
    fit_meshes: List[int]
    validation_meshes: List[int]
    amplitude: str = 'mp2'
    permuted: bool = False

    @property
    def label(self) -> str:
        label = self.selector
        if self.permuted:
            label += '_p'
        if self.amplitude != 'mp2':
            label += f'@{self.amplitude}'
        return label


@dataclass
class StudyConfig:
    """Resolved configuration; `raw` is the validated document that is hashed."""

    raw: Dict[str, Any]
    terms: List[TermPlan] = field(default_factory=list)

    def section(self, name: str) -> Dict[str, Any]:
        return self.raw[name]

    @property
    def threads(self) -> int:
        return int(self.raw['runtime']['threads'])

    @property
    def budget_gib(self) -> float:
        return float(self.raw['runtime']['budget_gib'])

    @property
    def out(self) -> Path:
        return Path(self.raw['runtime']['out'])

    @property
    def scheme(self) -> str:
        return self.raw['study']['scheme']

    @property
    def reference_mode(self) -> str:
        return self.raw['study']['reference_mode']

    @property
    def candidate_exponents(self) -> List[float]:
        return [float(Fraction(str(v))) for v in self.raw['study']['candidate_exponents']]

    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(document: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON dump."""
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _read_document(config_path: Path) -> Dict[str, Any]:
    try:
        with open(config_path, 'r') as f:
            document = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ''
        raise ConfigError(f"Malformed config {config_path}{where}: {getattr(e, 'problem', e)}") from e
    except OSError as e:
        raise ConfigError(f"Cannot read config {config_path}: {str(e)}") from e
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigError(f"Config {config_path} must be a mapping at the top level")
    return document


def _merge(base: Dict[str, Any], update: Dict[str, Any], path: str = '') -> Dict[str, Any]:
    """Deep merge rejecting keys that are not in `base`."""
    for key, value in update.items():
        key_path = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"Unknown config key '{key_path}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Config key '{key_path}' must be a mapping")
            _merge(base[key], value, key_path)
        else:
            base[key] = value
    return base


def _coerce(value: str) -> Any:
    """Inline values: booleans, numbers, YAML lists, else strings."""
    if value.lower() == 'true':
        return True
    if value.lower() == 'false':
        return False
    if value.lower() in ('null', 'none'):
        return None
    if value.startswith('['):
        try:
            return yaml.safe_load(value.replace(';', ','))
        except yaml.YAMLError:
            return value
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def parse_inline_overrides(override_string: Optional[str]) -> Dict[str, Any]:
    """
    Parse "key.path=value,key.path=value" into a nested dictionary.

    List values use brackets with ';' separators, e.g. "study.meshes=[6;8;10]".

    Raises:
        ConfigError: for an entry without '='
    """
    overrides: Dict[str, Any] = {}
    if not override_string:
        return overrides

    for pair in override_string.split(','):
        pair = pair.strip()
        if not pair:
            continue
        if '=' not in pair:
            raise ConfigError(f"Override '{pair}' is not of the form key=value")
        key, value = pair.split('=', 1)
        parts = [p for p in key.strip().split('.') if p]
        if not parts:
            raise ConfigError(f"Override '{pair}' has an empty key")
        node = overrides
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _coerce(value.strip())
    return overrides


def environment_overrides(environ=None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    runtime: Dict[str, Any] = {}
    try:
        if environ.get(ENV_THREADS):
            runtime['threads'] = int(environ[ENV_THREADS])
        if environ.get(ENV_BUDGET):
            runtime['budget_gib'] = float(environ[ENV_BUDGET])
    except ValueError as e:
        raise ConfigError(f"Invalid environment override: {str(e)}") from e
    return {'runtime': runtime} if runtime else {}


def load_study_config(
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    environ=None,
) -> StudyConfig:
    """
    Load, merge and validate a study configuration.

    Args:
        config_path: YAML/JSON file. If None, uses default config/config.yaml
        overrides: Nested flag/--set values applied last
        environ: Environment mapping (defaults to os.environ)

    Returns:
        Validated StudyConfig

    Raises:
        ConfigError: on malformed documents, unknown keys or invalid values
    """
    document = copy.deepcopy(DEFAULTS)
    path = Path(config_path) if config_path is not None else DEFAULT_CONFIG_PATH
    if path.exists():
        _merge(document, _read_document(path))
    elif config_path is not None:
        raise ConfigError(f"Config file not found: {path}")
    else:
        logger.warning(f"Config file not found at {path}, using defaults")

    _merge(document, environment_overrides(environ))
    if overrides:
        _merge(document, copy.deepcopy(overrides))
    return validate_config(document)


def _mesh_list(value, key: str) -> List[int]:
    if value is None:
        return []
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"'{key}' must be a list of mesh sizes")
    meshes = []
    for m in value:
        if isinstance(m, bool) or not isinstance(m, (int, float)) or int(m) != m or m < 1:
            raise ConfigError(f"'{key}' entries must be positive integers, got {m!r}")
        meshes.append(int(m))
    return meshes


def parse_fraction_triple(value, key: str) -> Tuple[Fraction, Fraction, Fraction]:
    """A fractional k-point given as a list or a comma-separated string."""
    if isinstance(value, str):
        value = [v for v in value.replace(' ', '').split(',') if v]
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"'{key}' must have three fractional coordinates")
    try:
        return tuple(Fraction(str(v)) for v in value)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"'{key}' has an invalid coordinate: {str(e)}") from e


def _term_plan(entry, study: Dict[str, Any], index: int) -> TermPlan:
    if isinstance(entry, str):
        entry = {'term': entry}
    if not isinstance(entry, dict) or 'term' not in entry:
        raise ConfigError(f"study.terms[{index}] must be a selector string or a mapping with 'term'")
    unknown = set(entry) - TERM_KEYS
    if unknown:
        raise ConfigError(f"Unknown config key 'study.terms[{index}].{sorted(unknown)[0]}'")
    meshes = _mesh_list(entry.get('meshes', study['meshes']), f'study.terms[{index}].meshes')
    fit = _mesh_list(entry.get('fit_meshes', study['fit_meshes']), f'study.terms[{index}].fit_meshes')
    validation = _mesh_list(entry.get('validation_meshes', study['validation_meshes']),
                            f'study.terms[{index}].validation_meshes')
    if not set(fit) <= set(meshes):
        raise ConfigError(f"study.terms[{index}]: fit meshes {fit} are not all in meshes {meshes}")
    if set(validation) & set(fit):
        raise ConfigError(f"study.terms[{index}]: validation meshes overlap the fit meshes")
    if not set(validation) <= set(meshes):
        raise ConfigError(f"study.terms[{index}]: validation meshes {validation} are not all in meshes {meshes}")
    if fit and len(fit) != 3:
        raise ConfigError(f"study.terms[{index}]: exactly 3 fit meshes are required, got {len(fit)}")
    amplitude = str(entry.get('amplitude', 'mp2'))
    if amplitude not in ('mp2', 'mp3', 'mp3_4h2p'):
        raise ConfigError(f"study.terms[{index}].amplitude must be mp2, mp3 or mp3_4h2p, got {amplitude}")

    # imported here: selector parsing depends on the amplitude catalog
    from .sweep import parse_selector
    try:
        parse_selector(str(entry['term']))
    except ValueError as e:
        raise ConfigError(f"study.terms[{index}]: {str(e)}") from e
    return TermPlan(str(entry['term']), meshes, fit, validation, amplitude, bool(entry.get('permuted', False)))


def validate_config(document: Dict[str, Any]) -> StudyConfig:
    """
    Check value ranges and build the TermPlan list.

    Raises:
        ConfigError: naming the offending key
    """
    if document.get('schema_version') != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {document.get('schema_version')!r}, expected {SCHEMA_VERSION}")

    system = document['system']
    if not isinstance(system['n_pw'], int) or system['n_pw'] < 2:
        raise ConfigError(f"system.n_pw must be an integer >= 2, got {system['n_pw']!r}")
    for key in ('n_occ', 'n_vir'):
        if not isinstance(system[key], int) or system[key] < 1:
            raise ConfigError(f"system.{key} must be a positive integer, got {system[key]!r}")
    potential = system['potential']
    if len(potential['center']) != 3 or len(potential['sigma']) != 3:
        raise ConfigError("system.potential.center and sigma need three components")
    if any(float(s) <= 0 for s in potential['sigma']):
        raise ConfigError(f"system.potential.sigma must be positive, got {potential['sigma']}")
    cell = system['cell']
    if isinstance(cell, (int, float)):
        if cell <= 0:
            raise ConfigError(f"system.cell must be positive, got {cell}")
    elif not (isinstance(cell, list) and len(cell) == 3 and all(len(row) == 3 for row in cell)):
        raise ConfigError("system.cell must be a length or a 3x3 matrix of lattice vectors")

    runtime = document['runtime']
    if not isinstance(runtime['threads'], int) or runtime['threads'] < 1:
        raise ConfigError(f"runtime.threads must be a positive integer, got {runtime['threads']!r}")
    if float(runtime['budget_gib']) <= 0:
        raise ConfigError(f"runtime.budget_gib must be positive, got {runtime['budget_gib']}")

    study = document['study']
    if study['scheme'] not in ('gamma_centered', 'mp_offset'):
        raise ConfigError(f"study.scheme must be gamma_centered or mp_offset, got {study['scheme']!r}")
    if study['reference_mode'] not in REFERENCE_MODES:
        raise ConfigError(f"study.reference_mode must be one of {REFERENCE_MODES}, got {study['reference_mode']!r}")
    try:
        [Fraction(str(v)) for v in study['candidate_exponents']]
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"study.candidate_exponents: {str(e)}") from e
    external = study['external']
    for key in ('k_i', 'k_j', 'k_a'):
        parse_fraction_triple(external[key], f'study.external.{key}')
    try:
        OrbitalQuadruple.parse(external['quadruple']).validate(system['n_occ'], system['n_vir'])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"study.external.quadruple {external['quadruple']!r}: {str(e)}") from e

    ccd = document['ccd']
    if not isinstance(ccd['iterations'], int) or ccd['iterations'] < 1:
        raise ConfigError(f"ccd.iterations must be a positive integer, got {ccd['iterations']!r}")
    _mesh_list([ccd['mesh']], 'ccd.mesh')
    _mesh_list([document['meanfield']['gap_mesh']], 'meanfield.gap_mesh')

    terms = [_term_plan(entry, study, i) for i, entry in enumerate(study['terms'] or [])]
    return StudyConfig(document, terms)


def build_cell(document: Dict[str, Any]) -> UnitCell:
    cell = document['system']['cell']
    if isinstance(cell, (int, float)):
        return UnitCell.cubic(float(cell))
    return UnitCell(np.array(cell, dtype=float).T)


def build_system(config: StudyConfig, cache_path: Optional[Path] = None):
    """
    Model system and ERI engine described by the configuration.

    Returns:
        (ModelSystem, EriEngine)
    """
    raw = config.raw
    system_cfg = raw['system']
    potential_cfg = system_cfg['potential']
    eig = system_cfg['eigensolver']
    settings = EigensolverSettings(
        tol=float(eig['tol']),
        max_iter=eig['max_iter'],
        residual_tol=float(eig['residual_tol']),
        dense_limit=int(eig['dense_limit']),
    )
    cache_path = cache_path or raw['meanfield']['band_cache']
    cache = BandCache(Path(cache_path) if cache_path else None)
    try:
        system = ModelSystem(
            build_cell(raw),
            PotentialSpec.from_stddev(potential_cfg['center'], potential_cfg['sigma'], potential_cfg['strength']),
            PlanewaveBasis(system_cfg['n_pw']),
            n_occ=system_cfg['n_occ'],
            n_vir=system_cfg['n_vir'],
            n_bands=system_cfg['n_bands'],
            settings=settings,
            cache=cache,
            threads=config.threads,
        )
    except ValueError as e:
        raise ConfigError(f"Invalid system: {str(e)}") from e
    cache.load(system.reciprocal, system.n_bands, system_cfg['n_pw'], system.fingerprint)
    engine = EriEngine(system, cache_gib=float(raw['runtime']['pair_cache_gib']))
    return system, engine


def external_labels(config: StudyConfig, reciprocal) -> Tuple[Any, KPoint, KPoint, KPoint]:
    """(quadruple, k_i, k_j, k_a) from study.external."""
    external = config.raw['study']['external']
    quadruple = OrbitalQuadruple.parse(external['quadruple'])
    kpoints = [
        KPoint.from_fractional(parse_fraction_triple(external[key], f'study.external.{key}'), reciprocal)
        for key in ('k_i', 'k_j', 'k_a')
    ]
    return (quadruple, *kpoints)

