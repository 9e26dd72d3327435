"""
Finite-size sweeps: one value per (selector, mesh size).

Points are ordered by estimated cost (largest first) and run on a bounded
thread pool. Every finished point is appended to a JSONL journal through a
single writer, so an interrupted sweep can resume where it stopped.
"""

import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..amplitudes import (
    CATALOG, MeshIntegrals, Mp2Amplitude, Mp3Amplitude, Mp3Ladder4h2pAmplitude,
    OrbitalQuadruple, TermId, amplitude_bytes, ccd_solve, check_budget, energy,
    mp3_tensor, parse_term, sample_on_mesh, term_evaluate,
)
from ..eri import EriEngine
from ..eri.integrals import GIB
from ..lattice import KPoint, build_mp_mesh
from ..utils.errors import BudgetError, ConfigError, SolverError
from .config import StudyConfig, TermPlan, build_system, external_labels

logger = logging.getLogger(__name__)

JOURNAL_NAME = 'records.jsonl'

_METHOD = re.compile(r'^(mp2|mp3|mp3_4h2p|ccd(\d+))_(energy|amplitude)$')

# amplitude-sized tensors held at once
TENSOR_COPIES = {
    'term_energy': 4,
    'mp2': 4,
    'mp3': 12,
    'ccd': 14,
}


@dataclass(frozen=True)
class Selector:
    """
    A parsed term selector.

    kind is 'term' (one catalog entry), 'energy' or 'amplitude' (a whole
    MP2/MP3/CCD(n) quantity).
    """

    name: str
    kind: str
    term: Optional[TermId] = None
    method: str = ''
    iterations: int = 0

    @property
    def order(self) -> int:
        """Powers of N_k in the evaluation cost."""
        if self.kind == 'term':
            spec = CATALOG[self.term]
            return 3 if spec.energy else max(spec.order, 1)
        if self.kind == 'energy' or self.method == 'ccd':
            return 3
        return 0 if self.method == 'mp2' else 1

    @property
    def needs_tensor(self) -> bool:
        if self.kind == 'term':
            return CATALOG[self.term].energy
        return self.kind == 'energy' or self.method == 'ccd'


def parse_selector(name: str) -> Selector:
    """
    Parse a term name, `<method>_energy` or `<method>_amplitude`, where
    method is mp2, mp3, mp3_4h2p (amplitude only) or ccd<n>.

    Raises:
        ValueError: for an unknown selector
    """
    match = _METHOD.match(name)
    if match:
        method, count, kind = match.group(1), match.group(2), match.group(3)
        if count is not None:
            if int(count) < 1:
                raise ValueError(f"Selector '{name}': CCD iteration count must be >= 1")
            return Selector(name, kind, method='ccd', iterations=int(count))
        if method == 'mp3_4h2p' and kind == 'energy':
            raise ValueError(f"Unknown selector '{name}'")
        return Selector(name, kind, method=method)
    try:
        return Selector(name, 'term', term=parse_term(name))
    except ValueError:
        raise ValueError(
            f"Unknown selector '{name}'. Use a term name, mp2/mp3/ccd<n>_energy "
            f"or mp2/mp3/mp3_4h2p/ccd<n>_amplitude"
        ) from None


@dataclass
class SweepRecord:
    """One evaluated (term, mesh) point."""

    term: str
    n_k: int
    mesh: int
    re: float
    im: float
    wall_time: float
    worker: str
    config_hash: str = ''

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> 'SweepRecord':
        return cls(
            term=str(data['term']), n_k=int(data['n_k']), mesh=int(data['mesh']),
            re=float(data['re']), im=float(data['im']),
            wall_time=float(data.get('wall_time', 0.0)), worker=str(data.get('worker', '')),
            config_hash=str(data.get('config_hash', '')),
        )


@dataclass
class SweepPoint:
    plan: TermPlan
    selector: Selector
    mesh: int
    cost: float
    bytes_needed: int

    @property
    def n_k(self) -> int:
        return self.mesh ** 3

    @property
    def key(self) -> Tuple[str, int]:
        return self.plan.label, self.mesh


def _tensor_copies(selector: Selector) -> int:
    if selector.kind == 'term':
        return TENSOR_COPIES['term_energy']
    return TENSOR_COPIES['ccd' if selector.method == 'ccd' else selector.method]


def plan_sweep(config: StudyConfig) -> List[SweepPoint]:
    """
    Every (term, mesh) point, most expensive first.

    Raises:
        BudgetError: naming the first (term, N_k) whose tensors exceed the budget
    """
    system_cfg = config.raw['system']
    n_occ, n_vir = system_cfg['n_occ'], system_cfg['n_vir']
    points: List[SweepPoint] = []
    for plan in config.terms:
        selector = parse_selector(plan.selector)
        for m in plan.meshes:
            n_k = m ** 3
            bytes_needed = 0
            if selector.needs_tensor:
                bytes_needed = _tensor_copies(selector) * amplitude_bytes(n_occ, n_vir, n_k)
                if bytes_needed > config.budget_gib * GIB:
                    raise BudgetError(
                        f"{plan.label} at N_k={n_k} needs {bytes_needed / GIB:.2f} GiB, "
                        f"budget is {config.budget_gib} GiB",
                        term=plan.label, n_k=n_k,
                    )
            cost = float(n_k) ** selector.order * max(selector.iterations, 1)
            points.append(SweepPoint(plan, selector, m, cost, bytes_needed))
    # stable: ties keep configuration order
    points.sort(key=lambda p: -p.cost)
    return points


def _amplitude_function(engine: EriEngine, kind: str, mesh, threads: int):
    if kind == 'mp3':
        return Mp3Amplitude(engine, mesh, threads)
    if kind == 'mp3_4h2p':
        return Mp3Ladder4h2pAmplitude(engine, mesh, threads)
    return Mp2Amplitude(engine)


def evaluate_point(
    engine: EriEngine,
    point: SweepPoint,
    labels: Tuple[OrbitalQuadruple, KPoint, KPoint, KPoint],
    scheme: str = 'gamma_centered',
    budget_gib: float = 4.0,
    threads: int = 1,
) -> complex:
    """
    Value of one selector on one mesh.

    Amplitude selectors use the external labels; ccd<n>_amplitude needs the
    external k-points to lie on the mesh.

    Raises:
        BudgetError, SolverError, ConfigError
    """
    system = engine.system
    mesh = build_mp_mesh(system.cell, point.mesh, scheme)
    selector = point.selector
    quadruple, k_i, k_j, k_a = labels

    if selector.kind == 'term':
        spec = CATALOG[selector.term]
        if spec.energy:
            check_budget(system.n_occ, system.n_vir, mesh.n_k, budget_gib,
                         term=point.plan.label, copies=TENSOR_COPIES['term_energy'])
        t = _amplitude_function(engine, point.plan.amplitude, mesh, threads)
        return term_evaluate(engine, selector.term, t, quadruple, k_i, k_j, k_a, mesh,
                             permuted=point.plan.permuted, threads=threads, budget_gib=budget_gib)

    if selector.kind == 'amplitude' and selector.method != 'ccd':
        t = _amplitude_function(engine, selector.method, mesh, threads)
        return complex(t(quadruple, k_i, k_j, k_a))

    integrals = MeshIntegrals(engine, mesh, budget_gib=budget_gib, threads=threads)
    mp2 = sample_on_mesh(Mp2Amplitude(engine), mesh, integrals, budget_gib=budget_gib)
    if selector.method == 'mp2':
        amplitudes = mp2
    elif selector.method == 'mp3':
        amplitudes = mp3_tensor(integrals, mp2)
    else:
        amplitudes, _ = ccd_solve(integrals, selector.iterations)

    if selector.kind == 'energy':
        return energy(integrals, amplitudes)
    try:
        return amplitudes.entry(quadruple, system.n_occ, k_i, k_j, k_a)
    except KeyError:
        raise ConfigError(
            f"{point.plan.label}: external k-points are not on the {point.mesh}^3 {scheme} mesh"
        ) from None


class RecordJournal:
    """Append-only JSONL file of finished points; writes are serialized."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def read(self, config_hash: str) -> Dict[Tuple[str, int], SweepRecord]:
        records: Dict[Tuple[str, int], SweepRecord] = {}
        if not self.path.exists():
            return records
        skipped = 0
        with open(self.path, 'r') as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = SweepRecord.from_dict(json.loads(line))
                except (ValueError, KeyError) as e:
                    logger.warning(f"Skipping unreadable journal line in {self.path}: {str(e)}")
                    continue
                if record.config_hash != config_hash:
                    skipped += 1
                    continue
                records[(record.term, record.mesh)] = record
        if skipped:
            logger.warning(f"Ignored {skipped} journal records from a different configuration")
        return records

    def reset(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text('')

    def append(self, record: SweepRecord) -> None:
        with self._lock:
            with open(self.path, 'a') as f:
                f.write(record.to_json() + '\n')
                f.flush()


def run_sweep(
    config: StudyConfig,
    resume: bool = False,
    out: Optional[Path] = None,
    engine: Optional[EriEngine] = None,
) -> List[SweepRecord]:
    """
    Evaluate every planned point.

    Args:
        config: Resolved study configuration
        resume: Keep journal records from an earlier run of the same config
        out: Output directory (default config.out)
        engine: Prebuilt ERI engine (default: built from the config)

    Returns:
        Records in configuration order (term, then mesh)

    Raises:
        BudgetError: a point exceeds the memory budget
        SolverError: a point failed; the message names (term, N_k)
    """
    points = plan_sweep(config)
    if not points:
        logger.info("No sweep points configured")
        return []

    out = Path(out) if out is not None else config.out
    journal = RecordJournal(out / JOURNAL_NAME)
    digest = config.config_hash()
    done: Dict[Tuple[str, int], SweepRecord] = journal.read(digest) if resume else {}
    if not resume:
        journal.reset()
    pending = [p for p in points if p.key not in done]
    logger.info(f"Sweep: {len(points)} points, {len(done)} already done, {len(pending)} to run")

    if pending:
        if engine is None:
            _, engine = build_system(config)
        labels = external_labels(config, engine.system.reciprocal)
        outer = min(config.threads, len(pending))
        inner = max(1, config.threads // outer)

        def run(point: SweepPoint) -> SweepRecord:
            start = time.perf_counter()
            try:
                value = evaluate_point(engine, point, labels, config.scheme, config.budget_gib, inner)
            except BudgetError:
                raise
            except SolverError as e:
                raise SolverError(f"{point.plan.label} at N_k={point.n_k}: {str(e)}") from e
            record = SweepRecord(
                point.plan.label, point.n_k, point.mesh, value.real, value.imag,
                time.perf_counter() - start, threading.current_thread().name, digest,
            )
            journal.append(record)
            logger.info(f"{record.term} N_k={record.n_k}: {value:.12g} ({record.wall_time:.1f}s)")
            return record

        with ThreadPoolExecutor(max_workers=outer, thread_name_prefix='sweep') as pool:
            for record in pool.map(run, pending):
                done[(record.term, record.mesh)] = record
        engine.system.cache.save(config.raw['system']['n_pw'], engine.system.fingerprint)

    ordered = []
    for plan in config.terms:
        for m in plan.meshes:
            if (plan.label, m) in done:
                ordered.append(done[(plan.label, m)])
    return ordered
