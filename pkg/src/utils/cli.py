"""
Command-line interface for the finite-size lab.

Subcommands: meanfield, sweep, quadlab, fit, ccd. Library errors are
turned into stable exit codes here and nowhere else.
"""

import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import pandas as pd

from .. import __version__
from .errors import ConfigError, LabError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

BANNER = "=" * 60
SUPER_ALGEBRAIC_FLOOR = 1e-10


def _banner(title: str) -> None:
    click.echo("\n" + BANNER)
    click.echo(title)
    click.echo(BANNER)


def _exit_on_error(func):
    """Map library exceptions to exit codes (2 config, 3 solver, 4 budget, 1 other)."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except LabError as e:
            click.echo(f"Error: {str(e)}", err=True)
            sys.exit(e.exit_code)
        except click.ClickException:
            raise
        except Exception as e:
            logger.exception("Unexpected failure")
            click.echo(f"Error: {str(e)}", err=True)
            sys.exit(1)
    return wrapper


def _common_options(func):
    """--config, --set, --out, --threads, --budget-gib, --verbose."""
    options = [
        click.option('--config', '-c', 'config_path', type=click.Path(),
                     help='Path to YAML/JSON configuration file (default: config/config.yaml)'),
        click.option('--set', 'inline', help='Inline overrides (e.g., "study.meshes=[4;5;6],runtime.threads=4")'),
        click.option('--out', '-o', help='Output directory (default: runtime.out)'),
        click.option('--threads', type=int, help='Worker threads (env CCDFSE_THREADS)'),
        click.option('--budget-gib', type=float, help='Memory budget in GiB (env CCDFSE_BUDGET_GIB)'),
        click.option('--verbose', '-v', is_flag=True, help='Debug logging'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load_config(config_path, inline, out, threads, budget_gib, verbose):
    from ..study import load_study_config, parse_inline_overrides

    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    overrides: Dict[str, Any] = parse_inline_overrides(inline)
    runtime = overrides.setdefault('runtime', {})
    if threads is not None:
        runtime['threads'] = threads
    if budget_gib is not None:
        runtime['budget_gib'] = budget_gib
    if out is not None:
        runtime['out'] = out
    if not runtime:
        overrides.pop('runtime')
    config = load_study_config(config_path, overrides)
    click.echo(f"Config hash {config.config_hash()[:12]} (version {__version__})")
    return config


def _parse_kpoints(values: Tuple[str, ...]) -> List[List[str]]:
    kpoints = []
    for value in values:
        parts = [p.strip() for p in value.split(',') if p.strip()]
        if len(parts) != 3:
            raise ConfigError(f"k-point '{value}' must have three comma-separated coordinates")
        kpoints.append(parts)
    return kpoints


def _parse_ints(value: Optional[str], name: str) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise ConfigError(f"--{name} must be comma-separated integers, got '{value}'") from None


def _parse_floats(value: Optional[str], name: str) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise ConfigError(f"--{name} must be comma-separated numbers, got '{value}'") from None


def _write_json(path: Path, document: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, default=str))


@click.group()
@click.version_option(__version__)
def cli():
    """Finite-size error lab for periodic MP2/MP3/CCD(n)."""
    pass


@cli.command()
@_common_options
@click.option('--k', 'kpoints', multiple=True, help='Fractional k-point, e.g. "0,0,1/2" (repeatable)')
@click.option('--path-points', type=int, help='Points per segment of a band path through the k-points')
@click.option('--gap-mesh', type=int, help='Mesh size for the direct-gap scan (0 skips it)')
@click.option('--band-cache', type=click.Path(), help='Binary band cache file')
@_exit_on_error
def meanfield(config_path, inline, out, threads, budget_gib, verbose, kpoints, path_points, gap_mesh, band_cache):
    """
    Solve the mean-field problem and report bands and the direct gap.

    \b
    python -m src meanfield --k 0,0,0 --k 0,0,1/2
    python -m src meanfield --set system.potential.strength=0 --gap-mesh 0
    """
    from ..lattice import build_mp_mesh
    from ..meanfield import band_path, direct_gap
    from ..study import build_system
    from ..study.config import parse_fraction_triple

    config = _load_config(config_path, inline, out, threads, budget_gib, verbose)
    section = config.section('meanfield')
    k_list = _parse_kpoints(kpoints) if kpoints else section['k_points']
    path_points = section['path_points'] if path_points is None else path_points
    gap_points = section['gap_mesh'] if gap_mesh is None else gap_mesh

    system, _ = build_system(config, Path(band_cache) if band_cache else None)
    corners = [
        system.kpoint(parse_fraction_triple(k, f'meanfield.k_points[{i}]')) for i, k in enumerate(k_list)
    ]
    if path_points and path_points > 0:
        states = band_path(system, corners, path_points)
    else:
        states = [system.solve(k) for k in corners]

    rows = []
    for s in states:
        for n, e in enumerate(s.energies):
            rows.append({'k': str(s.k), 'band': n + 1, 'energy': float(e),
                         'occupied': n < system.n_occ})
    bands_df = pd.DataFrame(rows, columns=['k', 'band', 'energy', 'occupied'])

    gap = None
    if gap_points > 0:
        gap = direct_gap(system, build_mp_mesh(system.cell, gap_points, config.scheme))
    system.cache.save(config.raw['system']['n_pw'], system.fingerprint)

    out_dir = config.out
    out_dir.mkdir(parents=True, exist_ok=True)
    bands_df.to_csv(out_dir / 'bands.csv', index=False, float_format='%.17g')
    _write_json(out_dir / 'meanfield.json', {
        'version': __version__, 'config_hash': config.config_hash(),
        'direct_gap': gap, 'gap_mesh': gap_points,
    })

    _banner("MEAN-FIELD SUMMARY")
    for s in states:
        click.echo(f"k = {s.k}: " + ', '.join(f"{e:.6f}" for e in s.energies))
    if gap is not None:
        click.echo(f"\nDirect gap ({gap_points}^3 gap mesh): {gap:.4f}")
    click.echo(f"Bands saved to {out_dir / 'bands.csv'}")
    click.echo(BANNER)


@cli.command()
@_common_options
@click.option('--dry-run', is_flag=True, help='Print the cost plan without computing')
@click.option('--resume', is_flag=True, help='Continue from records.jsonl in the output directory')
@_exit_on_error
def sweep(config_path, inline, out, threads, budget_gib, verbose, dry_run, resume):
    """
    Evaluate terms over mesh sizes, fit power laws and write results.

    \b
    python -m src sweep --config config/panels.yaml --threads 8
    python -m src sweep --config config/panels.yaml --dry-run
    python -m src sweep --config config/panels.yaml --resume
    """
    from ..study import build_reports, emit_report, plan_sweep, run_sweep

    config = _load_config(config_path, inline, out, threads, budget_gib, verbose)
    points = plan_sweep(config)

    if dry_run:
        plan_df = pd.DataFrame(
            [{'term': p.plan.label, 'mesh': p.mesh, 'n_k': p.n_k, 'cost': p.cost,
              'gib': p.bytes_needed / 2 ** 30} for p in points],
            columns=['term', 'mesh', 'n_k', 'cost', 'gib'],
        )
        _banner("SWEEP PLAN (most expensive first)")
        click.echo(plan_df.to_string(index=False) if len(plan_df) else "No sweep points configured")
        click.echo(BANNER)
        return

    click.echo(f"\nRunning {len(points)} sweep point(s) on {config.threads} thread(s)\n")
    records = run_sweep(config, resume=resume)
    reports = build_reports(records, config)
    try:
        paths = emit_report(records, reports, config.out, config)
    except OSError as e:
        click.echo(f"Error saving results: {str(e)}", err=True)
        sys.exit(1)

    _banner("SWEEP SUMMARY")
    click.echo(f"Records: {len(records)}")
    for report in reports:
        free = report.free_fit
        if free is not None:
            click.echo(f"  {report.term}: s = {free.exponent:.3f}, C0 = {free.c0:.6g}")
        for key, verdict in report.verdicts().items():
            click.echo(f"    {key}: {verdict}")
    click.echo(f"\nResults saved to {paths['results']}")
    click.echo(BANNER)


@cli.command()
@_common_options
@click.option('--class', 'integral_class', type=int, help='Integral class 1..5')
@click.option('--dimension', '-d', type=int, help='Dimension 1, 2 or 3')
@click.option('--orders', help='Singularity orders, e.g. "-2" or "-2,0"')
@click.option('--meshes', help='Comma-separated mesh sizes (at least 4)')
@click.option('--validation-meshes', help='Extra mesh sizes checked against the fit')
@click.option('--offset', type=float, help='Rule offset in units of the mesh spacing')
@click.option('--shift', help='Class-3 location of the order-0 factor, e.g. "0.25,0,0"')
@click.option('--sign', type=click.Choice(['1', '-1']), help='Class-5 sign in x2 +/- x1')
@click.option('--order-check', is_flag=True, help='Also run the partially integrated order check')
@_exit_on_error
def quadlab(config_path, inline, out, threads, budget_gib, verbose, integral_class, dimension, orders,
            meshes, validation_meshes, offset, shift, sign, order_check):
    """
    Measure trapezoidal-rule error rates for a synthetic singular integrand.

    \b
    python -m src quadlab --class 2 -d 3 --orders -2
    python -m src quadlab --class 5 -d 3 --orders -2,0 --meshes 8,12,16,24
    """
    from ..quadrature import measure_rate, nonsmooth_order_check, synthetic_integrand

    config = _load_config(config_path, inline, out, threads, budget_gib, verbose)
    section = config.section('quadlab')
    integral_class = section['integral_class'] if integral_class is None else integral_class
    dimension = section['dimension'] if dimension is None else dimension
    order_list = _parse_floats(orders, 'orders') or [float(g) for g in section['orders']]
    mesh_list = _parse_ints(meshes, 'meshes') or [int(m) for m in section['meshes']]
    validation = _parse_ints(validation_meshes, 'validation-meshes') or [int(m) for m in section['validation_meshes']]
    offset = float(section['offset']) if offset is None else offset
    shift = _parse_floats(shift, 'shift') or section['shift']
    sign = int(section['sign']) if sign is None else int(sign)

    integrand = synthetic_integrand(integral_class, dimension, order_list, shift, sign)
    try:
        for m in mesh_list + validation:
            integrand.check_mesh(m)
        fit = measure_rate(integrand, mesh_list, offset, validation)
    except ValueError as e:
        raise ConfigError(str(e)) from e

    document = {
        'version': __version__, 'config_hash': config.config_hash(),
        'integrand': integrand.description, 'dimension': dimension,
        'predicted': integrand.expected_rate, 'fit': fit.to_dict(),
    }
    profile = None
    if order_check:
        gammas = order_list + [0.0] * (2 - len(order_list))
        profile = nonsmooth_order_check(gammas[0], gammas[1])
        document['order_check'] = profile.to_dict()
    out_dir = config.out
    _write_json(out_dir / f'quadlab_class{integral_class}_d{dimension}.json', document)

    _banner("QUADRATURE RATE")
    click.echo(f"Integrand: {integrand.description} (d={dimension})")
    for m, e in zip(fit.meshes, fit.errors):
        click.echo(f"  m = {m:5d}  error = {e:.3e}")
    if integrand.expected_rate is None:
        click.echo(f"Predicted: super-algebraic; finest error {fit.errors[-1]:.3e}")
        if fit.errors[-1] < SUPER_ALGEBRAIC_FLOOR or not fit.reliable:
            click.echo("Verdict: super-algebraic")
        else:
            click.echo(f"Measured exponent: {fit.exponent:.3f}")
    else:
        click.echo(f"Predicted exponent: {integrand.expected_rate:.3f}")
        click.echo(f"Measured exponent:  {fit.exponent:.3f} (reference: {fit.reference_source})")
    for note in fit.notes:
        click.echo(f"Note: {note}")
    if profile is not None:
        click.echo(f"Partially integrated order at y=0: {profile.order:.3f}"
                   + (' (ambiguous)' if profile.ambiguous else ''))
    click.echo(BANNER)


def _parse_points(value: Optional[str], name: str) -> List[Tuple[int, complex]]:
    """"N:value,N:value" with complex values allowed (e.g. 216:1.5+0.1j)."""
    if not value:
        return []
    points = []
    for pair in value.split(','):
        pair = pair.strip()
        if not pair:
            continue
        if ':' not in pair:
            raise ConfigError(f"--{name} entry '{pair}' is not of the form N:value")
        n, v = pair.split(':', 1)
        try:
            points.append((int(n), complex(v.strip().replace(' ', ''))))
        except ValueError:
            raise ConfigError(f"--{name} entry '{pair}' is not of the form N:value") from None
    return points


@cli.command()
@_common_options
@click.option('--records', 'records_path', type=click.Path(exists=True),
              help='results.csv or records.jsonl from an earlier sweep')
@click.option('--points', help='Exactly three fit points "N:value,N:value,N:value" (N = N_k)')
@click.option('--later', help='Validation points "N:value,..." at larger N_k')
@click.option('--exponent', type=float, help='Fixed exponent s for the --points fit')
@click.option('--reference-mode', type=click.Choice(['finest', 'real', 'imag', 'abs']),
              help='Scalar series the fit runs on')
@_exit_on_error
def fit(config_path, inline, out, threads, budget_gib, verbose, records_path, points, later, exponent, reference_mode):
    """
    Fit and validate power laws from stored records or explicit points.

    \b
    python -m src fit --config config/panels.yaml --records outputs/panels/results.csv
    python -m src fit --points 125:2.024,216:2.0139,343:2.00875 --later 512:2.00586,729:2.00412
    """
    from ..study import build_reports, emit_report, fit_power_law, load_records, scalar_series, validate_fit

    config = _load_config(config_path, inline, out, threads, budget_gib, verbose)
    mode = reference_mode or ('real' if points else config.reference_mode)

    if records_path:
        try:
            records = load_records(Path(records_path))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if reference_mode:
            config.raw['study']['reference_mode'] = reference_mode
        reports = build_reports(records, config)
        paths = emit_report(records, reports, config.out, config)
        _banner("FIT SUMMARY")
        for report in reports:
            for key, verdict in report.verdicts().items():
                click.echo(f"  {report.term} {key}: {verdict}")
        click.echo(f"\nSummary saved to {paths['summary']}")
        click.echo(BANNER)
        return

    fit_points = _parse_points(points, 'points')
    if not fit_points:
        raise ConfigError("Specify --records or --points")
    later_points = _parse_points(later, 'later')
    finest = max(fit_points + later_points, key=lambda p: p[0])[1] if mode == 'finest' else None
    try:
        result = fit_power_law(fit_points, mode, finest, exponent)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    later_series = list(zip(
        [n for n, _ in later_points], scalar_series([v for _, v in later_points], mode, finest)
    )) if later_points else []
    validation = validate_fit(result, later_series, fixed_exponent=exponent is not None)

    _write_json(config.out / 'fit.json', {
        'version': __version__, 'config_hash': config.config_hash(),
        'fit': result.to_dict(), 'validation': validation.to_dict(),
    })
    _banner("POWER-LAW FIT")
    click.echo(f"s  = {result.exponent:.6f}" + (' (fixed)' if exponent is not None else ''))
    click.echo(f"C0 = {result.c0:.12g}")
    click.echo(f"C1 = {result.c1:.12g}")
    for note in result.notes:
        click.echo(f"Note: {note}")
    if later_series:
        click.echo(f"Verdict: {validation.verdict.value}")
    click.echo(BANNER)


@cli.command()
@_common_options
@click.option('--mesh', '-m', type=int, help='Mesh size m (N_k = m^3)')
@click.option('--iterations', '-n', type=int, help='Number of CCD map applications')
@_exit_on_error
def ccd(config_path, inline, out, threads, budget_gib, verbose, mesh, iterations):
    """
    CCD(n) iteration history and energy on a small mesh.

    \b
    python -m src ccd --mesh 2 --iterations 8
    """
    from ..amplitudes import MeshIntegrals, ccd_solve, energy, energy_parts
    from ..lattice import build_mp_mesh
    from ..study import build_system

    config = _load_config(config_path, inline, out, threads, budget_gib, verbose)
    section = config.section('ccd')
    m = section['mesh'] if mesh is None else mesh
    n = section['iterations'] if iterations is None else iterations
    if m < 1 or n < 1:
        raise ConfigError(f"--mesh and --iterations must be positive, got {m}, {n}")

    system, engine = build_system(config)
    k_mesh = build_mp_mesh(system.cell, m, config.scheme)
    integrals = MeshIntegrals(engine, k_mesh, budget_gib=config.budget_gib, threads=config.threads)
    amplitudes, history = ccd_solve(integrals, n)
    total = energy(integrals, amplitudes)
    direct, exchange = energy_parts(integrals, amplitudes)
    system.cache.save(config.raw['system']['n_pw'], system.fingerprint)

    history_df = pd.DataFrame({'iteration': range(1, len(history) + 1), 'max_change': history})
    config.out.mkdir(parents=True, exist_ok=True)
    history_df.to_csv(config.out / f'ccd_m{m}_n{n}.csv', index=False, float_format='%.17g')
    _write_json(config.out / f'ccd_m{m}_n{n}.json', {
        'version': __version__, 'config_hash': config.config_hash(), 'mesh': m, 'iterations': n,
        'energy': [total.real, total.imag], 'direct': [direct.real, direct.imag],
        'exchange': [exchange.real, exchange.imag], 'history': history,
    })

    _banner(f"CCD({n}) ON {m}^3 MESH")
    for i, change in enumerate(history, 1):
        click.echo(f"  iteration {i:3d}: max |dT| = {change:.3e}")
    click.echo(f"\nEnergy:   {total.real:.12g} {total.imag:+.3e}i")
    click.echo(f"Direct:   {direct.real:.12g}")
    click.echo(f"Exchange: {exchange.real:.12g}")
    click.echo(BANNER)


if __name__ == '__main__':
    cli()
