"""
Unit tests for the study module.

Tests configuration loading, selectors, sweep planning and resume,
power-law fits with their validation, and report files.
"""

import json
import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import Mock, patch

import pandas as pd

from src.lattice import UnitCell
from src.study import (
    RESULT_COLUMNS, SweepRecord, Verdict, build_reports, emit_report, environment_overrides,
    fit_power_law, load_records, load_study_config, parse_inline_overrides, parse_selector,
    plan_sweep, predict, run_sweep, validate_fit,
)
from src.utils.errors import BudgetError, ConfigError


def write_config(directory: str, text: str) -> str:
    path = os.path.join(directory, 'config.yaml')
    with open(path, 'w') as f:
        f.write(text)
    return path


def study_config(terms, meshes, fit_meshes=None, validation_meshes=None, **runtime):
    study = {'terms': terms, 'meshes': meshes}
    if fit_meshes is not None:
        study['fit_meshes'] = fit_meshes
    if validation_meshes is not None:
        study['validation_meshes'] = validation_meshes
    overrides = {'study': study}
    if runtime:
        overrides['runtime'] = runtime
    with tempfile.TemporaryDirectory() as tmpdir:
        return load_study_config(write_config(tmpdir, 'schema_version: 1\n'), overrides, environ={})


class TestPowerLawFit(unittest.TestCase):
    """Test the three-point fit."""

    def test_inverse_volume(self):
        """Test y = 2 + 3/N recovers s = 1, C0 = 2, C1 = 3."""
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        self.assertAlmostEqual(fit.exponent, 1.0, places=8)
        self.assertAlmostEqual(fit.c0, 2.0, places=8)
        self.assertAlmostEqual(fit.c1, 3.0, places=6)
        self.assertTrue(fit.reliable)

    def test_inverse_length(self):
        """Test y = 2 + 3 N^-1/3 recovers s = 1/3."""
        fit = fit_power_law([(n, 2.0 + 3.0 * n ** (-1.0 / 3.0)) for n in (216, 512, 1000)])
        self.assertAlmostEqual(fit.exponent, 1.0 / 3.0, places=8)
        self.assertAlmostEqual(fit.c0, 2.0, places=6)

    def test_constant_series_flagged(self):
        fit = fit_power_law([(125, 1.5), (216, 1.5), (343, 1.5)])
        self.assertFalse(fit.reliable)
        self.assertEqual(fit.exponent, 0.0)
        self.assertEqual(fit.c1, 0.0)
        self.assertEqual(fit.c0, 1.5)

    def test_non_monotone_flagged(self):
        fit = fit_power_law([(125, 1.0), (216, 2.0), (343, 1.0)])
        self.assertFalse(fit.reliable)

    def test_fixed_exponent(self):
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)], exponent=1.0)
        self.assertEqual(fit.exponent, 1.0)
        self.assertAlmostEqual(fit.c0, 2.0, places=10)
        self.assertAlmostEqual(predict(fit, 1000), 2.003, places=10)

    def test_wrong_point_count(self):
        with self.assertRaises(ValueError):
            fit_power_law([(125, 1.0), (216, 2.0)])
        with self.assertRaises(ValueError):
            fit_power_law([(125, 1.0), (125, 2.0), (343, 1.0)])

    def test_non_finite(self):
        with self.assertRaises(ValueError):
            fit_power_law([(125, 1.0), (216, float('nan')), (343, 1.0)])

    def test_finest_mode_needs_reference(self):
        with self.assertRaises(ValueError):
            fit_power_law([(125, 1.0), (216, 2.0), (343, 3.0)], reference_mode='finest')


class TestValidation(unittest.TestCase):
    """Test verdicts on larger meshes."""

    def test_exact_power_law_matches(self):
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        result = validate_fit(fit, [(n, 2.0 + 3.0 / n) for n in (512, 729)])
        self.assertEqual(result.verdict, Verdict.MATCHES_POWER_LAW)
        for ratio in result.ratios.values():
            self.assertAlmostEqual(ratio, 1.0, places=6)

    def test_exponential_decay_is_faster(self):
        """Test a series that leaves the N^-1/3 law and decays exponentially onto C0."""
        def series(m):
            return 2.0 + (3.0 / m) * math.exp(-max(0, m - 10))
        fit = fit_power_law([(m ** 3, series(m)) for m in (6, 8, 10)], exponent=1.0 / 3.0)
        self.assertAlmostEqual(fit.c0, 2.0, places=10)
        result = validate_fit(fit, [(m ** 3, series(m)) for m in (12, 14)], fixed_exponent=True)
        self.assertEqual(result.verdict, Verdict.FASTER_THAN)
        self.assertAlmostEqual(result.ratios[12 ** 3], math.exp(-2), places=8)

    def test_converged_later_points_are_faster(self):
        """Test that later values sitting on C0 beat the 3/N envelope."""
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        result = validate_fit(fit, [(512, 2.0), (1000, 2.0)])
        self.assertEqual(result.verdict, Verdict.FASTER_THAN)
        for ratio in result.ratios.values():
            self.assertLess(ratio, 1e-6)

    def test_ratio_is_distance_over_envelope(self):
        """Test the ratio |value - C0| / |C1 N^-s| on a point off the curve."""
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        result = validate_fit(fit, [(512, 2.0 + 1.5 / 512), (1000, 2.0 + 1.5 / 1000)])
        self.assertAlmostEqual(result.ratios[512], 0.5, places=6)
        self.assertEqual(result.verdict, Verdict.MATCHES_POWER_LAW)
        self.assertAlmostEqual(result.discrepancies[1000], 1.5 / 1000, places=9)

    def test_limit_mismatch_unreliable(self):
        """Test that data converging to another limit is unreliable, not faster."""
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        self.assertEqual(validate_fit(fit, [(512, 1.9), (1000, 1.9)]).verdict, Verdict.UNRELIABLE)

    def test_noisy_series_unreliable(self):
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        later = [(512, (2.0 + 3.0 / 512) * 1.1), (729, (2.0 + 3.0 / 729) * 0.9)]
        self.assertEqual(validate_fit(fit, later).verdict, Verdict.UNRELIABLE)

    def test_flagged_fit_unreliable(self):
        fit = fit_power_law([(125, 1.5), (216, 1.5), (343, 1.5)])
        self.assertEqual(validate_fit(fit, [(512, 1.5), (729, 1.5)]).verdict, Verdict.UNRELIABLE)

    def test_one_later_point_unreliable(self):
        fit = fit_power_law([(n, 2.0 + 3.0 / n) for n in (125, 216, 343)])
        self.assertEqual(validate_fit(fit, [(512, 2.0 + 3.0 / 512)]).verdict, Verdict.UNRELIABLE)


class TestSelectors(unittest.TestCase):
    """Test selector parsing."""

    def test_catalog_term(self):
        selector = parse_selector('lin_4h2p')
        self.assertEqual(selector.kind, 'term')
        self.assertEqual(selector.order, 1)

    def test_methods(self):
        self.assertEqual(parse_selector('mp2_amplitude').order, 0)
        self.assertEqual(parse_selector('mp3_amplitude').order, 1)
        selector = parse_selector('ccd12_energy')
        self.assertEqual((selector.method, selector.iterations, selector.order), ('ccd', 12, 3))
        self.assertTrue(selector.needs_tensor)

    def test_invalid(self):
        for name in ('mp3_4h2p_energy', 'ccd0_energy', 'lin_5h1p', 'mp4_energy'):
            with self.assertRaises(ValueError):
                parse_selector(name)


class TestConfig(unittest.TestCase):
    """Test configuration loading."""

    def test_defaults(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            config = load_study_config(write_config(tmpdir, 'schema_version: 1\n'), environ={})
        self.assertEqual(config.threads, 1)
        self.assertEqual(config.reference_mode, 'finest')
        self.assertEqual(config.terms, [])

    def test_unknown_key(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(tmpdir, 'schema_version: 1\nsystem:\n  n_pw_typo: 8\n')
            with self.assertRaises(ConfigError) as ctx:
                load_study_config(path, environ={})
        self.assertIn('system.n_pw_typo', str(ctx.exception))
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_malformed_yaml_names_line(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(tmpdir, 'schema_version: 1\nstudy:\n  meshes: [4, 6\n')
            with self.assertRaises(ConfigError) as ctx:
                load_study_config(path, environ={})
        self.assertIn('line', str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_study_config('/nonexistent/config.yaml', environ={})

    def test_fit_meshes_must_be_in_meshes(self):
        with self.assertRaises(ConfigError):
            study_config(['lin_4h2p'], [4, 6], fit_meshes=[4, 6, 8])

    def test_validation_overlaps_fit(self):
        with self.assertRaises(ConfigError):
            study_config(['lin_4h2p'], [4, 6, 8, 10], fit_meshes=[4, 6, 8], validation_meshes=[8, 10])

    def test_three_fit_meshes(self):
        with self.assertRaises(ConfigError):
            study_config(['lin_4h2p'], [4, 6, 8, 10], fit_meshes=[4, 6])

    def test_unknown_selector(self):
        with self.assertRaises(ConfigError):
            study_config(['lin_5h1p'], [4])

    def test_term_mapping(self):
        config = study_config([{'term': 'quad_4h2p', 'meshes': [2, 3], 'permuted': True, 'amplitude': 'mp3'}], [4])
        plan = config.terms[0]
        self.assertEqual(plan.meshes, [2, 3])
        self.assertEqual(plan.label, 'quad_4h2p_p@mp3')

    def test_quadruple_outside_band_range(self):
        """Test that a virtual label beyond n_occ + n_vir is a ConfigError at load."""
        text = 'schema_version: 1\nstudy:\n  external:\n    quadruple: [1, 1, 3, 3]\n'
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(tmpdir, text)
            with self.assertRaises(ConfigError) as ctx:
                load_study_config(path, environ={})
            config = load_study_config(path, {'system': {'n_vir': 2}}, environ={})
        self.assertIn('study.external.quadruple', str(ctx.exception))
        self.assertEqual(ctx.exception.exit_code, 2)
        self.assertEqual(config.raw['study']['external']['quadruple'], [1, 1, 3, 3])

    def test_quadruple_hole_in_virtual_slot(self):
        with self.assertRaises(ConfigError):
            load_study_config(None, {'study': {'external': {'quadruple': [1, 2, 2, 2]}}}, environ={})

    def test_inline_overrides(self):
        overrides = parse_inline_overrides('study.meshes=[3;4;5],runtime.threads=2,study.reference_mode=real')
        self.assertEqual(overrides, {
            'study': {'meshes': [3, 4, 5], 'reference_mode': 'real'},
            'runtime': {'threads': 2},
        })

    def test_inline_override_without_equals(self):
        with self.assertRaises(ConfigError):
            parse_inline_overrides('runtime.threads')

    def test_precedence(self):
        """Test file < environment < flags."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_config(tmpdir, 'schema_version: 1\nruntime:\n  threads: 2\n  budget_gib: 1.0\n')
            environ = {'CCDFSE_THREADS': '3', 'CCDFSE_BUDGET_GIB': '2.5'}
            config = load_study_config(path, {'runtime': {'threads': 5}}, environ=environ)
        self.assertEqual(config.threads, 5)
        self.assertEqual(config.budget_gib, 2.5)

    def test_invalid_environment(self):
        with self.assertRaises(ConfigError):
            environment_overrides({'CCDFSE_THREADS': 'many'})

    def test_hash_stable(self):
        first = study_config(['lin_4h2p'], [4, 6])
        second = study_config(['lin_4h2p'], [4, 6])
        third = study_config(['lin_4h2p'], [4, 6, 8])
        self.assertEqual(first.config_hash(), second.config_hash())
        self.assertNotEqual(first.config_hash(), third.config_hash())


class TestSweep(unittest.TestCase):
    """Test sweep planning, execution and resume."""

    def test_plan_most_expensive_first(self):
        config = study_config(['mp2_amplitude', 'lin_4h2p', 'quad_4h2p'], [2, 3])
        points = plan_sweep(config)
        self.assertEqual([(p.plan.selector, p.mesh) for p in points], [
            ('quad_4h2p', 3), ('quad_4h2p', 2), ('lin_4h2p', 3), ('lin_4h2p', 2),
            ('mp2_amplitude', 2), ('mp2_amplitude', 3),
        ])

    def test_plan_budget_rejection(self):
        config = study_config(['ccd5_energy'], [4], budget_gib=1e-9)
        with self.assertRaises(BudgetError) as ctx:
            plan_sweep(config)
        self.assertEqual(ctx.exception.term, 'ccd5_energy')
        self.assertEqual(ctx.exception.n_k, 64)

    def test_empty_plan(self):
        config = study_config([], [])
        with tempfile.TemporaryDirectory() as tmpdir:
            self.assertEqual(run_sweep(config, out=Path(tmpdir), engine=Mock()), [])

    def mock_engine(self):
        engine = Mock()
        engine.system.reciprocal = UnitCell.cubic().reciprocal()
        return engine

    @patch('src.study.sweep.evaluate_point')
    def test_run_and_resume(self, mock_evaluate):
        """Test that a resumed sweep reuses journal records."""
        mock_evaluate.side_effect = lambda engine, point, *args: complex(point.mesh, -1.0)
        config = study_config(['mp2_amplitude', 'lin_4h2p'], [2, 3], threads=2)

        with tempfile.TemporaryDirectory() as tmpdir:
            records = run_sweep(config, out=Path(tmpdir), engine=self.mock_engine())
            self.assertEqual(mock_evaluate.call_count, 4)
            self.assertEqual([(r.term, r.mesh) for r in records], [
                ('mp2_amplitude', 2), ('mp2_amplitude', 3), ('lin_4h2p', 2), ('lin_4h2p', 3),
            ])
            self.assertEqual(records[1].value, complex(3, -1))
            self.assertEqual(records[1].n_k, 27)

            mock_evaluate.reset_mock()
            resumed = run_sweep(config, resume=True, out=Path(tmpdir), engine=self.mock_engine())
            mock_evaluate.assert_not_called()
            self.assertEqual([r.value for r in resumed], [r.value for r in records])

            changed = study_config(['mp2_amplitude', 'lin_4h2p'], [2, 3, 4], threads=2)
            run_sweep(changed, resume=True, out=Path(tmpdir), engine=self.mock_engine())
            self.assertEqual(mock_evaluate.call_count, 6)

    @patch('src.study.sweep.evaluate_point')
    def test_solver_error_names_point(self, mock_evaluate):
        from src.utils.errors import SolverError
        mock_evaluate.side_effect = SolverError('no convergence')
        config = study_config(['mp2_amplitude'], [2])
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(SolverError) as ctx:
                run_sweep(config, out=Path(tmpdir), engine=self.mock_engine())
        self.assertIn('mp2_amplitude at N_k=8', str(ctx.exception))


class TestReport(unittest.TestCase):
    """Test the result files."""

    def records(self):
        return [
            SweepRecord('lin_4h2p', m ** 3, m, 2.0 + 3.0 / m ** 3, 0.1 / m, 0.5, 'sweep_0')
            for m in (4, 6, 8, 10)
        ]

    def test_empty_report(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            paths = emit_report([], [], Path(tmpdir))
            df = pd.read_csv(paths['results'])
            summary = json.loads(paths['summary'].read_text())
        self.assertEqual(list(df.columns), RESULT_COLUMNS)
        self.assertEqual(len(df), 0)
        self.assertEqual(summary['reports'], [])

    def test_report_files(self):
        config = study_config(['lin_4h2p'], [4, 6, 8, 10], fit_meshes=[4, 6, 8], validation_meshes=[10])
        records = self.records()
        reports = build_reports(records, config)
        self.assertEqual(len(reports), 1)
        self.assertEqual(len(reports[0].fits), 3)

        with tempfile.TemporaryDirectory() as tmpdir:
            paths = emit_report(records, reports, Path(tmpdir), config)
            df = pd.read_csv(paths['results'])
            summary = json.loads(paths['summary'].read_text())
            plot = paths['plot_lin_4h2p'].read_text().splitlines()
            loaded = load_records(paths['results'])

        self.assertEqual(len(df), 4)
        self.assertEqual(df['err_vs_finest'].iloc[-1], 0.0)
        self.assertEqual(summary['config_hash'], config.config_hash())
        self.assertIn('lin_4h2p', summary['fits'])
        self.assertTrue(plot[0].startswith('#'))
        self.assertEqual(len(plot), 4)
        self.assertEqual([r.value for r in loaded], [r.value for r in records])

    def test_missing_fit_records_skipped(self):
        config = study_config(['lin_4h2p'], [4, 6, 8, 10], fit_meshes=[4, 6, 8])
        self.assertEqual(build_reports(self.records()[:2], config), [])

    def test_unsupported_records_file(self):
        with self.assertRaises(ValueError):
            load_records(Path('records.txt'))


if __name__ == '__main__':
    unittest.main()
