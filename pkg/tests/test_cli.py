"""
Unit tests for the command-line interface.

Tests exit codes and the printed summaries of each subcommand.
"""

import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from click.testing import CliRunner

from src.study import SweepRecord, emit_report
from src.utils.cli import cli

SMALL_SYSTEM = """\
schema_version: 1
system:
  n_pw: 4
  eigensolver:
    residual_tol: 1.0e-8
"""


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.runner = CliRunner()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmpdir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def config(self, text: str = SMALL_SYSTEM) -> str:
        path = os.path.join(self.tmpdir, 'config.yaml')
        with open(path, 'w') as f:
            f.write(text)
        return path

    def invoke(self, *args):
        return self.runner.invoke(cli, list(args) + ['--out', os.path.join(self.tmpdir, 'out')])


class TestFitCommand(CliTestCase):
    """Test the fit subcommand."""

    def test_points(self):
        result = self.invoke('fit', '--config', self.config(),
                             '--points', '125:2.024,216:2.0138888888888889,343:2.0087463556851313')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('s  = 1.000000', result.output)
        self.assertTrue(os.path.exists(os.path.join(self.tmpdir, 'out', 'fit.json')))

    def test_points_with_validation(self):
        result = self.invoke('fit', '--config', self.config(),
                             '--points', '125:2.024,216:2.0138888888888889,343:2.0087463556851313',
                             '--later', '512:2.005859375,729:2.0041152263374484')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('Verdict: matches_power_law', result.output)

    def test_no_input(self):
        result = self.invoke('fit', '--config', self.config())
        self.assertEqual(result.exit_code, 2)

    def test_two_points(self):
        result = self.invoke('fit', '--config', self.config(), '--points', '125:1.0,216:2.0')
        self.assertEqual(result.exit_code, 2)

    def test_records(self):
        records = [SweepRecord('lin_4h2p', m ** 3, m, 2.0 + 3.0 / m ** 3, 0.0, 0.0, 'w') for m in (4, 6, 8, 10)]
        emit_report(records, [], Path(self.tmpdir) / 'earlier')
        config = self.config(SMALL_SYSTEM + (
            "study:\n  terms: [lin_4h2p]\n  meshes: [4, 6, 8, 10]\n"
            "  fit_meshes: [4, 6, 8]\n  validation_meshes: [10]\n"
        ))
        result = self.invoke('fit', '--config', config, '--reference-mode', 'real',
                             '--records', str(Path(self.tmpdir) / 'earlier' / 'results.csv'))
        self.assertEqual(result.exit_code, 0, result.output)
        summary = json.loads((Path(self.tmpdir) / 'out' / 'summary.json').read_text())
        self.assertAlmostEqual(summary['fits']['lin_4h2p'][0]['exponent'], 1.0, places=6)


class TestSweepCommand(CliTestCase):
    """Test the sweep subcommand without computing."""

    def test_dry_run(self):
        config = self.config(SMALL_SYSTEM + "study:\n  terms: [lin_4h2p, mp2_amplitude]\n  meshes: [2, 3]\n")
        result = self.invoke('sweep', '--config', config, '--dry-run')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('SWEEP PLAN', result.output)
        self.assertIn('lin_4h2p', result.output)

    def test_malformed_config(self):
        config = self.config("schema_version: 1\nstudy:\n  meshes: [2, 3\n")
        result = self.invoke('sweep', '--config', config, '--dry-run')
        self.assertEqual(result.exit_code, 2)

    def test_unknown_key(self):
        config = self.config("schema_version: 1\nruntime:\n  workers: 3\n")
        result = self.invoke('sweep', '--config', config, '--dry-run')
        self.assertEqual(result.exit_code, 2)

    def test_budget_rejection(self):
        config = self.config(SMALL_SYSTEM + "study:\n  terms: [ccd5_energy]\n  meshes: [4]\n")
        result = self.invoke('sweep', '--config', config, '--dry-run', '--budget-gib', '1e-9')
        self.assertEqual(result.exit_code, 4)

    def test_empty_study(self):
        result = self.invoke('sweep', '--config', self.config())
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('Records: 0', result.output)


class TestQuadlabCommand(CliTestCase):
    """Test the quadlab subcommand."""

    def test_invalid_class(self):
        result = self.invoke('quadlab', '--config', self.config(), '--class', '7')
        self.assertEqual(result.exit_code, 2)

    def test_jump_in_one_dimension(self):
        result = self.invoke('quadlab', '--config', self.config(), '--class', '2', '-d', '1',
                             '--orders', '0', '--meshes', '16,32,64,128')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('Predicted exponent: 1.000', result.output)
        self.assertTrue(os.path.exists(os.path.join(self.tmpdir, 'out', 'quadlab_class2_d1.json')))

    def test_smooth(self):
        result = self.invoke('quadlab', '--config', self.config(), '--class', '1', '-d', '1',
                             '--meshes', '8,16,24,32')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('Verdict: super-algebraic', result.output)

    def test_shift_too_close(self):
        result = self.invoke('quadlab', '--config', self.config(), '--class', '3', '-d', '1',
                             '--orders', '0', '--meshes', '4,8,12,16')
        self.assertEqual(result.exit_code, 2)


class TestMeanfieldCommand(CliTestCase):
    """Test the meanfield and ccd subcommands on a tiny basis."""

    def test_gamma_point(self):
        result = self.invoke('meanfield', '--config', self.config(), '--k', '0,0,0', '--gap-mesh', '0')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('MEAN-FIELD SUMMARY', result.output)
        self.assertTrue(os.path.exists(os.path.join(self.tmpdir, 'out', 'bands.csv')))

    def test_bad_kpoint(self):
        result = self.invoke('meanfield', '--config', self.config(), '--k', '0,0', '--gap-mesh', '0')
        self.assertEqual(result.exit_code, 2)

    def test_quadruple_outside_bands(self):
        result = self.invoke('meanfield', '--config', self.config(), '--k', '0,0,0', '--gap-mesh', '0',
                             '--set', 'study.external.quadruple=[1;1;3;3]')
        self.assertEqual(result.exit_code, 2)
        self.assertIn('study.external.quadruple', result.output)

    @patch('src.meanfield.solver._dense_eigenpairs')
    def test_solver_failure(self, mock_dense):
        mock_dense.side_effect = np.linalg.LinAlgError('no convergence')
        result = self.invoke('meanfield', '--config', self.config(), '--k', '0,0,1/3', '--gap-mesh', '0')
        self.assertEqual(result.exit_code, 3)

    def test_ccd_gamma_only(self):
        result = self.invoke('ccd', '--config', self.config(), '--mesh', '1', '--iterations', '2')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('CCD(2) ON 1^3 MESH', result.output)


if __name__ == '__main__':
    unittest.main()
