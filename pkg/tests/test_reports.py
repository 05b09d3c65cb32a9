"""
Tests for result files and reports
"""

import csv
import json
import tempfile
import unittest
import sys
from dataclasses import replace
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from config.parser import Scenario
from generators.reports import (
    DETECTION_HEADER, ESTIMATION_HEADER, RESULTS_HEADER, ReportGenerator, read_results_csv, scenario_hash,
)
from simulation.harness import DetectionPoint, EstimationStats, ExperimentResult, PointResult
from utils.errors import ReferenceDataError


def sample_result() -> ExperimentResult:
    points = [
        PointResult(cnr_db=4.0, frames=2, symbols=1000, hp_errors=30, hp_bits=2000, lp_errors=400, lp_bits=2000,
                    genie_hp_errors=25, genie_lp_errors=390, detections=2, est_count=10,
                    est_global_sum=0.5, est_global_sumsq=0.03, est_local_sum=0.4, est_local_sumsq=0.02),
        PointResult(cnr_db=8.0, frames=2, symbols=1000, hp_errors=0, hp_bits=2000, lp_errors=2000, lp_bits=2000,
                    genie_hp_errors=0, genie_lp_errors=12, detections=0, est_count=10,
                    est_global_sum=0.2, est_global_sumsq=0.005, est_local_sum=0.1, est_local_sumsq=0.002),
    ]
    return ExperimentResult(scenario=Scenario(cnr_sweep_db=(4.0, 8.0)), points=points)


class TestReportGenerator(unittest.TestCase):
    """Test CSV, metadata and markdown output."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.generator = ReportGenerator()

    def tearDown(self):
        self.tmp.cleanup()

    def test_results_csv(self):
        """Test the results header and values read back from the CSV."""
        path = self.dir / 'results.csv'
        self.assertTrue(self.generator.generate_results_csv(sample_result(), str(path)))

        with open(path, newline='') as f:
            self.assertEqual(tuple(next(csv.reader(f))), RESULTS_HEADER)

        records = read_results_csv(path)
        self.assertEqual(len(records), 2)
        self.assertEqual(records[0]['cnr_db'], 4.0)
        self.assertEqual(records[0]['hp_errors'], 30)
        self.assertEqual(records[0]['hp_ber'], 30 / 2000)
        self.assertEqual(records[0]['lp_ber'], 0.2)
        self.assertEqual(records[0]['mse_global'], 0.05)
        self.assertEqual(records[1]['detection_rate'], 0.0)
        self.assertEqual(records[1]['hp_ber_low'], 0.0)
        self.assertLessEqual(records[0]['hp_ber_low'], records[0]['hp_ber'])
        self.assertGreaterEqual(records[0]['hp_ber_high'], records[0]['hp_ber'])

    def test_global_only_leaves_local_columns_blank(self):
        """Test blank LP cells for a QPSK-only run."""
        result = sample_result()
        result.points = [replace(p, lp_errors=None, lp_bits=None, genie_lp_errors=None) for p in result.points]
        path = self.dir / 'results.csv'
        self.generator.generate_results_csv(result, str(path))

        record = read_results_csv(path)[0]
        self.assertIsNone(record['lp_ber'])
        self.assertIsNone(record['lp_bits'])
        self.assertIsNone(record['lp_ber_low'])

    def test_identical_output(self):
        """Test that the same results give byte-identical files."""
        first, second = self.dir / 'a.csv', self.dir / 'b.csv'
        self.generator.generate_results_csv(sample_result(), str(first))
        self.generator.generate_results_csv(sample_result(), str(second))
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_invalid_results_file(self):
        """Test row and column context on malformed results."""
        path = self.dir / 'results.csv'
        self.generator.generate_results_csv(sample_result(), str(path))
        lines = path.read_text().splitlines()
        cells = lines[1].split(',')
        cells[RESULTS_HEADER.index('hp_errors')] = 'many'
        lines[1] = ','.join(cells)
        path.write_text('\n'.join(lines) + '\n')

        with self.assertRaises(ReferenceDataError) as ctx:
            read_results_csv(path)
        self.assertEqual(ctx.exception.row, 2)
        self.assertEqual(ctx.exception.column, 'hp_errors')

        with self.assertRaises(ReferenceDataError):
            read_results_csv(self.dir / 'missing.csv')

    def test_metadata(self):
        """Test the metadata sidecar."""
        sc = Scenario(seed=77)
        path = self.dir / 'results.csv.meta.json'
        self.assertTrue(self.generator.generate_metadata(sc, str(path)))

        metadata = json.loads(path.read_text())
        self.assertEqual(metadata['seed'], 77)
        self.assertEqual(metadata['experiment'], 'ber')
        self.assertEqual(metadata['scenario_hash'], scenario_hash(sc))
        self.assertIn('numpy', metadata['versions'])
        self.assertEqual(metadata['scenario']['mode'], 'terrestrial_only')

    def test_scenario_hash(self):
        """Test that the hash follows the scenario contents."""
        self.assertEqual(scenario_hash(Scenario()), scenario_hash(Scenario()))
        self.assertNotEqual(scenario_hash(Scenario()), scenario_hash(Scenario(seed=1)))
        self.assertEqual(len(scenario_hash(Scenario())), 64)

    def test_markdown_report(self):
        """Test the rendered markdown summary."""
        path = self.dir / 'report.md'
        detection = [DetectionPoint(cnr_db=4.0, trials=10, with_local_detections=10, without_local_detections=0)]
        self.assertTrue(self.generator.generate_markdown_report(sample_result(), str(path), detection))

        content = path.read_text()
        self.assertIn('# Hierarchical SFN Simulation Report', content)
        self.assertIn('## Bit error rates', content)
        self.assertIn('| 4.00 | 1.500e-02 |', content)
        self.assertIn('## Local content detection', content)
        self.assertIn(scenario_hash(sample_result().scenario), content)

    def test_estimation_and_detection_csv(self):
        """Test the estimation and detection tables."""
        stats = [EstimationStats(sat_power_db=3.0, cnr_db=10.0, count=100, mse_global=0.01, mse_local=0.02,
                                 mse_global_interval=(0.009, 0.011), mse_local_interval=(0.018, 0.022))]
        points = [DetectionPoint(cnr_db=0.0, trials=100, with_local_detections=None, without_local_detections=1)]
        est_path, det_path = self.dir / 'est.csv', self.dir / 'det.csv'
        self.assertTrue(self.generator.generate_estimation_csv(stats, str(est_path)))
        self.assertTrue(self.generator.generate_detection_csv(points, str(det_path)))

        with open(est_path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(tuple(rows[0]), ESTIMATION_HEADER)
        self.assertEqual(rows[1][:4], ['3.0', '10.0', '100', '0.01'])

        with open(det_path, newline='') as f:
            rows = list(csv.reader(f))
        self.assertEqual(tuple(rows[0]), DETECTION_HEADER)
        self.assertEqual(rows[1], ['0.0', '100', '', '0.01'])


if __name__ == '__main__':
    unittest.main()
