"""
Tests for reference data files
"""

import tempfile
import unittest
import sys
from fractions import Fraction
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from analysis.reference import (
    BerCurve, load_simulated_rows, load_threshold_rows, lookup_threshold,
)
from utils.errors import ReferenceDataError


class TestThresholdFiles(unittest.TestCase):
    """Test the bundled and user-supplied threshold tables."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name: str, content: str) -> Path:
        path = self.dir / name
        path.write_text(content)
        return path

    def test_bundled_thresholds(self):
        """Test that the bundled table has eight increasing rows."""
        rows = load_threshold_rows()
        self.assertEqual(len(rows), 8)
        self.assertEqual(rows[0].code_rate, Fraction(1, 5))
        self.assertEqual(lookup_threshold(rows, '2/3'), 3.5)
        self.assertEqual(lookup_threshold(rows, Fraction(2, 9)), -3.1)

    def test_bundled_simulation_column(self):
        """Test that blank simulation cells load as missing values."""
        rows = {row.code_rate: row for row in load_simulated_rows()}
        self.assertIsNone(rows[Fraction(1, 5)].local_cn_db)
        self.assertEqual(rows[Fraction(2, 3)].global_cn_db, 5.2)

    def test_bad_number_reports_row_and_column(self):
        """Test that a malformed cell is located by row and column."""
        path = self.write('bad.csv', "code_rate,qpsk_cn_db\n1/2,1.4\n2/3,abc\n")
        with self.assertRaises(ReferenceDataError) as ctx:
            load_threshold_rows(path)
        self.assertEqual(ctx.exception.row, 3)
        self.assertEqual(ctx.exception.column, 'qpsk_cn_db')
        self.assertIn('row 3', str(ctx.exception))

    def test_missing_column(self):
        """Test that a missing column is reported."""
        path = self.write('cols.csv', "rate,cn\n1/2,1.4\n")
        with self.assertRaises(ReferenceDataError):
            load_threshold_rows(path)

    def test_non_increasing_thresholds(self):
        """Test that thresholds must increase with code rate."""
        path = self.write('order.csv', "code_rate,qpsk_cn_db\n1/2,1.4\n2/3,1.0\n")
        with self.assertRaises(ReferenceDataError):
            load_threshold_rows(path)

    def test_missing_file(self):
        """Test that a missing file is a reference data error."""
        with self.assertRaises(ReferenceDataError):
            load_threshold_rows(self.dir / 'nope.csv')

    def test_unknown_rate(self):
        """Test lookup of a rate not in the table."""
        with self.assertRaises(ReferenceDataError):
            lookup_threshold(load_threshold_rows(), '5/6')


class TestBerCurve(unittest.TestCase):
    """Test BER curve validation and CSV files."""

    def test_csv_round_trip(self):
        """Test that a curve written to CSV reads back unchanged."""
        curve = BerCurve(x_db=[0.0, 1.5, 3.0], ber=[0.1, 0.01, 0.0001])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'curve.csv'
            curve.to_csv(path)
            self.assertEqual(BerCurve.from_csv(path), curve)

    def test_invalid_curves(self):
        """Test rejection of unordered abscissae and BER outside (0, 1]."""
        with self.assertRaises(ValueError):
            BerCurve(x_db=[1.0, 0.0], ber=[0.1, 0.01])
        with self.assertRaises(ValueError):
            BerCurve(x_db=[0.0, 1.0], ber=[0.1, 0.0])
        with self.assertRaises(ValueError):
            BerCurve(x_db=[0.0, 1.0], ber=[0.01, 0.1]).validate_reference()

    def test_non_monotone_file(self):
        """Test that a rising reference BER is a reference data error."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'rising.csv'
            path.write_text("x_db,ber\n0,0.01\n1,0.1\n")
            with self.assertRaises(ReferenceDataError):
                BerCurve.from_csv(path)


if __name__ == '__main__':
    unittest.main()
