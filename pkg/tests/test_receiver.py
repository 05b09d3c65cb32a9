"""
Tests for channel estimation, local content detection and demodulation
"""

import csv
import itertools
import math
import unittest
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from phy.channel import PathGains, combine_hybrid, transmit
from phy.constellation import INFINITE, HierarchyParams, qpsk_symbols
from phy.pilots import FrameParams, frame_layout
from phy.receiver import (
    ChannelEstimate, PilotObservation, detect_local, demod_global, demod_local, estimate_channel,
    estimate_frame, local_excess_power,
)
from utils.errors import EstimationError, SignalAbsentError


def observation(a_global, a_local, p=1.0, carrier=0, n1=0j, n2=0j):
    s_l = 1j * p
    return PilotObservation(carrier_index=carrier,
                            r1=a_global * p + a_local * s_l + n1,
                            r2=a_global * p - a_local * s_l + n2,
                            s_g1=p, s_g2=p, s_l1=s_l, s_l2=-s_l)


def received_pilot_grid(layout, a_sat, a_terr, h):
    """Noiseless pilot cells of a hybrid transmission."""
    return a_sat * layout.pilot_values(HierarchyParams(INFINITE)) + a_terr * layout.pilot_values(h)


class TestEstimateChannel(unittest.TestCase):
    """Test joint estimation on one carrier."""

    def test_noiseless_exact(self):
        """Test exact recovery of random gains from one pair."""
        rng = np.random.default_rng(17)
        for _ in range(100):
            a_g, a_l = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
            p = rng.choice([-1.0, 1.0])
            est = estimate_channel(observation(a_g, a_l, p))
            self.assertLess(abs(est.a_global_hat - a_g), 1e-12)
            self.assertLess(abs(est.a_local_hat - a_l), 1e-12)
            self.assertTrue(math.isnan(est.noise_var))

    def test_satellite_only_has_no_local(self):
        """Test that a satellite-only pilot gives a zero local estimate."""
        est = estimate_channel(observation(0.6 - 0.3j, 0j))
        self.assertEqual(abs(est.a_local_hat), 0.0)

    def test_averaging(self):
        """Test averaging over a window of pairs and its noise estimate."""
        rng = np.random.default_rng(4)
        obs = [observation(1.0, 0.25, n1=complex(*rng.normal(scale=0.1, size=2)),
                           n2=complex(*rng.normal(scale=0.1, size=2))) for _ in range(8)]
        est = estimate_channel(obs)
        self.assertEqual(est.n_averaged, 8)
        self.assertTrue(est.noise_var > 0)
        self.assertLess(abs(est.a_local_hat - 0.25), 0.2)

    def test_malformed_observations(self):
        """Test zero pilots, equal polarity and mixed carriers."""
        with self.assertRaises(EstimationError):
            estimate_channel(observation(1.0, 0.3, p=0.0))
        same = PilotObservation(0, 1 + 1j, 1 + 1j, 1.0, 1.0, 1j, 1j)
        with self.assertRaises(EstimationError):
            estimate_channel(same)
        with self.assertRaises(EstimationError):
            estimate_channel([observation(1, 0, carrier=0), observation(1, 0, carrier=3)])
        with self.assertRaises(EstimationError):
            estimate_channel([])


class TestEstimateFrame(unittest.TestCase):
    """Test estimation over a whole frame."""

    @classmethod
    def setUpClass(cls):
        cls.layout = frame_layout(FrameParams(symbols_per_frame=16))
        cls.h = HierarchyParams(2)

    def test_noiseless_hybrid(self):
        """Test exact per-carrier estimates in a hybrid frame."""
        a_sat, a_terr = 0.7j, 1.0 - 0.2j
        grid = received_pilot_grid(self.layout, a_sat, a_terr, self.h)
        est = estimate_frame(grid, self.layout, averaging_window=4)
        state = combine_hybrid(PathGains(a_sat, a_terr), self.h)
        np.testing.assert_allclose(est.a_global_hat, state.a_global, atol=1e-12)
        np.testing.assert_allclose(est.a_local_hat, state.a_local, atol=1e-12)
        self.assertTrue(np.all(est.n_averaged <= 4))

    def test_interpolation_of_flat_channel(self):
        """Test that interpolating flat gains keeps them constant."""
        grid = received_pilot_grid(self.layout, 0, 1.0, self.h)
        interpolated = estimate_frame(grid, self.layout).interpolate(self.layout.shape[1])
        self.assertEqual(len(interpolated.a_global_hat), self.layout.shape[1])
        np.testing.assert_allclose(interpolated.a_local_hat, 1 / 3, atol=1e-12)

    def test_to_csv(self):
        """Test the per-carrier estimate dump."""
        grid = received_pilot_grid(self.layout, 0, 1.0, self.h)
        est = estimate_frame(grid, self.layout)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'estimate.csv'
            est.to_csv(path)
            with open(path, newline='') as f:
                rows = list(csv.reader(f))
        self.assertEqual(rows[0], ['carrier', 'a_global_re', 'a_global_im', 'a_local_re', 'a_local_im', 'n_averaged'])
        self.assertEqual(len(rows), len(est.carriers) + 1)
        self.assertAlmostEqual(float(rows[1][3]), 1 / 3)

    def test_window_must_be_positive(self):
        """Test that an empty averaging window is rejected."""
        with self.assertRaises(ValueError):
            estimate_frame(np.zeros(self.layout.shape, dtype=complex), self.layout, averaging_window=0)


class TestDetection(unittest.TestCase):
    """Test local content detection."""

    @classmethod
    def setUpClass(cls):
        cls.layout = frame_layout(FrameParams(symbols_per_frame=34))

    def test_noiseless_detection(self):
        """Test detection with and without local content."""
        with_local = received_pilot_grid(self.layout, 0, 1.0, HierarchyParams(2))
        without = received_pilot_grid(self.layout, 1.0, 0, HierarchyParams(2))
        self.assertTrue(detect_local(estimate_frame(with_local, self.layout)))
        self.assertFalse(detect_local(estimate_frame(without, self.layout)))

    def test_noise_only_rarely_detected(self):
        """Test that noise alone does not trigger detection."""
        clean = received_pilot_grid(self.layout, 1.0, 0, HierarchyParams(2))
        rng = np.random.default_rng(8)
        alarms = 0
        for _ in range(50):
            noise = rng.normal(scale=0.5, size=clean.shape) + 1j * rng.normal(scale=0.5, size=clean.shape)
            alarms += detect_local(estimate_frame(clean + noise, self.layout))
        self.assertLessEqual(alarms, 1)

    def test_excess_power_is_noise_corrected(self):
        """Test that the excess local power is near zero for noise alone."""
        clean = received_pilot_grid(self.layout, 1.0, 0, HierarchyParams(2))
        rng = np.random.default_rng(2)
        noise = rng.normal(scale=0.3, size=clean.shape) + 1j * rng.normal(scale=0.3, size=clean.shape)
        excess, std_err = local_excess_power(estimate_frame(clean + noise, self.layout))
        self.assertLess(abs(excess), 5 * std_err)

    def test_bad_threshold(self):
        """Test that a non-positive threshold is rejected."""
        with self.assertRaises(ValueError):
            detect_local(ChannelEstimate(1.0, 0.1), threshold=0.0)


class TestDemodulation(unittest.TestCase):
    """Test global-then-local demodulation."""

    def setUp(self):
        rng = np.random.default_rng(12)
        self.hp = rng.integers(0, 2, size=(500, 2)).astype(np.int8)
        self.lp = rng.integers(0, 2, size=(500, 2)).astype(np.int8)
        self.h = HierarchyParams(2)
        self.state = combine_hybrid(PathGains(0.5j, 0.8 + 0.1j), self.h)
        self.samples = transmit(self.hp, self.lp, self.h, self.state)
        self.est = ChannelEstimate(self.state.a_global, self.state.a_local)

    def test_noiseless_demodulation(self):
        """Test that both streams are recovered without noise."""
        hp = demod_global(self.samples, self.est)
        np.testing.assert_array_equal(hp, self.hp)
        np.testing.assert_array_equal(demod_local(self.samples, hp, self.est), self.lp)

    def test_zero_local_estimate(self):
        """Test that local demodulation needs a local gain."""
        with self.assertRaises(SignalAbsentError):
            demod_local(self.samples, self.hp, ChannelEstimate(self.state.a_global, 0j))

    def test_zero_global_estimate(self):
        """Test that global demodulation needs a global gain."""
        with self.assertRaises(SignalAbsentError):
            demod_global(self.samples, ChannelEstimate(0j, 0j))

    def test_vanishing_scalar_estimates(self):
        """Test that scalar gains far below any signal level count as absent."""
        with self.assertRaises(SignalAbsentError):
            demod_global(self.samples, ChannelEstimate(1e-12 + 0j, 0j))
        with self.assertRaises(SignalAbsentError):
            demod_local(self.samples, self.hp, ChannelEstimate(self.state.a_global, 1e-12j))
        per_carrier = np.full(4, self.state.a_global)
        per_carrier[2] = 1e-12
        with self.assertRaises(SignalAbsentError):
            demod_global(self.samples[:4], ChannelEstimate(per_carrier, 0j))

    def test_global_decision_is_nearest_qpsk_point(self):
        """Test HP decisions against a minimum-distance QPSK demapper."""
        rng = np.random.default_rng(31)
        noisy = self.samples + rng.normal(scale=0.4, size=500) + 1j * rng.normal(scale=0.4, size=500)
        bit_pairs = np.array(list(itertools.product((0, 1), repeat=2)))
        points = self.state.a_global * qpsk_symbols(bit_pairs)
        nearest = bit_pairs[np.argmin(np.abs(noisy[:, None] - points[None, :]), axis=1)]
        np.testing.assert_array_equal(demod_global(noisy, self.est), nearest)

    def test_wrong_global_decisions_corrupt_local(self):
        """Test that LP bits follow the HP decisions they are cancelled with."""
        wrong = self.hp.copy()
        flipped = np.arange(0, 500, 5)
        wrong[flipped, 0] ^= 1
        lp = demod_local(self.samples, wrong, self.est)
        errors = lp != self.lp
        # a wrong global decision leaves a residual far outside the local lattice
        self.assertGreater(np.mean(errors[flipped]), 0.3)
        self.assertFalse(np.any(np.delete(errors, flipped, axis=0)))


if __name__ == '__main__':
    unittest.main()
