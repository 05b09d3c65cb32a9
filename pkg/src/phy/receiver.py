"""
Hierarchical Receiver

Joint estimation of the global and local channel gains from pairs of
modified pilots, detection of local content from the estimated local gain,
and global-then-local hard demodulation.

For a pilot pair received on two consecutive symbols

    r1 = A_g s_g1 + A_l s_l1 + n1
    r2 = A_g s_g2 + A_l s_l2 + n2

the vertical components have opposite polarity (s_l2 = -s_l1), which keeps
the 2x2 system non-singular. alpha never appears: it is absorbed into A_l.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from phy.constellation import local_bits, quadrant_bits, qpsk_symbols
from phy.pilots import FrameLayout
from utils.errors import EstimationError, SignalAbsentError

logger = logging.getLogger(__name__)

DEFAULT_AVERAGING_WINDOW = 8
DEFAULT_DETECTION_THRESHOLD = 0.05
DEFAULT_DETECTION_Z = 4.0

# relative level below which a gain estimate counts as absent
ABSENT_LEVEL = 1e-9


@dataclass(frozen=True)
class PilotObservation:
    carrier_index: int
    r1: complex
    r2: complex
    s_g1: float
    s_g2: float
    s_l1: complex
    s_l2: complex


@dataclass(frozen=True)
class ChannelEstimate:
    """Estimated gains; scalars for one carrier or arrays for many.

    noise_var is the estimated variance of a_local_hat, from the spread of
    the per-pair solutions inside the averaging window (NaN when only one
    pair was averaged).
    """
    a_global_hat: Union[complex, np.ndarray]
    a_local_hat: Union[complex, np.ndarray]
    n_averaged: Union[int, np.ndarray] = 1
    noise_var: Union[float, np.ndarray] = math.nan
    carrier_index: Optional[Union[int, np.ndarray]] = None

    def __post_init__(self):
        if np.any(np.asarray(self.n_averaged) < 1):
            raise EstimationError("an estimate needs at least one pilot pair")


def _solve_pairs(r1, r2, s_g1, s_g2, s_l1, s_l2):
    """Cramer solution of the 2x2 pilot system for every pair."""
    det = s_g1 * s_l2 - s_l1 * s_g2
    scale = np.maximum(np.abs(s_g1 * s_l2), np.abs(s_l1 * s_g2))
    if np.any(np.abs(det) <= 1e-12 * np.where(scale > 0, scale, 1.0)):
        raise EstimationError("singular pilot pair: vertical components must have opposite polarity")
    a_global = (r1 * s_l2 - r2 * s_l1) / det
    a_local = (s_g1 * r2 - s_g2 * r1) / det
    return a_global, a_local


def estimate_channel(obs: Union[PilotObservation, Sequence[PilotObservation]]) -> ChannelEstimate:
    """Estimate (A_g, A_l) on one carrier from one or more pilot pairs.

    With identical pilots in every pair this is the same as solving the
    system once with both right-hand sides averaged over the window.
    """
    if isinstance(obs, PilotObservation):
        obs = [obs]
    obs = list(obs)
    if not obs:
        raise EstimationError("at least one pilot observation is required")
    carriers = {o.carrier_index for o in obs}
    if len(carriers) > 1:
        raise EstimationError(f"observations span several carriers: {sorted(carriers)}")
    if any(o.s_g1 == 0 or o.s_g2 == 0 for o in obs):
        raise EstimationError("pilot values must be nonzero")

    def column(name):
        return np.array([getattr(o, name) for o in obs], dtype=complex)

    g, l = _solve_pairs(column('r1'), column('r2'), column('s_g1'), column('s_g2'),
                        column('s_l1'), column('s_l2'))
    n = len(obs)
    noise_var = float(np.var(l, ddof=1) / n) if n > 1 else math.nan
    return ChannelEstimate(
        a_global_hat=complex(np.mean(g)),
        a_local_hat=complex(np.mean(l)),
        n_averaged=n,
        noise_var=noise_var,
        carrier_index=obs[0].carrier_index,
    )


@dataclass(frozen=True)
class FrameEstimate:
    """Per-pilot-carrier estimates of one frame."""
    carriers: np.ndarray
    a_global_hat: np.ndarray
    a_local_hat: np.ndarray
    n_averaged: np.ndarray
    noise_var: np.ndarray

    def as_estimate(self) -> ChannelEstimate:
        return ChannelEstimate(self.a_global_hat, self.a_local_hat, self.n_averaged,
                               self.noise_var, self.carriers)

    def interpolate(self, n_carriers: int) -> ChannelEstimate:
        """Linear interpolation of both gains onto every carrier."""
        grid = np.arange(n_carriers)
        interp = lambda values: (np.interp(grid, self.carriers, values.real)
                                 + 1j * np.interp(grid, self.carriers, values.imag))
        return ChannelEstimate(
            a_global_hat=interp(self.a_global_hat),
            a_local_hat=interp(self.a_local_hat),
            n_averaged=np.interp(grid, self.carriers, self.n_averaged).round().astype(int).clip(min=1),
            carrier_index=grid,
        )

    def to_csv(self, path) -> None:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['carrier', 'a_global_re', 'a_global_im', 'a_local_re', 'a_local_im', 'n_averaged'])
            for k, ag, al, n in zip(self.carriers, self.a_global_hat, self.a_local_hat, self.n_averaged):
                writer.writerow([int(k), repr(float(ag.real)), repr(float(ag.imag)),
                                 repr(float(al.real)), repr(float(al.imag)), int(n)])


def estimate_frame(grid: np.ndarray, layout: FrameLayout,
                   averaging_window: int = DEFAULT_AVERAGING_WINDOW) -> FrameEstimate:
    """Estimate every pilot carrier of a received (symbols, carriers) grid.

    Each carrier averages its first `averaging_window` pilot pairs; the
    channel is assumed constant over that span.
    """
    if averaging_window < 1:
        raise ValueError(f"averaging_window must be >= 1, got {averaging_window}")
    pairs = layout.pilot_pairs()
    if len(pairs) == 0:
        raise EstimationError("frame layout has no pilot pairs")

    r1 = grid[pairs.symbol_1, pairs.carrier]
    r2 = grid[pairs.symbol_2, pairs.carrier]
    g, l = _solve_pairs(r1, r2, pairs.s_g1, pairs.s_g2, pairs.s_l1, pairs.s_l2)

    carriers, start, inverse = np.unique(pairs.carrier, return_index=True, return_inverse=True)
    rank = np.arange(len(pairs)) - start[inverse]
    keep = rank < averaging_window
    idx = inverse[keep]
    g, l = g[keep], l[keep]

    n = np.bincount(idx, minlength=len(carriers))
    csum = lambda v: np.bincount(idx, v.real, len(carriers)) + 1j * np.bincount(idx, v.imag, len(carriers))
    g_hat = csum(g) / n
    l_hat = csum(l) / n

    spread = np.bincount(idx, np.abs(l - l_hat[idx]) ** 2, len(carriers))
    with np.errstate(invalid='ignore', divide='ignore'):
        noise_var = np.where(n > 1, spread / ((n - 1) * n), np.nan)

    return FrameEstimate(carriers=carriers, a_global_hat=g_hat, a_local_hat=l_hat,
                         n_averaged=n, noise_var=noise_var)


def _estimate_arrays(est):
    if isinstance(est, FrameEstimate):
        est = est.as_estimate()
    if isinstance(est, ChannelEstimate):
        return (np.atleast_1d(np.asarray(est.a_global_hat, dtype=complex)),
                np.atleast_1d(np.asarray(est.a_local_hat, dtype=complex)),
                np.atleast_1d(np.asarray(est.noise_var, dtype=float)))
    est = list(est)
    return (np.array([e.a_global_hat for e in est], dtype=complex),
            np.array([e.a_local_hat for e in est], dtype=complex),
            np.array([e.noise_var for e in est], dtype=float))


def local_excess_power(est):
    """Noise-floor-corrected mean |a_local_hat|^2 and its standard error."""
    _, a_local, noise_var = _estimate_arrays(est)
    power = np.abs(a_local) ** 2
    known = np.isfinite(noise_var)
    terms = power[known] - noise_var[known] if known.any() else power
    excess = float(np.mean(terms))
    std_err = float(np.std(terms, ddof=1) / math.sqrt(len(terms))) if len(terms) > 1 else 0.0
    return excess, std_err


def detect_local(est: Union[ChannelEstimate, FrameEstimate, Iterable[ChannelEstimate]],
                 threshold: float = DEFAULT_DETECTION_THRESHOLD,
                 z: float = DEFAULT_DETECTION_Z) -> bool:
    """True if local content is present and strong enough to use.

    The local gain must exceed `threshold` times the median global gain in
    noise-corrected RMS terms, and the excess power must sit `z` standard
    errors above zero. False means no local content, or local content too
    weak to detect.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    a_global, _, _ = _estimate_arrays(est)
    reference = float(np.median(np.abs(a_global)))
    if reference <= 0.0:
        return False
    excess, std_err = local_excess_power(est)
    detected = excess > (threshold * reference) ** 2 and excess > z * std_err
    logger.debug("Local detection: excess=%.3g std_err=%.3g reference=%.3g -> %s",
                 excess, std_err, reference, detected)
    return bool(detected)


def _check_present(gain: np.ndarray, reference: float, what: str) -> None:
    level = np.abs(gain)
    # relative to the strongest gain, never below an absolute floor
    floor = ABSENT_LEVEL * max(reference, 1.0)
    if reference <= 0.0 or np.any(level <= floor):
        raise SignalAbsentError(f"{what} channel estimate is zero")


def demod_global(samples: np.ndarray, est: ChannelEstimate) -> np.ndarray:
    """HP bits from the quadrant of samples / a_global_hat."""
    a_global = np.asarray(est.a_global_hat, dtype=complex)
    _check_present(a_global, float(np.max(np.abs(a_global))), 'global')
    return quadrant_bits(np.asarray(samples) / a_global)


def demod_local(samples: np.ndarray, hp_decisions: np.ndarray, est: ChannelEstimate) -> np.ndarray:
    """LP bits from the residual samples - a_global_hat * S_g(hp_decisions)."""
    a_global = np.asarray(est.a_global_hat, dtype=complex)
    a_local = np.asarray(est.a_local_hat, dtype=complex)
    _check_present(a_local, float(np.median(np.abs(a_global))), 'local')
    residual = np.asarray(samples) - a_global * qpsk_symbols(hp_decisions)
    return local_bits(hp_decisions, quadrant_bits(residual / a_local))
