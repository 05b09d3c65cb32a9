"""
Hybrid SFN Channel

Satellite-only, terrestrial-only and hybrid received signals in the
frequency domain. The satellite carries the global QPSK component only; a
terrestrial transmitter adds the local component scaled by 1/(1+alpha).
On the air the two combine into

    R_k = A_g S_g + A_l S_l + N_k,   A_g = A_s + A_t,   A_l = A_t/(1+alpha)

Path gains are static over the averaging window; noise is circular complex
Gaussian calibrated against the composite received power.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from phy.constellation import HierarchyParams, hierarchical_components, qpsk_symbols
from utils.units import db_to_linear

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, np.ndarray]


@dataclass(frozen=True)
class PathGains:
    """Complex satellite and terrestrial gains (scalars or one per subcarrier)."""
    a_sat: ComplexLike = 0j
    a_terr: ComplexLike = 0j

    def __post_init__(self):
        for name in ('a_sat', 'a_terr'):
            value = getattr(self, name)
            if not np.all(np.isfinite(np.asarray(value))):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ChannelState:
    """Gains seen by the global and local constellation components."""
    a_global: ComplexLike
    a_local: ComplexLike = 0j


@dataclass(frozen=True)
class NoiseSpec:
    """C/N of the composite received signal (dB; +inf disables noise)."""
    cnr_db: float
    rng_seed: Optional[int] = None


def combine_hybrid(g: PathGains, h: HierarchyParams) -> ChannelState:
    """A_g = A_s + A_t and A_l = A_t/(1+alpha); A_l = 0 for INFINITE alpha."""
    a_sat = np.asarray(g.a_sat, dtype=complex)
    a_terr = np.asarray(g.a_terr, dtype=complex)
    a_global = a_sat + a_terr
    a_local = a_terr * h.local_scale
    if a_global.ndim == 0:
        return ChannelState(a_global=complex(a_global), a_local=complex(a_local))
    return ChannelState(a_global=a_global, a_local=a_local)


def transmit(hp_bits: np.ndarray, lp_bits: Optional[np.ndarray], h: HierarchyParams,
             state: ChannelState) -> np.ndarray:
    """Noiseless received cells a_global*S_g + a_local*S_l.

    S_g and S_l are the unit-amplitude QPSK components of each hierarchical
    symbol. LP bits are ignored for INFINITE alpha.
    """
    hp_bits = np.asarray(hp_bits, dtype=np.int8).reshape(-1, 2)
    n = len(hp_bits)
    for name in ('a_global', 'a_local'):
        gain = np.asarray(getattr(state, name))
        if gain.ndim and gain.shape[0] != n:
            raise ValueError(f"{name} has {gain.shape[0]} entries for {n} symbols")

    if h.is_qpsk or lp_bits is None:
        return np.asarray(state.a_global) * qpsk_symbols(hp_bits)

    lp_bits = np.asarray(lp_bits, dtype=np.int8).reshape(-1, 2)
    if len(lp_bits) != n:
        raise ValueError(f"hp has {n} symbols but lp has {len(lp_bits)}")
    s_g, s_l = hierarchical_components(hp_bits, lp_bits)
    return np.asarray(state.a_global) * s_g + np.asarray(state.a_local) * s_l


def noise_power(signal_power: float, cnr_db: float) -> float:
    """N = P_r / 10^(cnr_db/10)."""
    if signal_power <= 0:
        raise ValueError(f"signal_power must be positive, got {signal_power}")
    if math.isnan(cnr_db) or cnr_db == -math.inf:
        raise ValueError(f"cnr_db must be a number or +inf, got {cnr_db}")
    if cnr_db == math.inf:
        return 0.0
    return signal_power / db_to_linear(cnr_db)


def add_awgn(samples: np.ndarray, spec: NoiseSpec, signal_power: float,
             rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Add circular complex Gaussian noise of total power signal_power/10^(cnr/10).

    A generator passed in takes precedence over spec.rng_seed.
    """
    samples = np.asarray(samples, dtype=complex)
    n0 = noise_power(signal_power, spec.cnr_db)
    if n0 == 0.0:
        return samples.copy()
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    sigma = math.sqrt(n0 / 2.0)
    noise = sigma * (rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape))
    return samples + noise


def sfn_gain(mean_sq_sat: float, mean_sq_terr: float) -> float:
    """Global-stream SFN gain 1 + E|A_s|^2 / E|A_t|^2 (linear)."""
    if mean_sq_terr <= 0:
        raise ValueError("SFN gain is undefined without a terrestrial component")
    if mean_sq_sat < 0:
        raise ValueError(f"mean_sq_sat must be >= 0, got {mean_sq_sat}")
    return 1.0 + mean_sq_sat / mean_sq_terr
