"""
Hierarchical 16-QAM Constellation

Non-uniform 16-QAM carrying a high priority (HP, global content) stream in
the quadrant and a low priority (LP, local content) stream inside the
quadrant, parametrized by the hierarchical parameter alpha = a/b.

Per axis the unnormalized levels are {±alpha, ±(alpha+2)}: the quadrant
centers sit at ±(1+alpha) and the within-quadrant offsets at ±1. As alpha
grows to infinity the constellation collapses onto plain QPSK.

Bit labelling follows the DVB convention: b0 b1 are the HP bits and select
the signs of I and Q (0 -> positive), b2 b3 are the LP bits and select the
outer (0) or inner (1) level on I and Q.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from phy.channel import ChannelState

INFINITE = math.inf

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HierarchyParams:
    """Hierarchical parameter alpha; INFINITE means QPSK (no local content)."""
    alpha: float = INFINITE

    def __post_init__(self):
        alpha = float(self.alpha)
        if math.isnan(alpha) or alpha < 1.0:
            raise ValueError(f"alpha must be >= 1 or INFINITE, got {self.alpha}")
        object.__setattr__(self, 'alpha', alpha)

    @classmethod
    def parse(cls, value) -> 'HierarchyParams':
        """Build from a number or from one of 'inf', 'infinite', 'qpsk'."""
        if isinstance(value, HierarchyParams):
            return value
        if isinstance(value, str) and value.strip().lower() in ('inf', '+inf', 'infinite', 'qpsk'):
            return cls(INFINITE)
        return cls(float(value))

    @property
    def is_qpsk(self) -> bool:
        return math.isinf(self.alpha)

    @property
    def local_scale(self) -> float:
        """Amplitude 1/(1+alpha) of the local component relative to the global one."""
        return 0.0 if self.is_qpsk else 1.0 / (1.0 + self.alpha)

    @property
    def power_ratio(self) -> float:
        """(1+alpha)^2 = Pg/Pl."""
        return INFINITE if self.is_qpsk else (1.0 + self.alpha) ** 2

    def __str__(self) -> str:
        return "inf" if self.is_qpsk else f"{self.alpha:g}"


@dataclass(frozen=True)
class SymbolBits:
    """HP bits (quadrant) and optional LP bits (within-quadrant offset)."""
    hp: Tuple[int, int]
    lp: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        for name, bits in (('hp', self.hp), ('lp', self.lp)):
            if bits is None:
                continue
            if len(bits) != 2 or any(b not in (0, 1) for b in bits):
                raise ValueError(f"{name} must be two bits, got {bits}")
        object.__setattr__(self, 'hp', tuple(int(b) for b in self.hp))
        if self.lp is not None:
            object.__setattr__(self, 'lp', tuple(int(b) for b in self.lp))


@dataclass(frozen=True)
class ConstellationPoint:
    value: complex
    normalized: complex


def _sign(bit: int) -> int:
    return 1 - 2 * bit


def map_qpsk(hp: Tuple[int, int]) -> ConstellationPoint:
    """Map two HP bits onto the QPSK point at the quadrant center."""
    value = complex(_sign(hp[0]), _sign(hp[1]))
    return ConstellationPoint(value=value, normalized=value / _SQRT2)


def map_hierarchical(bits: SymbolBits, h: HierarchyParams) -> ConstellationPoint:
    """Map HP/LP bits onto the hierarchical constellation.

    For an INFINITE alpha the LP bits are ignored and the QPSK point is
    returned.
    """
    if h.is_qpsk or bits.lp is None:
        return map_qpsk(bits.hp)

    center = 1.0 + h.alpha
    s_i, s_q = _sign(bits.hp[0]), _sign(bits.hp[1])
    # lp bit 0 pushes outward (same sign as the quadrant), 1 pulls inward
    l_i, l_q = s_i * _sign(bits.lp[0]), s_q * _sign(bits.lp[1])
    value = complex(center * s_i + l_i, center * s_q + l_q)
    mean_power = 2.0 * (center ** 2 + 1.0)
    return ConstellationPoint(value=value, normalized=value / math.sqrt(mean_power))


def constellation_power(h: HierarchyParams) -> Tuple[float, float]:
    """Unnormalized (global, local) power: (2(1+alpha)^2, 2).

    For INFINITE alpha there is no local power and the global power is the
    QPSK power of the quadrant centers.
    """
    if h.is_qpsk:
        return 2.0, 0.0
    return 2.0 * (1.0 + h.alpha) ** 2, 2.0


def constellation_points(h: HierarchyParams):
    """All (bits, point) pairs of the constellation, 16 for finite alpha, 4 for QPSK."""
    pairs = []
    for b0 in (0, 1):
        for b1 in (0, 1):
            if h.is_qpsk:
                bits = SymbolBits(hp=(b0, b1))
                pairs.append((bits, map_qpsk(bits.hp)))
                continue
            for b2 in (0, 1):
                for b3 in (0, 1):
                    bits = SymbolBits(hp=(b0, b1), lp=(b2, b3))
                    pairs.append((bits, map_hierarchical(bits, h)))
    return pairs


# Vectorised helpers working in the received-signal frame, where a symbol is
# S_g + S_l/(1+alpha) with S_g, S_l unit-amplitude QPSK.

def qpsk_symbols(bits: np.ndarray) -> np.ndarray:
    """Unit-amplitude QPSK symbols from an (n, 2) bit array."""
    bits = np.asarray(bits, dtype=np.int8)
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / _SQRT2


def quadrant_bits(z: np.ndarray) -> np.ndarray:
    """Hard QPSK decision: sign bits of the real and imaginary parts."""
    z = np.asarray(z)
    return np.stack([(z.real < 0), (z.imag < 0)], axis=-1).astype(np.int8)


def hierarchical_components(hp: np.ndarray, lp: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split HP/LP bit arrays into the global and local QPSK components.

    The local component carries the sign of the quadrant for outer points
    and the opposite sign for inner points, so its sign bits are hp XOR lp.
    """
    hp = np.asarray(hp, dtype=np.int8)
    lp = np.asarray(lp, dtype=np.int8)
    return qpsk_symbols(hp), qpsk_symbols(np.bitwise_xor(hp, lp))


def local_bits(hp: np.ndarray, local_component_bits: np.ndarray) -> np.ndarray:
    """Recover LP bits from the decided local component and the HP decision."""
    return np.bitwise_xor(np.asarray(hp, dtype=np.int8),
                          np.asarray(local_component_bits, dtype=np.int8))


_BIT_PAIRS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int8)


def demap_hierarchical_hard(sample: complex, ch: 'ChannelState') -> SymbolBits:
    """Hard decision on one received sample.

    With no local gain the HP bits are the quadrant of sample / a_global.
    Otherwise the decision is the nearest of the 16 composite points
    a_global*S_g + a_local*S_l, which equals the global-then-local
    decision whenever the local offsets stay inside the global quadrant
    and remains exact when a_local is rotated against a_global.
    """
    a_global = complex(ch.a_global)
    a_local = complex(ch.a_local)
    if a_global == 0:
        raise ValueError("a_global must be nonzero")

    if a_local == 0:
        hp = quadrant_bits(np.array([sample / a_global]))
        return SymbolBits(hp=(int(hp[0, 0]), int(hp[0, 1])))

    s = qpsk_symbols(_BIT_PAIRS)
    composite = a_global * s[:, None] + a_local * s[None, :]
    g, l = np.unravel_index(np.argmin(np.abs(sample - composite)), composite.shape)
    hp = _BIT_PAIRS[g]
    lp = local_bits(hp, _BIT_PAIRS[l])
    return SymbolBits(hp=(int(hp[0]), int(hp[1])), lp=(int(lp[0]), int(lp[1])))
