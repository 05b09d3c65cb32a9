"""
OFDM Frame Layout and Modified Pilots

Carrier/symbol grid of a 2K OFDM frame with continual and scattered BPSK
pilots, the modified pilots that let a receiver estimate the global and
local channel gains jointly, and the user-data-rate calculator.

Modified pilots have the form P + j*(±1)*P/(alpha+1). Continual pilots
alternate the sign of the vertical component with the symbol index;
scattered pilots are duplicated on the next symbol at the same carrier with
the opposite sign, so every pilot appears as a pair with opposite vertical
polarity.
"""

import csv
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from phy.constellation import HierarchyParams, INFINITE
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Continual pilot carriers of the 2K mode (ETSI EN 300 744)
CONTINUAL_CARRIERS_2K = (
    0, 48, 54, 87, 141, 156, 192, 201, 255, 279, 282, 333, 432, 450,
    483, 525, 531, 618, 636, 714, 759, 765, 780, 804, 873, 888, 918,
    939, 942, 969, 984, 1050, 1101, 1107, 1110, 1137, 1140, 1146, 1206,
    1269, 1323, 1377, 1491, 1683, 1704,
)

VALID_GUARD_FRACTIONS = (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16), Fraction(1, 32))

# Framing overhead back-solved from 4.937 Mbps / 5.000 Mbps
DEFAULT_OVERHEAD = 0.9874

PILOT_AMPLITUDE = 1.0

# Cell kinds in a FrameLayout grid
DATA = 0
CONTINUAL = 1
SCATTERED_FIRST = 2
SCATTERED_SECOND = 3

KIND_NAMES = {
    DATA: 'data',
    CONTINUAL: 'continual',
    SCATTERED_FIRST: 'scattered-first',
    SCATTERED_SECOND: 'scattered-second',
}


@dataclass(frozen=True)
class FrameParams:
    """Baseline OFDM parameters (5 MHz, 2K, GI 1/8)."""
    bandwidth_hz: float = 5e6
    fft_size: int = 2048
    guard_fraction: Fraction = Fraction(1, 8)
    data_carriers: int = 1512
    total_active_carriers: int = 1705
    symbols_per_frame: int = 68

    def __post_init__(self):
        object.__setattr__(self, 'guard_fraction', Fraction(self.guard_fraction).limit_denominator(64))
        errors = []
        if self.bandwidth_hz <= 0:
            errors.append(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if not (self.data_carriers < self.total_active_carriers < self.fft_size):
            errors.append("carrier counts must satisfy data_carriers < total_active_carriers < fft_size "
                          f"(got {self.data_carriers}, {self.total_active_carriers}, {self.fft_size})")
        if self.guard_fraction not in VALID_GUARD_FRACTIONS:
            errors.append(f"guard_fraction must be one of 1/4, 1/8, 1/16, 1/32, got {self.guard_fraction}")
        if self.symbols_per_frame < 2:
            errors.append(f"symbols_per_frame must be >= 2, got {self.symbols_per_frame}")
        if errors:
            raise ConfigurationError(errors)

    @property
    def sample_rate(self) -> float:
        """64/7 MHz scaled by bandwidth / 8 MHz."""
        return 64e6 / 7.0 * self.bandwidth_hz / 8e6

    @property
    def useful_duration(self) -> float:
        return self.fft_size / self.sample_rate

    @property
    def symbol_duration(self) -> float:
        return float(1 + self.guard_fraction) * self.useful_duration


@dataclass(frozen=True)
class PilotPattern:
    """Simplified DVB-T style pilot grid.

    Scattered pilots sit on carriers offset + stride*n with
    offset = (shift * (symbol mod cycle)) mod stride. With local_content on,
    each scattered pilot gets a partner on the next symbol.
    """
    continual_carriers: Tuple[int, ...] = CONTINUAL_CARRIERS_2K
    scattered_stride: int = 12
    scattered_shift: int = 3
    scattered_cycle: int = 4
    local_content: bool = True
    seed: int = 0x7FF
    amplitude: float = PILOT_AMPLITUDE


@dataclass(frozen=True)
class PilotCell:
    carrier_index: int
    symbol_index: int
    kind: str
    base_value: float
    modified_value: complex


def base_pilot_sequence(seed: int, count: int, amplitude: float = PILOT_AMPLITUDE) -> np.ndarray:
    """Seed-reproducible BPSK sequence of ±amplitude."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    return amplitude * (1.0 - 2.0 * rng.integers(0, 2, size=count))


def modify_continual_pilot(p_i: float, i: int, h: HierarchyParams) -> complex:
    """P_i + j(-1)^i P_i/(alpha+1); the unmodified pilot for INFINITE alpha."""
    if h.is_qpsk:
        return complex(p_i)
    polarity = 1.0 if i % 2 == 0 else -1.0
    return complex(p_i, polarity * p_i / (h.alpha + 1.0))


def modify_scattered_pair(p_i: float, h: HierarchyParams) -> Tuple[complex, complex]:
    """(P_i + jP_i/(alpha+1), P_i - jP_i/(alpha+1))."""
    if h.is_qpsk:
        return complex(p_i), complex(p_i)
    vertical = p_i / (h.alpha + 1.0)
    return complex(p_i, vertical), complex(p_i, -vertical)


def pilot_power_factor(h: HierarchyParams) -> float:
    """Power increase 1 + 1/(alpha+1)^2 of a modified pilot."""
    if h.is_qpsk:
        return 1.0
    return 1.0 + 1.0 / (h.alpha + 1.0) ** 2


@dataclass(frozen=True)
class PilotPairs:
    """Index arrays of every pilot pair in a frame (one entry per pair)."""
    carrier: np.ndarray
    symbol_1: np.ndarray
    symbol_2: np.ndarray
    s_g1: np.ndarray
    s_g2: np.ndarray
    s_l1: np.ndarray
    s_l2: np.ndarray

    def __len__(self) -> int:
        return len(self.carrier)


class FrameLayout:
    """Immutable carrier/symbol grid of one frame."""

    def __init__(self, fp: FrameParams, pattern: PilotPattern, kind: np.ndarray, base: np.ndarray):
        self.fp = fp
        self.pattern = pattern
        self._kind = kind
        self._kind.setflags(write=False)
        self._base = base
        self._base.setflags(write=False)
        self._pairs: Optional[PilotPairs] = None

    @property
    def kind(self) -> np.ndarray:
        """(symbols, carriers) grid of cell kind codes."""
        return self._kind

    @property
    def base_values(self) -> np.ndarray:
        """BPSK base pilot value per carrier."""
        return self._base

    @property
    def shape(self) -> Tuple[int, int]:
        return self._kind.shape

    @property
    def data_mask(self) -> np.ndarray:
        return self._kind == DATA

    @property
    def pilot_mask(self) -> np.ndarray:
        return self._kind != DATA

    @property
    def data_cell_count(self) -> int:
        return int(np.count_nonzero(self._kind == DATA))

    @property
    def extra_pilot_cells(self) -> int:
        """Carriers consumed by scattered-second cells (the bandwidth penalty)."""
        return int(np.count_nonzero(self._kind == SCATTERED_SECOND))

    def pilot_values(self, h: HierarchyParams) -> np.ndarray:
        """Transmitted pilot values over the grid (zero on data cells) for a given alpha."""
        n_symbols, _ = self.shape
        values = np.zeros(self.shape, dtype=complex)
        base = np.broadcast_to(self._base, self.shape)
        scale = h.local_scale
        polarity = np.where(np.arange(n_symbols) % 2 == 0, 1.0, -1.0)[:, None]

        continual = self._kind == CONTINUAL
        values[continual] = (base * (1.0 + 1j * polarity * scale))[continual]
        first = self._kind == SCATTERED_FIRST
        values[first] = base[first] * (1.0 + 1j * scale)
        second = self._kind == SCATTERED_SECOND
        values[second] = base[second] * (1.0 - 1j * scale)
        return values

    def pilot_pairs(self) -> PilotPairs:
        """Every (carrier, symbol, symbol+1) pilot pair the receiver can solve.

        The vertical components are the nominal ±j*P of a modified pilot; the
        receiver never needs alpha.
        """
        if self._pairs is not None:
            return self._pairs

        n_symbols, _ = self.shape
        carriers, first_symbols, polarity = [], [], []

        continual = np.flatnonzero(self._kind[0] == CONTINUAL)
        for sym in range(0, n_symbols - 1, 2):
            carriers.append(continual)
            first_symbols.append(np.full(len(continual), sym))
            polarity.append(np.ones(len(continual)))

        if self.pattern.local_content:
            sym_idx, car_idx = np.nonzero(self._kind == SCATTERED_FIRST)
            carriers.append(car_idx)
            first_symbols.append(sym_idx)
            polarity.append(np.ones(len(car_idx)))

        carrier = np.concatenate(carriers).astype(int) if carriers else np.zeros(0, dtype=int)
        symbol_1 = np.concatenate(first_symbols).astype(int) if first_symbols else np.zeros(0, dtype=int)
        sign = np.concatenate(polarity) if polarity else np.zeros(0)
        order = np.lexsort((symbol_1, carrier))
        carrier, symbol_1, sign = carrier[order], symbol_1[order], sign[order]

        p = self._base[carrier]
        self._pairs = PilotPairs(
            carrier=carrier,
            symbol_1=symbol_1,
            symbol_2=symbol_1 + 1,
            s_g1=p.astype(complex),
            s_g2=p.astype(complex),
            s_l1=1j * sign * p,
            s_l2=-1j * sign * p,
        )
        return self._pairs

    def cells(self, h: HierarchyParams = HierarchyParams(INFINITE)) -> Iterator[PilotCell]:
        """Iterate over the pilot cells in (symbol, carrier) order."""
        values = self.pilot_values(h)
        sym_idx, car_idx = np.nonzero(self._kind != DATA)
        for sym, car in zip(sym_idx, car_idx):
            yield PilotCell(
                carrier_index=int(car),
                symbol_index=int(sym),
                kind=KIND_NAMES[int(self._kind[sym, car])],
                base_value=float(self._base[car]),
                modified_value=complex(values[sym, car]),
            )

    def to_csv(self, path, h: HierarchyParams = HierarchyParams(INFINITE), include_data: bool = False) -> None:
        """Dump the layout as carrier,symbol,kind,re,im rows."""
        values = self.pilot_values(h)
        n_symbols, n_carriers = self.shape
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['carrier', 'symbol', 'kind', 're', 'im'])
            for sym in range(n_symbols):
                for car in range(n_carriers):
                    code = int(self._kind[sym, car])
                    if code == DATA and not include_data:
                        continue
                    value = values[sym, car]
                    writer.writerow([car, sym, KIND_NAMES[code], repr(float(value.real)), repr(float(value.imag))])


def frame_layout(fp: FrameParams, pilot_spec: PilotPattern = PilotPattern()) -> FrameLayout:
    """Place continual and scattered pilots on the frame grid.

    Continual carriers take precedence over scattered positions that land on
    them. The last symbol carries continual pilots only so that every
    scattered pilot has its partner inside the frame.
    """
    n_symbols, n_carriers = fp.symbols_per_frame, fp.total_active_carriers
    errors = []
    if pilot_spec.scattered_stride < 1:
        errors.append(f"scattered_stride must be >= 1, got {pilot_spec.scattered_stride}")
    if pilot_spec.scattered_cycle < 1:
        errors.append(f"scattered_cycle must be >= 1, got {pilot_spec.scattered_cycle}")
    bad = [c for c in pilot_spec.continual_carriers if not 0 <= c < n_carriers]
    if bad:
        errors.append(f"continual carriers outside 0..{n_carriers - 1}: {bad}")
    if errors:
        raise ConfigurationError(errors)

    kind = np.full((n_symbols, n_carriers), DATA, dtype=np.int8)
    continual = np.array(sorted(set(pilot_spec.continual_carriers)), dtype=int)
    kind[:, continual] = CONTINUAL
    is_continual = np.zeros(n_carriers, dtype=bool)
    is_continual[continual] = True

    for sym in range(n_symbols - 1):
        offset = (pilot_spec.scattered_shift * (sym % pilot_spec.scattered_cycle)) % pilot_spec.scattered_stride
        positions = np.arange(offset, n_carriers, pilot_spec.scattered_stride)
        positions = positions[~is_continual[positions]]
        clash = positions[kind[sym, positions] != DATA]
        if clash.size:
            raise ConfigurationError(
                f"scattered pilots overlap existing pilot cells at symbol {sym}, carriers {clash[:5].tolist()}")
        kind[sym, positions] = SCATTERED_FIRST
        if pilot_spec.local_content:
            kind[sym + 1, positions] = SCATTERED_SECOND

    base = base_pilot_sequence(pilot_spec.seed, n_carriers, pilot_spec.amplitude)
    layout = FrameLayout(fp, pilot_spec, kind, base)
    logger.debug("Frame layout %s: %d data cells, %d extra pilot cells",
                 layout.shape, layout.data_cell_count, layout.extra_pilot_cells)
    return layout


def user_data_rate(fp: FrameParams, code_rate: Union[Fraction, float], overhead: float = DEFAULT_OVERHEAD,
                   bits_per_carrier: int = 2) -> float:
    """User bit rate in bits/s of one QPSK-equivalent stream."""
    code_rate = float(Fraction(code_rate)) if isinstance(code_rate, (str, Fraction)) else float(code_rate)
    if not 0.0 < code_rate <= 1.0:
        raise ValueError(f"code_rate must be in (0, 1], got {code_rate}")
    if not 0.0 < overhead <= 1.0:
        raise ValueError(f"overhead must be in (0, 1], got {overhead}")
    return fp.data_carriers * bits_per_carrier * code_rate * overhead / fp.symbol_duration


def parse_code_rate(value) -> Fraction:
    """Parse '2/3', 0.5 or a Fraction into a Fraction."""
    try:
        rate = Fraction(str(value).strip()) if not isinstance(value, Fraction) else value
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"invalid code rate '{value}'") from e
    if not 0 < rate <= 1:
        raise ValueError(f"code rate must be in (0, 1], got {value}")
    return rate
