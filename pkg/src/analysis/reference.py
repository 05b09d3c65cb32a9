"""Reference data: QPSK C/N thresholds, published simulation values and BER curves."""

import csv
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from utils.errors import ReferenceDataError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
QPSK_THRESHOLDS_CSV = DATA_DIR / "qpsk_thresholds.csv"
SIMULATED_THRESHOLDS_CSV = DATA_DIR / "simulated_thresholds_alpha2.csv"


@dataclass(frozen=True)
class ThresholdRow:
    """Required C/N of coded QPSK at the BER target."""
    code_rate: Fraction
    qpsk_cn_db: float


@dataclass(frozen=True)
class SimulatedRow:
    code_rate: Fraction
    global_cn_db: Optional[float]
    local_cn_db: Optional[float]


@dataclass(frozen=True)
class BerCurve:
    """BER versus a dB abscissa (Es/N0 for references, C/N for outputs).

    `omitted` lists abscissae that were requested but fell outside the
    reference range.
    """
    x_db: Tuple[float, ...]
    ber: Tuple[float, ...]
    omitted: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'x_db', tuple(float(x) for x in self.x_db))
        object.__setattr__(self, 'ber', tuple(float(b) for b in self.ber))
        object.__setattr__(self, 'omitted', tuple(float(x) for x in self.omitted))
        if len(self.x_db) != len(self.ber):
            raise ValueError("x_db and ber must have the same length")
        if any(b2 <= b1 for b1, b2 in zip(self.x_db, self.x_db[1:])):
            raise ValueError("x_db must be strictly increasing")
        if any(not 0.0 < b <= 1.0 for b in self.ber):
            raise ValueError("ber values must lie in (0, 1]")

    def __len__(self) -> int:
        return len(self.x_db)

    @property
    def is_monotone(self) -> bool:
        return all(b2 <= b1 for b1, b2 in zip(self.ber, self.ber[1:]))

    def validate_reference(self) -> 'BerCurve':
        if len(self) < 2:
            raise ValueError("a reference curve needs at least two points")
        if not self.is_monotone:
            raise ValueError("reference BER must be non-increasing in x")
        return self

    @classmethod
    def from_csv(cls, path) -> 'BerCurve':
        """Read a curve with header x_db,ber."""
        rows = _read_rows(path, ('x_db', 'ber'))
        x, ber = [], []
        for row_no, row in rows:
            x.append(_parse_float(row, 'x_db', path, row_no))
            ber.append(_parse_float(row, 'ber', path, row_no))
        try:
            return cls(x_db=x, ber=ber).validate_reference()
        except ValueError as e:
            raise ReferenceDataError(str(e), path=str(path)) from e

    def to_csv(self, path, x_header: str = 'x_db') -> None:
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow([x_header, 'ber'])
            for x, b in zip(self.x_db, self.ber):
                writer.writerow([repr(x), repr(b)])


def _read_rows(path, required: Sequence[str]):
    path = Path(path)
    if not path.exists():
        raise ReferenceDataError("file not found", path=str(path))
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise ReferenceDataError(f"missing column(s) {missing}", path=str(path), row=1)
        reader.fieldnames = header
        # row 1 is the header
        return [(row_no, row) for row_no, row in enumerate(reader, start=2)]


def _parse_float(row, column: str, path, row_no: int, optional: bool = False) -> Optional[float]:
    raw = (row.get(column) or '').strip()
    if not raw:
        if optional:
            return None
        raise ReferenceDataError("empty value", path=str(path), row=row_no, column=column)
    try:
        value = float(raw)
    except ValueError:
        raise ReferenceDataError(f"not a number: '{raw}'", path=str(path), row=row_no, column=column)
    if math.isnan(value):
        raise ReferenceDataError("NaN value", path=str(path), row=row_no, column=column)
    return value


def _parse_rate(row, path, row_no: int) -> Fraction:
    raw = (row.get('code_rate') or '').strip()
    try:
        rate = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise ReferenceDataError(f"invalid code rate '{raw}'", path=str(path), row=row_no, column='code_rate')
    if not 0 < rate <= 1:
        raise ReferenceDataError(f"code rate {raw} outside (0, 1]", path=str(path), row=row_no, column='code_rate')
    return rate


def load_threshold_rows(path=QPSK_THRESHOLDS_CSV) -> List[ThresholdRow]:
    """Load a code_rate,qpsk_cn_db table; rows come back sorted by code rate."""
    rows = []
    for row_no, row in _read_rows(path, ('code_rate', 'qpsk_cn_db')):
        rows.append(ThresholdRow(_parse_rate(row, path, row_no),
                                 _parse_float(row, 'qpsk_cn_db', path, row_no)))
    if not rows:
        raise ReferenceDataError("no data rows", path=str(path))
    rows.sort(key=lambda r: r.code_rate)
    for prev, cur in zip(rows, rows[1:]):
        if cur.qpsk_cn_db <= prev.qpsk_cn_db:
            raise ReferenceDataError(
                f"required C/N must increase with code rate ({prev.code_rate} -> {cur.code_rate})",
                path=str(path))
    logger.debug("Loaded %d reference thresholds from %s", len(rows), path)
    return rows


def load_simulated_rows(path=SIMULATED_THRESHOLDS_CSV) -> List[SimulatedRow]:
    """Load a code_rate,global_cn_db,local_cn_db table (blank cells allowed)."""
    rows = []
    for row_no, row in _read_rows(path, ('code_rate', 'global_cn_db', 'local_cn_db')):
        rows.append(SimulatedRow(
            code_rate=_parse_rate(row, path, row_no),
            global_cn_db=_parse_float(row, 'global_cn_db', path, row_no, optional=True),
            local_cn_db=_parse_float(row, 'local_cn_db', path, row_no, optional=True),
        ))
    return rows


def lookup_threshold(rows: Sequence[ThresholdRow], code_rate) -> float:
    """QPSK C/N (dB) for an exact code rate."""
    rate = Fraction(code_rate)
    for row in rows:
        if row.code_rate == rate:
            return row.qpsk_cn_db
    raise ReferenceDataError(f"no reference threshold for code rate {rate}")
