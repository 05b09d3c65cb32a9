"""
Effective Es/N0 Link Analysis

Treating the other stream's power as extra Gaussian noise, the hierarchical
constellation splits a received C/N into an effective Es/N0 per stream:

    G = (1+alpha)^2 / (1 + CNR + (1+alpha)^2) * CNR      (global)
    L = CNR / (1 + (1+alpha)^2)                           (local)

with the identity CNR = G + L + G*L. Inverting these maps at a coded QPSK
threshold gives the required C/N of each stream. All math is linear; dB
conversion happens at the edges.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from analysis.reference import BerCurve, SimulatedRow, ThresholdRow, lookup_threshold
from phy.constellation import HierarchyParams
from phy.pilots import DEFAULT_OVERHEAD, FrameParams, user_data_rate
from utils.errors import InfeasibleError
from utils.units import db_to_linear, linear_to_db

logger = logging.getLogger(__name__)

STANDARD_ALPHAS = (1.0, 2.0, 4.0)


class Stream(str, Enum):
    GLOBAL = 'global'
    LOCAL = 'local'


@dataclass(frozen=True)
class EffectiveSnr:
    """Effective Es/N0 of the global (g) and local (l) streams, linear."""
    g: float
    l: float

    @property
    def g_db(self) -> float:
        return linear_to_db(self.g)

    @property
    def l_db(self) -> float:
        return linear_to_db(self.l)


@dataclass(frozen=True)
class CnRow:
    code_rate: Fraction
    qpsk_cn_db: float
    global_cn_db: float
    local_cn_db: Optional[float]


@dataclass(frozen=True)
class CnThresholdTable:
    alpha: HierarchyParams
    rows: Tuple[CnRow, ...]

    def as_records(self) -> List[dict]:
        return [{
            'code_rate': str(r.code_rate),
            'qpsk_cn_db': r.qpsk_cn_db,
            'global_cn_db': r.global_cn_db,
            'local_cn_db': r.local_cn_db,
        } for r in self.rows]


@dataclass(frozen=True)
class ThresholdComparison:
    code_rate: Fraction
    global_delta_db: Optional[float]
    local_delta_db: Optional[float]


def effective_esn0(cnr_linear: float, h: HierarchyParams) -> EffectiveSnr:
    """Effective Es/N0 of both streams at a received C/N."""
    if cnr_linear <= 0:
        raise ValueError(f"cnr must be positive, got {cnr_linear}")
    if h.is_qpsk:
        return EffectiveSnr(g=cnr_linear, l=0.0)
    ratio = h.power_ratio
    g = ratio / (1.0 + cnr_linear + ratio) * cnr_linear
    l = cnr_linear / (1.0 + ratio)
    return EffectiveSnr(g=g, l=l)


def required_cnr_global(g_req_linear: float, h: HierarchyParams) -> float:
    """C/N at which the global stream reaches effective Es/N0 g_req.

    The local stream acts as an interference floor: no C/N lifts G above
    (1+alpha)^2.
    """
    if g_req_linear <= 0:
        raise ValueError(f"g_req must be positive, got {g_req_linear}")
    if h.is_qpsk:
        return g_req_linear
    ratio = h.power_ratio
    if g_req_linear >= ratio:
        raise InfeasibleError(
            f"global Es/N0 {linear_to_db(g_req_linear):.2f} dB is unreachable at alpha={h}: "
            f"local-content interference caps it below {linear_to_db(ratio):.2f} dB")
    return g_req_linear * (ratio + 1.0) / (ratio - g_req_linear)


def required_cnr_local(l_req_linear: float, h: HierarchyParams) -> float:
    """C/N at which the local stream reaches effective Es/N0 l_req."""
    if l_req_linear <= 0:
        raise ValueError(f"l_req must be positive, got {l_req_linear}")
    if h.is_qpsk:
        raise InfeasibleError("no local stream at alpha = inf")
    return l_req_linear * (1.0 + h.power_ratio)


def threshold_table(qpsk_rows: Sequence[ThresholdRow], h: HierarchyParams) -> CnThresholdTable:
    """Required C/N of both streams for every reference QPSK threshold."""
    rows = []
    for ref in qpsk_rows:
        req = db_to_linear(ref.qpsk_cn_db)
        global_db = linear_to_db(required_cnr_global(req, h))
        local_db = None if h.is_qpsk else linear_to_db(required_cnr_local(req, h))
        rows.append(CnRow(Fraction(ref.code_rate), ref.qpsk_cn_db, global_db, local_db))
    return CnThresholdTable(alpha=h, rows=tuple(rows))


def compare_thresholds(table: CnThresholdTable, simulated: Sequence[SimulatedRow]) -> List[ThresholdComparison]:
    """Simulation minus theory, per code rate present in both."""
    by_rate = {row.code_rate: row for row in table.rows}
    comparisons = []
    for sim in simulated:
        row = by_rate.get(sim.code_rate)
        if row is None:
            continue
        global_delta = None if sim.global_cn_db is None else sim.global_cn_db - row.global_cn_db
        local_delta = None
        if sim.local_cn_db is not None and row.local_cn_db is not None:
            local_delta = sim.local_cn_db - row.local_cn_db
        comparisons.append(ThresholdComparison(sim.code_rate, global_delta, local_delta))
    return comparisons


def effective_esn0_curve(cnr_db_points: Iterable[float], alphas: Iterable[HierarchyParams]) -> List[dict]:
    """G and L in dB over a C/N sweep for several alphas."""
    records = []
    for h in alphas:
        for cnr_db in cnr_db_points:
            eff = effective_esn0(db_to_linear(cnr_db), h)
            records.append({
                'alpha': str(h),
                'cnr_db': float(cnr_db),
                'global_esn0_db': eff.g_db,
                'local_esn0_db': None if h.is_qpsk else eff.l_db,
            })
    return records


def ber_curve_hier(qpsk_ref: BerCurve, h: HierarchyParams, stream: Stream,
                   cnr_db_points: Iterable[float]) -> BerCurve:
    """Per-stream BER versus C/N read off a QPSK BER-vs-Es/N0 reference.

    Interpolation is piecewise linear in (dB, log10 BER). Points whose
    effective Es/N0 falls outside the reference are left out and listed in
    `omitted`.
    """
    stream = Stream(stream)
    if stream is Stream.LOCAL and h.is_qpsk:
        raise InfeasibleError("no local stream at alpha = inf")
    qpsk_ref.validate_reference()
    ref_x = np.asarray(qpsk_ref.x_db)
    ref_log_ber = np.log10(np.asarray(qpsk_ref.ber))
    lo, hi = ref_x[0], ref_x[-1]
    tol = 1e-9

    xs, bers, omitted = [], [], []
    for cnr_db in sorted(float(c) for c in cnr_db_points):
        eff = effective_esn0(db_to_linear(cnr_db), h)
        eff_db = eff.g_db if stream is Stream.GLOBAL else eff.l_db
        if not lo - tol <= eff_db <= hi + tol:
            omitted.append(cnr_db)
            continue
        xs.append(cnr_db)
        bers.append(10.0 ** float(np.interp(eff_db, ref_x, ref_log_ber)))
    if omitted:
        logger.warning("%d C/N point(s) outside the reference range were omitted: %s",
                       len(omitted), ", ".join(f"{x:g}" for x in omitted))
    return BerCurve(x_db=xs, ber=bers, omitted=omitted)


def solve_equal_coverage(g_req_linear: float, l_req_linear: float) -> HierarchyParams:
    """Alpha at which both streams need the same C/N.

    Equating the two inversions gives (1+alpha)^2 = g_req (1+l_req) / l_req.
    """
    if g_req_linear <= 0 or l_req_linear <= 0:
        raise ValueError("required Es/N0 values must be positive")
    ratio = g_req_linear * (1.0 + l_req_linear) / l_req_linear
    if ratio <= 1.0:
        raise InfeasibleError(f"no real alpha equalises coverage: (1+alpha)^2 = {ratio:.4g} <= 1")
    alpha = math.sqrt(ratio) - 1.0
    if alpha < 1.0:
        raise InfeasibleError(f"equal coverage needs alpha = {alpha:.4f} < 1")
    return HierarchyParams(alpha)


def solve_equal_coverage_numeric(g_req_linear: float, l_req_linear: float,
                                 alpha_max: float = 1e4) -> HierarchyParams:
    """Root of required_cnr_global - required_cnr_local in alpha (brentq)."""
    # global requirement must be reachable over the whole bracket
    alpha_min = max(1.0, math.sqrt(g_req_linear) - 1.0 + 1e-9)

    def gap(alpha):
        h = HierarchyParams(alpha)
        return linear_to_db(required_cnr_global(g_req_linear, h)) - linear_to_db(required_cnr_local(l_req_linear, h))

    lo, hi = gap(alpha_min), gap(alpha_max)
    if lo * hi > 0:
        raise InfeasibleError("no alpha >= 1 equalises the two required C/N values")
    return HierarchyParams(optimize.brentq(gap, alpha_min, alpha_max, xtol=1e-14, rtol=1e-14))


def select_standard_alpha(g_req_linear: float, l_req_linear: float,
                          candidates: Sequence[float] = STANDARD_ALPHAS) -> HierarchyParams:
    """Candidate alpha minimising the larger of the two required C/N values."""
    best, best_cost = None, math.inf
    for alpha in candidates:
        h = HierarchyParams(alpha)
        try:
            cost = max(required_cnr_global(g_req_linear, h), required_cnr_local(l_req_linear, h))
        except InfeasibleError:
            continue
        if cost < best_cost:
            best, best_cost = h, cost
    if best is None:
        raise InfeasibleError(f"no candidate alpha in {list(candidates)} is feasible")
    return best


def q_function(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def uncoded_ber_exact(cnr_linear: float, h: HierarchyParams, stream: Stream) -> float:
    """Exact uncoded BER of one stream in AWGN with global-then-local decisions.

    Per axis the levels are {alpha, alpha+2} (unnormalized) and the noise
    standard deviation follows from the mean power 2((1+alpha)^2+1) at the
    given C/N. The local decision picks the outer level when |y| > 1+alpha.
    """
    if cnr_linear <= 0:
        raise ValueError(f"cnr must be positive, got {cnr_linear}")
    stream = Stream(stream)
    if h.is_qpsk:
        if stream is Stream.LOCAL:
            raise InfeasibleError("no local stream at alpha = inf")
        return float(q_function(math.sqrt(cnr_linear)))

    a = h.alpha
    sigma = math.sqrt(((1.0 + a) ** 2 + 1.0) / cnr_linear)
    q = lambda level: float(q_function(level / sigma))
    if stream is Stream.GLOBAL:
        return 0.5 * (q(a) + q(a + 2.0))
    inner_error = q(1.0) + q(2.0 * a + 1.0)
    outer_error = q(1.0) - q(2.0 * a + 3.0)
    return 0.5 * (inner_error + outer_error)


def uncoded_ber_gaussian(cnr_linear: float, h: HierarchyParams, stream: Stream) -> float:
    """Uncoded BER with the other stream treated as Gaussian noise: Q(sqrt(Es/N0_eff))."""
    stream = Stream(stream)
    eff = effective_esn0(cnr_linear, h)
    if stream is Stream.LOCAL:
        if h.is_qpsk:
            raise InfeasibleError("no local stream at alpha = inf")
        return float(q_function(math.sqrt(eff.l)))
    return float(q_function(math.sqrt(eff.g)))


def qpsk_reference_curve(x_db_points: Iterable[float]) -> BerCurve:
    """Analytic uncoded QPSK BER versus Es/N0, Q(sqrt(Es/N0))."""
    xs = sorted(float(x) for x in x_db_points)
    bers = [max(float(q_function(math.sqrt(db_to_linear(x)))), 1e-300) for x in xs]
    return BerCurve(x_db=xs, ber=bers)


@dataclass(frozen=True)
class StreamColumn:
    code_rate: Fraction
    user_rate_bps: float
    required_cn_db: float


@dataclass(frozen=True)
class ConfigurationReport:
    """Baseline versus hierarchical global/local columns of a configuration."""
    alpha: HierarchyParams
    baseline: StreamColumn
    global_stream: StreamColumn
    local_stream: StreamColumn

    @property
    def global_degradation_db(self) -> float:
        return self.global_stream.required_cn_db - self.baseline.required_cn_db

    @property
    def local_excess_db(self) -> float:
        return self.local_stream.required_cn_db - self.baseline.required_cn_db


def configuration_report(alpha: HierarchyParams, global_rate, local_rate,
                         reference: Sequence[ThresholdRow], frame: FrameParams = FrameParams(),
                         overhead: float = DEFAULT_OVERHEAD) -> ConfigurationReport:
    """Parameters of a local-content configuration next to the QPSK baseline."""
    if alpha.is_qpsk:
        raise InfeasibleError("a local-content configuration needs a finite alpha")
    global_rate, local_rate = Fraction(global_rate), Fraction(local_rate)
    g_req = db_to_linear(lookup_threshold(reference, global_rate))
    l_req = db_to_linear(lookup_threshold(reference, local_rate))
    baseline = StreamColumn(global_rate, user_data_rate(frame, global_rate, overhead), linear_to_db(g_req))
    global_col = StreamColumn(global_rate, user_data_rate(frame, global_rate, overhead),
                              linear_to_db(required_cnr_global(g_req, alpha)))
    local_col = StreamColumn(local_rate, user_data_rate(frame, local_rate, overhead),
                             linear_to_db(required_cnr_local(l_req, alpha)))
    return ConfigurationReport(alpha=alpha, baseline=baseline, global_stream=global_col, local_stream=local_col)
