"""
Monte Carlo Harness

Frame-level simulation of satellite-only, terrestrial-only and hybrid
reception. Each frame carries random HP/LP bits on the data cells and
modified pilots on the pilot cells; the satellite sends unmodified pilots and
plain QPSK, the terrestrial transmitter the alpha-modified pilots and the
hierarchical constellation. The receiver estimates both gains from the pilot
pairs, detects local content and demodulates global-then-local.

Errors are counted twice: against the true channel state (genie) and
against the pilot estimates (end-to-end). Every sweep point and frame draws
from its own SeedSequence, so results do not depend on the order or the
process in which work units run.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.parser import ConfigParser, Scenario
from phy.channel import NoiseSpec, PathGains, add_awgn, combine_hybrid, transmit
from phy.constellation import HierarchyParams, INFINITE
from phy.pilots import FrameLayout, PilotPattern, frame_layout
from phy.receiver import ChannelEstimate, demod_global, demod_local, detect_local, estimate_frame
from simulation.statistics import mean_interval, relative_halfwidth, wilson_interval
from utils.errors import ConfigurationError
from utils.units import db_to_linear

logger = logging.getLogger(__name__)

# spawn-key namespaces keep the experiments' random streams apart
_BER_STREAM = 0
_ESTIMATION_STREAM = 1
_DETECTION_STREAM = 2


@dataclass
class PointResult:
    """Summed counts of one sweep point; rates derive from the counts."""
    cnr_db: float
    frames: int = 0
    symbols: int = 0
    hp_errors: int = 0
    hp_bits: int = 0
    lp_errors: Optional[int] = None
    lp_bits: Optional[int] = None
    genie_hp_errors: int = 0
    genie_lp_errors: Optional[int] = None
    detections: int = 0
    est_count: int = 0
    est_global_sum: float = 0.0
    est_global_sumsq: float = 0.0
    est_local_sum: float = 0.0
    est_local_sumsq: float = 0.0

    def merge(self, other: 'PointResult') -> 'PointResult':
        """Sum the counts of two batches of the same point."""
        if other.cnr_db != self.cnr_db and not (math.isnan(other.cnr_db) and math.isnan(self.cnr_db)):
            raise ValueError("cannot merge results of different sweep points")

        def add(a, b):
            return None if a is None and b is None else (a or 0) + (b or 0)

        return PointResult(
            cnr_db=self.cnr_db,
            frames=self.frames + other.frames,
            symbols=self.symbols + other.symbols,
            hp_errors=self.hp_errors + other.hp_errors,
            hp_bits=self.hp_bits + other.hp_bits,
            lp_errors=add(self.lp_errors, other.lp_errors),
            lp_bits=add(self.lp_bits, other.lp_bits),
            genie_hp_errors=self.genie_hp_errors + other.genie_hp_errors,
            genie_lp_errors=add(self.genie_lp_errors, other.genie_lp_errors),
            detections=self.detections + other.detections,
            est_count=self.est_count + other.est_count,
            est_global_sum=self.est_global_sum + other.est_global_sum,
            est_global_sumsq=self.est_global_sumsq + other.est_global_sumsq,
            est_local_sum=self.est_local_sum + other.est_local_sum,
            est_local_sumsq=self.est_local_sumsq + other.est_local_sumsq,
        )

    @property
    def hp_ber(self) -> float:
        return self.hp_errors / self.hp_bits if self.hp_bits else math.nan

    @property
    def lp_ber(self) -> Optional[float]:
        if self.lp_bits is None:
            return None
        return self.lp_errors / self.lp_bits if self.lp_bits else math.nan

    @property
    def genie_hp_ber(self) -> float:
        return self.genie_hp_errors / self.hp_bits if self.hp_bits else math.nan

    @property
    def genie_lp_ber(self) -> Optional[float]:
        if self.lp_bits is None:
            return None
        return self.genie_lp_errors / self.lp_bits if self.lp_bits else math.nan

    @property
    def detection_rate(self) -> float:
        return self.detections / self.frames if self.frames else math.nan

    @property
    def mse_global(self) -> float:
        return self.est_global_sum / self.est_count if self.est_count else math.nan

    @property
    def mse_local(self) -> float:
        return self.est_local_sum / self.est_count if self.est_count else math.nan

    def hp_interval(self, genie: bool = False) -> Tuple[float, float]:
        return wilson_interval(self.genie_hp_errors if genie else self.hp_errors, self.hp_bits)

    def lp_interval(self, genie: bool = False) -> Optional[Tuple[float, float]]:
        if self.lp_bits is None:
            return None
        return wilson_interval(self.genie_lp_errors if genie else self.lp_errors, self.lp_bits)

    def mse_global_interval(self) -> Tuple[float, float]:
        return mean_interval(self.est_global_sum, self.est_global_sumsq, self.est_count)

    def mse_local_interval(self) -> Tuple[float, float]:
        return mean_interval(self.est_local_sum, self.est_local_sumsq, self.est_count)

    def precision(self, carries_local: bool) -> float:
        """Worst relative Wilson half-width of the end-to-end BER estimates."""
        widths = [relative_halfwidth(self.hp_errors, self.hp_bits)]
        if carries_local and self.lp_bits is not None:
            widths.append(relative_halfwidth(self.lp_errors, self.lp_bits))
        return max(widths)


@dataclass
class ExperimentResult:
    """Per-sweep-point results of one scenario."""
    scenario: Scenario
    points: List[PointResult] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class EstimationStats:
    """Mean-square channel estimation error at one satellite power level."""
    sat_power_db: float
    cnr_db: float
    count: int
    mse_global: float
    mse_local: float
    mse_global_interval: Tuple[float, float]
    mse_local_interval: Tuple[float, float]


@dataclass(frozen=True)
class DetectionPoint:
    """Detection rates with and without local content at one C/N."""
    cnr_db: float
    trials: int
    with_local_detections: Optional[int]
    without_local_detections: int

    @property
    def detection_rate(self) -> Optional[float]:
        if self.with_local_detections is None:
            return None
        return self.with_local_detections / self.trials

    @property
    def false_alarm_rate(self) -> float:
        return self.without_local_detections / self.trials


def check_scenario(sc: Scenario) -> None:
    """Raise ConfigurationError listing every problem with a scenario."""
    errors = ConfigParser.validate_config(sc)
    if errors:
        raise ConfigurationError(errors)


def frame_seed(seed: int, stream: int, point: int, frame: int, extra: int = 0) -> np.random.SeedSequence:
    """Independent, order-free seed for one frame of one sweep point."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(stream, point, extra, frame))


class FrameSimulator:
    """Generates and receives frames for one scenario."""

    def __init__(self, sc: Scenario, layout: Optional[FrameLayout] = None):
        self.sc = sc
        self.h = sc.effective_alpha
        self.layout = layout or frame_layout(sc.frame, PilotPattern(local_content=True))
        self._sat_pilots = self.layout.pilot_values(HierarchyParams(INFINITE))
        self._terr_pilots = self.layout.pilot_values(self.h)
        self._pilot_mask = self.layout.pilot_mask
        data_symbols, data_carriers = np.nonzero(self.layout.data_mask)
        self._data_index = (data_symbols, data_carriers)
        self.n_data = len(data_symbols)
        self._n_carriers = self.layout.shape[1]

    def path_gains(self, rng: np.random.Generator) -> PathGains:
        """Gains of one frame; flat over carriers."""
        spec = self.sc.path_gains
        sat_phase = math.radians(spec.sat_phase_deg)
        terr_phase = math.radians(spec.terr_phase_deg)
        if spec.mode == 'random_phase':
            # both phases are always drawn so the streams stay aligned across modes
            sat_phase, terr_phase = rng.uniform(0.0, 2.0 * math.pi, size=2)
        a_sat = math.sqrt(db_to_linear(spec.sat_power_db)) * complex(math.cos(sat_phase), math.sin(sat_phase))
        a_terr = math.sqrt(db_to_linear(spec.terr_power_db)) * complex(math.cos(terr_phase), math.sin(terr_phase))
        return PathGains(a_sat=a_sat if self.sc.has_satellite else 0j,
                         a_terr=a_terr if self.sc.has_terrestrial else 0j)

    def reference_power(self, gains: PathGains, clean: np.ndarray) -> float:
        if self.sc.noise_reference == 'terrestrial':
            return abs(gains.a_terr) ** 2 * (1.0 + self.sc.alpha.local_scale ** 2)
        return float(np.mean(np.abs(clean) ** 2))

    def run_frame(self, cnr_db: float, rng: np.random.Generator, demodulate: bool = True) -> PointResult:
        """Simulate one frame and return its counts."""
        gains = self.path_gains(rng)
        state = combine_hybrid(gains, self.h)
        hp = rng.integers(0, 2, size=(self.n_data, 2), dtype=np.int8)
        lp = rng.integers(0, 2, size=(self.n_data, 2), dtype=np.int8)

        clean = np.zeros(self.layout.shape, dtype=complex)
        clean[self._data_index] = transmit(hp, lp, self.h, state)
        clean[self._pilot_mask] = (gains.a_sat * self._sat_pilots + gains.a_terr * self._terr_pilots)[self._pilot_mask]

        received = add_awgn(clean, NoiseSpec(cnr_db), self.reference_power(gains, clean), rng=rng)

        estimate = estimate_frame(received, self.layout, self.sc.averaging_window)
        detected = detect_local(estimate, self.sc.detection_threshold, self.sc.detection_z)
        d_global = np.abs(estimate.a_global_hat - state.a_global) ** 2
        d_local = np.abs(estimate.a_local_hat - state.a_local) ** 2

        result = PointResult(
            cnr_db=cnr_db,
            frames=1,
            symbols=self.n_data,
            detections=int(detected),
            est_count=len(d_global),
            est_global_sum=float(d_global.sum()),
            est_global_sumsq=float((d_global ** 2).sum()),
            est_local_sum=float(d_local.sum()),
            est_local_sumsq=float((d_local ** 2).sum()),
        )
        if demodulate:
            self._count_errors(result, received, hp, lp, state, estimate, detected)
        return result

    def _count_errors(self, result, received, hp, lp, state, estimate, detected) -> None:
        samples = received[self._data_index]
        carriers = self._data_index[1]

        genie = ChannelEstimate(a_global_hat=state.a_global, a_local_hat=state.a_local)
        genie_hp = demod_global(samples, genie)
        interpolated = estimate.interpolate(self._n_carriers)
        est = ChannelEstimate(a_global_hat=interpolated.a_global_hat[carriers],
                              a_local_hat=interpolated.a_local_hat[carriers])
        est_hp = demod_global(samples, est)

        result.hp_bits = hp.size
        result.genie_hp_errors = int(np.count_nonzero(genie_hp != hp))
        result.hp_errors = int(np.count_nonzero(est_hp != hp))

        if not self.sc.carries_local:
            return
        result.lp_bits = lp.size
        genie_lp = demod_local(samples, genie_hp, genie)
        result.genie_lp_errors = int(np.count_nonzero(genie_lp != lp))
        if detected:
            est_lp = demod_local(samples, est_hp, est)
            result.lp_errors = int(np.count_nonzero(est_lp != lp))
        else:
            # nothing is delivered on the local stream
            result.lp_errors = lp.size


def _frames_for(symbols: int, per_frame: int) -> int:
    return max(1, math.ceil(symbols / per_frame))


def _run_point(sc: Scenario, index: int) -> PointResult:
    simulator = FrameSimulator(sc)
    cnr_db = sc.cnr_sweep_db[index]
    first_batch = batch = _frames_for(sc.symbols_per_point, simulator.n_data)
    cap = _frames_for(sc.symbol_cap, simulator.n_data)

    total = PointResult(cnr_db=cnr_db)
    frame = 0
    while True:
        for _ in range(batch):
            rng = np.random.default_rng(frame_seed(sc.seed, _BER_STREAM, index, frame))
            total = total.merge(simulator.run_frame(cnr_db, rng))
            frame += 1
        if frame >= cap or total.precision(sc.carries_local) <= sc.target_relative_halfwidth:
            break
        batch = min(batch, cap - frame)

    if cap > first_batch and total.precision(sc.carries_local) > sc.target_relative_halfwidth:
        logger.warning("C/N %.2f dB: hit the symbol cap (%d) before reaching the target precision",
                       cnr_db, total.symbols)
    logger.info("C/N %6.2f dB: %d frames, HP BER %.3e, LP BER %s, detection %.2f",
                cnr_db, total.frames, total.hp_ber,
                'n/a' if total.lp_ber is None else f"{total.lp_ber:.3e}", total.detection_rate)
    return total


def run_ber_experiment(sc: Scenario) -> ExperimentResult:
    """BER versus C/N over the scenario's sweep, genie and end-to-end."""
    check_scenario(sc)
    logger.info("Running BER experiment: mode=%s alpha=%s streams=%s seed=%d points=%d",
                sc.mode, sc.alpha, ",".join(sc.resolved_streams), sc.seed, len(sc.cnr_sweep_db))
    indices = range(len(sc.cnr_sweep_db))
    if sc.workers > 1 and len(sc.cnr_sweep_db) > 1:
        with ProcessPoolExecutor(max_workers=sc.workers) as pool:
            points = list(pool.map(_run_point, [sc] * len(indices), indices))
    else:
        points = [_run_point(sc, i) for i in indices]
    return ExperimentResult(scenario=sc, points=points)


def run_estimation_experiment(sc: Scenario, satellite_power_sweep_db: Sequence[float]) -> List[EstimationStats]:
    """Mean-square estimation error of both gains per satellite power level.

    Every power level replays the same random streams, so bits, phases and
    (with a terrestrial noise reference) the noise itself are identical across
    levels; only the satellite contribution changes.
    """
    check_scenario(sc)
    if not satellite_power_sweep_db:
        raise ConfigurationError("satellite power sweep must not be empty")
    stats = []
    for power_db in satellite_power_sweep_db:
        level = replace(sc, path_gains=replace(sc.path_gains, sat_power_db=float(power_db)))
        simulator = FrameSimulator(level)
        frames = _frames_for(sc.symbols_per_point, simulator.n_data)
        for index, cnr_db in enumerate(sc.cnr_sweep_db):
            total = PointResult(cnr_db=cnr_db)
            for frame in range(frames):
                rng = np.random.default_rng(frame_seed(sc.seed, _ESTIMATION_STREAM, index, frame))
                total = total.merge(simulator.run_frame(cnr_db, rng, demodulate=False))
            stats.append(EstimationStats(
                sat_power_db=float(power_db),
                cnr_db=cnr_db,
                count=total.est_count,
                mse_global=total.mse_global,
                mse_local=total.mse_local,
                mse_global_interval=total.mse_global_interval(),
                mse_local_interval=total.mse_local_interval(),
            ))
            logger.info("Satellite %+.1f dB, C/N %.2f dB: MSE global %.3e local %.3e",
                        power_db, cnr_db, total.mse_global, total.mse_local)
    return stats


def run_detection_experiment(sc: Scenario) -> List[DetectionPoint]:
    """Detection rates per C/N with local content and with plain QPSK on the air."""
    check_scenario(sc)
    with_local = None
    if sc.has_terrestrial and not sc.alpha.is_qpsk:
        with_local = FrameSimulator(sc)
    without_local = FrameSimulator(replace(sc, alpha=HierarchyParams(INFINITE), streams=('global',)))

    points = []
    for index, cnr_db in enumerate(sc.cnr_sweep_db):
        hits, false_alarms = 0, 0
        for trial in range(sc.detection_trials):
            if with_local is not None:
                rng = np.random.default_rng(frame_seed(sc.seed, _DETECTION_STREAM, index, trial, extra=1))
                hits += with_local.run_frame(cnr_db, rng, demodulate=False).detections
            rng = np.random.default_rng(frame_seed(sc.seed, _DETECTION_STREAM, index, trial, extra=0))
            false_alarms += without_local.run_frame(cnr_db, rng, demodulate=False).detections
        point = DetectionPoint(cnr_db=cnr_db, trials=sc.detection_trials,
                               with_local_detections=None if with_local is None else hits,
                               without_local_detections=false_alarms)
        if point.detection_rate is not None and point.detection_rate < 0.99:
            logger.warning("C/N %.2f dB: local content detected in only %.1f%% of frames",
                           cnr_db, 100.0 * point.detection_rate)
        points.append(point)
    return points
