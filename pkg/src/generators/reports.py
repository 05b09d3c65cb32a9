"""
Report Generator

Writes simulation results as CSV (one row per sweep point), a JSON metadata
sidecar and a markdown summary rendered from a jinja2 template. The results
CSV carries no timestamps, so identical scenarios give byte-identical files.
"""

import csv
import hashlib
import json
import logging
import math
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import scipy
from jinja2 import Environment, FileSystemLoader

from config.parser import ConfigParser, Scenario
from simulation.harness import DetectionPoint, EstimationStats, ExperimentResult
from utils import __version__
from utils.errors import ReferenceDataError

logger = logging.getLogger(__name__)

RESULTS_HEADER = (
    'cnr_db', 'hp_ber', 'hp_ber_low', 'hp_ber_high',
    'lp_ber', 'lp_ber_low', 'lp_ber_high',
    'hp_errors', 'lp_errors', 'genie_hp_errors', 'genie_lp_errors',
    'hp_bits', 'lp_bits', 'frames', 'detection_rate', 'mse_global', 'mse_local',
)
ESTIMATION_HEADER = (
    'sat_power_db', 'cnr_db', 'count', 'mse_global', 'mse_global_low', 'mse_global_high',
    'mse_local', 'mse_local_low', 'mse_local_high',
)
DETECTION_HEADER = ('cnr_db', 'trials', 'detection_rate', 'false_alarm_rate')

_INT_COLUMNS = {'hp_errors', 'lp_errors', 'genie_hp_errors', 'genie_lp_errors', 'hp_bits', 'lp_bits', 'frames'}


def format_value(value) -> str:
    """CSV cell text: blank for None, repr for floats so values round-trip."""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_records_csv(records: Iterable[Dict[str, Any]], header: Sequence[str], output_path) -> None:
    with open(output_path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for record in records:
            writer.writerow([format_value(record.get(column)) for column in header])


def scenario_hash(sc: Scenario) -> str:
    """sha256 of the canonical JSON form of a scenario."""
    canonical = json.dumps(ConfigParser.to_dict(sc), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def result_records(result: ExperimentResult) -> List[Dict[str, Any]]:
    records = []
    for point in result.points:
        hp_low, hp_high = point.hp_interval()
        lp_interval = point.lp_interval()
        records.append({
            'cnr_db': point.cnr_db,
            'hp_ber': point.hp_ber,
            'hp_ber_low': hp_low,
            'hp_ber_high': hp_high,
            'lp_ber': point.lp_ber,
            'lp_ber_low': None if lp_interval is None else lp_interval[0],
            'lp_ber_high': None if lp_interval is None else lp_interval[1],
            'hp_errors': point.hp_errors,
            'lp_errors': point.lp_errors,
            'genie_hp_errors': point.genie_hp_errors,
            'genie_lp_errors': point.genie_lp_errors,
            'hp_bits': point.hp_bits,
            'lp_bits': point.lp_bits,
            'frames': point.frames,
            'detection_rate': point.detection_rate,
            'mse_global': point.mse_global,
            'mse_local': point.mse_local,
        })
    return records


def read_results_csv(path) -> List[Dict[str, Any]]:
    """Parse a results CSV back into typed records (None for blank cells)."""
    path = Path(path)
    if not path.exists():
        raise ReferenceDataError("file not found", path=str(path))
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
            raise ReferenceDataError(f"unexpected header {reader.fieldnames}", path=str(path), row=1)
        records = []
        for row_no, row in enumerate(reader, start=2):
            record = {}
            for column in RESULTS_HEADER:
                raw = row[column]
                if raw == '':
                    record[column] = None
                    continue
                try:
                    record[column] = int(raw) if column in _INT_COLUMNS else float(raw)
                except ValueError:
                    raise ReferenceDataError(f"invalid value '{raw}'", path=str(path), row=row_no, column=column)
            records.append(record)
    return records


class ReportGenerator:
    """Generates simulation outputs in several formats."""

    def __init__(self, template_dir: str = None):
        if template_dir is None:
            template_dir = Path(__file__).parent / "templates"

        self.template_dir = Path(template_dir)
        self.env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            trim_blocks=True,
            lstrip_blocks=True
        )

        self.env.filters['sci'] = self._format_sci
        self.env.filters['db'] = self._format_db

    def generate_results_csv(self, result: ExperimentResult, output_path: str) -> bool:
        """Write one row per sweep point with the RESULTS_HEADER columns."""
        try:
            write_records_csv(result_records(result), RESULTS_HEADER, output_path)
            logger.info("Wrote %d result rows to %s", len(result), output_path)
            return True
        except OSError as e:
            logger.error("Error writing results CSV: %s", e)
            return False

    def generate_estimation_csv(self, stats: Sequence[EstimationStats], output_path: str) -> bool:
        records = [{
            'sat_power_db': s.sat_power_db,
            'cnr_db': s.cnr_db,
            'count': s.count,
            'mse_global': s.mse_global,
            'mse_global_low': s.mse_global_interval[0],
            'mse_global_high': s.mse_global_interval[1],
            'mse_local': s.mse_local,
            'mse_local_low': s.mse_local_interval[0],
            'mse_local_high': s.mse_local_interval[1],
        } for s in stats]
        try:
            write_records_csv(records, ESTIMATION_HEADER, output_path)
            return True
        except OSError as e:
            logger.error("Error writing estimation CSV: %s", e)
            return False

    def generate_detection_csv(self, points: Sequence[DetectionPoint], output_path: str) -> bool:
        records = [{
            'cnr_db': p.cnr_db,
            'trials': p.trials,
            'detection_rate': p.detection_rate,
            'false_alarm_rate': p.false_alarm_rate,
        } for p in points]
        try:
            write_records_csv(records, DETECTION_HEADER, output_path)
            return True
        except OSError as e:
            logger.error("Error writing detection CSV: %s", e)
            return False

    def generate_metadata(self, sc: Scenario, output_path: str, experiment: str = 'ber') -> bool:
        """JSON sidecar with seed, versions and scenario hash."""
        metadata = {
            'experiment': experiment,
            'seed': sc.seed,
            'scenario_hash': scenario_hash(sc),
            'scenario': ConfigParser.to_dict(sc),
            'versions': {
                'hier_sfn': __version__,
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'python': platform.python_version(),
            },
            'generation_time': datetime.now(timezone.utc).isoformat(),
        }
        try:
            with open(output_path, 'w', encoding='utf-8') as f:
                json.dump(metadata, f, indent=2, sort_keys=True)
            return True
        except OSError as e:
            logger.error("Error writing metadata: %s", e)
            return False

    def generate_markdown_report(self, result: ExperimentResult, output_path: str,
                                 detection: Optional[Sequence[DetectionPoint]] = None) -> bool:
        """Markdown summary of an experiment."""
        try:
            template = self.env.get_template('simulation-report.md.j2')
            sc = result.scenario
            content = template.render(
                scenario=ConfigParser.to_dict(sc),
                scenario_hash=scenario_hash(sc),
                rows=result_records(result),
                carries_local=sc.carries_local,
                detection=detection or [],
                summary=self._generate_summary(result),
                version=__version__,
            )
            with open(output_path, 'w', encoding='utf-8') as f:
                f.write(content)
            return True
        except Exception as e:
            logger.error("Error generating markdown report: %s", e)
            return False

    def _generate_summary(self, result: ExperimentResult) -> Dict[str, Any]:
        points = result.points
        return {
            'points': len(points),
            'total_frames': sum(p.frames for p in points),
            'total_symbols': sum(p.symbols for p in points),
            'hp_bits': sum(p.hp_bits for p in points),
            'lp_bits': sum(p.lp_bits or 0 for p in points),
            'min_detection_rate': min((p.detection_rate for p in points), default=math.nan),
        }

    @staticmethod
    def _format_sci(value) -> str:
        if value is None:
            return 'n/a'
        value = float(value)
        if math.isnan(value):
            return 'n/a'
        return f"{value:.3e}"

    @staticmethod
    def _format_db(value) -> str:
        if value is None:
            return 'n/a'
        value = float(value)
        if math.isinf(value):
            return '+inf' if value > 0 else '-inf'
        return f"{value:.2f}"
