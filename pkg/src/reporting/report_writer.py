"""
Analysis Reporter
Collects the tables of one analysis step and writes them as a JSON document
plus one CSV per table. Output is deterministic: sorted keys, no timestamps,
NaN reported as null.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.utils.exceptions import ConsistencyError
from src.utils.io_utils import atomic_write_text, to_json_text


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def table_records(table: pd.DataFrame) -> List[Dict[str, Any]]:
    return [_json_safe(record) for record in table.to_dict(orient="records")]


class AnalysisReporter:
    """Writes report documents for the analysis pipeline"""

    def __init__(self, output_dir: str = "output/analysis"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger = logging.getLogger('AnalysisReporter')

        self.reports: List[Dict[str, Any]] = []
        self.current_report: Optional[Dict[str, Any]] = None

    def start_report(self, name: str, metadata: Optional[Dict[str, Any]] = None):
        """Start a new report; metadata is embedded verbatim"""
        self.current_report = {
            'name': name,
            'metadata': _json_safe(metadata or {}),
            'tables': {},
            'summary': {},
        }
        self.logger.info(f"Started report: {name}")

    def _require_report(self) -> Dict[str, Any]:
        if self.current_report is None:
            raise ConsistencyError("No report in progress; call start_report first")
        return self.current_report

    def add_table(self, name: str, table: pd.DataFrame):
        report = self._require_report()
        report['tables'][name] = table.reset_index(drop=True)

    def add_summary(self, key: str, value: Any):
        self._require_report()['summary'][key] = _json_safe(value)

    def finalize_report(self) -> Dict[str, Path]:
        """Write <name>.json and <name>_<table>.csv files; returns the paths"""
        report = self._require_report()
        paths = self.save_report(report)
        self.reports.append(report)
        self.logger.info(f"Finalized report: {report['name']} ({len(paths)} files)")
        self.current_report = None
        return paths

    def save_report(self, report: Dict[str, Any]) -> Dict[str, Path]:
        name = report['name'].replace(' ', '_').lower()
        paths: Dict[str, Path] = {}

        document = {
            'name': report['name'],
            'metadata': report['metadata'],
            'summary': report['summary'],
            'tables': {table_name: table_records(table) for table_name, table in report['tables'].items()},
        }
        paths['json'] = atomic_write_text(self.output_dir / f"{name}.json", to_json_text(document))

        for table_name, table in report['tables'].items():
            csv_path = self.output_dir / f"{name}_{table_name}.csv"
            paths[table_name] = atomic_write_text(csv_path, table.to_csv(index=False, lineterminator="\n"))
        self.logger.info(f"Report saved to: {paths['json']}")
        return paths

    def generate_summary(self) -> Dict[str, Any]:
        """Summary across the reports finalized so far"""
        return {
            'total_reports': len(self.reports),
            'reports': [
                {'name': r['name'], 'tables': sorted(r['tables']), 'summary': r['summary']}
                for r in self.reports
            ],
        }
