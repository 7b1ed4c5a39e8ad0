"""
Suite reports

Aggregates attack outcomes into success rate and query statistics (computed
over successful attacks only, lower median for even counts), plus the
success-rate-versus-queries curve. Written as JSON, CSV and a markdown summary;
no timestamps are included so reruns produce identical files.
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from jinja2 import Environment, PackageLoader, StrictUndefined

from .attack import AttackOutcome
from .verify import CheckResult

logger = logging.getLogger('prgf.reporting')

INSTANCE_HEADER = ['id', 'success', 'queries', 'iterations', 'final_norm']
CURVE_HEADER = ['queries', 'success_rate']


@dataclass(frozen=True)
class InstanceRow:
    id: int
    success: bool
    queries: int
    iterations: int
    final_norm: float
    aborted: bool = False


@dataclass
class SuiteReport:
    asr: Optional[float]
    avg_queries: Optional[float]
    med_queries: Optional[float]
    instances: List[InstanceRow] = field(default_factory=list)
    success_curve: List[Tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'asr': self.asr,
            'avg_q': self.avg_queries,
            'med_q': self.med_queries,
            'instances': [asdict(row) for row in self.instances],
        }


def lower_median(values: Sequence[int]) -> float:
    ordered = sorted(values)
    return float(ordered[(len(ordered) - 1) // 2])


def build_report(outcomes: Sequence[AttackOutcome]) -> SuiteReport:
    rows = [
        InstanceRow(index, o.success, o.queries, o.iterations, o.final_perturbation_norm, o.aborted)
        for index, o in enumerate(outcomes)
    ]
    if not rows:
        return SuiteReport(None, None, None)
    successful = sorted(row.queries for row in rows if row.success)
    total = len(rows)
    curve = []
    for position, queries in enumerate(successful):
        if position + 1 < len(successful) and successful[position + 1] == queries:
            continue
        curve.append((queries, (position + 1) / total))
    return SuiteReport(
        asr=len(successful) / total,
        avg_queries=sum(successful) / len(successful) if successful else None,
        med_queries=lower_median(successful) if successful else None,
        instances=rows,
        success_curve=curve,
    )


def _render_markdown(report: SuiteReport, context: Dict) -> str:
    env = Environment(loader=PackageLoader('prgf_attack', 'templates'), undefined=StrictUndefined,
                      trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True)
    return env.get_template('report.md').render(report=report, context=context)


def write_report(report: SuiteReport, out_dir: Union[str, Path], context: Optional[Dict] = None) -> Path:
    """
    Write report.json, instances.csv, curve.csv and report.md into out_dir

    Returns:
        Path of report.json
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / 'report.json'
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + '\n')

    with open(out_dir / 'instances.csv', 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(INSTANCE_HEADER)
        for row in report.instances:
            writer.writerow([row.id, int(row.success), row.queries, row.iterations, f"{row.final_norm:.12g}"])

    with open(out_dir / 'curve.csv', 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CURVE_HEADER)
        for queries, rate in report.success_curve:
            writer.writerow([queries, f"{rate:.12g}"])

    (out_dir / 'report.md').write_text(_render_markdown(report, context or {}))
    logger.info(f"✓ Report written to {out_dir}")
    return report_path


def write_verify_results(results: Sequence[CheckResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [{'name': r.name, 'passed': r.passed, 'detail': r.detail} for r in results]
    path.write_text(json.dumps(payload, indent=2) + '\n')
    return path
