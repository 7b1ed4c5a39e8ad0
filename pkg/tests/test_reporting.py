import csv
import json

import pytest

from prgf_attack.attack import AttackOutcome
from prgf_attack.reporting import (
    CURVE_HEADER,
    INSTANCE_HEADER,
    build_report,
    lower_median,
    write_report,
    write_verify_results,
)
from prgf_attack.verify import CheckResult


@pytest.fixture
def outcomes():
    return [
        AttackOutcome(success=True, queries=100, iterations=9, final_perturbation_norm=1.5),
        AttackOutcome(success=False, queries=10000, iterations=900, final_perturbation_norm=4.0),
        AttackOutcome(success=True, queries=300, iterations=27, final_perturbation_norm=2.25),
    ]


def test_lower_median():
    assert lower_median([5]) == 5.0
    assert lower_median([4, 1, 3, 2]) == 2.0
    assert lower_median([3, 1, 2]) == 2.0


def test_statistics_over_successes(outcomes):
    report = build_report(outcomes)
    assert report.asr == pytest.approx(2 / 3)
    assert report.avg_queries == 200.0
    assert report.med_queries == 100.0
    assert [row.id for row in report.instances] == [0, 1, 2]
    assert report.success_curve == [(100, pytest.approx(1 / 3)), (300, pytest.approx(2 / 3))]


def test_repeated_query_counts_share_a_curve_point():
    same = [AttackOutcome(True, 50, 4, 1.0), AttackOutcome(True, 50, 4, 1.0), AttackOutcome(False, 80, 7, 1.0)]
    assert build_report(same).success_curve == [(50, pytest.approx(2 / 3))]


def test_no_successes():
    report = build_report([AttackOutcome(False, 10, 1, 0.5)])
    assert report.asr == 0.0
    assert report.avg_queries is None
    assert report.med_queries is None
    assert report.success_curve == []


def test_empty_suite_is_null(tmp_path):
    report = build_report([])
    assert report.to_dict() == {'asr': None, 'avg_q': None, 'med_q': None, 'instances': []}
    path = write_report(report, tmp_path)
    assert json.loads(path.read_text())['asr'] is None
    assert 'n/a' in (tmp_path / 'report.md').read_text()


def test_written_files(outcomes, tmp_path):
    path = write_report(build_report(outcomes), tmp_path / 'out', context={'variant': 'prgf-ga'})
    assert path == tmp_path / 'out' / 'report.json'

    payload = json.loads(path.read_text())
    assert payload['avg_q'] == 200.0
    assert payload['med_q'] == 100.0
    assert len(payload['instances']) == 3
    assert payload['instances'][1]['success'] is False

    with open(tmp_path / 'out' / 'instances.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == INSTANCE_HEADER
    assert rows[1] == ['0', '1', '100', '9', '1.5']
    assert rows[2][1] == '0'

    with open(tmp_path / 'out' / 'curve.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == CURVE_HEADER
    assert [r[0] for r in rows[1:]] == ['100', '300']

    markdown = (tmp_path / 'out' / 'report.md').read_text()
    assert markdown.startswith('# Attack report')
    assert '| variant | prgf-ga |' in markdown
    assert '| 3 | 0.6667 | 200.0 | 100 |' in markdown
    assert '| 1 | no | 10000 | 900 | 4 |' in markdown


def test_output_is_deterministic(outcomes, tmp_path):
    write_report(build_report(outcomes), tmp_path / 'a', context={'seed': 0})
    write_report(build_report(outcomes), tmp_path / 'b', context={'seed': 0})
    for name in ('report.json', 'instances.csv', 'curve.csv', 'report.md'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_aborted_instances_are_marked(tmp_path):
    report = build_report([AttackOutcome(False, 1, 0, 0.0, aborted=True)])
    write_report(report, tmp_path)
    assert '| 0 | aborted | 1 | 0 | 0 |' in (tmp_path / 'report.md').read_text()


def test_verify_results(tmp_path):
    path = write_verify_results([CheckResult('anchors', True, 'ok'), CheckResult('dominance', False)],
                                tmp_path / 'verify.json')
    assert json.loads(path.read_text()) == [
        {'name': 'anchors', 'passed': True, 'detail': 'ok'},
        {'name': 'dominance', 'passed': False, 'detail': ''},
    ]
