import csv
import json

import numpy as np
import pytest

from prgf_attack.cli import EXIT_ERROR, EXIT_OK, EXIT_VERIFY_FAILED, build_parser, build_suite, main
from prgf_attack.config import load_config
from prgf_attack.datasets import load_dataset_models
from prgf_attack.estimators import Variant
from prgf_attack.exceptions import ConfigError
from prgf_attack.oracles import ModelOracle
from prgf_attack.oracles.remote import RemoteOracle
from prgf_attack.oracles.server import start_background_server


@pytest.fixture
def dataset_file(tmp_path):
    path = tmp_path / 'data' / 'blobs.json'
    assert main(['gen-data', '--n', '6', '--dim', '20', '--classes', '3', '--seed', '1', '--out', str(path)]) == EXIT_OK
    return path


def test_gen_data_writes_dataset_and_models(dataset_file):
    assert dataset_file.exists()
    assert dataset_file.with_name('blobs.json.target.bin').exists()
    assert dataset_file.with_name('blobs.json.surrogate.bin').exists()
    assert len(json.loads(dataset_file.read_text())['labels']) == 6


def test_attack_end_to_end(dataset_file, tmp_path):
    args = ['attack', '--dataset', str(dataset_file), '--max-queries', '200', '--seed', '0']
    assert main(args + ['--out', str(tmp_path / 'first')]) == EXIT_OK
    assert main(args + ['--out', str(tmp_path / 'second')]) == EXIT_OK

    payload = json.loads((tmp_path / 'first' / 'report.json').read_text())
    assert set(payload) == {'asr', 'avg_q', 'med_q', 'instances'}
    assert len(payload['instances']) == 6
    assert all(row['queries'] <= 200 for row in payload['instances'])
    for name in ('report.json', 'instances.csv', 'curve.csv', 'report.md'):
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes()


def test_attack_from_config_file(dataset_file, tmp_path):
    config = tmp_path / 'experiment.yml'
    config.write_text(
        f"dataset: {dataset_file}\n"
        "variant: prgf-bs\n"
        "prior: avg\n"
        "instances: 2\n"
        "max_queries: 150\n"
        f"out: {tmp_path / 'bs'}\n"
    )
    assert main(['attack', '--config', str(config), '--dd', '--dd-dim', '5']) == EXIT_OK
    payload = json.loads((tmp_path / 'bs' / 'report.json').read_text())
    assert len(payload['instances']) == 2
    markdown = (tmp_path / 'bs' / 'report.md').read_text()
    assert '| variant | prgf-bs |' in markdown
    assert '| dd_dim | 5 |' in markdown


def test_build_suite(dataset_file):
    config = load_config(overrides={'dataset': str(dataset_file), 'variant': 'rgf', 'dd': True})
    backend, prior_source, dataset, attack_cfg, est_cfg = build_suite(config)
    assert prior_source is None
    assert backend.dim == dataset.dim == 20
    assert est_cfg.variant is Variant.RGF
    assert est_cfg.q == 10
    assert est_cfg.dd_basis.d == 5
    assert attack_cfg.max_queries == 10000


def test_build_suite_uses_dataset_models(dataset_file):
    config = load_config(overrides={'dataset': str(dataset_file), 'variant': 'prgf-ga'})
    backend, prior_source, dataset, _, _ = build_suite(config)
    target, surrogate = load_dataset_models(dataset_file)
    points = dataset.points[:3]
    assert isinstance(backend, ModelOracle)
    np.testing.assert_allclose(backend.model.logits(points), target.logits(points))
    assert len(prior_source.surrogates) == 1
    np.testing.assert_allclose(prior_source.surrogates[0].model.logits(points), surrogate.logits(points))
    assert prior_source.surrogates[0].loss_kind is backend.loss_kind


def test_build_suite_with_remote_oracle(dataset_file):
    target, _ = load_dataset_models(dataset_file)
    httpd, thread = start_background_server(ModelOracle(target), budget=100)
    try:
        config = load_config(overrides={'dataset': str(dataset_file), 'variant': 'rgf',
                                        'oracle_url': f"http://127.0.0.1:{httpd.server_address[1]}"})
        backend, prior_source, dataset, _, _ = build_suite(config)
        assert isinstance(backend, RemoteOracle)
        assert prior_source is None
        assert backend.dim == dataset.dim == 20
        backend.close()
    finally:
        httpd.shutdown()
        httpd.server_close()
        thread.join(timeout=5)


def test_build_suite_requires_dataset():
    with pytest.raises(ConfigError):
        build_suite(load_config())


def test_attack_without_dataset_exits_with_error(capsys):
    assert main(['attack']) == EXIT_ERROR
    assert 'error:' in capsys.readouterr().err


def test_verify_rejects_few_trials(capsys):
    assert main(['verify', '--trials', '10']) == EXIT_ERROR
    assert 'trials' in capsys.readouterr().err


@pytest.mark.slow
def test_verify_with_corrupted_lambda_fails(tmp_path):
    code = main(['verify', '--trials', '1000', '--configs', '1', '--corrupt-lambda', '--out', str(tmp_path)])
    assert code == EXIT_VERIFY_FAILED
    results = {r['name']: r['passed'] for r in json.loads((tmp_path / 'verify.json').read_text())}
    assert results['anchors'] is False


def test_curves(tmp_path):
    out = tmp_path / 'curves.csv'
    assert main(['curves', '--dim', '100', '--q', '10', '--grid', '11', '--out', str(out)]) == EXIT_OK
    with open(out, newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['alpha', 'loss_rgf', 'loss_transfer', 'loss_bs', 'loss_ga']
    assert len(rows) == 12
    assert rows[-1][0] == '1'


def test_curves_rejects_small_grid(tmp_path):
    assert main(['curves', '--grid', '1', '--out', str(tmp_path / 'c.csv')]) == EXIT_ERROR


def test_parser_rejects_unknown_variant():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['attack', '--variant', 'nes'])


def test_dd_flag_defaults_to_config():
    args = build_parser().parse_args(['attack'])
    assert args.dd is None
    assert args.surrogates is None
