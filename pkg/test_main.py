import json
import os
from dataclasses import replace

import pandas as pd
import pytest

from conftest import EXAMPLE_PROBLEM
from errors import EXIT_INPUT_ERROR, EXIT_NO_CERTIFICATE, EXIT_OK
from main import RunSettings, main, run_pipeline
from problem_io import ProblemOptions, parse_problem
from reporting import Report, export_report, render_report

GROWING = {
    'dimension': 2,
    'matrices': [{'rows': [[2.0, 0.0], [0.0, 2.0]]}, {'rows': [[2.0, 0.0], [0.0, 2.0]]}],
    'edges': [[1, 2], [2, 1]],
    'delta': 1,
    'Delta': 2,
}


def test_full_pipeline_on_bundled_problem(example_problem, tmp_path):
    report, code = run_pipeline(example_problem, 'full', RunSettings(emit_csv=str(tmp_path)))
    assert code == EXIT_OK
    cert = report.certificate
    assert cert['kind'] == 'theorem1'
    assert cert['combination']['rho'] == pytest.approx(0.420088, rel=1e-5)
    assert report.M == pytest.approx(1.411782, rel=1e-5)
    assert cert['lhs'] == pytest.approx(0.850712, rel=1e-5)
    assert report.admissibility['admissible']
    assert report.verification['satisfied']

    for name in ('signal.csv', 'blocks.csv', 'prefix_norms.csv', 'trajectory_0.csv', 'trajectory_99.csv'):
        assert os.path.exists(tmp_path / name)
    blocks = pd.read_csv(tmp_path / 'blocks.csv')
    assert list(blocks['index'][:8]) == [3, 2, 1, 2, 3, 4, 1, 2]


def test_analyze_without_certificate():
    report, code = run_pipeline(parse_problem(json.dumps(GROWING)), 'analyze')
    assert code == EXIT_NO_CERTIFICATE
    assert report.exit_code == EXIT_NO_CERTIFICATE
    assert report.certificate is None
    assert report.combinations == []


def test_simulate_requires_signal(example_problem):
    report, code = run_pipeline(example_problem, 'simulate')
    assert code == EXIT_INPUT_ERROR
    assert "--signal" in report.message


def test_simulate_from_emitted_blocks(example_problem, tmp_path):
    _, code = run_pipeline(example_problem, 'synthesize', RunSettings(emit_csv=str(tmp_path)))
    assert code == EXIT_OK
    settings = RunSettings(signal_path=str(tmp_path / 'blocks.csv'), trials=5)
    report, code = run_pipeline(example_problem, 'simulate', settings)
    assert code == EXIT_OK
    assert report.admissibility['admissible']
    assert report.verification['satisfied']


def test_invalid_instance_reports_violations():
    doc = dict(GROWING, delta=2, Delta=2)
    report, code = run_pipeline(parse_problem(json.dumps(doc)), 'analyze')
    assert code == EXIT_INPUT_ERROR
    assert report.instance['violations']


def test_unknown_subcommand(example_problem):
    _, code = run_pipeline(example_problem, 'optimize')
    assert code == EXIT_INPUT_ERROR


def test_reports_are_byte_stable(example_problem):
    first, _ = run_pipeline(example_problem, 'full', RunSettings(trials=10))
    second, _ = run_pipeline(example_problem, 'full', RunSettings(trials=10))
    assert render_report(first) == render_report(second)


def test_cli_writes_report(tmp_path):
    out = tmp_path / 'report.json'
    assert main(['analyze', EXAMPLE_PROBLEM, '--report', str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report['stage'] == 'analyze'
    assert report['certificate']['kind'] == 'theorem1'


def test_cli_bad_problem_file(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"dimension": ')
    assert main(['analyze', str(bad)]) == EXIT_INPUT_ERROR
    assert main(['analyze', str(tmp_path / 'missing.json')]) == EXIT_INPUT_ERROR


def test_full_pipeline_without_pins(example_problem):
    problem = replace(example_problem, options=ProblemOptions(horizon=500, trials=100, seed=2019))
    report, code = run_pipeline(problem, 'full')
    assert code == EXIT_OK
    cert = report.certificate
    assert cert['kind'] == 'corollary1'
    assert cert['lambda'] < cert['lambda_max']
    assert cert['lambda_signal'] == cert['lambda']
    assert cert['lhs'] <= 1.0
    assert report.verification['satisfied'], report.verification['reasons']


def test_full_reports_failed_verification(example_problem):
    options = ProblemOptions(horizon=500, trials=20, seed=2019, kinds=['corollary1'],
                             combination=[1, 3, 2, 2], lambda_=0.03)
    report, code = run_pipeline(replace(example_problem, options=options), 'full')
    assert code == EXIT_OK
    assert report.certificate['lambda'] == pytest.approx(0.03)
    assert report.certificate['lambda_signal'] is None
    assert not report.verification['satisfied']
    assert report.message.startswith("verification failed")


def test_cli_usage_errors_exit_with_input_error():
    assert main(['analyse', EXAMPLE_PROBLEM]) == EXIT_INPUT_ERROR
    assert main(['analyze']) == EXIT_INPUT_ERROR
    assert main(['analyze', EXAMPLE_PROBLEM, '--horizon', 'long']) == EXIT_INPUT_ERROR


def test_export_report_writes_rendered_json(tmp_path):
    report = Report(stage='analyze', instance={'dimension': 2}, message="no certificate found within caps")
    out = tmp_path / 'report.json'
    export_report(report, str(out))
    assert out.read_text() == render_report(report)
    assert json.loads(out.read_text())['message'] == "no certificate found within caps"
