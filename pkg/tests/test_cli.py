import json

import numpy as np
import pytest

from mlmoments import DataError
from mlmoments.cli import (EXIT_CHECKS, EXIT_DATA, EXIT_OK, EXIT_UNCONVERGED,
                           EXIT_USAGE, RunConfig, UsageError, main)
from mlmoments.dataio import load_solution, parse_csv
from mlmoments.result import Estimator, MultiIndex, SourceKind

RNG = np.random.default_rng(seed=31415)


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture
def small_csv(tmp_path):
    "Two-row CSV file with a header"
    path = tmp_path / 'small.csv'
    path.write_text("x,y\n0,5\n1,7\n", encoding='utf-8')
    return str(path)


@pytest.fixture
def cloud_csv(tmp_path):
    "Eight Gaussian points in the plane"
    path = tmp_path / 'cloud.csv'
    rows = RNG.standard_normal((8, 2))
    path.write_text(''.join(f"{a!r},{b!r}\n" for a, b in rows), encoding='utf-8')
    return str(path)


def test_parse_csv():
    assert parse_csv(["1,2", "3,4"]).tolist() == [[1.0, 2.0], [3.0, 4.0]]
    # header and blank lines
    assert parse_csv(["a, b", "", "1, 2", "  ", "3,4"]).tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert parse_csv(["5"]).shape == (1, 1)
    # ragged row
    with pytest.raises(DataError) as err:
        _ = parse_csv(["1,2", "3"])
    assert err.value.line == 2
    # non-numeric field after the first row
    with pytest.raises(DataError) as err:
        _ = parse_csv(["1,2", "3,4", "5,x"])
    assert err.value.line == 3
    assert str(err.value).startswith("line 3:")
    # non-finite value
    with pytest.raises(DataError):
        _ = parse_csv(["1,nan"])
    # no data
    with pytest.raises(DataError):
        _ = parse_csv(["a,b"])
    # row longer than the header
    with pytest.raises(DataError) as err:
        _ = parse_csv(["a,b", "", "1,2", "3,4,5"])
    assert err.value.line == 4
    # empty field
    with pytest.raises(DataError) as err:
        _ = parse_csv(["1,2", ",4"])
    assert err.value.line == 2
    # quoted fields and scientific notation
    assert np.allclose(parse_csv(['"x","y"', '"1e-3",2']), [[1e-3, 2.0]])


def test_run_config():
    config = RunConfig('estimate', input='x.csv', estimator=Estimator.MONOTONE_HERMITE,
                       alphas=(MultiIndex((2, 1)),), seed=1)
    assert config.source is SourceKind.GAUSSIAN
    assert config.stochastic
    assert not RunConfig('estimate', input='x.csv', estimator=Estimator.ROSENBLATT,
                         alphas=(MultiIndex((2, 1)),)).stochastic
    # missing input
    with pytest.raises(UsageError):
        _ = RunConfig('transport', seed=1)
    # missing seed
    with pytest.raises(UsageError):
        _ = RunConfig('transport', input='x.csv')
    # source contradicting the estimator
    with pytest.raises(UsageError):
        _ = RunConfig('estimate', input='x.csv', estimator=Estimator.MONOTONE_UNIFORM,
                      alphas=(MultiIndex((2, 1)),), source=SourceKind.GAUSSIAN, seed=1)
    # trimmed estimator without trim
    with pytest.raises(UsageError):
        _ = RunConfig('estimate', input='x.csv', estimator=Estimator.TRIMMED_MONOTONE,
                      alphas=(MultiIndex((2, 1)),), seed=1)


def test_estimate_rosenblatt(small_csv, capsys):
    code = main(['estimate', '--input', small_csv, '--alpha', '2,1',
                 '--estimator', 'rosenblatt'])
    assert code == EXIT_OK
    out = records(capsys.readouterr().out)
    assert len(out) == 1
    assert out[0]['op'] == 'estimate'
    assert out[0]['alpha'] == [2, 1]
    assert out[0]['estimator'] == 'rosenblatt'
    assert out[0]['status'] == 'ok'
    assert np.allclose(out[0]['value'], [0.25, 0.5])
    # unbiased variant and two indices
    code = main(['estimate', '--input', small_csv, '--alpha', '1,1', '--alpha', '2,1',
                 '--estimator', 'rosenblatt-unbiased'])
    assert code == EXIT_OK
    out = records(capsys.readouterr().out)
    assert np.allclose(out[0]['value'], [0.5, 6.0])
    assert np.allclose(out[1]['value'], [0.5, 1.0])


def test_estimate_table_format(small_csv, capsys):
    code = main(['estimate', '--input', small_csv, '--alpha', '2,1',
                 '--estimator', 'rosenblatt', '--format', 'table'])
    assert code == EXIT_OK
    assert capsys.readouterr().out == "estimate\t2,1\trosenblatt\t0.25 0.5\tok\n"


def test_usage_errors(small_csv, capsys):
    # monotone estimator without seed
    assert main(['estimate', '--input', small_csv, '--alpha', '1,2',
                 '--estimator', 'monotone-uniform']) == EXIT_USAGE
    # unknown estimator
    assert main(['estimate', '--input', small_csv, '--alpha', '2,1',
                 '--estimator', 'median']) == EXIT_USAGE
    # malformed multi-index
    assert main(['estimate', '--input', small_csv, '--alpha', '2;1',
                 '--estimator', 'rosenblatt']) == EXIT_USAGE
    # invalid solver setting
    assert main(['transport', '--input', small_csv, '--seed', '1', '--eta', '-1']) == EXIT_USAGE
    # no command
    assert main([]) == EXIT_USAGE
    assert 'error' in capsys.readouterr().err


def test_data_errors(tmp_path, capsys):
    path = tmp_path / 'bad.csv'
    path.write_text("1,2\n3,abc\n", encoding='utf-8')
    assert main(['estimate', '--input', str(path), '--alpha', '2,1',
                 '--estimator', 'rosenblatt']) == EXIT_DATA
    assert 'line 2' in capsys.readouterr().err
    # missing file
    assert main(['estimate', '--input', str(tmp_path / 'missing.csv'), '--alpha', '2,1',
                 '--estimator', 'rosenblatt']) == EXIT_DATA
    # multi-index of the wrong dimension
    path.write_text("1,2\n3,4\n", encoding='utf-8')
    assert main(['estimate', '--input', str(path), '--alpha', '2,1,1',
                 '--estimator', 'rosenblatt']) == EXIT_DATA


def test_unconverged_transport(cloud_csv, capsys):
    code = main(['estimate', '--input', cloud_csv, '--alpha', '2,1',
                 '--estimator', 'monotone-uniform', '--seed', '1',
                 '--eta', '1e-9', '--max-iter', '1', '--mc', '2000'])
    assert code == EXIT_UNCONVERGED
    out = records(capsys.readouterr().out)
    assert out[0]['op'] == 'warning'
    assert out[0]['status'] == 'unconverged'
    assert out[1]['op'] == 'estimate'
    assert out[1]['status'] == 'unconverged'
    assert len(out[1]['value']) == 2


def test_transport_then_estimate(tmp_path, capsys):
    data = tmp_path / 'pair.csv'
    data.write_text("0,0\n1,1\n", encoding='utf-8')
    solution = tmp_path / 'solution.jsonl'
    code = main(['transport', '--input', str(data), '--source', 'gaussian',
                 '--seed', '3', '--mc', '20000', '--out', str(solution)])
    assert code == EXIT_OK
    saved = records(solution.read_text(encoding='utf-8'))
    assert saved[0]['op'] == 'transport'
    assert saved[0]['source'] == 'gaussian'
    assert all(r['op'] == 'trace' for r in saved[1:])
    assert load_solution(solution).success

    code = main(['estimate', '--solution', str(solution), '--alpha', '2,1',
                 '--estimator', 'monotone-hermite', '--seed', '5'])
    assert code == EXIT_OK
    out = records(capsys.readouterr().out)
    assert out[0]['estimator'] == 'monotone-hermite'
    assert out[0]['seed'] == 5
    assert np.all(np.isfinite(out[0]['value']))
    # a Gaussian-source transport cannot serve the uniform estimator
    code = main(['estimate', '--solution', str(solution), '--alpha', '2,1',
                 '--estimator', 'monotone-uniform', '--seed', '5'])
    assert code == EXIT_DATA


def test_saved_transport_reproduces_direct_estimate(cloud_csv, tmp_path, capsys):
    solution = tmp_path / 'cloud.jsonl'
    common = ['--seed', '7', '--mc', '20000']
    code = main(['transport', '--input', cloud_csv, '--source', 'uniform',
                 '--out', str(solution)] + common)
    alphas = ['--alpha', '2,1', '--alpha', '1,2', '--estimator', 'monotone-uniform']
    first = main(['estimate', '--solution', str(solution)] + alphas + common)
    reloaded = [r for r in records(capsys.readouterr().out) if r['op'] == 'estimate']
    second = main(['estimate', '--input', cloud_csv] + alphas + common)
    direct = [r for r in records(capsys.readouterr().out) if r['op'] == 'estimate']
    assert code == first == second
    assert len(reloaded) == len(direct) == 2
    for a, b in zip(reloaded, direct):
        assert a['alpha'] == b['alpha']
        assert a['value'] == b['value']


def test_corrupted_solution(tmp_path, capsys):
    data = tmp_path / 'pair.csv'
    data.write_text("0,0\n1,1\n", encoding='utf-8')
    solution = tmp_path / 'solution.jsonl'
    code = main(['transport', '--input', str(data), '--source', 'uniform', '--seed', '1',
                 '--out', str(solution)])
    assert code in (EXIT_OK, EXIT_UNCONVERGED)
    saved = records(solution.read_text(encoding='utf-8'))
    saved[0]['h_star'] = saved[0]['h_star'][:1]
    solution.write_text(''.join(json.dumps(r) + '\n' for r in saved), encoding='utf-8')
    with pytest.raises(DataError):
        _ = load_solution(solution)
    code = main(['estimate', '--solution', str(solution), '--alpha', '2,1',
                 '--estimator', 'monotone-uniform', '--seed', '1'])
    assert code == EXIT_DATA
    assert 'disagree' in capsys.readouterr().err


def test_estimate_is_deterministic(cloud_csv, capsys):
    argv = ['estimate', '--input', cloud_csv, '--alpha', '2,1', '--alpha', '1,2',
            '--estimator', 'monotone-uniform', '--seed', '7', '--mc', '20000']
    first = main(argv)
    out1 = capsys.readouterr().out
    second = main(argv)
    out2 = capsys.readouterr().out
    assert first == second
    assert out1 == out2


def test_oracle(capsys):
    assert main(['oracle', 'copula', 'max', '1', '2']) == EXIT_OK
    assert capsys.readouterr().out == "0.0833333 0.0833333\n"
    assert main(['oracle', 'copula', 'independent', '2', '1']) == EXIT_OK
    assert capsys.readouterr().out == "0.166667 0\n"
    assert main(['oracle', 'two-point', '--x1', '1,1', '--x2=-1,-1']) == EXIT_OK
    assert capsys.readouterr().out == "0.333333 0.333333\n"
    assert main(['oracle', 'two-point', '--x1', '2,0', '--x2', '0,0',
                 '--source', 'uniform']) == EXIT_OK
    assert capsys.readouterr().out == "0.5 0\n"
    assert main(['oracle', 'gaussian', '--alpha', '2,1']) == EXIT_OK
    assert capsys.readouterr().out == "0.56419 0\n"
    assert main(['oracle', 'gaussian-lambda2', '--A', '2,0;0,1']) == EXIT_OK
    assert capsys.readouterr().out == "1.12838 0\n0 0.56419\n"
    # invalid copula index
    assert main(['oracle', 'copula', 'max', '0', '2']) == EXIT_DATA


def test_table1_budget(capsys):
    assert main(['table1', '--n', '1000', '--replicates', '100']) == EXIT_USAGE
    assert 'budget' in capsys.readouterr().err


def test_table1_failed_checks(monkeypatch, capsys):
    from mlmoments import cli
    from mlmoments.experiment import ExperimentSummary, ParameterSummary

    def fake_experiment(nu, n_values, replicates, seed, **kwargs):
        rows = tuple(ParameterSummary(name, n, 1.0, 1.0, 0.5, replicates)
                     for name in ('Lambda2_11', 'Lambda2_12', 'LambdaH2_11',
                                  'LambdaH2_12', 'Sigma_11', 'Sigma_12')
                     for n in n_values)
        return ExperimentSummary(nu=nu, replicates=replicates, n_values=tuple(n_values),
                                 rows=rows)

    monkeypatch.setattr(cli, 'table1_experiment', fake_experiment)
    assert main(['table1', '--n', '30', '--replicates', '5']) == EXIT_CHECKS
    out = capsys.readouterr().out
    assert "FAIL\tLambda2_11 mean below 0.38 at n=30" in out
    # equal CVs fail the ordering check
    assert main(['table1', '--n', '10', '--replicates', '5']) == EXIT_CHECKS
