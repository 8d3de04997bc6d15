import json
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from tensors.codec import read_dtf1, write_dtf1
from tensors.exceptions import (
    DuplicateCellError,
    InvalidConfigError,
    InvalidGridError,
    MissingCellError,
    NonNumericValueError,
)

from .factories import ExperimentRunFactory
from .ingest import export_csv, ingest_csv, load_tensor, read_series_csv
from .models import ExperimentRun
from .reports import ReportWriter, plain, summary_table, write_metrics
from .runconfig import (
    load_config_file,
    merge_config,
    parse_float_list,
    parse_rank_grid,
    parse_shape,
    parse_symmetric_grid,
)

FIXTURES = Path(__file__).resolve().parent / 'fixtures'
TINY_X = str(FIXTURES / 'tiny_x.csv')
TINY_Y = str(FIXTURES / 'tiny_y.csv')


def _write(path, text):
    path.write_text(text)
    return path


def _run(name, **options):
    stdout, stderr = StringIO(), StringIO()
    call_command(name, stdout=stdout, stderr=stderr, **options)
    return stdout.getvalue()


@pytest.mark.django_db
class TestExperimentRun:
    def test_factory_defaults(self):
        run = ExperimentRunFactory(command='fit')
        assert run.status == 'running'
        assert run.output_dir == f'runs/fit-{run.seed}'
        assert run.duration_seconds is None

    def test_lifecycle(self):
        run = ExperimentRunFactory()
        run.mark_failed(3, 'duplicate cell')
        run.refresh_from_db()
        assert (run.status, run.exit_code, run.error_message) == ('failed', 3, 'duplicate cell')
        assert run.duration_seconds >= 0

        other = ExperimentRunFactory()
        other.mark_succeeded()
        assert ExperimentRun.objects.get(pk=other.pk).exit_code == 0


class TestIngest:
    def test_small_table(self, tmp_path):
        path = _write(tmp_path / 'panel.csv', 't,country,value\n1,NO,1.5\n1,SE,2\n2,NO,-3\n2,SE,4e-1\n')
        ingested = ingest_csv(path, ['t', 'country'])
        np.testing.assert_array_equal(ingested.tensor.data, [[1.5, 2.0], [-3.0, 0.4]])
        assert ingested.labels == (('1', '2'), ('NO', 'SE'))
        assert ingested.series_labels == (('NO', 'SE'),)

    def test_duplicate_cell_names_the_row(self, tmp_path):
        path = _write(tmp_path / 'dup.csv', 't,country,value\n1,NO,1\n1,SE,2\n1,NO,3\n')
        with pytest.raises(DuplicateCellError, match='line 4'):
            ingest_csv(path, ['t', 'country'])

    def test_missing_cell(self, tmp_path):
        path = _write(tmp_path / 'gap.csv', 't,country,value\n1,NO,1\n1,SE,2\n2,NO,3\n')
        with pytest.raises(MissingCellError, match='SE'):
            ingest_csv(path, ['t', 'country'])

    def test_fill_policies(self, tmp_path):
        path = _write(tmp_path / 'gap.csv', 't,country,value\n1,NO,1\n1,SE,2\n2,NO,3\n3,SE,6\n3,NO,5\n')
        zero = ingest_csv(path, ['t', 'country'], fill='zero')
        assert zero.filled == 1
        assert zero.tensor.data[1, 1] == 0.0
        mean = ingest_csv(path, ['t', 'country'], fill='mean')
        assert mean.tensor.data[1, 1] == pytest.approx(4.0)

    def test_non_numeric_value(self, tmp_path):
        path = _write(tmp_path / 'bad.csv', 't,country,value\n1,NO,1\n1,SE,abc\n')
        with pytest.raises(NonNumericValueError, match="'abc'"):
            ingest_csv(path, ['t', 'country'])

    def test_lexicographic_order(self, tmp_path):
        path = _write(tmp_path / 'panel.csv', 't,country,value\n1,SE,1\n1,NO,2\n')
        ingested = ingest_csv(path, ['t', 'country'], order='lexicographic')
        assert ingested.labels[1] == ('NO', 'SE')
        np.testing.assert_array_equal(ingested.tensor.data, [[2.0, 1.0]])

    def test_unknown_column(self, tmp_path):
        path = _write(tmp_path / 'panel.csv', 't,country,value\n1,SE,1\n')
        with pytest.raises(Exception, match='region'):
            ingest_csv(path, ['t', 'region'])

    def test_macro_sized_round_trip(self, tmp_path, rng):
        data = rng.standard_normal((150, 6, 19)) * 10.0 ** rng.integers(-8, 8, (150, 6, 19))
        labels = [[f'q{t}' for t in range(150)], ['gdp', 'cpi', 'rate', 'ip', 'emp', 'fx'],
                  [f'c{k:02d}' for k in range(19)]]
        path = export_csv(tmp_path / 'macro.csv', data, labels, ['quarter', 'variable', 'country'])
        assert len(pd.read_csv(path)) == 17100
        ingested = ingest_csv(path, ['quarter', 'variable', 'country'], value_column='value')
        assert ingested.tensor.shape == (150, 6, 19)
        np.testing.assert_array_equal(ingested.tensor.data, data)
        assert ingested.labels[2] == tuple(labels[2])

    def test_load_tensor_reads_dtf1(self, tmp_path, rng):
        data = rng.standard_normal((4, 3))
        path = write_dtf1(tmp_path / 'x.dtf', data)
        loaded = load_tensor(path)
        np.testing.assert_array_equal(loaded.tensor.data, data)
        assert loaded.labels[1] == ('0', '1', '2')

    def test_csv_needs_mode_columns(self):
        with pytest.raises(InvalidConfigError):
            load_tensor(TINY_X)

    def test_read_series(self, tmp_path):
        path = _write(tmp_path / 'fe.csv', 'error\n0.5\n-1.25\n2\n')
        np.testing.assert_array_equal(read_series_csv(path), [0.5, -1.25, 2.0])
        two = _write(tmp_path / 'two.csv', 'a,b\n1,2\n')
        with pytest.raises(InvalidConfigError):
            read_series_csv(two)
        assert read_series_csv(two, 'b').tolist() == [2.0]


class TestRunConfig:
    def test_config_file(self, tmp_path):
        path = _write(tmp_path / 'run.env', '# comment\nRanks=1x1,2x2\n\nlambdas = 0,0.5\nmax-iters=50\n')
        assert load_config_file(path) == {'ranks': '1x1,2x2', 'lambdas': '0,0.5', 'max_iters': '50'}

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(InvalidConfigError):
            load_config_file(tmp_path / 'absent.env')

    def test_flags_override_file(self):
        merged = merge_config({'lambdas': '0,1', 'seed': '3'}, {'lambdas': '5', 'seed': None, 'tol': 1e-8})
        assert merged == {'lambdas': '5', 'seed': '3', 'tol': 1e-8}

    def test_parsers(self):
        assert parse_shape('2x3x2x3') == (2, 3, 2, 3)
        assert parse_rank_grid('1x1, 2x2') == [(1, 1), (2, 2)]
        assert parse_float_list('0,0.5,50') == [0.0, 0.5, 50.0]
        grid = parse_symmetric_grid('1-3;1-4')
        assert len(grid) == 12
        assert grid[0] == (1, 1, 1, 1)
        assert (2, 3, 2, 3) in grid

    @pytest.mark.parametrize('text', ['2x0', '2xa', ''])
    def test_bad_shape(self, text):
        with pytest.raises(InvalidGridError):
            parse_shape(text)

    def test_ragged_rank_grid(self):
        with pytest.raises(InvalidGridError):
            parse_rank_grid('1x1,2x2x2')


class TestReports:
    def test_json_without_timestamp(self, tmp_path):
        writer = ReportWriter(tmp_path, timestamp=False)
        path = writer.write_json('r.json', {'bic': float('-inf'), 'count': np.int64(3)}, config={'seed': 1})
        document = json.loads(path.read_text())
        assert document == {'config': {'seed': 1}, 'bic': None, 'count': 3}
        assert path.read_text().startswith('{\n  "config"')

    def test_json_with_timestamp(self, tmp_path):
        path = ReportWriter(tmp_path).write_json('r.json', {})
        assert 'generated_at' in json.loads(path.read_text())

    def test_csv_is_lossless(self, tmp_path):
        writer = ReportWriter(tmp_path)
        path = writer.write_csv('v.csv', [{'value': 0.1}, {'value': 1 / 3}])
        assert path.read_text() == 'value\n0.10000000000000001\n0.33333333333333331\n'
        assert pd.read_csv(path)['value'].tolist() == [0.1, 1 / 3]
        assert writer.written == [path]

    def test_plain(self):
        assert plain({'a': (np.float64(1.5), float('nan')), 'p': Path('x')}) == {'a': [1.5, None], 'p': 'x'}

    def test_summary_table(self):
        table = summary_table([{'rank': '1x1', 'bic': 12.5}])
        assert table.startswith('+')
        assert 'bic' in table

    def test_metrics_textfile(self, tmp_path):
        import regression.services  # noqa: F401  registers the fit metrics

        path = write_metrics(tmp_path / 'metrics.prom')
        assert 'tensorreg_fits_total' in path.read_text()


@pytest.mark.django_db
class TestCommands:
    def test_select_on_tiny_dataset(self, tmp_path):
        out = _run('select', x=TINY_X, y=TINY_Y, x_columns='sample,feature', y_columns='sample,output',
                   ranks='1x1,2x1', lambdas='0,0.5', output_dir=str(tmp_path), no_timestamp=True)
        grid = pd.read_csv(tmp_path / 'grid.csv')
        assert len(grid) == 4
        assert grid['best'].sum() == 1
        best = json.loads((tmp_path / 'best.json').read_text())
        assert 'generated_at' not in best
        assert best['config']['ranks'] == [[1, 1], [2, 1]]
        assert best['selection']['best']['rank'] in ([1, 1], [2, 1])
        assert read_dtf1(tmp_path / 'best_coefficient.dtf').shape == (2, 1)
        assert 'select finished' in out

        run = ExperimentRun.objects.get()
        assert (run.command, run.status, run.exit_code) == ('select', 'succeeded', 0)

    def test_reruns_are_byte_identical(self, tmp_path):
        for name in ('a', 'b'):
            _run('select', config=str(FIXTURES / 'tiny_select.env'), x=TINY_X, y=TINY_Y,
                 output_dir=str(tmp_path / name), no_timestamp=True, seed=7)
        for report in ('grid.csv', 'best.json', 'best_coefficient.dtf'):
            assert (tmp_path / 'a' / report).read_bytes() == (tmp_path / 'b' / report).read_bytes()

    def test_flags_override_config_file(self, tmp_path):
        _run('select', config=str(FIXTURES / 'tiny_select.env'), x=TINY_X, y=TINY_Y, lambdas='1',
             output_dir=str(tmp_path), no_timestamp=True)
        grid = pd.read_csv(tmp_path / 'grid.csv')
        assert grid['lambda'].tolist() == [1.0, 1.0]

    def test_unknown_setting_is_a_usage_error(self, tmp_path):
        config = _write(tmp_path / 'bad.env', 'ranks=1x1\ncolour=blue\n')
        stderr = StringIO()
        with pytest.raises(CommandError) as excinfo:
            call_command('select', config=str(config), x=TINY_X, y=TINY_Y, output_dir=str(tmp_path),
                         stdout=StringIO(), stderr=stderr)
        assert excinfo.value.returncode == 2
        record = json.loads(stderr.getvalue())
        assert record['error'] == 'InvalidConfigError'
        assert record['exit_code'] == 2
        assert 'colour' in record['message']

    def test_invalid_grid_is_a_usage_error(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            _run('select', x=TINY_X, y=TINY_Y, x_columns='sample,feature', y_columns='sample,output',
                 ranks='1xq', output_dir=str(tmp_path))
        assert excinfo.value.returncode == 2

    def test_unreadable_file_is_a_data_error(self, tmp_path):
        with pytest.raises(CommandError) as excinfo:
            _run('fit', x=str(tmp_path / 'missing.dtf'), y=str(tmp_path / 'missing.dtf'), rank='1x1',
                 output_dir=str(tmp_path))
        assert excinfo.value.returncode == 3
        assert ExperimentRun.objects.get().status == 'failed'

    def test_fit(self, tmp_path):
        _run('fit', x=TINY_X, y=TINY_Y, x_columns='sample,feature', y_columns='sample,output', rank='1x1',
             output_dir=str(tmp_path), no_timestamp=True, metrics_textfile=str(tmp_path / 'metrics.prom'))
        document = json.loads((tmp_path / 'fit.json').read_text())
        assert document['fit']['duration_seconds'] is None
        assert document['fit']['coefficient']['tucker_rank'] == [1, 1]
        slope = read_dtf1(tmp_path / 'coefficient.dtf').data
        np.testing.assert_allclose(slope[:, 0], [2.0, -1.0], atol=0.1)
        assert 'tensorreg_command_runs_total' in (tmp_path / 'metrics.prom').read_text()

    def test_dm_identical_files(self, tmp_path):
        errors = '\n'.join(['error', '0.4', '-1.1', '0.3', '2.2', '-0.7', '0.9', '-0.2', '1.4', '-1.6', '0.8'])
        fe = _write(tmp_path / 'fe.csv', errors + '\n')
        _run('dm', fe1=str(fe), fe2=str(fe), h=1, output_dir=str(tmp_path), no_timestamp=True)
        result = json.loads((tmp_path / 'dm.json').read_text())['result']
        assert result['statistic'] == 0.0
        assert result['p_value'] == 1.0
        assert result['n'] == 10

    def test_simulate_recovery(self, tmp_path):
        _run('simulate_recovery', shape='5x4x3', true_rank='2x2x2', samples=60, ranks='1x1x1,2x2x2,3x3x3',
             init='hosvd', tol=1e-10, output_dir=str(tmp_path), no_timestamp=True, seed=3)
        rows = pd.read_csv(tmp_path / 'recovery.csv')
        assert len(rows) == 3
        best = json.loads((tmp_path / 'recovery.json').read_text())['best']
        assert best['rank'] == [2, 2, 2]
        assert best['relative_error'] < 1e-6
        assert read_dtf1(tmp_path / 'estimate.dtf').shape == (5, 4, 3)

    def test_simulate_collinearity(self, tmp_path):
        _run('simulate_collinearity', snr=5.0, seeds=2, shape='60x3x4', rhos='0.1,0.5,0.5', true_rank='1x2x1x2',
             ranks='1x1x1x1,1x2x1x2', lambdas='0,1', output_dir=str(tmp_path), no_timestamp=True)
        frequency = pd.read_csv(tmp_path / 'frequency.csv')
        assert frequency['count'].sum() == 2
        assert len(pd.read_csv(tmp_path / 'selections.csv')) == 2
        assert len(pd.read_csv(tmp_path / 'bic_by_lambda.csv')) == 4

    def test_tar_forecast(self, tmp_path, rng):
        path = write_dtf1(tmp_path / 'y.dtf', rng.standard_normal((80, 2, 3)))
        _run('tar_forecast', y=str(path), rank='1x1x1x1', horizons=3, output_dir=str(tmp_path / 'out'),
             no_timestamp=True)
        forecasts = pd.read_csv(tmp_path / 'out' / 'forecasts.csv')
        assert len(forecasts) == 18
        assert forecasts['series'].iloc[1] == '1|0'
        assert read_dtf1(tmp_path / 'out' / 'forecasts.dtf').shape == (3, 2, 3)

    def test_compare(self, tmp_path, rng):
        path = write_dtf1(tmp_path / 'y.dtf', rng.standard_normal((150, 2, 3)))
        _run('compare', y=str(path), lambdas='0,1', output_dir=str(tmp_path / 'out'), no_timestamp=True)
        dm = pd.read_csv(tmp_path / 'out' / 'dm.csv')
        assert len(dm) == 24
        comparison = json.loads((tmp_path / 'out' / 'comparison.json').read_text())['comparison']
        assert comparison['segments'] == [105, 30, 15]
        assert len(comparison['rmsfe_tar']) == 4
        assert comparison['rejections']['tested'] == 24
        assert comparison['block_mode'] == 1
        assert comparison['var_blocks'] == 3

    def test_residual_cov(self, tmp_path, rng):
        path = write_dtf1(tmp_path / 'e.dtf', rng.standard_normal((200, 3, 2)))
        _run('residual_cov', residuals=str(path), output_dir=str(tmp_path / 'out'), no_timestamp=True)
        out = tmp_path / 'out'
        assert len(pd.read_csv(out / 'correlation_mode1.csv')) == 9
        biplot = pd.read_csv(out / 'biplot_mode2.csv')
        assert list(biplot.columns) == ['label', 'pc1', 'pc2', 'mode']
        assert len(biplot) == 2
        document = json.loads((out / 'residual_cov.json').read_text())
        assert document['correlations']['modes'] == [1, 2]

    def test_residual_cov_from_a_fit(self, tmp_path):
        _run('residual_cov', x=TINY_X, y=TINY_Y, x_columns='sample,feature', y_columns='sample,output', rank='1x1',
             output_dir=str(tmp_path), no_timestamp=True)
        assert read_dtf1(tmp_path / 'residuals.dtf').shape == (10, 1)
        assert pd.read_csv(tmp_path / 'correlation_mode1.csv')['correlation'].tolist() == [1.0]
