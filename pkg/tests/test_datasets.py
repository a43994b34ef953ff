# VSDesign 🚀, GPL-3.0 license
import json

import numpy as np
import pytest

from models.common import factorize
from models.estimator import subsampled_ls
from models.sampler import RngStream, sample_vs_k
from models.scores import compute_scores, make_distribution
from utils.datasets import load_matrix, load_plan, save_plan
from utils.general import ConfigError, EmptyList, NonFiniteEntry, ParseError, RaggedRows


def test_load_plain(write_csv):
    X, y = load_matrix(write_csv('1,0\n0,1\n1,1\n'))
    np.testing.assert_array_equal(X.entries, [[1, 0], [0, 1], [1, 1]])
    assert y is None


def test_load_crlf_and_header(write_csv):
    X, y = load_matrix(write_csv('x1,x2,y\r\n1,0,1\r\n0,1,2\r\n1,1,4\r\n'))
    assert X.shape == (3, 2)
    np.testing.assert_array_equal(y, [1, 2, 4])
    X, y = load_matrix(write_csv('a, b\n1.5, -2e-3\n0,1\n'))  # header without a response column
    np.testing.assert_array_equal(X.entries, [[1.5, -0.002], [0, 1]])
    assert y is None


def test_load_examples():
    X, y = load_matrix('toy3x2_y.csv')  # found under data/examples
    assert X.shape == (3, 2)
    np.testing.assert_array_equal(y, [1, 2, 4])


def test_ragged_rows(write_csv):
    with pytest.raises(RaggedRows) as e:
        load_matrix(write_csv('1,0\n0,1,2\n'))
    assert e.value.line == 2
    with pytest.raises(RaggedRows):
        load_matrix(write_csv('1,0\n0\n'))


def test_parse_error_position(write_csv):
    with pytest.raises(ParseError) as e:
        load_matrix(write_csv('x1,x2\n1,0\n0,abc\n'))
    assert (e.value.line, e.value.column) == (3, 2)
    assert 'line 3, column 2' in str(e.value)
    with pytest.raises(ParseError):
        load_matrix(write_csv('\n\n'))
    with pytest.raises(ParseError):
        load_matrix(write_csv('x1,x2\n'))


def test_non_finite(write_csv):
    with pytest.raises(NonFiniteEntry) as e:
        load_matrix(write_csv('1,0\n0,inf\n'))
    assert (e.value.line, e.value.column) == (2, 2)
    with pytest.raises(NonFiniteEntry):
        load_matrix(write_csv('nan,0\n0,1\n'))


def test_bom_keeps_first_row(write_csv):
    X, y = load_matrix(write_csv('\ufeff1,0\n0,1\n1,1\n'))
    np.testing.assert_array_equal(X.entries, [[1, 0], [0, 1], [1, 1]])
    X, y = load_matrix(write_csv('\ufeffx1,x2,y\n1,0,1\n0,1,2\n1,1,4\n'))
    assert X.shape == (3, 2)
    np.testing.assert_array_equal(y, [1, 2, 4])


def test_bad_first_row_is_not_a_header(write_csv):
    with pytest.raises(ParseError) as e:
        load_matrix(write_csv('1,abc\n0,1\n1,1\n'))
    assert (e.value.line, e.value.column) == (1, 2)
    with pytest.raises(ParseError) as e:
        load_matrix(write_csv('x1,2\n0,1\n'))
    assert (e.value.line, e.value.column) == (1, 1)


def test_empty_field(write_csv):
    with pytest.raises(RaggedRows) as e:
        load_matrix(write_csv('1,0,2\n0,,1\n'))
    assert (e.value.line, e.value.column) == (2, 2)
    with pytest.raises(ParseError) as e:
        load_matrix(write_csv('1,0\n\n1,1\n'))
    assert e.value.line == 2
    X, _ = load_matrix(write_csv('1,0\n0,1\n\n\n'))  # trailing blank lines
    assert X.shape == (2, 2)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_matrix(tmp_path / 'missing.csv')


def test_plan_round_trip(tmp_path, gaussian):
    X = gaussian(9, 2, seed=4)
    y = np.random.default_rng(1).normal(size=9)
    F = factorize(X)
    q = make_distribution(compute_scores(X, F), X.n, X.d, 'mixture', 0.6)
    designs = [sample_vs_k(X, F, q, 5, RngStream(0, j))[0] for j in range(3)]
    f = save_plan(tmp_path / 'plan.json', designs, {'k': 5})
    doc = json.loads(f.read_text())
    assert doc['distribution']['alpha'] == 0.6 and len(doc['designs']) == 3
    loaded = load_plan(f)
    for a, b in zip(designs, loaded):
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(subsampled_ls(X, a, y).w_hat.w, subsampled_ls(X, b, y).w_hat.w)


def test_plan_malformed(tmp_path):
    f = tmp_path / 'plan.json'
    f.write_text('{"designs": [')
    with pytest.raises(ParseError):
        load_plan(f)
    f.write_text('{"designs": []}')
    with pytest.raises(ParseError):
        load_plan(f)


def test_save_plan_empty(tmp_path):
    with pytest.raises(EmptyList):
        save_plan(tmp_path / 'plan.json', [])
    assert not (tmp_path / 'plan.json').exists()
