# VSDesign 🚀, GPL-3.0 license
"""
Data loaders: experiment matrices from CSV and design plans as JSON
"""

import json
import math
import re
from pathlib import Path

import numpy as np
import pandas as pd

from models.common import DesignMatrix, _frozen
from models.sampler import DesignSequence
from models.scores import SamplingDistribution
from utils.general import LOGGER, EmptyList, NonFiniteEntry, ParseError, RaggedRows, check_file, colorstr

PREFIX = colorstr('data: ')
RESPONSE_TAG = 'y'  # header name of an optional final response column


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _is_blank(row):
    return all(not isinstance(f, str) or not f.strip() for f in row)


def _read_cells(file):
    # Every cell as a stripped string, None where a field is empty or missing; row i is line i + 1
    try:
        df = pd.read_csv(file, header=None, dtype=str, encoding='utf-8-sig', skipinitialspace=True,
                         keep_default_na=False, na_values=[''], skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise ParseError(f'{file} has no data rows') from None
    except pd.errors.ParserError as e:
        m = re.search(r'Expected (\d+) fields in line (\d+), saw (\d+)', str(e))
        if m:
            raise RaggedRows(f'expected {m[1]} fields, got {m[3]}', int(m[2])) from None
        raise ParseError(f'{file}: {str(e).strip()}') from None
    except UnicodeDecodeError as e:
        raise ParseError(f'{file} is not UTF-8 text ({e.reason})') from None
    cells = df.to_numpy(dtype=object)
    n = len(cells)
    while n and _is_blank(cells[n - 1]):  # trailing blank lines
        n -= 1
    if not n:
        raise ParseError(f'{file} has no data rows')
    return [[f.strip() if isinstance(f, str) else None for f in row] for row in cells[:n]]


def load_matrix(path):
    """Read a comma-separated experiment matrix, one experiment per row.

    The first line is a header only when every one of its fields is a non-numeric name; a header whose final
    column is named 'y' makes that column the response vector. Returns (DesignMatrix, y or None).
    """
    file = Path(check_file(str(path)))
    cells = _read_cells(file)
    header = cells[0] if all(f and not _is_number(f) for f in cells[0]) else None
    start = 1 if header else 0
    rows = []
    for li, fields in enumerate(cells[start:], start + 1):  # 1-based line numbers
        if all(not f for f in fields):
            raise ParseError('empty row', li)
        if None in fields:
            ci = fields.index(None) + 1
            raise RaggedRows(f'expected {len(fields)} fields, field {ci} is empty or missing', li, ci)
        row = []
        for ci, f in enumerate(fields, 1):
            try:
                v = float(f)
            except ValueError:
                raise ParseError(f"cannot parse '{f}' as a number", li, ci) from None
            if not math.isfinite(v):
                raise NonFiniteEntry(f"non-finite entry '{f}'", li, ci)
            row.append(v)
        rows.append(row)
    if not rows:
        raise ParseError(f'{file} has a header but no data rows', 1)

    a = np.array(rows, dtype=np.float64)
    y = None
    if header and header[-1].lower() == RESPONSE_TAG:
        a, y = a[:, :-1], _frozen(a[:, -1])
    s = ', response y' if y is not None else ''
    LOGGER.info(f'{PREFIX}{file.name}: {a.shape[0]} experiments, d={a.shape[1]}{s}')
    return DesignMatrix(a), y


def save_plan(file, designs, config=None):
    # Design sequences with their rescale weights and source distribution, floats as shortest round-trip repr
    if not designs:
        raise EmptyList('cannot save a plan with no designs')
    q = designs[0].source_q
    doc = {'config': config or {},
           'n': q.q.size,
           'distribution': {'kind': q.kind, 'alpha': q.alpha, 'q': q.q.tolist()},
           'designs': [{'k': pi.k,
                        'indices': pi.indices.tolist(),
                        'rescale': pi.rescale.tolist(),
                        'multiplicities': {int(i): int(c) for i, c in enumerate(pi.multiplicities()) if c}}
                       for pi in designs]}
    Path(file).write_text(json.dumps(doc, indent=2))
    return file


def load_plan(file):
    # Inverse of save_plan, rescale weights are taken as stored so estimates reproduce bit for bit
    file = check_file(str(file), suffix=('.json',))
    try:
        doc = json.loads(Path(file).read_text(encoding='utf-8'))
        dist = doc['distribution']
        q = SamplingDistribution(np.array(dist['q']), dist['alpha'], dist['kind'])
        designs = [DesignSequence(np.array(p['indices'], dtype=np.intp), _frozen(p['rescale']), q)
                   for p in doc['designs']]
    except json.JSONDecodeError as e:
        raise ParseError(f'{file}: {e.msg}', e.lineno, e.colno) from e
    except (KeyError, TypeError) as e:
        raise ParseError(f'{file}: malformed plan, missing or invalid field {e}') from e
    for pi in designs:
        if len(pi.indices) != len(pi.rescale) or (pi.indices.size and (pi.indices.min() < 0 or
                                                                        pi.indices.max() >= len(q))):
            raise ParseError(f'{file}: design indices and rescale weights disagree with n={len(q)}')
    return designs
