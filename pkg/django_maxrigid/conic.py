"""
Solver-agnostic conic problem and its sparse text format.

Variables are laid out in one flat vector ``x``: the upper triangle (row-major,
diagonal included) of every PSD block in block order, followed by the scalar
variables. The problem reads

    minimize    c^T x
    subject to  A_eq x == b_eq
                G x <= h
                x[j] >= 0            for j in ``nonneg``
                every block is PSD

Matrix entries are stored once per unordered pair, so a linear functional
<C, Z> puts C[i][i] on a diagonal entry and 2 C[i][j] on an off-diagonal one.
"""
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from django_maxrigid.exceptions import ParseError, UnsupportedVersion

FORMAT_NAME = 'CONIC'
FORMAT_VERSION = 1


def triangle_size(p):
    return p * (p + 1) // 2


def upper_index(p, i, j):
    if i > j:
        i, j = j, i
    return i * p - i * (i - 1) // 2 + (j - i)


@dataclass(frozen=True)
class FrameBlock:
    """One frame's PSD block; row/column r + 1 of the block is ``points[r]``."""
    frame: int
    block: int
    points: tuple


@dataclass(frozen=True)
class ProblemLayout:
    """
    How the variables of an assembled reconstruction problem map back to
    legs, squared distances and the squared internal model. Scalar indices
    count from the first scalar variable.
    """
    n_points: int
    frames: tuple
    dhat: tuple
    ghat: tuple

    def frame_block(self, frame):
        for block in self.frames:
            if block.frame == frame:
                return block
        raise KeyError(frame)


@dataclass(frozen=True, eq=False)
class ConicProblem:
    block_sizes: tuple
    n_scalars: int
    objective: np.ndarray = field(repr=False)
    eq_matrix: sp.csr_matrix = field(repr=False)
    eq_rhs: np.ndarray = field(repr=False)
    ineq_matrix: sp.csr_matrix = field(repr=False)
    ineq_rhs: np.ndarray = field(repr=False)
    nonneg: np.ndarray = field(repr=False)
    layout: ProblemLayout = field(default=None, repr=False)

    def __post_init__(self):
        block_sizes = tuple(int(p) for p in self.block_sizes)
        offsets = np.concatenate([[0], np.cumsum([triangle_size(p) for p in block_sizes])])
        n_variables = int(offsets[-1]) + int(self.n_scalars)
        object.__setattr__(self, 'block_sizes', block_sizes)
        object.__setattr__(self, '_offsets', offsets.astype(int))
        object.__setattr__(self, 'n_variables', n_variables)

        def matrix(value, name):
            value = sp.csr_matrix(value, dtype=float)
            if value.shape[1] != n_variables:
                raise ValueError('%s has %d columns, expected %d'
                                 % (name, value.shape[1], n_variables))
            return value

        objective = np.array(self.objective, dtype=float)
        if objective.shape != (n_variables,):
            raise ValueError('objective must have one coefficient per variable')
        eq_matrix = matrix(self.eq_matrix, 'equality matrix')
        ineq_matrix = matrix(self.ineq_matrix, 'inequality matrix')
        eq_rhs = np.array(self.eq_rhs, dtype=float).reshape(-1)
        ineq_rhs = np.array(self.ineq_rhs, dtype=float).reshape(-1)
        if eq_rhs.shape != (eq_matrix.shape[0],) or ineq_rhs.shape != (ineq_matrix.shape[0],):
            raise ValueError('right-hand sides must match the constraint rows')
        nonneg = np.unique(np.asarray(self.nonneg, dtype=int))
        if nonneg.size and (nonneg[0] < 0 or nonneg[-1] >= n_variables):
            raise ValueError('nonnegative variable index out of range')
        for name, value in (('objective', objective), ('eq_rhs', eq_rhs),
                            ('ineq_rhs', ineq_rhs), ('nonneg', nonneg)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'eq_matrix', eq_matrix)
        object.__setattr__(self, 'ineq_matrix', ineq_matrix)

    @property
    def n_equalities(self):
        return self.eq_matrix.shape[0]

    @property
    def n_inequalities(self):
        return self.ineq_matrix.shape[0]

    @property
    def scalar_offset(self):
        return int(self._offsets[-1])

    def block_slice(self, block):
        return slice(int(self._offsets[block]), int(self._offsets[block + 1]))

    def entry_index(self, block, i, j):
        return int(self._offsets[block]) + upper_index(self.block_sizes[block], i, j)

    def scalar_index(self, scalar):
        return self.scalar_offset + scalar

    def block_matrix(self, x, block):
        p = self.block_sizes[block]
        matrix = np.zeros((p, p))
        matrix[np.triu_indices(p)] = x[self.block_slice(block)]
        return matrix + np.triu(matrix, 1).T

    def objective_value(self, x):
        return float(self.objective @ x)


def _triplets(matrix):
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    return coo.row[order], coo.col[order], coo.data[order]


def dump_problem(problem, stream):
    write = stream.write
    write('%s %d\n' % (FORMAT_NAME, FORMAT_VERSION))
    write('BLOCKS %d%s\n' % (len(problem.block_sizes),
                             ''.join(' %d' % p for p in problem.block_sizes)))
    write('SCALARS %d\n' % problem.n_scalars)

    nonzero = np.flatnonzero(problem.objective)
    write('OBJECTIVE %d\n' % nonzero.size)
    for var in nonzero:
        write('%d %r\n' % (var, float(problem.objective[var])))

    for label, matrix, rhs in (('EQUALITIES', problem.eq_matrix, problem.eq_rhs),
                               ('INEQUALITIES', problem.ineq_matrix, problem.ineq_rhs)):
        rows, cols, data = _triplets(matrix)
        write('%s %d %d\n' % (label, matrix.shape[0], data.size))
        for row, col, value in zip(rows, cols, data):
            write('%d %d %r\n' % (row, col, float(value)))
        nonzero = np.flatnonzero(rhs)
        write('RHS %d\n' % nonzero.size)
        for row in nonzero:
            write('%d %r\n' % (row, float(rhs[row])))

    write('NONNEG %d\n' % problem.nonneg.size)
    for var in problem.nonneg:
        write('%d\n' % var)

    layout = problem.layout
    if layout is not None:
        write('LAYOUT %d %d\n' % (layout.n_points, len(layout.frames)))
        for block in layout.frames:
            write('FRAME %d %d %d%s\n' % (block.frame, block.block, len(block.points),
                                          ''.join(' %d' % p for p in block.points)))
        write('DHAT %d\n' % len(layout.dhat))
        for (frame, i, j), scalar in layout.dhat:
            write('%d %d %d %d\n' % (scalar, frame, i, j))
        write('GHAT %d\n' % len(layout.ghat))
        for (i, j), scalar in layout.ghat:
            write('%d %d %d\n' % (scalar, i, j))
    write('END\n')


def dumps_problem(problem):
    stream = io.StringIO()
    dump_problem(problem, stream)
    return stream.getvalue()


class _Lines(object):
    """Numbered line reader that reports parse errors by line."""

    def __init__(self, stream):
        self.lines = stream.read().splitlines()
        self.position = 0

    def next(self, keyword=None, count=None):
        while self.position < len(self.lines) and not self.lines[self.position].strip():
            self.position += 1
        if self.position >= len(self.lines):
            raise ParseError('unexpected end of file', 'line %d' % (self.position + 1))
        self.position += 1
        fields = self.lines[self.position - 1].split()
        if keyword is not None and fields[0] != keyword:
            self.fail('expected %s, found %r' % (keyword, fields[0]))
        if count is not None and len(fields) != count:
            self.fail('expected %d fields, found %d' % (count, len(fields)))
        return fields

    def fail(self, message):
        raise ParseError(message, 'line %d' % self.position)

    def ints(self, fields):
        try:
            return [int(f) for f in fields]
        except ValueError:
            self.fail('expected integers in %r' % ' '.join(fields))

    def number(self, text):
        try:
            return float(text)
        except ValueError:
            self.fail('expected a number, found %r' % text)


def load_problem(stream):
    lines = _Lines(stream)
    header = lines.next(FORMAT_NAME, 2)
    if lines.ints(header[1:])[0] != FORMAT_VERSION:
        raise UnsupportedVersion('unsupported conic format version %s' % header[1], 'line 1')

    fields = lines.next('BLOCKS')
    counts = lines.ints(fields[1:])
    if not counts or counts[0] != len(counts) - 1:
        lines.fail('block count does not match the sizes listed')
    block_sizes = tuple(counts[1:])
    n_scalars = lines.ints(lines.next('SCALARS', 2)[1:])[0]
    n_variables = sum(triangle_size(p) for p in block_sizes) + n_scalars

    def column(var):
        if not 0 <= var < n_variables:
            lines.fail('variable %d out of range' % var)
        return var

    objective = np.zeros(n_variables)
    for _ in range(lines.ints(lines.next('OBJECTIVE', 2)[1:])[0]):
        fields = lines.next(count=2)
        objective[column(lines.ints(fields[:1])[0])] = lines.number(fields[1])

    def read_constraints(label):
        n_rows, nnz = lines.ints(lines.next(label, 3)[1:])
        rows, cols, data = [], [], []
        for _ in range(nnz):
            fields = lines.next(count=3)
            row, col = lines.ints(fields[:2])
            if not 0 <= row < n_rows:
                lines.fail('row %d out of range' % row)
            rows.append(row)
            cols.append(column(col))
            data.append(lines.number(fields[2]))
        matrix = sp.csr_matrix((data, (rows, cols)), shape=(n_rows, n_variables))
        rhs = np.zeros(n_rows)
        for _ in range(lines.ints(lines.next('RHS', 2)[1:])[0]):
            fields = lines.next(count=2)
            row = lines.ints(fields[:1])[0]
            if not 0 <= row < n_rows:
                lines.fail('row %d out of range' % row)
            rhs[row] = lines.number(fields[1])
        return matrix, rhs

    eq_matrix, eq_rhs = read_constraints('EQUALITIES')
    ineq_matrix, ineq_rhs = read_constraints('INEQUALITIES')
    nonneg = [column(lines.ints(lines.next(count=1))[0])
              for _ in range(lines.ints(lines.next('NONNEG', 2)[1:])[0])]

    layout = None
    fields = lines.next()
    if fields[0] == 'LAYOUT':
        n_points, n_frames = lines.ints(fields[1:3])
        frames = []
        for _ in range(n_frames):
            values = lines.ints(lines.next('FRAME')[1:])
            if len(values) != 3 + values[2]:
                lines.fail('frame point count does not match the points listed')
            frames.append(FrameBlock(frame=values[0], block=values[1], points=tuple(values[3:])))
        dhat = []
        for _ in range(lines.ints(lines.next('DHAT', 2)[1:])[0]):
            scalar, frame, i, j = lines.ints(lines.next(count=4))
            dhat.append(((frame, i, j), scalar))
        ghat = []
        for _ in range(lines.ints(lines.next('GHAT', 2)[1:])[0]):
            scalar, i, j = lines.ints(lines.next(count=3))
            ghat.append(((i, j), scalar))
        layout = ProblemLayout(n_points=n_points, frames=tuple(frames),
                               dhat=tuple(dhat), ghat=tuple(ghat))
        fields = lines.next()
    if fields != ['END']:
        lines.fail('expected END')

    return ConicProblem(
        block_sizes=block_sizes,
        n_scalars=n_scalars,
        objective=objective,
        eq_matrix=eq_matrix,
        eq_rhs=eq_rhs,
        ineq_matrix=ineq_matrix,
        ineq_rhs=ineq_rhs,
        nonneg=nonneg,
        layout=layout,
    )


def loads_problem(text):
    return load_problem(io.StringIO(text))
