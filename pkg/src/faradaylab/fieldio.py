"""Field serialisation: a plain CSV layout and a compact binary container.

CSV: header ``component,m1,m2,z_index,re,im`` and one row per coefficient.
Surface fields use ``z_index = -1``.  Floats are written with ``repr`` so
parsing them back is bit-exact.

Binary: each field is a block made of the 16-byte magic ``b"FARADAYF v1"``
(NUL padded), a little-endian header ``<IIIII dddd`` holding
``kind (0 surface, 1 volume), ncomp, nz, n1, n2, L1, L2, b, t`` and the
complex128 coefficients in C order.  A state file is three blocks ``u, p,
eta``.
"""
from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .grid import Grid, SurfaceField, VolumeField
from .state import FlowState

MAGIC = b"FARADAYF v1".ljust(16, b"\0")
_HEADER = struct.Struct("<IIIIIdddd")
_SURFACE, _VOLUME = 0, 1


def _fft_index(m, n):
    return m if m >= 0 else m + n


def _signed(i, n):
    return i if i < n // 2 else i - n


def field_to_csv(field) -> str:
    g = field.grid
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "m1", "m2", "z_index", "re", "im"])
    c = field.coef
    surface = isinstance(field, SurfaceField)
    for comp in range(c.shape[0]):
        zs = [-1] if surface else range(g.nz)
        for z in zs:
            block = c[comp] if surface else c[comp, z]
            for i in range(g.n1):
                for j in range(g.n2):
                    v = block[i, j]
                    w.writerow([comp, _signed(i, g.n1), _signed(j, g.n2), z, repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()


def field_from_csv(text: str, grid: Grid):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["component", "m1", "m2", "z_index", "re", "im"]:
        raise ConfigurationError("bad field CSV header")
    body = rows[1:]
    surface = all(int(r[3]) == -1 for r in body)
    ncomp = max(int(r[0]) for r in body) + 1
    shape = (ncomp, grid.n1, grid.n2) if surface else (ncomp, grid.nz, grid.n1, grid.n2)
    c = np.zeros(shape, complex)
    for r in body:
        comp, m1, m2, z = (int(x) for x in r[:4])
        i, j = _fft_index(m1, grid.n1), _fft_index(m2, grid.n2)
        val = complex(float(r[4]), float(r[5]))
        if surface:
            c[comp, i, j] = val
        else:
            c[comp, z, i, j] = val
    return SurfaceField(grid, c) if surface else VolumeField(grid, c)


def _pack(field, t):
    g = field.grid
    kind = _SURFACE if isinstance(field, SurfaceField) else _VOLUME
    ncomp = field.coef.shape[0]
    head = _HEADER.pack(kind, ncomp, g.nz, g.n1, g.n2, g.L1, g.L2, g.b, float(t))
    return MAGIC + head + np.ascontiguousarray(field.coef, dtype="<c16").tobytes()


def _unpack(buf, offset, grid=None):
    if buf[offset : offset + 16] != MAGIC:
        raise ConfigurationError("not a FARADAYF v1 block")
    offset += 16
    kind, ncomp, nz, n1, n2, L1, L2, b, t = _HEADER.unpack_from(buf, offset)
    offset += _HEADER.size
    if grid is None:
        grid = Grid(L1, L2, b, n1, n2, nz)
    elif (grid.n1, grid.n2, grid.nz) != (n1, n2, nz):
        raise ConfigurationError("binary block does not match grid")
    shape = (ncomp, n1, n2) if kind == _SURFACE else (ncomp, nz, n1, n2)
    count = int(np.prod(shape))
    c = np.frombuffer(buf, dtype="<c16", count=count, offset=offset).reshape(shape)
    offset += 16 * count
    f = SurfaceField(grid, c) if kind == _SURFACE else VolumeField(grid, c)
    return f, t, offset, grid


def write_field(path, field, t=0.0):
    Path(path).write_bytes(_pack(field, t))


def read_field(path, grid=None):
    buf = Path(path).read_bytes()
    f, t, _, _ = _unpack(buf, 0, grid)
    return f, t


def write_state(path, state: FlowState):
    Path(path).write_bytes(_pack(state.u, state.t) + _pack(state.p, state.t) + _pack(state.eta, state.t))


def read_state(path, grid=None) -> FlowState:
    buf = Path(path).read_bytes()
    u, t, off, grid = _unpack(buf, 0, grid)
    p, _, off, _ = _unpack(buf, off, grid)
    eta, _, off, _ = _unpack(buf, off, grid)
    return FlowState(u, p, eta, t)


class DiagnosticsWriter:
    """Line-buffered CSV writer with a fixed column order."""

    def __init__(self, path, columns):
        self.columns = tuple(columns)
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(self.columns)
        self._fh.flush()

    def write(self, row):
        self._w.writerow([_fmt(row[c]) for c in self.columns])
        self._fh.flush()

    def close(self):
        if not self._fh.closed:
            self._fh.close()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
