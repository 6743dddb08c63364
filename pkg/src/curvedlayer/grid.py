"""Uniform 2D grids, trapezoid quadrature and the field exchange format.

Field exchange format
---------------------
A field file starts with five ASCII header lines::

    nx <int>
    ny <int>
    hx <float>
    hy <float>
    origin <float> <float>

followed either by ``nx*ny`` CSV values (one row of ``ny`` values per line,
row-major with the first index ``i`` along x) or, for the binary flavour, by
the raw little-endian ``float64`` payload in the same order.  Floats are
written with ``repr`` so a round trip is exact.
"""

from dataclasses import dataclass

import numpy as np

_BINARY_MAGIC = "# binary f8le"


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid ``x_i = x0 + i hx``, ``y_j = y0 + j hy``."""

    nx: int
    ny: int
    hx: float
    hy: float
    x0: float
    y0: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per axis")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be > 0")

    @classmethod
    def square(cls, half_width, h):
        """Centred square grid on ``[-half_width, half_width]^2``."""
        n = int(round(2.0 * half_width / h)) + 1
        return cls(n, n, float(h), float(h), -(n - 1) * h / 2.0, -(n - 1) * h / 2.0)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def x(self):
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def y(self):
        return self.y0 + self.hy * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def is_square_spacing(self):
        return abs(self.hx - self.hy) <= 1e-14 * self.hx

    def integrate(self, values):
        """Trapezoid rule over the last two axes."""
        v = np.asarray(values, dtype=float)
        wx = np.full(self.nx, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.hy)
        wy[[0, -1]] *= 0.5
        return np.einsum("...ij,i,j->...", v, wx, wy)

    def ring_max(self, values, width=1):
        """Max of ``|values|`` over the outer ring of ``width`` nodes."""
        v = np.abs(np.asarray(values))
        w = int(width)
        mask = np.zeros(self.shape, dtype=bool)
        mask[:w, :] = mask[-w:, :] = True
        mask[:, :w] = mask[:, -w:] = True
        return float(v[..., mask].max())

    def gradient(self, values):
        """Central-difference gradient (4th order inside, 2nd order at the edges)."""
        v = np.asarray(values, dtype=float)
        return (_diff4(v, self.hx, 0), _diff4(v, self.hy, 1))

    def laplacian(self, values):
        v = np.asarray(values, dtype=float)
        return _diff4_2(v, self.hx, 0) + _diff4_2(v, self.hy, 1)


def _diff4(v, h, axis):
    out = np.gradient(v, h, axis=axis, edge_order=2)
    s = [slice(None)] * v.ndim

    def sl(a, b):
        s2 = list(s)
        s2[axis] = slice(a, b)
        return tuple(s2)

    n = v.shape[axis]
    out[sl(2, n - 2)] = (v[sl(0, n - 4)] - 8 * v[sl(1, n - 3)]
                         + 8 * v[sl(3, n - 1)] - v[sl(4, n)]) / (12 * h)
    return out


def _diff4_2(v, h, axis):
    v = np.moveaxis(v, axis, 0)
    out = np.zeros_like(v)
    out[1:-1] = (v[:-2] - 2 * v[1:-1] + v[2:]) / h ** 2
    out[2:-2] = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * h ** 2)
    return np.moveaxis(out, 0, axis)


def _header(grid, extra=None):
    lines = [f"nx {grid.nx}", f"ny {grid.ny}", f"hx {grid.hx!r}", f"hy {grid.hy!r}",
             f"origin {grid.x0!r} {grid.y0!r}"]
    if extra:
        lines.append(extra)
    return "\n".join(lines) + "\n"


def _parse_header(lines):
    try:
        vals = [ln.split() for ln in lines]
        if [v[0] for v in vals] != ["nx", "ny", "hx", "hy", "origin"]:
            raise ValueError
        return Grid2D(int(vals[0][1]), int(vals[1][1]), float(vals[2][1]),
                      float(vals[3][1]), float(vals[4][1]), float(vals[4][2]))
    except (ValueError, IndexError) as exc:
        raise ValueError("malformed field header") from exc


def write_field(path, grid, values, binary=False):
    """Write a field in the exchange format (CSV text or raw binary)."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    if binary:
        with open(path, "wb") as fh:
            fh.write(_header(grid, _BINARY_MAGIC).encode("ascii"))
            fh.write(values.astype("<f8").tobytes(order="C"))
        return
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(_header(grid))
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_field(path):
    """Read a field written by :func:`write_field`; returns ``(grid, values)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head = raw.split(b"\n", 6)
    if len(head) < 6:
        raise ValueError("truncated field file")
    grid = _parse_header([h.decode("ascii") for h in head[:5]])
    if head[5].decode("ascii", errors="replace").strip() == _BINARY_MAGIC:
        payload = head[6] if len(head) > 6 else b""
        values = np.frombuffer(payload, dtype="<f8")
    else:
        text = b"\n".join(head[5:]).decode("ascii")
        values = np.array([float(t) for t in text.replace("\n", ",").split(",") if t.strip()])
    if values.size != grid.size:
        raise ValueError(f"expected {grid.size} values, found {values.size}")
    values = values.reshape(grid.shape).astype(float)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite samples in field file")
    return grid, values
