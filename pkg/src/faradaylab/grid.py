"""Discretisation substrate.

Horizontal directions are periodic and carried by Fourier collocation on an
``n1 x n2`` grid over ``(0, L1) x (0, L2)``.  The vertical direction of the slab
``(-b, 0)`` uses Chebyshev-Lobatto nodes ordered from the bottom (index 0,
``x3 = -b``) to the surface (index ``nz - 1``, ``x3 = 0``).

Physical arrays keep the horizontal axes last: surface data has shape
``(..., n1, n2)`` and volume data ``(..., nz, n1, n2)``.  Spectral coefficients
use the same layout in numpy FFT order and are normalised so that
``c[m] = (1/(L1 L2)) * integral f exp(-i k(m).x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .errors import ConfigurationError
from .params import Params

MAX_HORIZONTAL = 512
MAX_VERTICAL = 257
MAX_VOLUME_ORDER = 4


def chebyshev_lobatto(nz, b=1.0):
    """Nodes, differentiation matrix and Clenshaw-Curtis weights on ``[-b, 0]``.

    Nodes are ascending with exact endpoints ``-b`` and ``0``.
    """
    n = nz - 1
    j = np.arange(nz)
    s = -np.cos(np.pi * j / n)
    s[0], s[-1] = -1.0, 1.0
    if n % 2 == 0:
        s[n // 2] = 0.0

    c = np.ones(nz)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** j
    i_, j_ = np.meshgrid(j, j, indexing="ij")
    # s_i - s_j via the product formula keeps small differences accurate
    ds = 2.0 * np.sin(np.pi * (i_ + j_) / (2 * n)) * np.sin(np.pi * (i_ - j_) / (2 * n))
    off = i_ != j_
    D = np.zeros((nz, nz))
    D[off] = (c[i_[off]] / c[j_[off]]) / ds[off]
    D[j, j] = -D.sum(axis=1)

    # Clenshaw-Curtis on [-1, 1]
    theta = np.pi * j / n
    w = np.zeros(nz)
    v = np.ones(n - 1)
    inner = j[1:-1]
    if n % 2 == 0:
        w[0] = w[-1] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[inner]) / (n**2 - 1)
    else:
        w[0] = w[-1] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
    w[inner] = 2.0 * v / n

    z = 0.5 * b * (s - 1.0)
    z[0], z[-1] = -b, 0.0
    return z, (2.0 / b) * D, 0.5 * b * w


def dealias_mask(n1, n2):
    m1 = np.fft.fftfreq(n1, 1.0 / n1)
    m2 = np.fft.fftfreq(n2, 1.0 / n2)
    return (np.abs(m1)[:, None] < n1 / 3.0) & (np.abs(m2)[None, :] < n2 / 3.0)


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable tensor-product grid on the slab ``Sigma x (-b, 0)``."""

    L1: float
    L2: float
    b: float
    n1: int
    n2: int
    nz: int

    @cached_property
    def m1(self):
        return np.fft.fftfreq(self.n1, 1.0 / self.n1).astype(int)

    @cached_property
    def m2(self):
        return np.fft.fftfreq(self.n2, 1.0 / self.n2).astype(int)

    @cached_property
    def k1(self):
        """Wavenumbers ``2 pi m1 / L1`` broadcast to ``(n1, 1)``."""
        return (2.0 * np.pi / self.L1) * self.m1[:, None].astype(float)

    @cached_property
    def k2(self):
        return (2.0 * np.pi / self.L2) * self.m2[None, :].astype(float)

    @cached_property
    def kmag(self):
        """``|k|`` on the ``(n1, n2)`` mode array."""
        return np.sqrt(self.k1**2 + self.k2**2)

    @cached_property
    def _dk1(self):
        # derivative multipliers; the unpaired Nyquist mode is differentiated to 0
        k = self.k1.copy()
        if self.n1 % 2 == 0:
            k[self.n1 // 2] = 0.0
        return 1j * k

    @cached_property
    def _dk2(self):
        k = self.k2.copy()
        if self.n2 % 2 == 0:
            k[:, self.n2 // 2] = 0.0
        return 1j * k

    @cached_property
    def mask(self):
        """2/3-rule retention mask on the ``(n1, n2)`` mode array."""
        return dealias_mask(self.n1, self.n2)

    @cached_property
    def _cheb(self):
        return chebyshev_lobatto(self.nz, self.b)

    @property
    def z(self):
        return self._cheb[0]

    @property
    def D(self):
        """Vertical collocation differentiation matrix."""
        return self._cheb[1]

    @property
    def weights(self):
        """Clenshaw-Curtis quadrature weights on ``[-b, 0]``."""
        return self._cheb[2]

    @cached_property
    def x1(self):
        return (self.L1 / self.n1) * np.arange(self.n1)

    @cached_property
    def x2(self):
        return (self.L2 / self.n2) * np.arange(self.n2)

    @cached_property
    def btilde(self):
        """``1 + x3/b`` at the vertical nodes, shaped ``(nz, 1, 1)``."""
        return (1.0 + self.z / self.b)[:, None, None]

    @property
    def area(self):
        return self.L1 * self.L2

    @property
    def volume(self):
        return self.L1 * self.L2 * self.b

    def mesh(self):
        """Physical coordinates ``(X1, X2, X3)`` each of shape ``(nz, n1, n2)``."""
        X3, X1, X2 = np.meshgrid(self.z, self.x1, self.x2, indexing="ij")
        return X1, X2, X3

    def surface_mesh(self):
        X1, X2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        return X1, X2

    # transforms -----------------------------------------------------------
    def fft(self, a):
        return np.fft.fft2(a) / (self.n1 * self.n2)

    def ifft(self, c):
        return np.fft.ifft2(c).real * (self.n1 * self.n2)

    def d1(self, a):
        return np.fft.ifft2(self._dk1 * np.fft.fft2(a)).real

    def d2(self, a):
        return np.fft.ifft2(self._dk2 * np.fft.fft2(a)).real

    def d3(self, a):
        """Vertical derivative of a physical or spectral volume array."""
        return np.einsum("ij,...jab->...iab", self.D, a)

    def grad(self, a):
        """Cartesian gradient of a volume array: stacks a new leading axis."""
        return np.stack([self.d1(a), self.d2(a), self.d3(a)])

    def dealias(self, a):
        return np.fft.ifft2(self.mask * np.fft.fft2(a)).real

    def truncate(self, c):
        return c * self.mask

    # quadrature -----------------------------------------------------------
    def integrate_volume(self, a):
        """Integral over the slab of physical volume data (axes -3, -2, -1)."""
        return self.area * np.einsum("z,...zab->...", self.weights, a) / (self.n1 * self.n2)

    def integrate_surface(self, a):
        return self.area * np.mean(a, axis=(-2, -1))

    def top(self, a):
        return a[..., -1, :, :]

    def bottom(self, a):
        return a[..., 0, :, :]


def make_grid(params: Params | None, n1, n2, nz, *, L1=None, L2=None, b=None) -> Grid:
    """Build a grid for ``params`` (or explicit ``L1, L2, b``)."""
    if params is not None:
        L1, L2, b = params.L1, params.L2, params.b
    L1 = 1.0 if L1 is None else float(L1)
    L2 = 1.0 if L2 is None else float(L2)
    b = 1.0 if b is None else float(b)
    for name, n in (("n1", n1), ("n2", n2)):
        if int(n) != n or n < 2 or n % 2 or n > MAX_HORIZONTAL:
            raise ConfigurationError(
                f"must be an even integer in [2, {MAX_HORIZONTAL}], got {n!r}", f"grid.{name}"
            )
    if int(nz) != nz or nz < 4 or nz > MAX_VERTICAL:
        raise ConfigurationError(
            f"must be an integer in [4, {MAX_VERTICAL}], got {nz!r}", "grid.nz"
        )
    for name, v in (("L1", L1), ("L2", L2), ("b", b)):
        if not v > 0:
            raise ConfigurationError(f"must be > 0, got {v!r}", f"params.{name}")
    return Grid(L1, L2, b, int(n1), int(n2), int(nz))


def _readonly(a):
    a = np.array(a, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceField:
    """Real field on the cross-section, stored as Fourier coefficients.

    ``coef`` has shape ``(ncomp, n1, n2)``.
    """

    grid: Grid
    coef: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        g = self.grid
        if c.ndim != 3 or c.shape[1:] != (g.n1, g.n2):
            raise ConfigurationError(f"coefficient shape {c.shape} does not match grid")
        object.__setattr__(self, "coef", _readonly(c))

    @classmethod
    def from_values(cls, grid, values):
        v = np.asarray(values, dtype=float)
        return cls(grid, grid.fft(v if v.ndim == 3 else v[None]))

    @classmethod
    def zeros(cls, grid, ncomp=1):
        return cls(grid, np.zeros((ncomp, grid.n1, grid.n2), complex))

    @property
    def ncomp(self):
        return self.coef.shape[0]

    @property
    def values(self):
        """Nodal values, shape ``(ncomp, n1, n2)``."""
        return self.grid.ifft(self.coef)

    @property
    def scalar(self):
        """Nodal values of a one-component field, shape ``(n1, n2)``."""
        return self.values[0]

    def hermitian_defect(self):
        c = self.coef
        flipped = np.roll(np.flip(c, axis=(1, 2)), 1, axis=(1, 2))
        return float(np.max(np.abs(c - np.conj(flipped)), initial=0.0))

    def __add__(self, other):
        return SurfaceField(self.grid, self.coef + other.coef)

    def __sub__(self, other):
        return SurfaceField(self.grid, self.coef - other.coef)

    def __mul__(self, s):
        return SurfaceField(self.grid, self.coef * s)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VolumeField:
    """Real field on the slab: Fourier in ``x'``, collocation values in ``x3``.

    ``coef`` has shape ``(ncomp, nz, n1, n2)``; entry ``[c, j, :, :]`` holds the
    horizontal Fourier coefficients of component ``c`` at vertical node ``j``.
    """

    grid: Grid
    coef: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=complex)
        if c.ndim == 3:
            c = c[None]
        g = self.grid
        if c.ndim != 4 or c.shape[1:] != (g.nz, g.n1, g.n2):
            raise ConfigurationError(f"coefficient shape {c.shape} does not match grid")
        object.__setattr__(self, "coef", _readonly(c))

    @classmethod
    def from_values(cls, grid, values):
        v = np.asarray(values, dtype=float)
        return cls(grid, grid.fft(v if v.ndim == 4 else v[None]))

    @classmethod
    def zeros(cls, grid, ncomp=1):
        return cls(grid, np.zeros((ncomp, grid.nz, grid.n1, grid.n2), complex))

    @property
    def ncomp(self):
        return self.coef.shape[0]

    @property
    def values(self):
        """Nodal values, shape ``(ncomp, nz, n1, n2)``."""
        return self.grid.ifft(self.coef)

    @property
    def scalar(self):
        return self.values[0]

    def trace(self):
        """Restriction to the surface ``x3 = 0``."""
        return SurfaceField(self.grid, self.coef[:, -1])

    def hermitian_defect(self):
        c = self.coef
        flipped = np.roll(np.flip(c, axis=(2, 3)), 1, axis=(2, 3))
        return float(np.max(np.abs(c - np.conj(flipped)), initial=0.0))

    def __add__(self, other):
        return VolumeField(self.grid, self.coef + other.coef)

    def __sub__(self, other):
        return VolumeField(self.grid, self.coef - other.coef)

    def __mul__(self, s):
        return VolumeField(self.grid, self.coef * s)

    __rmul__ = __mul__


def sobolev_norm_surface(field: SurfaceField, s: float) -> float:
    """``H^s(Sigma)`` norm through the multiplier ``(1 + |k|^2)^s``.

    Exact for band-limited data, including fractional and negative ``s``.
    """
    if s < -1:
        raise ConfigurationError(f"surface Sobolev index must be >= -1, got {s}")
    g = field.grid
    w = (1.0 + g.kmag**2) ** s
    total = np.sum(w * np.abs(field.coef) ** 2) * g.area
    return float(np.sqrt(total))


def sobolev_norm_volume(field: VolumeField, k: int) -> float:
    """Integer-order ``H^k(Omega)`` norm.

    ``sum_{|alpha| <= k} ||d^alpha f||_0^2`` over all multi-indices, with
    horizontal derivatives spectral, vertical ones by collocation and the
    vertical integral by Clenshaw-Curtis.
    """
    if int(k) != k or k < 0 or k > MAX_VOLUME_ORDER:
        raise ConfigurationError(
            f"volume Sobolev order must be an integer in [0, {MAX_VOLUME_ORDER}], got {k!r}"
        )
    g = field.grid
    # vertical derivatives of every order up to k, per horizontal mode
    dz = [field.coef]
    for _ in range(k):
        dz.append(g.d3(dz[-1]))
    absk1 = np.abs(g.k1) ** 2
    absk2 = np.abs(g.k2) ** 2
    total = 0.0
    for a1, a2, a3 in product(range(k + 1), repeat=3):
        if a1 + a2 + a3 > k:
            continue
        mult = absk1**a1 * absk2**a2
        sq = np.einsum("z,czab->ab", g.weights, np.abs(dz[a3]) ** 2)
        total += np.sum(mult * sq)
    return float(np.sqrt(total * g.area))


def l2_volume(grid: Grid, a) -> float:
    """``L^2(Omega)`` norm of physical volume data (components summed)."""
    return float(np.sqrt(max(grid.integrate_volume(np.sum(np.reshape(a, (-1,) + np.shape(a)[-3:]) ** 2, axis=0)), 0.0)))


def l2_surface(grid: Grid, a) -> float:
    return float(np.sqrt(max(grid.integrate_surface(np.sum(np.reshape(a, (-1,) + np.shape(a)[-2:]) ** 2, axis=0)), 0.0)))


def poisson_extend(f: SurfaceField, grid: Grid | None = None) -> VolumeField:
    """Harmonic extension into the slab: mode ``k`` is damped by ``exp(|k| x3)``."""
    grid = f.grid if grid is None else grid
    decay = np.exp(grid.kmag[None, :, :] * grid.z[:, None, None])
    return VolumeField(grid, f.coef[:, None, :, :] * decay[None])
