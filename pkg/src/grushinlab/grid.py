"""
Discrete calculus for Baouendi-Grushin vector fields on boxes.

Grid layout
-----------
Every axis of the box ``[a, b]`` is split into ``N`` cells of width
``h = (b - a) / N`` and the unknowns live at the cell centres
``a + (i + 1/2) h``.  The homogeneous Dirichlet condition is imposed through
odd-reflected ghost values (``u[-1] = -u[0]``, ``u[N] = -u[N-1]``), so the
boundary value interpolates to zero on the box faces.

Gradient
--------
At each node the sub-elliptic gradient is evaluated with one-sided
differences.  There are ``2**n`` choices of forward/backward direction per
node (``n = m + k``); a :class:`VectorField` stores all of them and every
quadrature over vector fields averages the orientations.  This keeps a full
``(m + k)``-vector at every node (needed for ``|grad u|^p``) while the
``p = 2, gamma = 0`` composite ``div(grad u)`` is exactly the 5-point
Laplacian.  The divergence is defined as the negative quadrature adjoint of
the gradient, so summation by parts holds to rounding.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GrushinDomain",
    "ScalarField",
    "VectorField",
    "homogeneous_dimension",
    "grushin_gradient",
    "grushin_divergence",
    "p_grushin",
    "integrate",
    "integrate_real",
    "inner",
    "vector_inner",
    "gradient_magnitude",
    "p_energy",
    "sobolev_seminorm",
    "grushin_matrix",
    "default_eps",
    "write_field_csv",
    "read_field_csv",
    "read_csv_header",
    "product_of_sines",
]


@dataclass(frozen=True)
class GrushinDomain:
    """Box in R^{m+k} with cell-centred grid and degeneracy exponent gamma.

    The first ``m`` axes are the x-variables, the last ``k`` the y-variables.
    """

    m: int
    k: int
    gamma: float
    extents: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        extents = tuple((float(a), float(b)) for a, b in self.extents)
        resolution = tuple(int(n) for n in self.resolution)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "gamma", float(self.gamma))
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        n = self.m + self.k
        if len(extents) != n or len(resolution) != n:
            raise ValueError(
                f"need {n} extents and resolutions, got {len(extents)} and {len(resolution)}"
            )
        for axis, ((a, b), N) in enumerate(zip(extents, resolution)):
            if not b > a:
                raise ValueError(f"axis {axis}: empty interval [{a}, {b}]")
            if N < 4:
                raise ValueError(f"axis {axis}: resolution must be >= 4, got {N}")

    @classmethod
    def box(cls, m=1, k=1, gamma=0.0, extents=None, grid=32):
        """Convenience constructor; ``grid`` may be an int or a per-axis sequence."""
        n = m + k
        if extents is None:
            extents = [(0.0, 1.0)] * n
        if np.isscalar(grid):
            grid = [int(grid)] * n
        return cls(m, k, gamma, tuple(tuple(e) for e in extents), tuple(grid))

    @property
    def n(self) -> int:
        return self.m + self.k

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / N for (a, b), N in zip(self.extents, self.resolution))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.extents]))

    @property
    def Q(self) -> float:
        return homogeneous_dimension(self)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            a + (np.arange(N) + 0.5) * h
            for (a, _), N, h in zip(self.extents, self.resolution, self.spacing)
        )

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def x_norm(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coords[: self.m]))

    @cached_property
    def y_weight(self) -> np.ndarray:
        # |x|^gamma at every node; 0**0 == 1 keeps gamma = 0 Euclidean
        return np.power(self.x_norm, self.gamma)

    @cached_property
    def orientations(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product((1, -1), repeat=self.n))

    def axis_weight(self, axis: int):
        return 1.0 if axis < self.m else self.y_weight

    def refined(self, factor: int = 2) -> "GrushinDomain":
        return GrushinDomain(
            self.m, self.k, self.gamma, self.extents,
            tuple(N * factor for N in self.resolution),
        )

    def with_resolution(self, resolution) -> "GrushinDomain":
        if np.isscalar(resolution):
            resolution = [int(resolution)] * self.n
        return GrushinDomain(self.m, self.k, self.gamma, self.extents, tuple(resolution))


class ScalarField:
    """Complex grid function with zero Dirichlet data on the box boundary."""

    __slots__ = ("domain", "values")

    def __init__(self, domain: GrushinDomain, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != domain.shape:
            if values.size == domain.size:
                values = values.reshape(domain.shape)
            else:
                raise ValueError(
                    f"field has {values.size} values, domain has {domain.size} interior nodes"
                )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.domain = domain
        self.values = values

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.shape, dtype=complex))

    @classmethod
    def from_function(cls, domain, func: Callable[..., np.ndarray]):
        """Sample ``func(*coords)`` at the interior nodes."""
        return cls(domain, np.broadcast_to(func(*domain.coords), domain.shape))

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.domain != self.domain:
                raise ValueError("fields live on different domains")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.domain, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.domain, self.values - self._coerce(other))

    def __mul__(self, other):
        return ScalarField(self.domain, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.domain, self.values / self._coerce(other))

    def __neg__(self):
        return ScalarField(self.domain, -self.values)

    def __abs__(self):
        return ScalarField(self.domain, np.abs(self.values))

    def __repr__(self):
        return f"ScalarField(shape={self.domain.shape}, max|u|={np.abs(self.values).max():.3g})"


class VectorField:
    """Sub-elliptic vector field.

    ``components`` has shape ``(2**n, n, *domain.shape)``: for every one-sided
    stencil orientation and every node, the ``n = m + k`` components, the first
    ``m`` in the X_i slots and the last ``k`` in the |x|^gamma d/dy_j slots.
    """

    __slots__ = ("domain", "components")

    def __init__(self, domain: GrushinDomain, components):
        components = np.asarray(components, dtype=complex)
        expected = (2**domain.n, domain.n) + domain.shape
        if components.shape != expected:
            raise ValueError(f"components shape {components.shape}, expected {expected}")
        self.domain = domain
        self.components = components

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros((2**domain.n, domain.n) + domain.shape, dtype=complex))

    def __mul__(self, other):
        if isinstance(other, np.ndarray) and other.shape == (2**self.domain.n,) + self.domain.shape:
            other = other[:, None]
        return VectorField(self.domain, self.components * other)

    __rmul__ = __mul__

    def __add__(self, other):
        return VectorField(self.domain, self.components + other.components)

    def __sub__(self, other):
        return VectorField(self.domain, self.components - other.components)


def homogeneous_dimension(domain: GrushinDomain) -> float:
    """Q = m + k (gamma + 1)."""
    return domain.m + domain.k * (domain.gamma + 1.0)


# one-sided differences with odd ghost reflection, and their transposes


def _fwd(u, axis, h):
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[:-1] = u[1:] - u[:-1]
    out[-1] = -2.0 * u[-1]
    return np.moveaxis(out / h, 0, axis)


def _bwd(u, axis, h):
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[1:] = u[1:] - u[:-1]
    out[0] = 2.0 * u[0]
    return np.moveaxis(out / h, 0, axis)


def _fwd_T(g, axis, h):
    g = np.moveaxis(g, axis, 0)
    out = -g.copy()
    out[1:] += g[:-1]
    out[-1] -= g[-1]
    return np.moveaxis(out / h, 0, axis)


def _bwd_T(g, axis, h):
    g = np.moveaxis(g, axis, 0)
    out = g.copy()
    out[:-1] -= g[1:]
    out[0] += g[0]
    return np.moveaxis(out / h, 0, axis)


def _values(u):
    return u.values if isinstance(u, ScalarField) else np.asarray(u)


def grushin_gradient(u: ScalarField) -> VectorField:
    dom = u.domain
    vals = u.values
    comps = np.empty((2**dom.n, dom.n) + dom.shape, dtype=complex)
    for d, h in enumerate(dom.spacing):
        w = dom.axis_weight(d)
        fwd = w * _fwd(vals, d, h)
        bwd = w * _bwd(vals, d, h)
        for s, orient in enumerate(dom.orientations):
            comps[s, d] = fwd if orient[d] > 0 else bwd
    return VectorField(dom, comps)


def grushin_divergence(V: VectorField) -> ScalarField:
    """Negative quadrature adjoint of :func:`grushin_gradient`."""
    dom = V.domain
    out = np.zeros(dom.shape, dtype=complex)
    orient = np.array(dom.orientations)
    for d, h in enumerate(dom.spacing):
        w = dom.axis_weight(d)
        plus = V.components[orient[:, d] > 0, d].sum(axis=0)
        minus = V.components[orient[:, d] < 0, d].sum(axis=0)
        out -= _fwd_T(w * plus, d, h) + _bwd_T(w * minus, d, h)
    return ScalarField(dom, out / 2**dom.n)


def gradient_magnitude(V: VectorField) -> np.ndarray:
    """Euclidean norm over the m+k components, shape ``(2**n, *shape)``."""
    return np.sqrt(np.sum(np.abs(V.components) ** 2, axis=1))


def default_eps(phi: ScalarField) -> float:
    scale = float(np.abs(phi.values).max())
    return 1e-10 * (scale if scale > 0 else 1.0)


def p_grushin(phi: ScalarField, p: float, eps: float | None = None) -> ScalarField:
    """div_gamma(|grad_gamma phi|^{p-2} grad_gamma phi).

    For ``p < 2`` the factor is evaluated as ``(|grad|^2 + eps^2)^{(p-2)/2}``;
    ``eps`` defaults to ``1e-10 * max|phi|``.
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    G = grushin_gradient(phi)
    if p == 2:
        return grushin_divergence(G)
    mag2 = np.sum(np.abs(G.components) ** 2, axis=1)
    if p < 2:
        if eps is None:
            eps = default_eps(phi)
        factor = (mag2 + eps**2) ** ((p - 2) / 2)
    else:
        factor = mag2 ** ((p - 2) / 2)
    return grushin_divergence(G * factor)


def integrate(u) -> complex:
    """Midpoint quadrature; the cell weights sum to the box volume."""
    return complex(u.domain.cell_volume * np.sum(u.values))


def integrate_real(g, domain: GrushinDomain | None = None) -> float:
    if isinstance(g, ScalarField):
        domain, g = g.domain, g.values.real
    if domain is None:
        raise ValueError("domain required for a bare array")
    g = np.asarray(g, dtype=float)
    if g.shape != domain.shape:
        raise ValueError(f"integrand shape {g.shape} != domain shape {domain.shape}")
    return float(domain.cell_volume * np.sum(g))


def inner(u: ScalarField, v: ScalarField) -> complex:
    """<u, v> = int u conj(v)."""
    return complex(u.domain.cell_volume * np.vdot(v.values, u.values))


def vector_inner(V: VectorField, W: VectorField) -> complex:
    dom = V.domain
    return complex(dom.cell_volume * np.vdot(W.components, V.components) / 2**dom.n)


def p_energy(u: ScalarField, p: float) -> float:
    """int |grad_gamma u|^p, averaged over stencil orientations."""
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    mag = gradient_magnitude(grushin_gradient(u))
    return float(u.domain.cell_volume * np.sum(mag**p) / 2**u.domain.n)


def sobolev_seminorm(u: ScalarField, p: float) -> float:
    return p_energy(u, p) ** (1.0 / p)


def _diff_matrix(N, h, forward):
    main = -np.ones(N) if forward else np.ones(N)
    if forward:
        main[-1] = -2.0
        D = sp.diags([main, np.ones(N - 1)], [0, 1], shape=(N, N))
    else:
        main[0] = 2.0
        D = sp.diags([main, -np.ones(N - 1)], [0, -1], shape=(N, N))
    return (D / h).tocsr()


def grushin_matrix(domain: GrushinDomain, weights=None) -> sp.csr_matrix:
    """Sparse matrix of ``-div_gamma(omega grad_gamma .)`` on flattened (C-order) nodes.

    ``weights`` (shape ``(2**n, *shape)``, one value per stencil orientation and
    node) defaults to ones, giving the p = 2 operator of this module.  The
    matrix is symmetric, and positive definite for positive weights.
    """
    n = domain.n
    orient = np.array(domain.orientations)
    if weights is None:
        weights = np.ones((2**n,) + domain.shape)
    A = sp.csr_matrix((domain.size, domain.size))
    for d, (N, h) in enumerate(zip(domain.resolution, domain.spacing)):
        left = sp.identity(int(np.prod(domain.shape[:d])), format="csr")
        right = sp.identity(int(np.prod(domain.shape[d + 1:])), format="csr")
        w2 = np.broadcast_to(domain.axis_weight(d), domain.shape) ** 2
        for forward, sign in ((True, 1), (False, -1)):
            omega = weights[orient[:, d] == sign].sum(axis=0) / 2**n
            W = sp.diags(np.ravel(w2 * omega))
            D = sp.kron(sp.kron(left, _diff_matrix(N, h, forward)), right, format="csr")
            A = A + D.T @ W @ D
    return A.tocsr()


# CSV snapshots: one row per node, coordinates then real/imag parts


def write_field_csv(path, field: ScalarField, meta: dict | None = None):
    dom = field.domain
    path = Path(path)
    header = {
        "m": dom.m, "k": dom.k, "gamma": repr(dom.gamma),
        "extents": ";".join(f"{a!r},{b!r}" for a, b in dom.extents),
        "resolution": ",".join(str(N) for N in dom.resolution),
    }
    header.update(meta or {})
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key, val in header.items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        names = [f"x{i + 1}" for i in range(dom.m)] + [f"y{j + 1}" for j in range(dom.k)]
        writer.writerow(names + ["re", "im"])
        coords = [c.ravel() for c in dom.coords]
        vals = field.values.ravel()
        for idx in range(dom.size):
            row = [format(c[idx], ".17g") for c in coords]
            row += [format(vals[idx].real, ".17g"), format(vals[idx].imag, ".17g")]
            writer.writerow(row)


def read_csv_header(path) -> tuple[dict, list[list[str]]]:
    meta, rows = {}, []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows


def read_field_csv(path) -> tuple[ScalarField, dict]:
    meta, rows = read_csv_header(path)
    extents = tuple(
        tuple(float(v) for v in pair.split(",")) for pair in meta["extents"].split(";")
    )
    dom = GrushinDomain(
        int(meta["m"]), int(meta["k"]), float(meta["gamma"]), extents,
        tuple(int(v) for v in meta["resolution"].split(",")),
    )
    data = np.array(rows[1:], dtype=float)
    values = data[:, -2] + 1j * data[:, -1]
    return ScalarField(dom, values.reshape(dom.shape)), meta


def product_of_sines(domain: GrushinDomain, modes: Sequence[int] | None = None) -> ScalarField:
    """prod_i sin(j_i pi (z_i - a_i) / L_i): zero on the box boundary."""
    modes = modes or [1] * domain.n
    vals = np.ones(domain.shape)
    for c, (a, b), j in zip(domain.coords, domain.extents, modes):
        vals = vals * np.sin(j * np.pi * (c - a) / (b - a))
    return ScalarField(domain, vals)
