"""Space-time grids, discrete calculus and quadrature.

Everything downstream works on a uniform vertex-centered lattice over the
box [-R, R]^N x [0, T], optionally masked to the ball {|x| < R}.  Fields are
stored one array per time level; all operators here are pure functions of
field snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp


class NumericalFailure(RuntimeError):
    """Blow-up, CFL exhaustion or other runtime numerical failure (CLI exit 3)."""


def _is_integer(x, tol=1e-9):
    return abs(x - round(x)) <= tol * max(1.0, abs(x))


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time discretization of [-R, R]^N x [0, T].

    ball_mask restricts the active node set to {x : |x| < R}.
    """

    dim: int
    half_width: float
    dx: float
    horizon: float
    dt: float
    ball_mask: bool = False

    def validate(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not np.isfinite(self.dx) or self.dx <= 0:
            raise ValueError("dx must be positive")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        r = self.half_width / self.dx
        if not _is_integer(r) or round(r) < 2:
            raise ValueError("half_width/dx must be an integer >= 2")
        k = self.horizon / self.dt
        if not _is_integer(k) or round(k) < 2:
            raise ValueError("horizon/dt must be an integer >= 2")

    @property
    def nx(self) -> int:
        """Nodes per axis."""
        return 2 * int(round(self.half_width / self.dx)) + 1

    @property
    def nt(self) -> int:
        """Number of time steps (levels = nt + 1)."""
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class Cylinder:
    """Axis-aligned space-time cylinder; radius set => spatial ball about 0."""

    xmin: tuple
    xmax: tuple
    t0: float
    t1: float
    radius: float | None = None

    @property
    def dim(self):
        return len(self.xmin)

    def contains(self, x, t, tol=1e-12):
        x = np.asarray(x, dtype=float)
        if t < self.t0 - tol or t > self.t1 + tol:
            return False
        if self.radius is not None:
            return float(np.linalg.norm(x)) < self.radius + tol
        return all(
            self.xmin[a] - tol <= x[a] <= self.xmax[a] + tol for a in range(self.dim)
        )

    def space_distance(self, x):
        """Euclidean distance from x to the spatial boundary of the cylinder."""
        x = np.asarray(x, dtype=float)
        if self.radius is not None:
            return self.radius - float(np.linalg.norm(x))
        side = min(
            min(x[a] - self.xmin[a], self.xmax[a] - x[a]) for a in range(self.dim)
        )
        return side


def centered_cylinder(R, tau, dim=1, ball=False) -> Cylinder:
    return Cylinder(
        xmin=tuple([-float(R)] * dim),
        xmax=tuple([float(R)] * dim),
        t0=0.0,
        t1=float(tau),
        radius=float(R) if ball else None,
    )


def parabolic_distance(point, Q: Cylinder, kind="d", alpha=None, gamma=None):
    """Distance from (x, t) in Q to the backward parabolic boundary of Q.

    kind "d"       : d(x, dOmega) + |t1 - t|^(1/2)
    kind "d_alpha" : d(x, dOmega)^alpha + |t1 - t|^(alpha/gamma)
    """
    x, t = point
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not Q.contains(x, t):
        raise ValueError(f"point {tuple(x)}, t={t} lies outside the cylinder")
    ds = max(Q.space_distance(x), 0.0)
    dtb = abs(Q.t1 - t)
    if kind == "d":
        return ds + np.sqrt(dtb)
    if kind == "d_alpha":
        if alpha is None or gamma is None:
            raise ValueError("kind d_alpha needs alpha and gamma")
        return ds ** alpha + dtb ** (alpha / gamma)
    raise ValueError(f"unknown distance kind {kind!r}")


class Grid:
    """Realized lattice: node coordinates, active mask, boundary layer."""

    def __init__(self, spec: GridSpec):
        spec.validate()
        self.spec = spec
        n = int(round(spec.half_width / spec.dx))
        axis = (np.arange(2 * n + 1) - n) * spec.dx
        self.axes = tuple([axis.copy() for _ in range(spec.dim)])
        self.ts = np.arange(spec.nt + 1) * spec.dt
        self.shape = tuple([len(a) for a in self.axes])
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.coords = np.stack(mesh, axis=-1)  # (*shape, dim)

        if spec.ball_mask:
            r2 = np.sum(self.coords ** 2, axis=-1)
            self.active = r2 < spec.half_width ** 2 - 1e-12
        else:
            self.active = np.ones(self.shape, dtype=bool)

        # Boundary layer: the nodes that carry Dirichlet/absorbing values.
        # Box: the rim.  Ball: active nodes with an inactive face neighbor
        # (stair-step shell); rim nodes of the hull are never active there.
        boundary = np.zeros(self.shape, dtype=bool)
        for a in range(spec.dim):
            sl_lo = [slice(None)] * spec.dim
            sl_hi = [slice(None)] * spec.dim
            sl_lo[a] = 0
            sl_hi[a] = -1
            boundary[tuple(sl_lo)] = True
            boundary[tuple(sl_hi)] = True
        if spec.ball_mask:
            near_inactive = np.zeros(self.shape, dtype=bool)
            for a in range(spec.dim):
                pad = np.ones(self.shape, dtype=bool)
                sl_c = [slice(None)] * spec.dim
                sl_n = [slice(None)] * spec.dim
                sl_c[a] = slice(0, -1)
                sl_n[a] = slice(1, None)
                nb = np.ones(self.shape, dtype=bool)
                nb[tuple(sl_c)] &= self.active[tuple(sl_n)]
                nb2 = np.ones(self.shape, dtype=bool)
                nb2[tuple(sl_n)] &= self.active[tuple(sl_c)]
                pad &= nb & nb2
                near_inactive |= ~pad
            boundary = self.active & (near_inactive | boundary)
        self.boundary = boundary & self.active
        self.interior = self.active & ~self.boundary

        self._laplacian_ops = None
        self._faces = None

    # -- basic geometry ----------------------------------------------------

    @property
    def dim(self):
        return self.spec.dim

    @property
    def dx(self):
        return self.spec.dx

    @property
    def dt(self):
        return self.spec.dt

    @property
    def n_levels(self):
        return self.spec.nt + 1

    def cylinder(self) -> Cylinder:
        R = self.spec.half_width
        return centered_cylinder(R, self.spec.horizon, self.dim, self.spec.ball_mask)

    def boundary_normals(self):
        """List of (multi-index, coordinates, outward unit normal)."""
        R = self.spec.half_width
        out = []
        for idx in np.argwhere(self.boundary):
            idx = tuple(int(i) for i in idx)
            x = self.coords[idx]
            if self.spec.ball_mask:
                nrm = np.linalg.norm(x)
                nu = x / nrm if nrm > 0 else np.zeros(self.dim)
            else:
                nu = np.zeros(self.dim)
                for a in range(self.dim):
                    if abs(x[a] - R) < 1e-12:
                        nu[a] = 1.0
                    elif abs(x[a] + R) < 1e-12:
                        nu[a] = -1.0
                n = np.linalg.norm(nu)
                nu = nu / n if n > 0 else nu
            out.append((idx, x.copy(), nu))
        return out

    def nearest_node(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = []
        for a in range(self.dim):
            i = int(round((x[a] - self.axes[a][0]) / self.dx))
            idx.append(int(np.clip(i, 0, self.shape[a] - 1)))
        return tuple(idx)

    def nearest_level(self, t):
        k = int(round(t / self.dt))
        return int(np.clip(k, 0, self.spec.nt))

    def subgrid_slices(self, half_width):
        """Index slices selecting the centered sub-box of given half width."""
        m = half_width / self.dx
        if not _is_integer(m):
            raise ValueError("sub half_width must be a node multiple of dx")
        n = int(round(self.spec.half_width / self.dx))
        m = int(round(m))
        if m > n:
            raise ValueError("sub half_width exceeds the grid")
        return tuple([slice(n - m, n + m + 1)] * self.dim)

    # -- Dirichlet Laplacian machinery --------------------------------------

    def laplacian_ops(self):
        """(L_int, B, int_flat, bnd_flat): Delta u|int = L_int u_int + B u_bnd."""
        if self._laplacian_ops is not None:
            return self._laplacian_ops
        shape = self.shape
        flat_of = -np.ones(shape, dtype=np.int64)
        int_idx = np.argwhere(self.interior)
        for k, idx in enumerate(int_idx):
            flat_of[tuple(idx)] = k
        bnd_of = -np.ones(shape, dtype=np.int64)
        bnd_idx = np.argwhere(self.boundary)
        for k, idx in enumerate(bnd_idx):
            bnd_of[tuple(idx)] = k
        n_int, n_bnd = len(int_idx), len(bnd_idx)
        inv_dx2 = 1.0 / self.dx ** 2

        rows, cols, vals = [], [], []
        browz, bcolz, bvalz = [], [], []
        for k, idx in enumerate(int_idx):
            idx = tuple(int(i) for i in idx)
            diag = 0.0
            for a in range(self.dim):
                for step in (-1, 1):
                    nb = list(idx)
                    nb[a] += step
                    nb = tuple(nb)
                    # interior nodes have all face neighbors active by construction
                    j = flat_of[nb]
                    diag -= inv_dx2
                    if j >= 0:
                        rows.append(k)
                        cols.append(int(j))
                        vals.append(inv_dx2)
                    else:
                        jb = bnd_of[nb]
                        browz.append(k)
                        bcolz.append(int(jb))
                        bvalz.append(inv_dx2)
            rows.append(k)
            cols.append(k)
            vals.append(diag)
        L = sp.csr_matrix((vals, (rows, cols)), shape=(n_int, n_int))
        B = sp.csr_matrix((bvalz, (browz, bcolz)), shape=(n_int, n_bnd))
        self._laplacian_ops = (L, B, int_idx, bnd_idx)
        return self._laplacian_ops

    def boundary_faces(self):
        """Faces (interior node, boundary node) carrying the diffusive outflux."""
        if self._faces is not None:
            return self._faces
        faces = []
        for idx in np.argwhere(self.interior):
            idx = tuple(int(i) for i in idx)
            for a in range(self.dim):
                for step in (-1, 1):
                    nb = list(idx)
                    nb[a] += step
                    nb = tuple(nb)
                    if self.boundary[nb]:
                        faces.append((idx, nb))
        self._faces = faces
        return faces


def make_grid(spec: GridSpec) -> Grid:
    """Validate the grid parameters and realize the lattice."""
    return Grid(spec)


# -- fields ------------------------------------------------------------------


@dataclass
class ScalarField:
    """One real value per active space-time node; shape (levels, *spatial)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expect = (self.grid.n_levels,) + self.grid.shape
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != {expect}")

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        vals = np.zeros((grid.n_levels,) + grid.shape)
        for k, t in enumerate(grid.ts):
            vals[k] = np.asarray(fn(grid.coords, float(t)), dtype=float)
        vals[:, ~grid.active] = 0.0
        return cls(grid, vals)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        vals = np.full((grid.n_levels,) + grid.shape, float(c))
        vals[:, ~grid.active] = 0.0
        return cls(grid, vals)

    def level(self, k: int) -> np.ndarray:
        return self.values[k]

    def check_finite(self):
        if not np.all(np.isfinite(self.values[:, self.grid.active])):
            raise ValueError("field has non-finite values at active nodes")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """One N-vector per active node; shape (levels, *spatial, N)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expect = (self.grid.n_levels,) + self.grid.shape + (self.grid.dim,)
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != {expect}")

    def level(self, k: int) -> np.ndarray:
        return self.values[k]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values ** 2, axis=-1))


# -- discrete calculus --------------------------------------------------------


def gradient_level(values: np.ndarray, dx: float) -> np.ndarray:
    """Central differences interior, one-sided at the rim; exact for affine."""
    comps = [np.gradient(values, dx, axis=a, edge_order=1) for a in range(values.ndim)]
    return np.stack(comps, axis=-1)


def gradient_central(u: ScalarField, k: int) -> np.ndarray:
    return gradient_level(u.level(k), u.grid.dx)


def gradient_field(u: ScalarField) -> VectorField:
    vals = np.stack([gradient_level(u.values[k], u.grid.dx) for k in range(u.grid.n_levels)])
    return VectorField(u.grid, vals)


def godunov_magnitude_level(values: np.ndarray, dx: float) -> np.ndarray:
    """Monotone upwind surrogate of |Du| per node.

    Per axis max(backward-diff^+, -forward-diff^-): the Godunov selection for
    a convex Hamiltonian increasing in |p| under backward-in-time marching.
    """
    total = np.zeros_like(values)
    with np.errstate(over="ignore"):  # inf is a valid surrogate while probing CFL
        for a in range(values.ndim):
            dminus = np.zeros_like(values)
            dplus = np.zeros_like(values)
            sl_c = [slice(None)] * values.ndim
            sl_m = [slice(None)] * values.ndim
            sl_c[a] = slice(1, None)
            sl_m[a] = slice(0, -1)
            diff = (values[tuple(sl_c)] - values[tuple(sl_m)]) / dx
            dminus[tuple(sl_c)] = diff
            dplus[tuple(sl_m)] = diff
            # edge nodes keep only the available one-sided branch (zero filled)
            g = np.maximum(np.maximum(dminus, 0.0), np.maximum(-dplus, 0.0))
            total += g * g
    return np.sqrt(total)


def gradient_godunov(u: ScalarField, k: int) -> np.ndarray:
    return godunov_magnitude_level(u.level(k), u.grid.dx)


def laplacian_level(values: np.ndarray, dx: float) -> np.ndarray:
    """(2N+1)-point stencil at interior nodes; rim entries set to 0."""
    out = np.zeros_like(values)
    inner = tuple([slice(1, -1)] * values.ndim)
    acc = np.zeros_like(values[inner])
    for a in range(values.ndim):
        sl_c = [slice(1, -1)] * values.ndim
        sl_p = [slice(1, -1)] * values.ndim
        sl_m = [slice(1, -1)] * values.ndim
        sl_p[a] = slice(2, None)
        sl_m[a] = slice(0, -2)
        acc += values[tuple(sl_p)] - 2.0 * values[tuple(sl_c)] + values[tuple(sl_m)]
    out[inner] = acc / dx ** 2
    return out


def laplacian(u: ScalarField, k: int) -> np.ndarray:
    return laplacian_level(u.level(k), u.grid.dx)


def time_derivative(u: ScalarField) -> np.ndarray:
    """Central in time at interior levels, one-sided at the ends."""
    return np.gradient(u.values, u.grid.dt, axis=0, edge_order=1)


# -- quadrature ---------------------------------------------------------------


def _cell_weights(nodes: np.ndarray, h: float, lo: float, hi: float) -> np.ndarray:
    """Length of each node cell [x-h/2, x+h/2] clipped to [lo, hi]."""
    left = np.maximum(nodes - 0.5 * h, lo)
    right = np.minimum(nodes + 0.5 * h, hi)
    return np.maximum(right - left, 0.0)


def quadrature_weights(grid: Grid, sub: Cylinder | None = None):
    """(time weights, spatial weight array) for node-cell quadrature over sub."""
    if sub is None:
        sub = grid.cylinder()
    tw = _cell_weights(grid.ts, grid.dt, sub.t0, sub.t1)
    if grid.dim == 1:
        sw = _cell_weights(grid.axes[0], grid.dx, sub.xmin[0], sub.xmax[0])
    else:
        wx = _cell_weights(grid.axes[0], grid.dx, sub.xmin[0], sub.xmax[0])
        wy = _cell_weights(grid.axes[1], grid.dx, sub.xmin[1], sub.xmax[1])
        sw = np.outer(wx, wy)
    sel = grid.active.astype(float).copy()
    if sub.radius is not None:
        r2 = np.sum(grid.coords ** 2, axis=-1)
        sel *= (r2 < sub.radius ** 2 + 1e-12).astype(float)
    return tw, sw * sel


def lq_norm(u: ScalarField, q: float, sub: Cylinder | None = None) -> float:
    """Space-time L^q norm by node-cell quadrature."""
    if q < 1:
        raise ValueError("q must be >= 1")
    tw, sw = quadrature_weights(u.grid, sub)
    acc = 0.0
    for k, w in enumerate(tw):
        if w == 0.0:
            continue
        acc += w * float(np.sum(np.abs(u.values[k]) ** q * sw))
    return acc ** (1.0 / q)


def spacetime_integral(grid: Grid, level_values, sub: Cylinder | None = None) -> float:
    """Integral of a per-level array stack (levels, *shape) over sub."""
    tw, sw = quadrature_weights(grid, sub)
    acc = 0.0
    for k, w in enumerate(tw):
        if w == 0.0:
            continue
        acc += w * float(np.sum(level_values[k] * sw))
    return acc


def space_integral(grid: Grid, values: np.ndarray, sub: Cylinder | None = None) -> float:
    """Spatial integral of one level over the spatial section of sub."""
    _, sw = quadrature_weights(grid, sub)
    return float(np.sum(values * sw))


# -- interpolation --------------------------------------------------------------


def sample_field(u: ScalarField, x, t) -> float:
    """Multilinear in space, linear in time.  Exact at nodes."""
    g = u.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eps = 1e-9 * g.dx
    for a in range(g.dim):
        if x[a] < g.axes[a][0] - eps or x[a] > g.axes[a][-1] + eps:
            raise ValueError(f"sample point x={tuple(x)} outside the grid box")
    if t < g.ts[0] - 1e-9 * g.dt or t > g.ts[-1] + 1e-9 * g.dt:
        raise ValueError(f"sample time t={t} outside the grid horizon")

    def axis_frac(val, nodes, h, nmax):
        i = int(np.floor((val - nodes[0]) / h))
        i = min(max(i, 0), nmax - 2)
        f = (val - nodes[i]) / h
        return i, min(max(f, 0.0), 1.0)

    kt, ft = axis_frac(t, g.ts, g.dt, g.n_levels) if g.n_levels > 1 else (0, 0.0)

    def space_interp(level):
        if g.dim == 1:
            i, f = axis_frac(x[0], g.axes[0], g.dx, g.shape[0])
            return (1 - f) * level[i] + f * level[i + 1]
        i, fx = axis_frac(x[0], g.axes[0], g.dx, g.shape[0])
        j, fy = axis_frac(x[1], g.axes[1], g.dx, g.shape[1])
        return (
            (1 - fx) * (1 - fy) * level[i, j]
            + fx * (1 - fy) * level[i + 1, j]
            + (1 - fx) * fy * level[i, j + 1]
            + fx * fy * level[i + 1, j + 1]
        )

    v0 = space_interp(u.values[kt])
    if ft == 0.0:
        return float(v0)
    v1 = space_interp(u.values[kt + 1])
    return float((1 - ft) * v0 + ft * v1)


def sample_points(u: ScalarField, pts, t: float) -> np.ndarray:
    """Vectorized multilinear sampling of many spatial points at one time."""
    g = u.grid
    pts = np.asarray(pts, dtype=float).reshape(-1, g.dim)
    eps = 1e-9 * g.dx
    for a in range(g.dim):
        if np.any(pts[:, a] < g.axes[a][0] - eps) or np.any(pts[:, a] > g.axes[a][-1] + eps):
            bad = pts[np.argmax((pts[:, a] < g.axes[a][0] - eps) | (pts[:, a] > g.axes[a][-1] + eps))]
            raise ValueError(f"sample point x={tuple(bad)} outside the grid box")
    if t < g.ts[0] - 1e-9 * g.dt or t > g.ts[-1] + 1e-9 * g.dt:
        raise ValueError(f"sample time t={t} outside the grid horizon")

    kt = int(np.clip(np.floor(t / g.dt), 0, g.n_levels - 2))
    ft = min(max((t - g.ts[kt]) / g.dt, 0.0), 1.0)

    idx = []
    frac = []
    for a in range(g.dim):
        i = np.clip(np.floor((pts[:, a] - g.axes[a][0]) / g.dx).astype(int), 0, g.shape[a] - 2)
        f = np.clip((pts[:, a] - g.axes[a][i]) / g.dx, 0.0, 1.0)
        idx.append(i)
        frac.append(f)

    def space_interp(level):
        if g.dim == 1:
            i, f = idx[0], frac[0]
            return (1 - f) * level[i] + f * level[i + 1]
        i, fx = idx[0], frac[0]
        j, fy = idx[1], frac[1]
        return (
            (1 - fx) * (1 - fy) * level[i, j]
            + fx * (1 - fy) * level[i + 1, j]
            + (1 - fx) * fy * level[i, j + 1]
            + fx * fy * level[i + 1, j + 1]
        )

    v0 = space_interp(u.values[kt])
    if ft == 0.0:
        return v0
    return (1 - ft) * v0 + ft * space_interp(u.values[kt + 1])


def restrict_field(u: ScalarField, half_width: float) -> ScalarField:
    """Restriction to the centered sub-box of given half width (node-aligned)."""
    g = u.grid
    sl = g.subgrid_slices(half_width)
    sub = Grid(
        GridSpec(g.dim, half_width, g.dx, g.spec.horizon, g.dt, ball_mask=False)
    )
    return ScalarField(sub, u.values[(slice(None),) + sl].copy())


def restrict_vector(b: VectorField, half_width: float) -> VectorField:
    g = b.grid
    sl = g.subgrid_slices(half_width)
    sub = Grid(
        GridSpec(g.dim, half_width, g.dx, g.spec.horizon, g.dt, ball_mask=False)
    )
    return VectorField(sub, b.values[(slice(None),) + sl + (slice(None),)].copy())


# -- serialization ---------------------------------------------------------------


def write_field_csv(u: ScalarField, path_or_buf):
    """CSV per spec: '# grid: N,R,dx,T,dt,mask' then rows t,x1[,x2],value."""
    s = u.grid.spec
    own = isinstance(path_or_buf, (str,))
    fh = open(path_or_buf, "w") if own else path_or_buf
    try:
        fh.write(
            "# grid: %d,%.17g,%.17g,%.17g,%.17g,%d\n"
            % (s.dim, s.half_width, s.dx, s.horizon, s.dt, int(s.ball_mask))
        )
        act = np.argwhere(u.grid.active)
        for k, t in enumerate(u.grid.ts):
            lev = u.values[k]
            for idx in act:
                idx = tuple(int(i) for i in idx)
                x = u.grid.coords[idx]
                cols = ["%.17g" % t] + ["%.17g" % xi for xi in x]
                cols.append("%.17g" % lev[idx])
                fh.write(",".join(cols) + "\n")
    finally:
        if own:
            fh.close()


def read_field_csv(path_or_buf) -> ScalarField:
    own = isinstance(path_or_buf, (str,))
    fh = open(path_or_buf, "r") if own else path_or_buf
    try:
        header = fh.readline().strip()
        while header.startswith("#") and not header.startswith("# grid:"):
            header = fh.readline().strip()
        if not header.startswith("# grid:"):
            raise ValueError("missing '# grid:' header")
        parts = header.split(":", 1)[1].split(",")
        spec = GridSpec(
            dim=int(parts[0]),
            half_width=float(parts[1]),
            dx=float(parts[2]),
            horizon=float(parts[3]),
            dt=float(parts[4]),
            ball_mask=bool(int(parts[5])),
        )
        grid = Grid(spec)
        vals = np.zeros((grid.n_levels,) + grid.shape)
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cols = line.split(",")
            t = float(cols[0])
            x = [float(c) for c in cols[1 : 1 + grid.dim]]
            v = float(cols[1 + grid.dim])
            k = grid.nearest_level(t)
            idx = grid.nearest_node(x)
            vals[(k,) + idx] = v
        return ScalarField(grid, vals)
    finally:
        if own:
            fh.close()
