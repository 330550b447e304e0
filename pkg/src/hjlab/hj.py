"""Backward viscous Hamilton-Jacobi solver.

Solves -du/dt - sigma*Lap(u) + h(x,t)|Du|^gamma = f(x,t) on the grid cylinder,
gamma > 2, marching from the terminal level with implicit diffusion and an
explicit Godunov Hamiltonian.  The time step adapts to the realized gradient;
constants are exact fixed points of the scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (
    Grid,
    NumericalFailure,
    ScalarField,
    godunov_magnitude_level,
    gradient_level,
    laplacian_level,
    time_derivative,
)

CFL_EPS = 1e-12


# -- derived exponents ---------------------------------------------------------


def gamma_conjugate(gamma: float) -> float:
    return gamma / (gamma - 1.0)


def critical_q0(gamma: float, dim: int) -> float:
    """Threshold integrability exponent (N+2)(gamma-1)/gamma."""
    return (dim + 2) / gamma_conjugate(gamma)


def alpha_zero(gamma: float) -> float:
    """Intrinsic Hölder exponent (gamma-2)/(gamma-1)."""
    return (gamma - 2.0) / (gamma - 1.0)


def time_pair_exponent(M: float, gamma: float) -> float:
    """M^(2/gamma + alpha0*(gamma-1)/gamma); identically M for every M > 0."""
    a0 = alpha_zero(gamma)
    return M ** (2.0 / gamma + a0 * (gamma - 1.0) / gamma)


# -- problem definition ----------------------------------------------------------


def _eval_on(grid: Grid, obj, t: float) -> np.ndarray:
    """Sample a constant / callable / ScalarField at one time level."""
    if obj is None:
        return np.zeros(grid.shape)
    if isinstance(obj, ScalarField):
        ts = obj.grid.ts
        k = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        f = (t - ts[k]) / (ts[k + 1] - ts[k])
        f = min(max(f, 0.0), 1.0)
        return (1 - f) * obj.values[k] + f * obj.values[k + 1]
    if callable(obj):
        return np.asarray(obj(grid.coords, float(t)), dtype=float) * np.ones(grid.shape)
    return np.full(grid.shape, float(obj))


@dataclass
class HJProblem:
    gamma: float
    sigma: float
    h0: float
    h1: float
    h: object = None  # constant, callable(x, t) or ScalarField; default h0
    f: object = 0.0  # constant, callable(x, t) or ScalarField
    terminal: object = 0.0  # constant or callable(x) for u(., T)
    lateral: object = 0.0  # constant or callable(x, t) on the boundary layer
    q: float | None = None  # integrability exponent of f (metadata)

    def __post_init__(self):
        if not self.gamma > 2:
            raise ValueError("gamma must exceed 2")
        if not (0 < self.sigma <= 1):
            raise ValueError("sigma must lie in (0, 1]")
        if not (0 < self.h0 <= self.h1):
            raise ValueError("coefficient bounds need 0 < h0 <= h1")
        if self.h is None:
            self.h = self.h0

    @property
    def gamma_conj(self) -> float:
        return gamma_conjugate(self.gamma)

    @property
    def alpha0(self) -> float:
        return alpha_zero(self.gamma)

    def q0(self, dim: int) -> float:
        return critical_q0(self.gamma, dim)

    def h_level(self, grid: Grid, t: float) -> np.ndarray:
        arr = _eval_on(grid, self.h, t)
        act = grid.active
        tol = 1e-9 * max(1.0, self.h1)
        if np.min(arr[act]) < self.h0 - tol or np.max(arr[act]) > self.h1 + tol:
            raise ValueError("h(x,t) leaves the [h0, h1] bounds")
        return arr

    def f_level(self, grid: Grid, t: float) -> np.ndarray:
        return _eval_on(grid, self.f, t)

    def terminal_level(self, grid: Grid) -> np.ndarray:
        T = grid.ts[-1]
        if callable(self.terminal):
            return np.asarray(self.terminal(grid.coords), dtype=float) * np.ones(grid.shape)
        return _eval_on(grid, self.terminal, T)

    def lateral_values(self, grid: Grid, bnd_idx, t: float) -> np.ndarray:
        if callable(self.lateral):
            xs = np.stack([grid.coords[tuple(i)] for i in bnd_idx])
            return np.asarray(self.lateral(xs, float(t)), dtype=float) * np.ones(len(bnd_idx))
        return np.full(len(bnd_idx), float(self.lateral))


@dataclass
class HJSolution:
    u: ScalarField
    residual: ScalarField
    log: list = field(default_factory=list)

    @property
    def max_interior_residual(self) -> float:
        g = self.u.grid
        return float(np.max(np.abs(self.residual.values[:, g.interior]))) if g.interior.any() else 0.0


# -- solver -----------------------------------------------------------------------


def solve_hj(
    problem: HJProblem,
    grid: Grid,
    gradient_bound: float | None = None,
    cfl_safety: float = 1.0,
    max_halvings: int = 10,
    max_substeps: int = 100000,
) -> HJSolution:
    """March the backward equation from the terminal level.

    Diffusion is implicit (direct sparse solve per step), the Hamiltonian
    h * (Godunov |Du|)^gamma explicit.  Each macro step is subdivided so that
    dt <= dx / (gamma*h1*P^(gamma-1) + eps) holds for the realized Godunov
    gradient P; a step whose realized gradient invalidates its own dt is
    retried with halved dt, at most max_halvings times, and a macro step may
    not need more than max_substeps subdivisions.
    """
    L, B, int_idx, bnd_idx = grid.laplacian_ops()
    n_int = len(int_idx)
    int_mask = grid.interior
    eye = sp.identity(n_int, format="csc")
    lu_cache: dict[float, object] = {}

    def factor(dt):
        key = float(dt)
        if key not in lu_cache:
            lu_cache[key] = spla.splu((eye - problem.sigma * dt * L).tocsc())
        return lu_cache[key]

    def blowup_at(arr, t):
        bad = np.argwhere(~np.isfinite(arr))
        idx = tuple(int(i) for i in bad[0]) if len(bad) else None
        x = grid.coords[idx] if idx is not None else None
        raise NumericalFailure(f"blow-up detected at (x={None if x is None else tuple(x)}, t={t})")

    def cfl_dt(P):
        return grid.dx / (problem.gamma * problem.h1 * max(P, 0.0) ** (problem.gamma - 1.0) + CFL_EPS)

    nt = grid.spec.nt
    levels = np.zeros((nt + 1,) + grid.shape)
    levels[nt] = problem.terminal_level(grid)
    levels[nt][~grid.active] = 0.0

    log = []
    P_user = gradient_bound if gradient_bound is not None else 0.0
    v = levels[nt].copy()
    t_cur = grid.ts[-1]
    for k in range(nt - 1, -1, -1):
        t_target = grid.ts[k]
        substeps = 0
        while t_cur > t_target + 1e-14:
            substeps += 1
            if substeps > max_substeps:
                raise NumericalFailure(
                    f"CFL subcycle limit exceeded: > {max_substeps} substeps in one macro step"
                )
            G = godunov_magnitude_level(v, grid.dx)
            Pmax = max(float(np.max(G[int_mask])), P_user)
            dt = min(t_cur - t_target, cfl_safety * cfl_dt(Pmax))
            halvings = 0
            while True:
                t_new = t_cur - dt
                h_arr = problem.h_level(grid, t_new)
                f_arr = problem.f_level(grid, t_new)
                expl = v[int_mask] + dt * (f_arr[int_mask] - h_arr[int_mask] * G[int_mask] ** problem.gamma)
                bnd_new = problem.lateral_values(grid, bnd_idx, t_new)
                rhs = expl + problem.sigma * dt * (B @ bnd_new)
                sol = factor(dt).solve(rhs)
                if not np.all(np.isfinite(sol)):
                    full = np.zeros(grid.shape)
                    full[int_mask] = sol
                    blowup_at(full, t_new)
                v_new = np.zeros(grid.shape)
                v_new[int_mask] = sol
                for bi, idx in enumerate(bnd_idx):
                    v_new[tuple(idx)] = bnd_new[bi]
                G_new = godunov_magnitude_level(v_new, grid.dx)
                G_new_max = float(np.max(G_new[int_mask]))
                if dt <= cfl_dt(G_new_max) * (1.0 + 1e-12):
                    break
                halvings += 1
                if halvings > max_halvings:
                    worst = np.argwhere(G_new == np.max(G_new[int_mask]))
                    idx = tuple(int(i) for i in worst[0])
                    raise NumericalFailure(
                        f"CFL retry limit exceeded at node x={tuple(grid.coords[idx])}, t={t_new}"
                    )
                dt = 0.5 * dt
            lin_res = float(np.max(np.abs((eye - problem.sigma * dt * L) @ sol - rhs)))
            scale = max(1.0, float(np.max(np.abs(rhs))))
            log.append(
                {
                    "t_from": float(t_cur),
                    "t_to": float(t_cur - dt),
                    "dt": float(dt),
                    "halvings": halvings,
                    "linear_residual": lin_res / scale,
                    "godunov_max": G_new_max,
                }
            )
            v = v_new
            t_cur = t_cur - dt
        t_cur = t_target  # kill residual round-off in the time ladder
        levels[k] = v

    u = ScalarField(grid, levels)
    res = discrete_residual(u, problem)
    return HJSolution(u=u, residual=res, log=log)


def discrete_residual(u: ScalarField, problem: HJProblem) -> ScalarField:
    """Defect of the stored-level scheme equation at interior nodes.

    -(u^{k+1}-u^k)/dt - sigma*Lap(u^k) + h(t_k)*Godunov(u^{k+1})^gamma - f(t_k);
    zero when the marching needed no substepping, otherwise it carries the
    splitting/substep consistency error.
    """
    g = u.grid
    out = np.zeros_like(u.values)
    for k in range(g.spec.nt):
        t_k = g.ts[k]
        lap = laplacian_level(u.values[k], g.dx)
        G = godunov_magnitude_level(u.values[k + 1], g.dx)
        h_arr = problem.h_level(g, t_k)
        f_arr = problem.f_level(g, t_k)
        r = (
            -(u.values[k + 1] - u.values[k]) / g.dt
            - problem.sigma * lap
            + h_arr * G ** problem.gamma
            - f_arr
        )
        lev = np.zeros(g.shape)
        lev[g.interior] = r[g.interior]
        out[k] = lev
    return ScalarField(g, out)


# -- manufactured solutions --------------------------------------------------------


@dataclass
class ManufacturedSolution:
    """Closed-form u with analytic time derivative, gradient and Laplacian."""

    u: Callable  # (coords, t) -> values
    u_t: Callable
    grad: Callable  # (coords, t) -> (..., N)
    lap: Callable
    name: str = ""

    def terminal(self, T):
        return lambda x: self.u(x, T)

    def lateral(self):
        return lambda x, t: self.u(x, t)


def ms_sine(T: float) -> ManufacturedSolution:
    """u = sin(pi x1) (T - t)."""
    return ManufacturedSolution(
        u=lambda x, t: np.sin(np.pi * x[..., 0]) * (T - t),
        u_t=lambda x, t: -np.sin(np.pi * x[..., 0]) * np.ones_like(x[..., 0]),
        grad=lambda x, t: np.stack(
            [np.pi * np.cos(np.pi * x[..., 0]) * (T - t)]
            + [np.zeros_like(x[..., 0])] * (x.shape[-1] - 1),
            axis=-1,
        ),
        lap=lambda x, t: -np.pi ** 2 * np.sin(np.pi * x[..., 0]) * (T - t),
        name="sine",
    )


def ms_cosine(T: float) -> ManufacturedSolution:
    """u = cos(pi x1 / 2) (T - t); symmetric bump, zero at x1 = +-1."""
    return ManufacturedSolution(
        u=lambda x, t: np.cos(0.5 * np.pi * x[..., 0]) * (T - t),
        u_t=lambda x, t: -np.cos(0.5 * np.pi * x[..., 0]) * np.ones_like(x[..., 0]),
        grad=lambda x, t: np.stack(
            [-0.5 * np.pi * np.sin(0.5 * np.pi * x[..., 0]) * (T - t)]
            + [np.zeros_like(x[..., 0])] * (x.shape[-1] - 1),
            axis=-1,
        ),
        lap=lambda x, t: -0.25 * np.pi ** 2 * np.cos(0.5 * np.pi * x[..., 0]) * (T - t),
        name="cosine",
    )


def ms_linear_time(c: float, T: float) -> ManufacturedSolution:
    """u = c (T - t); rhs is identically c."""
    return ManufacturedSolution(
        u=lambda x, t: c * (T - t) * np.ones_like(x[..., 0]),
        u_t=lambda x, t: -c * np.ones_like(x[..., 0]),
        grad=lambda x, t: np.zeros_like(x),
        lap=lambda x, t: np.zeros_like(x[..., 0]),
        name="linear_time",
    )


def ms_constant(c: float) -> ManufacturedSolution:
    return ManufacturedSolution(
        u=lambda x, t: c * np.ones_like(x[..., 0]),
        u_t=lambda x, t: np.zeros_like(x[..., 0]),
        grad=lambda x, t: np.zeros_like(x),
        lap=lambda x, t: np.zeros_like(x[..., 0]),
        name="constant",
    )


MANUFACTURED = {
    "sine": ms_sine,
    "cosine": ms_cosine,
}


def manufactured_rhs(ms: ManufacturedSolution, gamma: float, sigma: float, h) -> Callable:
    """f = -du/dt - sigma*Lap(u) + h |Du|^gamma sampled analytically."""

    def f(x, t):
        gmag = np.sqrt(np.sum(ms.grad(x, t) ** 2, axis=-1))
        h_arr = h(x, t) if callable(h) else h
        return -ms.u_t(x, t) - sigma * ms.lap(x, t) + h_arr * gmag ** gamma

    return f


def manufactured_problem(
    ms: ManufacturedSolution, gamma: float, sigma: float, h0: float, h1: float, h=None
) -> HJProblem:
    hh = h if h is not None else h0
    return HJProblem(
        gamma=gamma,
        sigma=sigma,
        h0=h0,
        h1=h1,
        h=hh,
        f=manufactured_rhs(ms, gamma, sigma, hh),
        terminal=None,
        lateral=ms.lateral(),
    )


def solve_manufactured(ms, gamma, sigma, grid, h0=1.0, h1=1.0, h=None, gradient_bound=None):
    p = manufactured_problem(ms, gamma, sigma, h0, h1, h)
    p.terminal = ms.terminal(grid.ts[-1])
    return solve_hj(p, grid, gradient_bound=gradient_bound)


def linf_error(u: ScalarField, exact: Callable) -> float:
    g = u.grid
    err = 0.0
    for k, t in enumerate(g.ts):
        ex = np.asarray(exact(g.coords, float(t)), dtype=float)
        err = max(err, float(np.max(np.abs((u.values[k] - ex)[g.active]))))
    return err


# -- Legendre-transform gap ----------------------------------------------------------


def legendre_gap(h: float, gamma: float, p_samples, grid_points: int = 33, refinements: int = 48):
    """max_p |sup_q {p.q - ell|q|^gc} - h|p|^gamma|, sup taken numerically.

    ell = h(gamma-1)/(h*gamma)^gc.  The objective is maximal for q parallel to
    p, so the search runs over the magnitude t = |q| >= 0 on an iteratively
    refined grid.
    """
    if h <= 0 or gamma <= 2:
        raise ValueError("need h > 0 and gamma > 2")
    gc = gamma_conjugate(gamma)
    ell = h * (gamma - 1.0) / (h * gamma) ** gc

    def phi(pn, t):
        return pn * t - ell * t ** gc

    worst = 0.0
    for p in np.atleast_1d(np.asarray(p_samples, dtype=float)).reshape(len(p_samples), -1):
        pn = float(np.linalg.norm(p))
        target = h * pn ** gamma
        hi = 1.0
        while phi(pn, 2 * hi) > phi(pn, hi) and hi < 1e30:
            hi *= 2.0
        hi *= 2.0
        lo = 0.0
        best = 0.0  # q = 0 always admissible
        for _ in range(refinements):
            ts = np.linspace(lo, hi, grid_points)
            vals = phi(pn, ts)
            kk = int(np.argmax(vals))
            best = max(best, float(vals[kk]))
            lo = ts[max(kk - 1, 0)]
            hi = ts[min(kk + 1, grid_points - 1)]
        worst = max(worst, abs(best - target))
    return worst


# -- differential inequality certificates ----------------------------------------------


def differential_inequality_check(w: ScalarField, g_field, sigma, h0, h1, gamma):
    """Min slacks of the two-sided inequalities over interior nodes/levels.

    Returns (low, high): low = min(g - [-dw/ds - sigma*Lap w + h0|Dw|^g]),
    high = min([-dw/ds - sigma*Lap w + h1|Dw|^g] - g).  Nonnegative values
    certify the sub/supersolution pair; negative slack is a finding.
    """
    grid = w.grid
    wt = time_derivative(w)
    g_vals = (
        g_field.values
        if isinstance(g_field, ScalarField)
        else np.stack([_eval_on(grid, g_field, t) for t in grid.ts])
    )
    lo = np.inf
    hi = np.inf
    for k in range(1, grid.spec.nt):
        lap = laplacian_level(w.values[k], grid.dx)
        mag = np.sqrt(np.sum(gradient_level(w.values[k], grid.dx) ** 2, axis=-1))
        base = -wt[k] - sigma * lap
        e0 = base + h0 * mag ** gamma
        e1 = base + h1 * mag ** gamma
        lo = min(lo, float(np.min((g_vals[k] - e0)[grid.interior])))
        hi = min(hi, float(np.min((e1 - g_vals[k])[grid.interior])))
    return lo, hi
