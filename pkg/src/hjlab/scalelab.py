"""Blow-up rescalings, worst-pair selection, Liouville decay probe, norm sweeps.

Two zoom variants: "alpha0" keeps the transport part of the operator and
shrinks the viscosity (sigma_n = r^(g-2)/M^(g-1), time scale r^g/M^(g-1));
"alpha" keeps the linear parabolic scaling (time scale r^2) and carries the
Hamiltonian factor theta_n = M^(g-1)/r^(g-2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Cylinder,
    Grid,
    GridSpec,
    NumericalFailure,
    ScalarField,
    laplacian_level,
    lq_norm,
    make_grid,
    quadrature_weights,
    sample_field,
    sample_points,
    time_derivative,
)
from .hj import (
    HJProblem,
    alpha_zero,
    critical_q0,
    discrete_residual,
    gamma_conjugate,
    gradient_level,
    solve_hj,
)
from .seminorm import (
    holder_seminorm,
    nonlinear_space,
    nonlinear_time,
    w21q_norms,
    weighted_holder,
)


@dataclass
class BlowupParams:
    basepoint_x: np.ndarray
    basepoint_t: float
    M: float
    r: float
    variant: str  # "alpha0" or "alpha"
    gamma: float
    z: float = 1.0
    d: float = 0.0
    case: str | None = None  # "space" / "time" for the alpha0 variant
    y0: np.ndarray | None = None
    s0: float | None = None
    sandwich: tuple | None = None  # (L, weighted quotient, 2L)

    def __post_init__(self):
        self.basepoint_x = np.atleast_1d(np.asarray(self.basepoint_x, dtype=float))
        if self.variant not in ("alpha0", "alpha"):
            raise ValueError("variant must be 'alpha0' or 'alpha'")
        if self.M <= 0 or self.r <= 0:
            raise ValueError("M and r must be positive")

    @property
    def sigma_n(self):
        if self.variant != "alpha0":
            return None
        return self.r ** (self.gamma - 2.0) / self.M ** (self.gamma - 1.0)

    @property
    def theta_n(self):
        if self.variant != "alpha":
            return None
        return self.M ** (self.gamma - 1.0) / self.r ** (self.gamma - 2.0)

    @property
    def time_scale(self):
        if self.variant == "alpha0":
            return self.r ** self.gamma / self.M ** (self.gamma - 1.0)
        return self.r ** 2

    @property
    def scale_factor(self):
        """The populated one of sigma_n / theta_n."""
        return self.sigma_n if self.variant == "alpha0" else self.theta_n


@dataclass
class BlowupResult:
    w: ScalarField
    g: ScalarField | None
    params: BlowupParams
    norm_identity: dict | None  # alpha0 variant: ||g_n||_{q0} identity report


def _map_points(params: BlowupParams, ys, s):
    xs = params.basepoint_x + params.r * np.asarray(ys, dtype=float)
    t = params.basepoint_t + params.time_scale * float(s)
    return xs, t


def blowup_transform(
    u: ScalarField, params: BlowupParams, target_spec: GridSpec, f=None
) -> BlowupResult:
    """Rescale u (and the right-hand side f) onto the target (y, s) grid.

    w(y, s) = u(xbar + r y, tbar + lambda s)/M with lambda the variant time
    scale; g picks up r^g/M^g (alpha0) or r^2/M (alpha).  Sampling is
    multilinear; points leaving u's grid raise, naming the offending node.
    """
    tg = make_grid(target_spec)
    if tg.dim != u.grid.dim:
        raise ValueError("target grid dimension mismatch")
    pts = tg.coords.reshape(-1, tg.dim)
    w_vals = np.zeros((tg.n_levels,) + tg.shape)
    g_vals = np.zeros_like(w_vals) if f is not None else None
    if params.variant == "alpha0":
        g_factor = params.r ** params.gamma / params.M ** params.gamma
    else:
        g_factor = params.r ** 2 / params.M
    for k, s in enumerate(tg.ts):
        xs, t = _map_points(params, pts, s)
        w_vals[k] = (sample_points(u, xs, t) / params.M).reshape(tg.shape)
        if f is not None:
            if isinstance(f, ScalarField):
                fv = sample_points(f, xs, t)
            else:
                fv = np.asarray(f(xs.reshape(tg.shape + (tg.dim,)), t), dtype=float).reshape(-1)
            g_vals[k] = (g_factor * fv).reshape(tg.shape)
    w = ScalarField(tg, w_vals)
    g = ScalarField(tg, g_vals) if f is not None else None

    ident = None
    if params.variant == "alpha0" and g is not None:
        N = tg.dim
        q0 = critical_q0(params.gamma, N)
        gc = gamma_conjugate(params.gamma)
        g_norm = lq_norm(g, q0)
        # preimage norm by change of variables on the mapped nodes:
        # dx dt = r^N * lambda * dy ds
        jac = params.r ** N * params.time_scale
        tw, sw = quadrature_weights(tg)
        acc = 0.0
        for k, wt in enumerate(tw):
            acc += wt * float(np.sum(np.abs(g_vals[k] / g_factor) ** q0 * sw))
        f_norm_pre = (jac * acc) ** (1.0 / q0)
        pref = params.sigma_n ** (gc * (N + 1) / (N + 2))
        ident = {
            "g_norm_q0": g_norm,
            "f_norm_preimage": f_norm_pre,
            "sigma_power": pref,
            "rhs": pref * f_norm_pre,
            "rel_gap": abs(g_norm - pref * f_norm_pre) / max(g_norm, 1e-300),
        }
    return BlowupResult(w=w, g=g, params=params, norm_identity=ident)


def inverse_blowup_transform(w: ScalarField, params: BlowupParams, u_grid: Grid) -> ScalarField:
    """u(x, t) = M * w((x - xbar)/r, (t - tbar)/lambda) sampled on u_grid."""
    lam = params.time_scale
    pts = u_grid.coords.reshape(-1, u_grid.dim)
    vals = np.zeros((u_grid.n_levels,) + u_grid.shape)
    for k, t in enumerate(u_grid.ts):
        ys = (pts - params.basepoint_x) / params.r
        s = (float(t) - params.basepoint_t) / lam
        vals[k] = (params.M * sample_points(w, ys, s)).reshape(u_grid.shape)
    return ScalarField(u_grid, vals)


def rescaled_residual(w: ScalarField, g: ScalarField, params: BlowupParams, h_sample: float) -> ScalarField:
    """Interior residual of the rescaled equation, same stencil as the solver.

    alpha0: -dw/ds - sigma_n Lap w + h |Dw|^g = g_n
    alpha:  -dw/ds - Lap w + theta_n h |Dw|^g = g_n
    """
    if params.variant == "alpha0":
        if params.sigma_n > 1.0:
            raise ValueError("sigma_n > 1: not a vanishing-viscosity zoom")
        prob = HJProblem(
            gamma=params.gamma,
            sigma=params.sigma_n,
            h0=h_sample,
            h1=h_sample,
            h=h_sample,
            f=g if g is not None else 0.0,
        )
    else:
        heff = params.theta_n * h_sample
        prob = HJProblem(
            gamma=params.gamma, sigma=1.0, h0=heff, h1=heff, h=heff, f=g if g is not None else 0.0
        )
    return discrete_residual(w, prob)


def normalization_check(w: ScalarField, params: BlowupParams) -> float:
    """The quotient the point selection drove to 1 (space / alpha cases) or z."""
    origin = np.zeros(w.grid.dim)
    w00 = sample_field(w, origin, 0.0)
    if params.variant == "alpha":
        return abs(sample_field(w, params.y0, params.s0) - w00)
    if params.case == "time":
        return abs(sample_field(w, origin, 1.0) - w00)
    return abs(sample_field(w, params.y0, 0.0) - w00)


# -- worst-pair selection ------------------------------------------------------------


def _pair_distances(Q: Cylinder, pair, alpha, gamma):
    """(d_alpha weights, kind-d weights, spatial boundary distances) per endpoint."""
    out_da, out_d, out_ds = [], [], []
    for (x, t) in pair:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ds = max(Q.space_distance(x), 0.0)
        dtb = abs(Q.t1 - t)
        out_da.append(ds ** alpha + dtb ** (alpha / gamma))
        out_d.append(ds + np.sqrt(dtb))
        out_ds.append(ds)
    return out_da, out_d, out_ds


def worst_pair_selection(u: ScalarField, kind: str, alpha: float, z: float, gamma: float, Q=None) -> BlowupParams:
    """Argmax pair of the requested seminorm turned into ready blow-up data.

    kind "space": same-time pair of the nonlinear space seminorm (zoom alpha0);
    kind "time":  same-position pair of the nonlinear time seminorm, requires
                  alpha == alpha0(gamma);
    kind "weighted": pair of the distance-weighted classical seminorm with
                  c = alpha - alpha0 (zoom alpha, linear space-time scaling).
    The basepoint is the earlier-time / nearer-boundary endpoint, the sandwich
    uses the pair's min distance, so L <= quotient <= 2L holds exactly with
    L = quotient/2.
    """
    g = u.grid
    if Q is None:
        Q = g.cylinder()
    a0 = alpha_zero(gamma)

    if kind == "space":
        res = nonlinear_space(u, alpha, gamma, Q)
        if res.degenerate or res.value == 0.0:
            raise ValueError("u is constant on Q: no blow-up pair")
        (xa, ta), (xb, tb) = res.pair
        da, _, _ = _pair_distances(Q, res.pair, alpha, gamma)
        base, other = (0, 1) if da[0] <= da[1] else (1, 0)
        pts = [np.atleast_1d(np.asarray(p[0], dtype=float)) for p in res.pair]
        x_base, x_other = pts[base], pts[other]
        t_base = res.pair[base][1]
        M = abs(
            sample_field(u, x_other, res.pair[other][1]) - sample_field(u, x_base, t_base)
        )
        r = float(np.linalg.norm(x_other - x_base))
        quotient = min(da) * M / r ** alpha
        L = quotient / 2.0
        return BlowupParams(
            basepoint_x=x_base,
            basepoint_t=t_base,
            M=M,
            r=r,
            variant="alpha0",
            gamma=gamma,
            z=z,
            d=max(Q.space_distance(x_base), 0.0),
            case="space",
            y0=(x_other - x_base) / r,
            sandwich=(L, quotient, 2.0 * L),
        )

    if kind == "time":
        if abs(alpha - a0) > 1e-12:
            raise ValueError("time-kind selection requires alpha == alpha0(gamma)")
        res = nonlinear_time(u, alpha, gamma, Q)
        if res.degenerate or res.value == 0.0:
            raise ValueError("u is constant on Q: no blow-up pair")
        (xa, ta), (xb, tb) = res.pair
        early, late = ((xa, ta), (xb, tb)) if ta <= tb else ((xb, tb), (xa, ta))
        x_base = np.atleast_1d(np.asarray(early[0], dtype=float))
        dt_pair = late[1] - early[1]
        M = abs(sample_field(u, x_base, late[1]) - sample_field(u, x_base, early[1])) / z
        r = dt_pair ** (1.0 / gamma) * M ** ((gamma - 1.0) / gamma)
        da, _, _ = _pair_distances(Q, ((early[0], early[1]), (late[0], late[1])), alpha, gamma)
        quotient = min(da) * M / r ** alpha
        L = quotient / 2.0
        return BlowupParams(
            basepoint_x=x_base,
            basepoint_t=early[1],
            M=M,
            r=r,
            variant="alpha0",
            gamma=gamma,
            z=z,
            d=max(Q.space_distance(x_base), 0.0),
            case="time",
            y0=np.zeros(g.dim),
            sandwich=(L, quotient, 2.0 * L),
        )

    if kind == "weighted":
        if alpha <= a0 + 1e-14:
            raise ValueError("weighted-kind selection requires alpha > alpha0(gamma)")
        res = weighted_holder(u, alpha, alpha - a0, Q)
        if res.degenerate or res.value == 0.0:
            raise ValueError("u is constant on Q: no blow-up pair")
        (xa, ta), (xb, tb) = res.pair
        early, late = ((xa, ta), (xb, tb)) if ta <= tb else ((xb, tb), (xa, ta))
        x_base = np.atleast_1d(np.asarray(early[0], dtype=float))
        x_other = np.atleast_1d(np.asarray(late[0], dtype=float))
        _, dd, _ = _pair_distances(Q, (early, late), alpha, gamma)
        M = abs(sample_field(u, x_other, late[1]) - sample_field(u, x_base, early[1]))
        r = float(np.linalg.norm(x_other - x_base)) + np.sqrt(late[1] - early[1])
        quotient = min(dd) ** (alpha - a0) * M / r ** alpha
        L = quotient / 2.0
        return BlowupParams(
            basepoint_x=x_base,
            basepoint_t=early[1],
            M=M,
            r=r,
            variant="alpha",
            gamma=gamma,
            z=z,
            d=min(dd),
            y0=(x_other - x_base) / r,
            s0=(late[1] - early[1]) / r ** 2,
            sandwich=(L, quotient, 2.0 * L),
        )

    raise ValueError(f"unknown selection kind {kind!r}")


# -- Liouville decay probe --------------------------------------------------------------


def closed_form_decay_budget(tau: float, alpha: float, gamma: float, c3: float = 1.0) -> float:
    """Large-R limit of the space-oscillation budget for the homogeneous case.

    c3 * (((tau^(a/2) + tau^(a0/2) + tau^(a/(g-a(g-1)))) / tau)^(1/g) + tau^-(g'-1)).
    Strictly decreasing in tau >= 1 since every exponent involved is < 1.
    """
    a0 = alpha_zero(gamma)
    gc = gamma_conjugate(gamma)
    core = tau ** (alpha / 2.0) + tau ** (a0 / 2.0) + tau ** (
        alpha / (gamma - alpha * (gamma - 1.0))
    )
    return c3 * ((core / tau) ** (1.0 / gamma) + tau ** (-(gc - 1.0)))


def liouville_probe(
    h: float,
    gamma: float,
    alpha: float,
    R_list,
    tau_list,
    dx: float,
    dt: float,
    amplitude: float = 1.0,
    z: float = 1.0,
) -> list[dict]:
    """Solve the homogeneous problem on growing cylinders and tabulate budgets.

    Terminal data A*sin(pi*x1/Rp) on the padded box (zero lateral data), then
    the oscillation budgets at (R, tau) with g = 0, h0 = h1 = h.
    """
    from .dual import oscillation_report

    rows = []
    for R in R_list:
        Rp = R + 1.0
        for tau in tau_list:
            grid = make_grid(GridSpec(1, Rp, dx, tau, dt))
            prob = HJProblem(
                gamma=gamma,
                sigma=1.0,
                h0=h,
                h1=h,
                h=h,
                f=0.0,
                terminal=lambda x: amplitude * np.sin(np.pi * x[..., 0] / Rp),
                lateral=0.0,
            )
            sol = solve_hj(prob, grid, gradient_bound=amplitude * np.pi / Rp)
            rep = oscillation_report(
                sol.u, None, 1.0, h, h, gamma, alpha, z, R, tau, y0=np.array([1.0])
            )
            rows.append(
                {
                    "R": R,
                    "tau": tau,
                    "kinetic": rep.kinetic,
                    "test0_lhs": rep.test0_lhs,
                    "test0_rhs": rep.test0_rhs,
                    "xest0_lhs": rep.xest0_lhs,
                    "xest0_rhs": rep.xest0_rhs,
                    "fitted_c2": rep.fitted_c2,
                    "fitted_c3": rep.fitted_c3,
                    "measured_osc": abs(rep.xest0_lhs),
                    "closed_budget": closed_form_decay_budget(tau, alpha, gamma),
                    "space_quotient": rep.space_quotient,
                    "time_quotient": rep.time_quotient,
                }
            )
    return rows


# -- maximal-regularity sweep --------------------------------------------------------------


def singular_family(q: float, eps: float, dim: int, x_star=0.0, beta_frac: float = 0.95):
    """Truncated radial power min(|x - x*|^-beta, eps^-beta), beta = frac*(N+2)/q."""
    beta = beta_frac * (dim + 2) / q
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))

    def f(x, t):
        r = np.sqrt(np.sum((x - x_star) ** 2, axis=-1))
        with np.errstate(divide="ignore"):
            vals = np.where(r > 0, r ** (-beta), np.inf)
        return np.minimum(vals, eps ** (-beta))

    return f, beta


def maxreg_sweep(
    q_list,
    eps_list,
    gamma: float,
    dx_list,
    R: float = 1.0,
    T: float = 1.0,
    dt_factor: float = 4.0,
    Qp: Cylinder | None = None,
    x_star=0.0,
    beta_frac: float = 0.95,
    norm_target: float = 1.0,
    dim: int = 1,
) -> list[dict]:
    """Ratio table (regularity norms / ||f||_q) across sharpening singularities.

    One row per (q, eps, dx); solver failures land in the row's status column.
    """
    rows = []
    for dx in dx_list:
        grid = make_grid(GridSpec(dim, R, dx, T, dx / dt_factor))
        sub = Qp or Cylinder(
            xmin=tuple([-R / 2] * dim), xmax=tuple([R / 2] * dim), t0=T / 4, t1=3 * T / 4
        )
        for q in q_list:
            for eps in eps_list:
                f_raw, beta = singular_family(q, eps, dim, x_star, beta_frac)
                raw_field = ScalarField.from_function(grid, f_raw)
                raw_norm = lq_norm(raw_field, q)
                c_eps = norm_target / raw_norm
                f_field = ScalarField(grid, c_eps * raw_field.values)
                prob = HJProblem(
                    gamma=gamma, sigma=1.0, h0=1.0, h1=1.0, h=1.0, f=f_field
                )
                row = {
                    "q": q,
                    "epsilon": eps,
                    "dx": dx,
                    "beta": beta,
                    "c_eps": c_eps,
                    "f_norm": norm_target,
                }
                try:
                    sol = solve_hj(prob, grid)
                    norms = w21q_norms(sol.u, q, gamma, sub)
                    total = norms["dt"] + norms["hessian"] + norms["grad_gamma"]
                    row.update(
                        {
                            "dt_norm": norms["dt"],
                            "hessian_norm": norms["hessian"],
                            "grad_gamma_norm": norms["grad_gamma"],
                            "ratio": total / norm_target,
                            "status": "ok",
                        }
                    )
                except NumericalFailure as exc:
                    row.update(
                        {
                            "dt_norm": np.nan,
                            "hessian_norm": np.nan,
                            "grad_gamma_norm": np.nan,
                            "ratio": np.nan,
                            "status": f"failed: {exc}".replace(",", ";"),
                        }
                    )
                rows.append(row)
    return rows


# -- Hölder-to-Sobolev interpolation check -------------------------------------------------


@dataclass
class InterpolationBound:
    alpha: float
    c1: float  # ||g||_q + [v]_alpha on the large cylinder
    c2_effective: float
    k_fit: float  # ||dv/dt||_q + ||D^2 v||_q on the inner cylinder
    dt_norm: float
    hessian_norm: float


def interpolation_bound_check(v: ScalarField, g_rhs, q: float, gamma: float, R: float) -> InterpolationBound:
    """Fitted constant of the Hölder-to-W^{2,1}_q step at alpha = 2 - (N+2)/q."""
    grid = v.grid
    N = grid.dim
    alpha = 2.0 - (N + 2) / q
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"exponent relation gives alpha={alpha}, needs 0 < alpha < 1")
    if grid.spec.half_width < R + 2 * grid.dx - 1e-12:
        raise ValueError("grid must pad the inner cylinder by 2 nodes")
    big = grid.cylinder()
    T = grid.spec.horizon
    inner = Cylinder(
        xmin=tuple([-R] * N),
        xmax=tuple([R] * N),
        t0=2 * grid.dt,
        t1=T - 2 * grid.dt,
    )
    g_field = (
        g_rhs
        if isinstance(g_rhs, ScalarField)
        else ScalarField.from_function(grid, g_rhs if callable(g_rhs) else (lambda x, t: np.full(x.shape[:-1], float(g_rhs))))
    )
    sem = holder_seminorm(v, alpha, big)
    c1 = lq_norm(g_field, q, big) + sem.value

    vt = time_derivative(v)
    c2 = 0.0
    for k in range(1, grid.spec.nt):
        lap = laplacian_level(v.values[k], grid.dx)
        mag = np.sqrt(np.sum(gradient_level(v.values[k], grid.dx) ** 2, axis=-1))
        lhs = np.abs(-vt[k] - lap) - g_field.values[k]
        mask = grid.interior & (mag ** gamma > 1e-14)
        if mask.any():
            c2 = max(c2, float(np.max(lhs[mask] / mag[mask] ** gamma)))
    c2 = max(c2, 0.0)

    norms = w21q_norms(v, q, gamma, inner)
    return InterpolationBound(
        alpha=alpha,
        c1=c1,
        c2_effective=c2,
        k_fit=norms["dt"] + norms["hessian"],
        dt_norm=norms["dt"],
        hessian_norm=norms["hessian"],
    )
