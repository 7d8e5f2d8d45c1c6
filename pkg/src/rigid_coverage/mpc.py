"""Tracking controller with artificial references and bearing maintenance.

Each robot solves a finite-horizon optimal control problem over its input
sequence, shooting states, and an artificial steady pair (xbar, ubar).  The
cost penalizes distance to the artificial steady state along the horizon,
the gap between the artificial setpoint rbar = C xbar and the requested
reference, and the distance of rbar from the desired bearing lines through
neighbor anchor points.  Hard dynamics are kept as equality constraints of
a Gauss-Newton SQP with an l1-penalty line search; box constraints, the
setpoint polygon and the terminal ellipsoid enter as squared-hinge
penalties that are escalated until a strict feasibility check passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import linearize
from .errors import (
    InvalidInputError,
    OcpInfeasibleError,
    RecursiveFeasibilityError,
)
from .geometry import ConvexRegion
from .terminal import TerminalSet

BEARING_UNIT_TOL = 1e-9


def _psd_sqrt(Q: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(np.asarray(Q, dtype=float))
    if np.any(w < -1e-12):
        raise InvalidInputError("weight matrix must be positive semidefinite")
    return np.diag(np.sqrt(np.clip(w, 0.0, None))) @ V.T


@dataclass(frozen=True)
class CostWeights:
    """Stage, terminal-tradeoff and bearing weights of the tracking cost."""

    Q: np.ndarray
    R: np.ndarray
    S_r: np.ndarray
    w_b: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        S_r = np.asarray(self.S_r, dtype=float)
        if not 0.0 < self.mu <= 1.0:
            raise InvalidInputError(f"mu must lie in (0, 1], got {self.mu}")
        if self.w_b < 0:
            raise InvalidInputError("bearing weight must be non-negative")
        if np.any(np.linalg.eigvalsh(0.5 * (R + R.T)) <= 0):
            raise InvalidInputError("R must be positive definite")
        if np.any(np.linalg.eigvalsh(0.5 * (S_r + S_r.T)) <= 0):
            raise InvalidInputError("S_r must be positive definite")
        if np.any(np.linalg.eigvalsh(0.5 * (Q + Q.T)) < -1e-12):
            raise InvalidInputError("Q must be positive semidefinite")
        for name, M in (("Q", Q), ("R", R), ("S_r", S_r)):
            M = M.copy()
            M.setflags(write=False)
            object.__setattr__(self, name, M)


def bearing_projector(g: np.ndarray) -> np.ndarray:
    """Projector onto the complement of a unit bearing direction."""
    g = np.asarray(g, dtype=float)
    if abs(np.linalg.norm(g) - 1.0) > BEARING_UNIT_TOL:
        raise InvalidInputError("bearing must be a unit vector")
    return np.eye(len(g)) - np.outer(g, g)


def bearing_cost(rbar, desired_bearings, neighbor_anchors, w_b: float) -> float:
    """Distance of a candidate setpoint from the desired bearing lines.

    Sums w_b * ||P_g (rbar - anchor_j)||^2 over the desired bearings; zero
    exactly when rbar lies on every line through an anchor along its
    bearing direction.
    """
    rbar = np.asarray(rbar, dtype=float)
    total = 0.0
    for j, g in desired_bearings:
        diff = bearing_projector(g) @ (rbar - np.asarray(neighbor_anchors[j], dtype=float))
        total += float(diff @ diff)
    return w_b * total


@dataclass(frozen=True)
class OcpProblem:
    """One robot's tracking problem at one time step."""

    model: object
    horizon: int
    weights: CostWeights
    terminal: TerminalSet
    x0: np.ndarray
    r_ref: np.ndarray
    desired_bearings: tuple = ()
    neighbor_anchors: dict = field(default_factory=dict)
    setpoint_region: ConvexRegion | None = None
    steady_margin: float = 0.0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        r_ref = np.asarray(self.r_ref, dtype=float)
        if self.horizon < 1:
            raise InvalidInputError("horizon must be at least 1")
        if x0.shape != (self.model.n_x,):
            raise InvalidInputError(f"x0 must have shape ({self.model.n_x},)")
        if r_ref.shape != (self.model.dim,):
            raise InvalidInputError(f"r_ref must have shape ({self.model.dim},)")
        if not self.model.state_bounds.contains(x0, tol=1e-9):
            raise InvalidInputError("initial state violates the state box")
        bearings = []
        for j, g in self.desired_bearings:
            g = np.asarray(g, dtype=float)
            if abs(np.linalg.norm(g) - 1.0) > BEARING_UNIT_TOL:
                raise InvalidInputError(f"desired bearing toward {j} is not unit")
            if j not in self.neighbor_anchors:
                raise InvalidInputError(f"missing anchor for neighbor {j}")
            bearings.append((int(j), g))
        bearings.sort(key=lambda item: item[0])
        object.__setattr__(self, "desired_bearings", tuple(bearings))
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "r_ref", r_ref)


@dataclass(frozen=True)
class SqpOptions:
    max_iter: int = 150
    tol_equality: float = 1e-9
    tol_stationarity: float = 1e-6
    penalty_init: float = 1e2
    penalty_max: float = 1e8
    # inequalities are enforced at g <= -backoff; the margin absorbs the
    # residual violation lambda/(2*penalty_max) of strongly active rows,
    # so multipliers up to 2*penalty_max*backoff are tolerated
    backoff: float = 2e-4
    regularization: float = 1e-9
    armijo: float = 1e-4
    max_linesearch: int = 40


@dataclass
class OcpSolution:
    u_seq: np.ndarray  # (N, n_u)
    x_seq: np.ndarray  # (N + 1, n_x), x_seq[0] = x0
    xbar: np.ndarray
    ubar: np.ndarray
    rbar: np.ndarray
    cost: float
    status: str  # solved | max-iter | infeasible | candidate
    iterations: int = 0
    kkt_residual: float = math.nan
    penalty: float = math.nan


class _Workspace:
    """Index bookkeeping and cached matrices for one problem instance."""

    def __init__(self, problem: OcpProblem):
        self.problem = problem
        model = problem.model
        N = problem.horizon
        self.N = N
        self.nx = model.n_x
        self.nu = model.n_u
        self.nz = N * self.nu + N * self.nx + self.nx + self.nu
        self.n_eq = (N + 1) * self.nx
        self._build_cost()
        self._build_linear_ineq()
        P = problem.terminal.P
        self.P_term = P
        self.zeta = problem.terminal.zeta
        self.zeta_scale = max(self.zeta, 1e-12)

    # --- layout -----------------------------------------------------------
    def iu(self, l: int) -> slice:
        return slice(l * self.nu, (l + 1) * self.nu)

    def ix(self, l: int) -> slice:
        base = self.N * self.nu
        return slice(base + (l - 1) * self.nx, base + l * self.nx)

    @property
    def ixb(self) -> slice:
        base = self.N * self.nu + self.N * self.nx
        return slice(base, base + self.nx)

    @property
    def iub(self) -> slice:
        base = self.N * self.nu + self.N * self.nx + self.nx
        return slice(base, base + self.nu)

    def pack(self, u_seq, x_seq, xbar, ubar) -> np.ndarray:
        z = np.empty(self.nz)
        for l in range(self.N):
            z[self.iu(l)] = u_seq[l]
        for l in range(1, self.N + 1):
            z[self.ix(l)] = x_seq[l]
        z[self.ixb] = xbar
        z[self.iub] = ubar
        return z

    def unpack(self, z: np.ndarray):
        u_seq = np.stack([z[self.iu(l)] for l in range(self.N)])
        x_seq = np.vstack([self.problem.x0[None, :]] + [z[self.ix(l)][None, :] for l in range(1, self.N + 1)])
        return u_seq, x_seq, z[self.ixb].copy(), z[self.iub].copy()

    # --- cost as affine residuals ------------------------------------------
    def _build_cost(self):
        pr = self.problem
        w = pr.weights
        model = pr.model
        N, nx, nu = self.N, self.nx, self.nu
        d = model.dim
        L_Q = _psd_sqrt(w.Q)
        L_R = _psd_sqrt(w.R)
        L_P = _psd_sqrt(pr.terminal.P)
        L_S = _psd_sqrt(w.S_r)
        C = model.C
        n_bear = len(pr.desired_bearings)
        rows = N * nx + N * nu + nx + d + n_bear * d
        M = np.zeros((rows, self.nz))
        f0 = np.zeros(rows)
        r = 0
        # stage state terms (x_l - xbar), l = 0 uses the parameter x0
        M[r : r + nx, self.ixb] = -L_Q
        f0[r : r + nx] = L_Q @ pr.x0
        r += nx
        for l in range(1, N):
            M[r : r + nx, self.ix(l)] = L_Q
            M[r : r + nx, self.ixb] = -L_Q
            r += nx
        # stage input terms (u_l - ubar)
        for l in range(N):
            M[r : r + nu, self.iu(l)] = L_R
            M[r : r + nu, self.iub] = -L_R
            r += nu
        # terminal term (x_N - xbar)
        M[r : r + nx, self.ix(N)] = L_P
        M[r : r + nx, self.ixb] = -L_P
        r += nx
        # reference offset term sqrt(mu) * (C xbar - r_ref)
        s_ref = math.sqrt(w.mu)
        M[r : r + d, self.ixb] = s_ref * (L_S @ C)
        f0[r : r + d] = -s_ref * (L_S @ pr.r_ref)
        r += d
        # bearing terms sqrt((1-mu) w_b) * P_g (C xbar - anchor_j)
        s_b = math.sqrt(max(1.0 - w.mu, 0.0) * w.w_b)
        for j, g in pr.desired_bearings:
            Pg = bearing_projector(g)
            anchor = np.asarray(pr.neighbor_anchors[j], dtype=float)
            M[r : r + d, self.ixb] = s_b * (Pg @ C)
            f0[r : r + d] = -s_b * (Pg @ anchor)
            r += d
        self.M = M
        self.f0 = f0
        self.H_cost = 2.0 * M.T @ M

    def cost(self, z: np.ndarray) -> float:
        res = self.M @ z + self.f0
        return float(res @ res)

    def cost_grad(self, z: np.ndarray) -> np.ndarray:
        return 2.0 * self.M.T @ (self.M @ z + self.f0)

    # --- inequalities -------------------------------------------------------
    def _append_box_rows(self, rows, offs, idx, bounds, margin=0.0):
        for k, (lo, hi) in enumerate(zip(bounds.lower, bounds.upper)):
            col = idx.start + k
            if np.isfinite(hi):
                scale = max(1.0, abs(hi))
                row = np.zeros(self.nz)
                row[col] = 1.0 / scale
                rows.append(row)
                offs.append((hi - margin) / scale)
            if np.isfinite(lo):
                scale = max(1.0, abs(lo))
                row = np.zeros(self.nz)
                row[col] = -1.0 / scale
                rows.append(row)
                offs.append((-lo - margin) / scale)

    def _build_linear_ineq(self):
        pr = self.problem
        model = pr.model
        rows: list[np.ndarray] = []
        offs: list[float] = []
        for l in range(self.N):
            self._append_box_rows(rows, offs, self.iu(l), model.input_bounds)
        for l in range(1, self.N + 1):
            self._append_box_rows(rows, offs, self.ix(l), model.state_bounds)
        # steady pair kept strictly inside the box by the margin
        self._append_box_rows(rows, offs, self.ixb, model.state_bounds, margin=pr.steady_margin)
        self._append_box_rows(rows, offs, self.iub, model.input_bounds, margin=pr.steady_margin)
        if pr.setpoint_region is not None:
            A, b = pr.setpoint_region.half_planes()
            AC = A @ model.C
            for a_row, b_val in zip(AC, b):
                scale = max(1.0, abs(b_val))
                row = np.zeros(self.nz)
                row[self.ixb] = a_row / scale
                rows.append(row)
                offs.append(b_val / scale)
        self.G = np.vstack(rows) if rows else np.zeros((0, self.nz))
        self.h = np.asarray(offs)

    def ineq_values(self, z: np.ndarray) -> np.ndarray:
        """All inequality values g(z) <= 0, terminal ellipsoid last."""
        lin = self.G @ z - self.h
        e = z[self.ix(self.N)] - z[self.ixb]
        term = (float(e @ self.P_term @ e) - self.zeta) / self.zeta_scale
        return np.append(lin, term)

    def ineq_jacobian_row_terminal(self, z: np.ndarray) -> np.ndarray:
        e = z[self.ix(self.N)] - z[self.ixb]
        row = np.zeros(self.nz)
        grad = 2.0 * (self.P_term @ e) / self.zeta_scale
        row[self.ix(self.N)] = grad
        row[self.ixb] = -grad
        return row

    # --- equalities ----------------------------------------------------------
    def eq_constraints(self, z: np.ndarray) -> np.ndarray:
        pr = self.problem
        u_seq, x_seq, xbar, ubar = self.unpack(z)
        c = np.empty(self.n_eq)
        for l in range(self.N):
            c[l * self.nx : (l + 1) * self.nx] = x_seq[l + 1] - pr.model.step(x_seq[l], u_seq[l])
        c[self.N * self.nx :] = xbar - pr.model.step(xbar, ubar)
        return c

    def eq_jacobian(self, z: np.ndarray) -> np.ndarray:
        pr = self.problem
        u_seq, x_seq, xbar, ubar = self.unpack(z)
        J = np.zeros((self.n_eq, self.nz))
        eye = np.eye(self.nx)
        for l in range(self.N):
            A, B = linearize(pr.model, x_seq[l], u_seq[l])
            r = slice(l * self.nx, (l + 1) * self.nx)
            J[r, self.ix(l + 1)] = eye
            if l >= 1:
                J[r, self.ix(l)] = -A
            J[r, self.iu(l)] = -B
        A, B = linearize(pr.model, xbar, ubar)
        r = slice(self.N * self.nx, self.n_eq)
        J[r, self.ixb] = eye - A
        J[r, self.iub] = -B
        return J


def _penalty_terms(ws: _Workspace, z: np.ndarray, mu_pen: float, backoff: float):
    g = ws.ineq_values(z)
    active = g + backoff > 0.0
    viol = np.where(active, g + backoff, 0.0)
    value = mu_pen * float(viol @ viol)
    return g, active, viol, value


def _ineq_jacobian(ws: _Workspace, z: np.ndarray) -> np.ndarray:
    return np.vstack([ws.G, ws.ineq_jacobian_row_terminal(z)[None, :]])


def _terminal_hessian(ws: _Workspace) -> np.ndarray:
    """Curvature of the terminal-ellipsoid inequality in the z layout."""
    H = np.zeros((ws.nz, ws.nz))
    blk = 2.0 * ws.P_term / ws.zeta_scale
    ixN, ixb = ws.ix(ws.N), ws.ixb
    H[ixN, ixN] = blk
    H[ixb, ixb] = blk
    H[ixN, ixb] = -blk
    H[ixb, ixN] = -blk
    return H


def _polish(ws: _Workspace, z: np.ndarray, opts: SqpOptions, reg: float):
    """Terminate by pinning the working set: Newton steps with explicit
    multipliers instead of waiting for the penalty iterates to settle.

    Near-active rows are held at -backoff as equalities; rows whose
    multiplier comes out negative are released. The terminal row is the
    only curved inequality, so its multiplier-weighted Hessian joins the
    cost Hessian. Success requires strict feasibility and a small residual
    of the stationarity conditions at the stepped point, with multipliers
    refit there. Returns (z, kkt_residual) or None.
    """
    nz = ws.nz
    n_eq = ws.n_eq
    term_idx = ws.G.shape[0]
    H_term = _terminal_hessian(ws)
    g = ws.ineq_values(z)
    work = np.flatnonzero(g >= -opts.backoff - 1e-9)
    lam_term = 0.0
    best = None
    for _ in range(6):
        J_all = _ineq_jacobian(ws, z)
        c = ws.eq_constraints(z)
        C_J = ws.eq_jacobian(z)
        grad = ws.cost_grad(z)
        H = ws.H_cost + reg * np.eye(nz) + lam_term * H_term
        sol = lam = None
        for _drop in range(8):
            nA = len(work)
            dim = nz + n_eq + nA
            KKT = np.zeros((dim, dim))
            KKT[:nz, :nz] = H
            KKT[:nz, nz : nz + n_eq] = C_J.T
            KKT[nz : nz + n_eq, :nz] = C_J
            if nA:
                GA = J_all[work]
                KKT[:nz, nz + n_eq :] = GA.T
                KKT[nz + n_eq :, :nz] = GA
            rhs = np.concatenate([-grad, -c, -(g[work] + opts.backoff)])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                return None
            lam = sol[nz + n_eq :]
            neg = np.flatnonzero(lam < -1e-9)
            if len(neg) == 0:
                break
            work = np.delete(work, neg)
        else:
            return None
        pos = list(work).index(term_idx) if term_idx in work else -1
        lam_term = max(float(lam[pos]), 0.0) if pos >= 0 else 0.0
        z_try = z + sol[:nz]
        g_try = ws.ineq_values(z_try)
        crossed = np.flatnonzero(g_try > 1e-12)
        new_rows = np.setdiff1d(crossed, work)
        if len(new_rows):
            work = np.union1d(work, new_rows)
            g = ws.ineq_values(z)
            continue
        # judge the stepped point on its own multipliers, not the stale ones
        grad_try = ws.cost_grad(z_try)
        J_rows = np.vstack([ws.eq_jacobian(z_try), _ineq_jacobian(ws, z_try)[work]])
        mult, *_ = np.linalg.lstsq(J_rows.T, -grad_try, rcond=None)
        lam_fit = mult[n_eq:]
        res = grad_try + J_rows.T @ mult
        kkt = float(np.linalg.norm(res, ord=np.inf))
        eq_try = float(np.linalg.norm(ws.eq_constraints(z_try), ord=np.inf))
        if (
            eq_try <= opts.tol_equality
            and kkt <= opts.tol_stationarity
            and (len(lam_fit) == 0 or float(np.min(lam_fit)) >= -1e-9)
        ):
            # good enough, but another pass usually reaches machine precision
            if kkt <= 1e-2 * opts.tol_stationarity:
                return z_try, kkt
            if best is None or kkt < best[1]:
                best = (z_try, kkt)
        # nonlinearity left a residual; take another Newton pass from here
        z = z_try
        g = g_try
    return best


def solve_ocp(problem: OcpProblem, warm: OcpSolution | None = None, options: SqpOptions | None = None) -> OcpSolution:
    """Solve the tracking problem; returns a strictly feasible local optimum.

    Raises OcpInfeasibleError when escalated penalties still leave some
    constraint violated at convergence.
    """
    opts = options or SqpOptions()
    ws = _Workspace(problem)
    if warm is not None:
        z = ws.pack(warm.u_seq, warm.x_seq, warm.xbar, warm.ubar)
    else:
        z = _cold_start_vector(ws)
    mu_pen = opts.penalty_init
    sigma = 1.0
    reg_base = opts.regularization * max(1.0, float(np.max(np.abs(ws.H_cost))))
    reg = reg_base
    iterations = 0
    status = "max-iter"
    kkt = math.nan
    viol_history: list[float] = []
    polish_cooldown = 0

    for iterations in range(1, opts.max_iter + 1):
        c = ws.eq_constraints(z)
        C_J = ws.eq_jacobian(z)
        g, active, viol, _ = _penalty_terms(ws, z, mu_pen, opts.backoff)

        max_g = float(np.max(g)) if len(g) else -math.inf
        eq_now = float(np.linalg.norm(c, ord=np.inf))

        # once the iterate is essentially feasible, finish with an
        # active-set Newton step instead of waiting out the penalty loop
        if eq_now <= 1e-6 and max_g <= 10.0 * opts.backoff:
            if polish_cooldown == 0:
                polished = _polish(ws, z, opts, reg_base)
                if polished is not None:
                    z, kkt = polished
                    status = "solved"
                    break
                polish_cooldown = 5
            else:
                polish_cooldown -= 1

        # a violation that stopped shrinking means the iterate sits at the
        # current penalty's equilibrium; escalate without waiting for exact
        # stationarity
        if max_g > 1e-12 and eq_now <= 1e-6 and mu_pen < opts.penalty_max:
            viol_history.append(max_g)
            if len(viol_history) > 6 and max_g > 0.99 * viol_history[-7]:
                mu_pen = min(mu_pen * 10.0, opts.penalty_max)
                viol_history.clear()
                continue
        else:
            viol_history.clear()
        grad = ws.cost_grad(z)
        H = ws.H_cost.copy()
        if np.any(active[:-1]):
            Ga = ws.G[active[:-1]]
            va = viol[:-1][active[:-1]]
            grad = grad + 2.0 * mu_pen * Ga.T @ va
            H += 2.0 * mu_pen * Ga.T @ Ga
        if active[-1]:
            row = ws.ineq_jacobian_row_terminal(z)
            grad = grad + 2.0 * mu_pen * viol[-1] * row
            H += 2.0 * mu_pen * np.outer(row, row)

        KKT = np.zeros((ws.nz + ws.n_eq, ws.nz + ws.n_eq))
        KKT[: ws.nz, : ws.nz] = H + reg * np.eye(ws.nz)
        KKT[: ws.nz, ws.nz :] = C_J.T
        KKT[ws.nz :, : ws.nz] = C_J
        rhs = np.concatenate([-grad, -c])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            reg *= 100.0
            continue
        delta, nu = sol[: ws.nz], sol[ws.nz :]

        kkt = float(np.linalg.norm(grad + C_J.T @ nu, ord=np.inf))
        eq_res = float(np.linalg.norm(c, ord=np.inf))
        if kkt <= opts.tol_stationarity and eq_res <= opts.tol_equality:
            if np.all(g <= 1e-12):
                status = "solved"
                break
            if mu_pen >= opts.penalty_max:
                u_seq, x_seq, xbar, ubar = ws.unpack(z)
                partial = OcpSolution(
                    u_seq, x_seq, xbar, ubar, problem.model.C @ xbar,
                    ws.cost(z), "infeasible", iterations, kkt, mu_pen,
                )
                raise OcpInfeasibleError(
                    f"constraint violation {float(np.max(g)):.3e} persists at maximum penalty",
                    partial,
                )
            mu_pen = min(mu_pen * 10.0, opts.penalty_max)
            continue

        sigma = max(sigma, 2.0 * float(np.linalg.norm(nu, ord=np.inf)) + 1.0)
        merit0 = ws.cost(z) + _penalty_terms(ws, z, mu_pen, opts.backoff)[3] + sigma * float(np.sum(np.abs(c)))
        descent = float(grad @ delta) - sigma * float(np.sum(np.abs(c)))
        if descent > -1e-16:
            descent = -1e-16
        alpha = 1.0
        accepted = False
        for _ in range(opts.max_linesearch):
            z_try = z + alpha * delta
            merit_try = (
                ws.cost(z_try)
                + _penalty_terms(ws, z_try, mu_pen, opts.backoff)[3]
                + sigma * float(np.sum(np.abs(ws.eq_constraints(z_try))))
            )
            if merit_try <= merit0 + opts.armijo * alpha * descent:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            reg = min(reg * 10.0, 1e6 * reg_base)
            alpha = 0.0
        else:
            reg = max(reg / 10.0, reg_base)
        z = z + alpha * delta
        if accepted and np.linalg.norm(alpha * delta, ord=np.inf) < 1e-14 and eq_res <= opts.tol_equality:
            # stalled at numerical floor; let the convergence test decide next pass
            continue

    u_seq, x_seq, xbar, ubar = ws.unpack(z)
    rbar = problem.model.C @ xbar
    solution = OcpSolution(u_seq, x_seq, xbar, ubar, rbar, ws.cost(z), status, iterations, kkt, mu_pen)
    if status != "solved":
        g = ws.ineq_values(z)
        eq_res = float(np.linalg.norm(ws.eq_constraints(z), ord=np.inf))
        if eq_res > opts.tol_equality or np.any(g > 1e-12):
            solution.status = "infeasible"
            raise OcpInfeasibleError(
                f"no feasible point after {opts.max_iter} iterations "
                f"(eq {eq_res:.3e}, ineq {float(np.max(g)) if len(g) else 0.0:.3e})",
                solution,
            )
    return solution


def _cold_start_vector(ws: _Workspace) -> np.ndarray:
    """Hold at the current position: steady pair there, local controller rollout."""
    pr = ws.problem
    model = pr.model
    ts = pr.terminal
    p0 = model.C @ pr.x0
    steady = ts.translated_steady(model, p0)
    u_seq = np.zeros((ws.N, ws.nu))
    x_seq = np.zeros((ws.N + 1, ws.nx))
    x_seq[0] = pr.x0
    lo, hi = model.input_bounds.lower, model.input_bounds.upper
    for l in range(ws.N):
        u = steady.u + ts.K @ (x_seq[l] - steady.x)
        u_seq[l] = np.clip(u, lo, hi)
        x_seq[l + 1] = model.step(x_seq[l], u_seq[l])
    return ws.pack(u_seq, x_seq, steady.x, steady.u)


def cold_start(problem: OcpProblem) -> OcpSolution:
    """Initial guess holding position; not verified against constraints."""
    ws = _Workspace(problem)
    z = _cold_start_vector(ws)
    u_seq, x_seq, xbar, ubar = ws.unpack(z)
    return OcpSolution(u_seq, x_seq, xbar, ubar, problem.model.C @ xbar, ws.cost(z), "candidate")


def shift_warm_start(problem: OcpProblem, prev: OcpSolution) -> OcpSolution:
    """One-step shifted candidate, with the terminal controller appended.

    The candidate must satisfy every constraint of the new problem; a
    violation is raised, since with unchanged dynamics it certifies loss of
    recursive feasibility.
    """
    model = problem.model
    ts = problem.terminal
    N = problem.horizon
    kappa = prev.ubar + ts.K @ (prev.x_seq[N] - prev.xbar)
    u_seq = np.vstack([prev.u_seq[1:], kappa[None, :]])
    x_last = model.step(prev.x_seq[N], kappa)
    x_seq = np.vstack([prev.x_seq[1:], x_last[None, :]])
    ws = _Workspace(problem)
    z = ws.pack(u_seq, x_seq, prev.xbar, prev.ubar)
    candidate = OcpSolution(
        u_seq, x_seq, prev.xbar.copy(), prev.ubar.copy(),
        model.C @ prev.xbar, ws.cost(z), "candidate",
    )
    _verify_candidate(ws, z)
    return candidate


def _verify_candidate(ws: _Workspace, z: np.ndarray):
    eq_res = float(np.linalg.norm(ws.eq_constraints(z), ord=np.inf))
    if eq_res > 1e-7:
        raise RecursiveFeasibilityError(f"candidate dynamics residual {eq_res:.3e}")
    g = ws.ineq_values(z)
    if len(g) and float(np.max(g)) > 1e-9:
        raise RecursiveFeasibilityError(f"candidate constraint violation {float(np.max(g)):.3e}")


def solution_feasibility(problem: OcpProblem, sol: OcpSolution) -> dict:
    """Residual summary used by tests and the simulation harness."""
    ws = _Workspace(problem)
    z = ws.pack(sol.u_seq, sol.x_seq, sol.xbar, sol.ubar)
    g = ws.ineq_values(z)
    return {
        "dynamics": float(np.linalg.norm(ws.eq_constraints(z), ord=np.inf)),
        "inequality": float(np.max(g)) if len(g) else 0.0,
        "setpoint": float(np.linalg.norm(sol.rbar - problem.model.C @ sol.xbar)),
    }


def offset_optimum(problem: OcpProblem) -> np.ndarray:
    """Minimizer of the steady-state cost over the feasible setpoints.

    The reduced cost mu*(r - r_ref)'S_r(r - r_ref) + (1-mu)*bearing_cost(r)
    is a positive definite quadratic in the plane, so the optimum is either
    its unconstrained minimum or lies on an edge of the setpoint polygon;
    both cases are solved in closed form.
    """
    w = problem.weights
    mu = w.mu
    W = mu * w.S_r
    q = mu * w.S_r @ problem.r_ref
    coef = (1.0 - mu) * w.w_b
    for j, g in problem.desired_bearings:
        Pg = bearing_projector(g)
        W = W + coef * Pg
        q = q + coef * Pg @ np.asarray(problem.neighbor_anchors[j], dtype=float)
    r_free = np.linalg.solve(W, q)
    region = problem.setpoint_region
    if region is None or region.contains(r_free, tol=1e-12):
        return r_free

    def value(r):
        return float(r @ W @ r - 2.0 * q @ r)

    verts = region.vertices
    k = len(verts)
    best, best_val = None, np.inf
    for idx in range(k):
        a, b = verts[idx], verts[(idx + 1) % k]
        d = b - a
        denom = float(d @ W @ d)
        if denom > 1e-300:
            t = float(q @ d - a @ W @ d) / denom
            t = min(max(t, 0.0), 1.0)
        else:
            t = 0.0
        for cand in (a + t * d, a, b):
            val = value(cand)
            if val < best_val:
                best, best_val = cand, val
    return np.asarray(best)


def mpc_step(problem: OcpProblem, warm: OcpSolution | None = None, options: SqpOptions | None = None):
    """Solve and return the first input with the full solution."""
    sol = solve_ocp(problem, warm=warm, options=options)
    return sol.u_seq[0].copy(), sol
