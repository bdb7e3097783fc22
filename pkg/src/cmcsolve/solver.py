"""Damped Newton solve of the assembled system and the continuity-method
homotopy from a near-ball pair to the target pair.

Every accepted iterate satisfies the admissibility guards (uniform convexity
everywhere, spacelike bound in the primal Minkowski model): the guards are
invariants of the iteration, not posterior checks.  Steps are damped by
backtracking with an Armijo decrease condition on the residual 2-norm; the
linear solves use a direct sparse factorization (SuperLU, with its built-in
row/column equilibration).

The homotopy walks increasing t through the super-level families Omega_t,
Omega_tilde_t, warm-starting each Newton solve from the previous field
carried over on the shared parameter lattice.  The first step is seeded from
the radial reference (exact on ball pairs, inscribed-ball quadratic
otherwise); failed steps trigger bisection of the t increment before giving
up.  Progress is logged one line per Newton iteration in the format

  newton t=<t|-> iter=<k> res=<inf-norm> alpha=<step> c=<constant>
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import (OperatorKind, ProblemSpec, admissibility_violation,
                       jacobian, residual, residual_from_state)
from .domains import ConvexDomain
from .errors import DegenerateSublevel, NonConvergence, StepRejection
from .grid import SolutionField, build_grid, transfer_field
from .kernel import ModelKind

logger = logging.getLogger("cmcsolve.solver")


@dataclass
class SolveOptions:
    tol_residual: float = 1e-10      # relative: ||res||_inf <= tol (1 + |c|)
    max_newton: int = 40
    armijo_factor: float = 0.5
    armijo_c: float = 1e-4
    eps_convexity: float = 1e-8
    eps_space: float = 1e-6
    alpha_min: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.armijo_factor < 1.0:
            raise ValueError("armijo_factor must be in (0, 1)")
        for name in ("tol_residual", "max_newton", "armijo_c", "eps_convexity",
                     "eps_space", "alpha_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class NewtonInfo:
    converged: bool = False
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    alphas: list = field(default_factory=list)


@dataclass
class HomotopyState:
    """Snapshot of one continuation step."""

    t: float
    omega_t: ConvexDomain
    omega_tilde_t: ConvexDomain
    field: SolutionField
    c_history: list  # [(t, c)] up to and including this step
    newton_iterations: int = 0


def _solve_linear(jac: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    row_max = np.asarray(abs(jac).max(axis=1).todense()).ravel()
    row_max[row_max == 0] = 1.0
    scale = sp.diags(1.0 / row_max)
    return splu((scale @ jac).tocsc()).solve(rhs / row_max)


def damped_step(spec: ProblemSpec, fld: SolutionField, direction: np.ndarray,
                opts: SolveOptions, res_2norm: float):
    """Largest step alpha in {1, factor, factor^2, ...} that keeps the trial
    iterate admissible and achieves Armijo decrease of ||residual||_2.

    Returns (alpha, trial_field, trial_residual).  Raises the violated guard
    if no admissible step exists above alpha_min, StepRejection if admissible
    steps exist but none achieves the decrease.
    """
    grid = spec.grid
    n = grid.n_nodes
    du0, d2u0 = fld.derivatives()
    dub0 = grid.boundary_gradients(fld.u)
    d_u = direction[:n]
    d_c = direction[n]
    ddu, dd2u = grid.derivative_arrays(d_u)
    ddub = grid.boundary_gradients(d_u)

    alpha = 1.0
    any_admissible = False
    last_guard = None
    while alpha >= opts.alpha_min:
        trial = SolutionField(grid, fld.u + alpha * d_u, fld.c + alpha * d_c,
                              fld.model, fld.dual)
        guard = admissibility_violation(spec, trial, opts.eps_convexity)
        if guard is None:
            any_admissible = True
            res = residual_from_state(spec, trial.u, trial.c,
                                      du0 + alpha * ddu, d2u0 + alpha * dd2u,
                                      dub0 + alpha * ddub)
            if np.linalg.norm(res) <= (1.0 - opts.armijo_c * alpha) * res_2norm:
                return alpha, trial, res
        else:
            last_guard = guard
        alpha *= opts.armijo_factor
    if not any_admissible and last_guard is not None:
        raise last_guard
    raise StepRejection(f"no Armijo step above {opts.alpha_min}")


def newton_solve(spec: ProblemSpec, initial: SolutionField,
                 opts: SolveOptions | None = None,
                 t_label: float | None = None):
    """Solve the discrete system by damped Newton from an admissible field.

    Returns (field, NewtonInfo).  Raises NonConvergence with the best
    iterate attached when the budget runs out or the line search stalls;
    guard violations of the initial field propagate as-is.
    """
    opts = opts or SolveOptions()
    guard = admissibility_violation(spec, initial, opts.eps_convexity)
    if guard is not None:
        raise guard

    fld = initial.copy()
    fld.u = spec.grid.mean_zero(fld.u)
    info = NewtonInfo()
    res = residual(spec, fld)
    t_str = f"{t_label:.4g}" if t_label is not None else "-"

    for it in range(opts.max_newton):
        r_inf = float(np.max(np.abs(res)))
        info.residual_norms.append(r_inf)
        if r_inf <= opts.tol_residual * (1.0 + abs(fld.c)):
            info.converged = True
            info.iterations = it
            return fld, info

        jac = jacobian(spec, fld)
        direction = _solve_linear(jac, -res)
        try:
            alpha, fld, res = damped_step(spec, fld, direction, opts,
                                          float(np.linalg.norm(res)))
        except StepRejection as exc:
            raise NonConvergence(f"line search stalled at iteration {it + 1}",
                                 best_field=fld, residual_norm=r_inf,
                                 iterations=it, t=t_label) from exc
        info.alphas.append(alpha)
        logger.info("newton t=%s iter=%d res=%.9g alpha=%.9g c=%.9g",
                    t_str, it + 1, float(np.max(np.abs(res))), alpha, fld.c)

    r_inf = float(np.max(np.abs(res)))
    if r_inf <= opts.tol_residual * (1.0 + abs(fld.c)):
        info.converged = True
        info.iterations = opts.max_newton
        return fld, info
    raise NonConvergence(f"no convergence in {opts.max_newton} iterations "
                         f"(residual {r_inf:.3e})", best_field=fld,
                         residual_norm=r_inf, iterations=opts.max_newton,
                         t=t_label)


def auto_t_min(omega: ConvexDomain, omega_tilde: ConvexDomain, n_rho: int) -> float:
    """Smallest schedule parameter whose super-level sets still contain a
    comfortably resolvable core (inradius of at least six radial cells)."""
    phi = np.linspace(0, 2 * np.pi, 16, endpoint=False)

    def admissible(t):
        for dom in (omega, omega_tilde):
            cell = float(np.max(np.atleast_1d(dom.boundary_radius(phi)))) / n_rho
            try:
                sub = dom.sublevel(t)
            except DegenerateSublevel:
                return False
            if float(np.min(np.atleast_1d(sub.boundary_radius(phi)))) < 6 * cell:
                return False
        return True

    for t in np.arange(0.05, 1.0, 0.05):
        if admissible(round(float(t), 10)):
            return round(float(t), 10)
    return 1.0


def run_homotopy(omega: ConvexDomain, omega_tilde: ConvexDomain,
                 model: ModelKind, n_rho: int, n_phi: int,
                 schedule=None, opts: SolveOptions | None = None,
                 operator: OperatorKind = OperatorKind.GRAPH,
                 max_bisections: int = 4):
    """Continuity-method solve: deform a near-ball pair into the target pair.

    schedule: increasing t values ending at 1 (default: 12 uniform steps
    from auto_t_min).  Returns (final field, [HomotopyState]).
    """
    from .radial import seed_field

    opts = opts or SolveOptions()
    if schedule is None:
        t_min = auto_t_min(omega, omega_tilde, n_rho)
        schedule = np.linspace(t_min, 1.0, 12) if t_min < 1.0 else np.array([1.0])
    schedule = [float(t) for t in schedule]
    if sorted(schedule) != schedule or schedule[-1] != 1.0:
        raise ValueError("schedule must be increasing and end at t = 1")

    history: list[HomotopyState] = []
    c_history: list[tuple[float, float]] = []
    prev_field = None
    prev_t = None
    pending = list(schedule)
    bisections = 0

    while pending:
        t = pending[0]
        om_t = omega.sublevel(t)
        omt_t = omega_tilde.sublevel(t)
        grid_t = build_grid(om_t, n_rho, n_phi)
        spec_t = ProblemSpec(om_t, omt_t, model, grid_t, operator=operator,
                             eps_space=opts.eps_space)
        if prev_field is None:
            initial = seed_field(spec_t)
        else:
            initial = transfer_field(prev_field, grid_t)
        try:
            fld, info = newton_solve(spec_t, initial, opts, t_label=t)
        except NonConvergence:
            if prev_t is None or bisections >= max_bisections:
                raise
            bisections += 1
            pending.insert(0, 0.5 * (prev_t + t))
            logger.info("homotopy bisect: inserting t=%.6g", pending[0])
            continue
        c_history.append((t, fld.c))
        history.append(HomotopyState(t=t, omega_t=om_t, omega_tilde_t=omt_t,
                                     field=fld, c_history=list(c_history),
                                     newton_iterations=info.iterations))
        prev_field, prev_t = fld, t
        pending.pop(0)

    return prev_field, history
