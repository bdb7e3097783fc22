import numpy as np
import pytest
from scipy.sparse.linalg import splu

from cmcsolve import (Ball, Ellipse, ModelKind, OperatorKind, ProblemSpec,
                      RadialSolution, SolutionField, build_grid, jacobian,
                      newton_solve, radial_profile, residual, seed_field)
from cmcsolve.assembly import dump_triplets, hessian_eig_bounds
from cmcsolve.errors import ConfigError, SpacelikeViolation

MINK = ModelKind.MINKOWSKI
EUC = ModelKind.EUCLIDEAN


def radial_interpolant(spec):
    grid = spec.grid
    sol = RadialSolution(2, spec.omega.radius, spec.omega_tilde.radius, spec.model)
    r = np.linalg.norm(grid.nodes - np.asarray(spec.omega.center), axis=-1)
    u, _, _ = radial_profile(sol, np.minimum(r, spec.omega.radius))
    return SolutionField(grid, grid.mean_zero(u), sol.c, spec.model), sol


def smooth_convex_field(spec, amp=0.03):
    grid = spec.grid
    x = grid.nodes
    u = 0.2 * np.sum(x ** 2, axis=-1) + amp * np.sin(2 * x[:, 0]) * np.cos(2 * x[:, 1])
    return SolutionField(grid, grid.mean_zero(u), 0.8, spec.model)


def fd_jacobian(spec, fld, step=1e-6):
    n = spec.grid.n_nodes
    cols = []
    for m in range(n + 1):
        up, um = fld.copy(), fld.copy()
        if m < n:
            up.u[m] += step
            um.u[m] -= step
        else:
            up.c += step
            um.c -= step
        cols.append((residual(spec, up) - residual(spec, um)) / (2 * step))
    return np.stack(cols, axis=-1)


class TestResidual:
    def test_exact_radial_order(self):
        om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
        norms = []
        for n in (16, 32, 64):
            grid = build_grid(om, n, 2 * n)
            spec = ProblemSpec(om, omt, MINK, grid)
            fld, _ = radial_interpolant(spec)
            norms.append(np.max(np.abs(residual(spec, fld))))
        assert np.log2(norms[0] / norms[1]) >= 1.8
        assert np.log2(norms[1] / norms[2]) >= 1.8

    def test_zero_field_structure(self):
        om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
        grid = build_grid(om, 16, 32)
        spec = ProblemSpec(om, omt, MINK, grid)
        res = residual(spec, SolutionField(grid, np.zeros(grid.n_nodes), 0.0, MINK))
        assert np.max(np.abs(res[:grid.n_nodes][grid.interior_mask])) == 0.0
        # boundary entries equal the target defining function at the origin
        h0, _, _ = omt.defining(np.zeros(2))
        assert np.allclose(res[grid.boundary_idx], h0, atol=1e-15)
        assert h0 > 0

    def test_quadratic_matches_target_boundary(self):
        # Du = lam x maps the ball boundary exactly onto the target boundary
        lam = 0.45
        om = Ball((0, 0), 1.0)
        grid = build_grid(om, 16, 32)
        spec = ProblemSpec(om, Ball((0, 0), lam), MINK, grid)
        u = grid.mean_zero(0.5 * lam * np.sum(grid.nodes ** 2, axis=-1))
        res = residual(spec, SolutionField(grid, u, 1.0, MINK))
        assert np.max(np.abs(res[grid.boundary_idx])) <= 1e-9

    def test_spacelike_violation_reported(self):
        om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
        grid = build_grid(om, 16, 32)
        spec = ProblemSpec(om, omt, MINK, grid)
        u = 0.9999995 * grid.nodes[:, 0]
        with pytest.raises(SpacelikeViolation):
            residual(spec, SolutionField(grid, u, 0.0, MINK))

    def test_nonconvex_field_allowed(self):
        # the residual is defined for non-convex states; only the solver guards
        om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
        grid = build_grid(om, 16, 32)
        spec = ProblemSpec(om, omt, MINK, grid)
        u = grid.mean_zero(0.1 * grid.nodes[:, 0] ** 2 - 0.1 * grid.nodes[:, 1] ** 2)
        res = residual(spec, SolutionField(grid, u, 0.0, MINK))
        assert np.all(np.isfinite(res))


class TestJacobian:
    @pytest.mark.parametrize("case", ["mink_ball", "euc_ellipse", "dual"])
    def test_against_finite_differences(self, case):
        if case == "mink_ball":
            om, omt, model, op = Ball((0, 0), 1.0), Ball((0, 0), 0.5), MINK, \
                OperatorKind.GRAPH
        elif case == "euc_ellipse":
            om, omt, model, op = Ellipse((0, 0), (1.0, 0.8)), Ball((0, 0), 0.4), \
                EUC, OperatorKind.GRAPH
        else:
            om, omt, model, op = Ball((0, 0), 0.5), Ball((0, 0), 1.0), MINK, \
                OperatorKind.INVERSE_HESSIAN
        grid = build_grid(om, 12, 24)
        spec = ProblemSpec(om, omt, model, grid, operator=op)
        fld = smooth_convex_field(spec)
        if case == "dual":
            fld.u = grid.mean_zero(2.0 * 0.5 * np.sum(grid.nodes ** 2, axis=-1)
                                   + 0.02 * np.sin(grid.nodes[:, 0]))
        jac = np.asarray(jacobian(spec, fld).todense())
        fd = fd_jacobian(spec, fld)
        rel = np.max(np.abs(jac - fd)) / np.max(np.abs(jac))
        assert rel <= 1e-5

    def test_constant_column_structure(self):
        om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
        grid = build_grid(om, 12, 24)
        spec = ProblemSpec(om, omt, MINK, grid)
        fld = smooth_convex_field(spec)
        jac = jacobian(spec, fld)
        col = np.asarray(jac[:, grid.n_nodes].todense()).ravel()
        assert np.all(col[:grid.n_nodes][grid.interior_mask] == -1.0)
        assert np.all(col[grid.boundary_idx] == 0.0)
        assert col[grid.n_nodes] == 0.0
        row = np.asarray(jac[grid.n_nodes, :].todense()).ravel()
        assert np.allclose(row[:grid.n_nodes], grid.quad_weights)

    def test_nonsingular_at_solution(self):
        om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
        grid = build_grid(om, 12, 24)
        spec = ProblemSpec(om, omt, MINK, grid)
        fld, _ = newton_solve(spec, seed_field(spec))
        jac = jacobian(spec, fld).tocsc()
        lu, lut = splu(jac), splu(jac.T.tocsc())
        rng = np.random.default_rng(0)
        y = rng.standard_normal(jac.shape[0])
        y /= np.linalg.norm(y)
        for _ in range(40):
            w = lut.solve(lu.solve(y))
            s = np.linalg.norm(w)
            y = w / s
        sigma_min = 1.0 / np.sqrt(s)
        print(f"smallest singular value at solution: {sigma_min:.6e}")
        assert sigma_min > 1e-4


class TestProblemSpec:
    def test_minkowski_image_inside_unit_ball(self):
        om = Ball((0, 0), 1.0)
        grid = build_grid(om, 8, 16)
        with pytest.raises(ConfigError):
            ProblemSpec(om, Ball((0, 0), 1.01), MINK, grid)

    def test_euclidean_unrestricted(self):
        om = Ball((0, 0), 1.0)
        grid = build_grid(om, 8, 16)
        ProblemSpec(om, Ball((0, 0), 1.5), EUC, grid)

    def test_dual_checks_position_domain(self):
        om = Ball((0, 0), 1.2)
        grid = build_grid(om, 8, 16)
        with pytest.raises(ConfigError):
            ProblemSpec(om, Ball((0, 0), 0.5), MINK, grid,
                        operator=OperatorKind.INVERSE_HESSIAN)


class TestHessianEigBounds:
    def test_matches_eigvalsh(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((50, 2, 2))
        a = 0.5 * (a + np.swapaxes(a, -1, -2))
        lo, hi = hessian_eig_bounds(a)
        eigs = np.linalg.eigvalsh(a)
        assert np.allclose(lo, eigs[:, 0], atol=1e-12)
        assert np.allclose(hi, eigs[:, 1], atol=1e-12)


def test_dump_triplets(tmp_path):
    om, omt = Ball((0, 0), 1.0), Ball((0, 0), 0.5)
    grid = build_grid(om, 8, 16)
    spec = ProblemSpec(om, omt, MINK, grid)
    fld = smooth_convex_field(spec)
    jac = jacobian(spec, fld)
    path = tmp_path / "jac.txt"
    dump_triplets(jac, path)
    rows = []
    for line in path.read_text().splitlines():
        r, c, v = line.split()
        rows.append((int(r), int(c), float(v)))
    assert len(rows) == jac.nnz
    r0, c0, v0 = rows[0]
    assert jac[r0, c0] == v0

    vec_path = tmp_path / "res.txt"
    dump_triplets(residual(spec, fld), vec_path)
    assert len(vec_path.read_text().splitlines()) == grid.n_nodes + 1
