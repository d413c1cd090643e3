"""Operator assembly, solves, energies, reactions and contact stepping."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdsc import analytic, geometry as geo, material as mat, pd_core
from pdsc.analytic import AffineField
from pdsc.geometry import Domain, GridSpec
from pdsc.material import CorrectionField, ElasticParams, MaterialModel
from pdsc.pd_core import BCSet, RampSolver, SolverFailure

E = 1000.0


def small_model(nx=6, ny=6, spacing=1.0, horizon=2.5, surfaces="all"):
    dom = Domain.rectangle((nx - 1) * spacing, (ny - 1) * spacing)
    nodes = geo.build_grid(dom, GridSpec.covering(dom, spacing))
    bonds = geo.build_bonds(nodes, horizon)
    m = MaterialModel.calibrated(ElasticParams(E, 1.0), horizon, "constant",
                                 "discrete", spacing)
    corr = mat.correct_bonds(bonds, nodes, dom, m, surfaces)
    k = pd_core.assemble(nodes, bonds, corr)
    return dom, nodes, bonds, m, corr, k


class TestAssemble:
    def test_two_node_block(self):
        # one bond along x: the x-dof block is (c V^2 / xi) [[1,-1],[-1,1]]
        pos = np.array([[0.0, 0.0], [2.0, 0.0]])
        vol = np.array([3.0, 3.0])
        nodes = geo.NodeSet(pos, vol, np.ones(2), np.zeros(2, np.uint8), 2.0)
        bonds = geo.build_bonds(nodes, 2.5)
        c = 7.0
        corr = CorrectionField(phi_i=np.ones(1), phi_j=np.ones(1),
                               bulk=np.array([c]), coeff=np.array([c]))
        k = pd_core.assemble(nodes, bonds, corr).toarray()
        w = c * 9.0 / 2.0
        expect = np.zeros((4, 4))
        expect[np.ix_([0, 2], [0, 2])] = w * np.array([[1, -1], [-1, 1]])
        assert np.allclose(k, expect)

    def test_translation_null_space(self):
        _, nodes, _, _, _, k = small_model()
        for shift in ([1.0, 0.0], [0.0, 1.0], [2.5, -3.5]):
            u = np.tile(shift, (nodes.n, 1)).ravel()
            assert np.abs(k @ u).max() < 1e-9 * np.abs(k.data).max()

    def test_linearized_rotation_null_space(self):
        # the skew part of an affine map produces no bond force at first order
        _, nodes, _, _, _, k = small_model()
        omega = 1e-3
        u = np.stack([-omega * nodes.positions[:, 1],
                      omega * nodes.positions[:, 0]], axis=1).ravel()
        assert np.abs(k @ u).max() < 1e-12 * np.abs(k.data).max()

    def test_symmetry_exact(self):
        _, _, _, _, _, k = small_model()
        diff = (k - k.T).tocoo()
        assert len(diff.data) == 0 or np.abs(diff.data).max() == 0.0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_positive_semidefinite(self, seed):
        _, nodes, _, _, _, k = small_model()
        v = np.random.default_rng(seed).normal(size=k.shape[0])
        quad = v @ (k @ v)
        assert quad >= -1e-12 * np.abs(k.data).max() * (v @ v)


class TestEnergyConsistency:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000),
           surfaces=st.sampled_from(["all", None]))
    def test_operator_energy_equals_lattice_sum(self, seed, surfaces):
        # 1/2 u^T K u must equal the per-node energy sum for any field
        dom, nodes, bonds, m, corr, k = small_model(surfaces=surfaces)
        u = np.random.default_rng(seed).normal(size=(nodes.n, 2)) * 1e-3
        quad = 0.5 * u.ravel() @ (k @ u.ravel())
        w = pd_core.strain_energy_density(nodes, bonds, corr, u)
        total = float((w * nodes.volumes).sum())
        assert total == pytest.approx(quad, rel=1e-10)

    def test_zero_field_zero_energy(self):
        dom, nodes, bonds, m, corr, _ = small_model()
        w = pd_core.strain_energy_density(nodes, bonds, corr,
                                          np.zeros((nodes.n, 2)))
        assert np.all(w == 0.0)

    def test_bulk_affine_energy_density(self):
        # interior node energy equals the lattice-tensor value for any strain
        dom, nodes, bonds, m, corr, _ = small_model(nx=13, ny=13, spacing=0.5,
                                                    horizon=1.5)
        lattice = mat.discrete_hooke(m, 0.5)
        eps = np.array([[2e-3, 5e-4], [5e-4, -1e-3]])
        u = AffineField(eps).displacements(nodes.positions)
        w = pd_core.strain_energy_density(nodes, bonds, corr, u)
        center = np.argmin(np.linalg.norm(nodes.positions, axis=1))
        assert nodes.boundary_distance[center] >= 1.5
        assert w[center] == pytest.approx(lattice.energy_density(eps), rel=1e-10)


class TestSolveStatic:
    def test_free_node_between_pulled_ends(self):
        pos = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        nodes = geo.NodeSet(pos, np.ones(3), np.ones(3), np.zeros(3, np.uint8), 1.0)
        bonds = geo.build_bonds(nodes, 1.5)
        corr = CorrectionField(np.ones(bonds.m), np.ones(bonds.m),
                               np.full(bonds.m, 5.0), np.full(bonds.m, 5.0))
        k = pd_core.assemble(nodes, bonds, corr)
        bcs = BCSet(3)
        bcs.prescribe([0], ux=-0.01, uy=0.0)
        bcs.prescribe([2], ux=0.01, uy=0.0)
        bcs.prescribe([1], uy=0.0)
        u, _ = pd_core.solve_static(k, bcs, method="pcg")
        assert u[1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_zero_problem(self):
        _, nodes, _, _, _, k = small_model()
        bcs = BCSet(nodes.n)
        bcs.prescribe([0], ux=0.0, uy=0.0)
        bcs.prescribe([5], uy=0.0)
        u, diag = pd_core.solve_static(k, bcs)
        assert np.all(u == 0.0)
        assert diag.converged

    def test_pcg_matches_dense_oracle(self):
        # 5x5 grid, loaded edge: iterative and dense-factorization solutions
        # agree to 1e-8
        dom, nodes, bonds, m, corr, k = small_model(nx=5, ny=5)
        bcs = BCSet(nodes.n)
        bottom = nodes.on_side(dom, "-y")
        top = nodes.on_side(dom, "+y")
        bcs.prescribe(bottom, ux=0.0, uy=0.0)
        bcs.add_load(top, fy=0.5)
        u_pcg, diag = pd_core.solve_static(k, bcs, tol=1e-12, method="pcg")
        u_dense = analytic.dense_oracle_solve(k, bcs)
        scale = np.abs(u_dense).max()
        assert np.abs(u_pcg - u_dense).max() < 1e-8 * scale
        assert diag.method == "pcg" and diag.iterations > 0

    def test_direct_matches_pcg(self):
        dom, nodes, bonds, m, corr, k = small_model(nx=7, ny=5)
        bcs = BCSet(nodes.n)
        bcs.prescribe(nodes.on_side(dom, "-y"), ux=0.0, uy=0.0)
        bcs.add_load(nodes.on_side(dom, "+y"), fy=0.3)
        u_a, _ = pd_core.solve_static(k, bcs, method="pcg", tol=1e-12)
        u_b, _ = pd_core.solve_static(k, bcs, method="direct", tol=1e-12)
        assert np.abs(u_a - u_b).max() < 1e-8 * np.abs(u_b).max()

    def test_prescribed_and_loaded_clash_rejected(self):
        _, nodes, _, _, _, k = small_model()
        bcs = BCSet(nodes.n)
        bcs.prescribe([0], ux=0.0)
        bcs.add_load([0], fx=1.0)
        with pytest.raises(ValueError):
            pd_core.solve_static(k, bcs)

    def test_nonconvergence_reported(self):
        _, nodes, _, _, _, k = small_model()
        bcs = BCSet(nodes.n)
        bcs.prescribe([0], ux=0.0, uy=0.0)
        bcs.prescribe([3], uy=0.0)
        bcs.add_load([20], fy=1.0)
        with pytest.raises(SolverFailure):
            pd_core.solve_static(k, bcs, method="pcg", max_iter=2)


class TestReactions:
    def test_zero_strain_zero_reaction(self):
        dom, nodes, _, _, _, k = small_model()
        bcs = BCSet(nodes.n)
        top = nodes.on_side(dom, "+y")
        bottom = nodes.on_side(dom, "-y")
        bcs.prescribe(top, ux=0.0, uy=0.0)
        bcs.prescribe(bottom, ux=0.0, uy=0.0)
        u, _ = pd_core.solve_static(k, bcs)
        r = pd_core.reaction_force(k, u, bcs, top)
        assert np.allclose(r, 0.0, atol=1e-12)

    def test_action_reaction_balance(self):
        dom, nodes, _, _, _, k = small_model()
        bcs = BCSet(nodes.n)
        top = nodes.on_side(dom, "+y")
        bottom = nodes.on_side(dom, "-y")
        bcs.prescribe(top, ux=0.0, uy=0.01)
        bcs.prescribe(bottom, ux=0.0, uy=-0.01)
        u, _ = pd_core.solve_static(k, bcs)
        r_top = pd_core.reaction_force(k, u, bcs, top)
        r_bot = pd_core.reaction_force(k, u, bcs, bottom)
        assert r_top[1] == pytest.approx(-r_bot[1], rel=1e-10)
        assert r_top[1] > 0.0

    def test_mean_stress_normalization(self):
        assert pd_core.mean_tensile_stress(-50.0, 50.0, 2.0) == pytest.approx(0.5)


class TestBondInversion:
    def test_small_strain_clean(self):
        dom, nodes, bonds, m, corr, k = small_model()
        eps = np.array([[5e-3, 0.0], [0.0, -2e-3]])
        u = AffineField(eps).displacements(nodes.positions)
        assert len(pd_core.check_bond_inversion(bonds, u)) == 0

    def test_overshoot_flagged(self):
        # one node pushed past its neighbor reverses the bond
        pos = np.array([[0.0, 0.0], [1.0, 0.0]])
        nodes = geo.NodeSet(pos, np.ones(2), np.ones(2), np.zeros(2, np.uint8), 1.0)
        bonds = geo.build_bonds(nodes, 1.5)
        u = np.array([[2.0, 0.0], [0.0, 0.0]])
        assert pd_core.check_bond_inversion(bonds, u).tolist() == [0]


class TestRampSolver:
    def test_matches_solve_static_with_constraints(self):
        dom, nodes, bonds, m, corr, k = small_model(nx=9, ny=9)
        base = BCSet(nodes.n)
        bottom = nodes.on_side(dom, "-y")
        base.prescribe(bottom, ux=0.0, uy=0.0)
        solver = RampSolver(k, base, tol=1e-11)
        top = nodes.on_side(dom, "+y")[:3]
        dofs = np.stack([2 * top, 2 * top + 1], axis=1).ravel()
        solver.add_constraints(dofs)
        values = np.array([0.0, -0.01] * 3)
        u_ramp, _ = solver.solve(values)
        bcs = base.copy()
        bcs.prescribe(top, ux=0.0, uy=-0.01)
        u_ref, _ = pd_core.solve_static(k, bcs, tol=1e-12, method="direct")
        assert np.abs(u_ramp - u_ref).max() < 1e-9 * np.abs(u_ref).max()

    def test_rejects_base_prescribed_dof(self):
        dom, nodes, bonds, m, corr, k = small_model()
        base = BCSet(nodes.n)
        base.prescribe([0], ux=0.0, uy=0.0)
        base.prescribe([1], uy=0.0)
        solver = RampSolver(k, base)
        with pytest.raises(ValueError):
            solver.add_constraints([0])


class TestIndentationRamp:
    def _setup(self, surfaces="all"):
        spacing, horizon = 0.5, 1.5
        dom = Domain.rectangle(12, 8)
        nodes = geo.build_grid(dom, GridSpec.covering(dom, spacing))
        bonds = geo.build_bonds(nodes, horizon)
        m = MaterialModel.calibrated(ElasticParams(E, 1.0), horizon, "constant",
                                     "discrete", spacing)
        corr = mat.correct_bonds(bonds, nodes, dom, m, surfaces)
        k = pd_core.assemble(nodes, bonds, corr)
        base = BCSet(nodes.n)
        tol = 1e-7 * spacing
        bottom = np.where(np.abs(nodes.positions[:, 1] + 4) < tol)[0]
        top = np.where(np.abs(nodes.positions[:, 1] - 4) < tol)[0]
        base.prescribe(bottom, ux=0.0, uy=0.0)
        return nodes, bonds, k, base, top

    def test_zero_depth_zero_force(self):
        nodes, bonds, k, base, top = self._setup()
        res = pd_core.run_indentation(nodes.positions, k, base, top, 4.0,
                                      np.array([0.0]), bonds=bonds)
        assert res.forces.tolist() == [0.0]
        assert res.stuck_counts.tolist() == [0]
        assert not res.failed

    def test_monotone_stick_set_and_force(self):
        nodes, bonds, k, base, top = self._setup()
        depths = np.linspace(0.05, 0.8, 16)
        res = pd_core.run_indentation(nodes.positions, k, base, top, 4.0,
                                      depths, bonds=bonds)
        assert not res.failed
        assert np.all(np.diff(res.stuck_counts) >= 0)
        assert np.all(np.diff(res.forces) > 0)
        assert res.stuck_counts[-1] >= 3

    def test_attachments_stay_on_indenter(self):
        nodes, bonds, k, base, top = self._setup()
        depths = np.linspace(0.05, 0.6, 12)
        res = pd_core.run_indentation(nodes.positions, k, base, top, 4.0,
                                      depths, bonds=bonds)
        state = res.indenter
        radii = np.linalg.norm(state.attach_offsets, axis=1)
        assert np.allclose(radii, 4.0, rtol=1e-12)
        # stuck nodes track the indenter rigidly in the final state
        final = nodes.positions[state.stuck_ids] + res.u_final[state.stuck_ids]
        assert np.allclose(np.linalg.norm(final - state.center, axis=1), 4.0,
                           rtol=1e-9)
