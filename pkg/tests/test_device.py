"""Geometry, boundary data, initial-data validation, and the boundary
equilibrium defect."""

import numpy as np
import pytest

from memflow import device as dv

from conftest import make_1d_setup


def mesh_1d(cells=10, contacts=("left", "right"), length=1.0, grading=1.0):
    geom = dv.MeshGeometry(
        dimension=1, lengths=(length,), cells=(cells,),
        contacts=tuple(dv.ContactSegment(c) for c in contacts),
        grading=grading)
    return dv.build_mesh(geom)


class TestBuildMesh1D:
    def test_counts(self):
        mesh = mesh_1d(10)
        assert mesh.n_cells == 10
        assert mesh.n_edges == 9
        assert len(mesh.dirichlet_edges) == 2

    def test_measures_partition_interval(self):
        mesh = mesh_1d(7, length=2.5)
        assert mesh.total_measure == pytest.approx(2.5, rel=1e-14)

    def test_graded_mesh(self):
        mesh = mesh_1d(8, grading=1.3)
        w = mesh.cell_measures
        assert np.all(np.diff(w) > 0.0)
        assert w.sum() == pytest.approx(1.0, rel=1e-12)

    def test_single_contact(self):
        mesh = mesh_1d(5, contacts=("left",))
        assert len(mesh.dirichlet_edges) == 1
        assert mesh.dirichlet_measure == pytest.approx(1.0)

    def test_no_contacts_rejected(self):
        with pytest.raises(dv.MeshError, match=r"\(A1\)"):
            mesh_1d(5, contacts=())

    def test_bad_side_rejected(self):
        with pytest.raises(dv.MeshError, match="boundary"):
            mesh_1d(5, contacts=("middle",))

    def test_overlapping_tags_rejected(self):
        with pytest.raises(dv.MeshError, match="overlap"):
            mesh_1d(5, contacts=("left", "left"))

    def test_zero_cells_rejected(self):
        with pytest.raises(dv.MeshError):
            mesh_1d(0)


class TestBuildMesh2D:
    def make(self, contacts):
        geom = dv.MeshGeometry(dimension=2, lengths=(4.0, 3.0), cells=(4, 3),
                               contacts=contacts)
        return dv.build_mesh(geom)

    def test_counts(self):
        mesh = self.make((dv.ContactSegment("left"),))
        assert mesh.n_cells == 12
        # 3 rows of 3 x-edges plus 2 rows of 4 y-edges
        assert mesh.n_edges == 9 + 8
        assert mesh.bedge_cells.shape[0] == 2 * 3 + 2 * 4
        assert len(mesh.dirichlet_edges) == 3
        assert mesh.dirichlet_measure == pytest.approx(3.0)

    def test_partial_span(self):
        mesh = self.make((dv.ContactSegment("left", 0.0, 1.0),))
        assert len(mesh.dirichlet_edges) == 1

    def test_span_outside_boundary(self):
        with pytest.raises(dv.MeshError, match="boundary"):
            self.make((dv.ContactSegment("left", 2.0, 5.0),))

    def test_overlapping_spans(self):
        with pytest.raises(dv.MeshError, match="overlap"):
            self.make((dv.ContactSegment("left", 0.0, 2.0),
                       dv.ContactSegment("left", 1.0, 3.0)))

    def test_conforming_boundary(self):
        mesh = self.make((dv.ContactSegment("right"),))
        # boundary edge measures partition the rectangle perimeter
        assert mesh.bedge_measures.sum() == pytest.approx(2 * (4.0 + 3.0))

    def test_contacts_on_all_four_sides(self):
        mesh = self.make((dv.ContactSegment("left"),
                          dv.ContactSegment("right"),
                          dv.ContactSegment("bottom", 1.0, 3.0),
                          dv.ContactSegment("top")))
        # 3 left + 3 right + 2 bottom cells inside the span + 4 top
        assert len(mesh.dirichlet_edges) == 3 + 3 + 2 + 4
        assert mesh.dirichlet_measure == pytest.approx(3.0 + 3.0 + 2.0 + 4.0)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        geom = dv.MeshGeometry(dimension=1, lengths=(1.0,), cells=(9,),
                               contacts=(dv.ContactSegment("left"),),
                               grading=1.17)
        mesh = dv.build_mesh(geom)
        path = tmp_path / "mesh.json"
        mesh.save_json(path)
        back = dv.DeviceMesh.load_json(path)
        for name in ("cell_centroids", "cell_measures", "edge_measures",
                     "edge_distances", "bedge_measures", "bedge_distances",
                     "bedge_centroids"):
            a, b = getattr(mesh, name), getattr(back, name)
            assert a.shape == b.shape
            assert np.all(a == b), name
        assert np.all(mesh.edge_cells == back.edge_cells)
        assert np.all(mesh.bedge_tags == back.bedge_tags)


class TestBoundaryData:
    def test_positive_required(self):
        mesh = mesh_1d(4)
        with pytest.raises(ValueError, match=r"\(A3\)"):
            dv.BoundaryData.from_profiles(mesh, dv.ConstantProfile(0.0),
                                          dv.ConstantProfile(1.0),
                                          dv.ConstantProfile(0.0))

    def test_traces_follow_profile(self):
        mesh = mesh_1d(4)
        bc = dv.BoundaryData.from_profiles(mesh, dv.ConstantProfile(2.0),
                                           dv.ConstantProfile(1.0),
                                           dv.LinearProfile(0.0, 5.0, 1.0))
        # boundary faces sit at x = 0 and x = 1
        assert sorted(bc.V_trace.tolist()) == pytest.approx([0.0, 5.0])
        assert bc.n_trace == pytest.approx([2.0, 2.0])


class TestLambdaConst:
    def test_equilibrium_is_exactly_zero(self):
        mesh, bc, _ = make_1d_setup(cells=12, U=0.0)
        assert dv.lambda_const(bc, mesh) == 0.0

    def test_linear_potential(self):
        mesh = mesh_1d(8)
        bc = dv.BoundaryData.from_profiles(mesh, dv.ConstantProfile(1.0),
                                           dv.ConstantProfile(1.0),
                                           dv.LinearProfile(0.0, 1.0, 1.0))
        # constant carrier data, unit potential slope: 2 (1^2 + 1^2)
        assert dv.lambda_const(bc, mesh) == pytest.approx(4.0, rel=1e-12)

    def test_two_contact_bias_from_extension(self):
        U, L = 3.0, 2.0
        mesh = mesh_1d(16, length=L)
        bc = dv.BoundaryData.from_profiles(mesh, dv.ConstantProfile(1.0),
                                           dv.ConstantProfile(1.0),
                                           dv.LinearProfile(0.0, U, L))
        assert dv.lambda_const(bc, mesh) == pytest.approx(4.0 * (U / L) ** 2,
                                                          rel=1e-12)


class TestValidateInitialData:
    def setup_method(self):
        self.mesh, self.bc, self.params = make_1d_setup(cells=8)

    def test_accepts_admissible(self):
        st = dv.validate_initial_data(np.ones(8), np.ones(8),
                                      np.full(8, 0.5), self.mesh, self.bc,
                                      self.params)
        m = self.mesh.cell_measures
        assert float(m @ st.D) / self.mesh.total_measure == pytest.approx(0.5)
        assert st.statistics_residual() <= 1e-12

    def test_rejects_saturated_mean(self):
        with pytest.raises(dv.InitialDataError, match=r"\(A4\)"):
            dv.validate_initial_data(np.ones(8), np.ones(8), np.ones(8),
                                     self.mesh, self.bc, self.params)

    def test_rejects_negative_cell_with_index(self):
        n0 = np.ones(8)
        n0[3] = -0.1
        with pytest.raises(dv.InitialDataError, match=r"\[3\]"):
            dv.validate_initial_data(n0, np.ones(8), np.full(8, 0.5),
                                     self.mesh, self.bc, self.params)

    def test_accepts_saturated_cells_with_admissible_mean(self):
        D0 = np.full(8, 0.2)
        D0[0] = 1.0
        st = dv.validate_initial_data(np.ones(8), np.ones(8), D0, self.mesh,
                                      self.bc, self.params)
        # saturated cell nudged inside the guard to enter potential variables
        assert st.D[0] <= 1.0 - 1e-12
        assert st.D[0] > 0.999

    def test_accepts_vacuum_cells(self):
        n0 = np.ones(8)
        n0[2] = 0.0
        st = dv.validate_initial_data(n0, np.ones(8), np.full(8, 0.3),
                                      self.mesh, self.bc, self.params)
        assert st.n[2] >= 0.0
        assert st.n[2] < 1e-200

    def test_initial_potential_solves_poisson(self):
        # zero space charge and zero boundary potential force V = 0
        st = dv.validate_initial_data(np.ones(8), np.ones(8),
                                      np.full(8, 0.5), self.mesh, self.bc,
                                      self.params)
        assert np.max(np.abs(st.V)) <= 1e-12

    def test_idempotent(self):
        st1 = dv.validate_initial_data(np.ones(8), np.ones(8),
                                       np.full(8, 0.5), self.mesh, self.bc,
                                       self.params)
        st2 = dv.validate_initial_data(st1.n, st1.p, st1.D, self.mesh,
                                       self.bc, self.params)
        assert np.all(st1.n == st2.n)
        assert np.all(st1.D == st2.D)
        assert np.all(st1.V == st2.V)

    def test_shape_mismatch(self):
        with pytest.raises(dv.InitialDataError, match="shape"):
            dv.validate_initial_data(np.ones(5), np.ones(8), np.full(8, 0.5),
                                     self.mesh, self.bc, self.params)


class TestSystemState:
    def test_consistency_by_construction(self):
        phi = np.linspace(-1.0, 1.0, 6)
        st = dv.SystemState.from_potentials(0.0, phi, -phi, 0.5 * phi,
                                            np.zeros(6))
        assert st.statistics_residual() == 0.0
        assert np.all(st.n > 0.0)
        assert np.all((st.D > 0.0) & (st.D < 1.0))

    def test_copy_is_deep(self):
        st = dv.SystemState.from_potentials(0.0, np.zeros(3), np.zeros(3),
                                            np.zeros(3), np.zeros(3))
        cp = st.copy()
        cp.n[0] = 99.0
        assert st.n[0] != 99.0


class TestEquilibriumState:
    def test_zero_charge_equilibrium(self):
        mesh, bc, params = make_1d_setup(cells=12)
        st = dv.equilibrium_state(mesh, bc, params, D_level=0.5)
        assert np.max(np.abs(st.V)) <= 1e-10
        assert st.n == pytest.approx(bc.n_cell, rel=1e-10)
        assert st.D == pytest.approx(np.full(12, 0.5), rel=1e-10)

    def test_nontrivial_doping_satisfies_poisson(self):
        mesh, bc, params = make_1d_setup(cells=12, doping=0.7)
        st = dv.equilibrium_state(mesh, bc, params, D_level=0.5)
        from memflow.solver import PoissonOperator
        op = PoissonOperator(mesh, bc, params)
        r = op.residual(st.V, st.n - st.p - st.D + params.doping)
        assert np.max(np.abs(r)) <= 1e-10
        # constant quasi-Fermi levels by construction
        assert np.ptp(st.phi_n) <= 1e-12
        assert np.ptp(st.phi_D) <= 1e-12
