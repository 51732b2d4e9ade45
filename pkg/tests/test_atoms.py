import numpy as np
import pytest

from wbdoa.atoms import (
    ConicProblem,
    SdpProgram,
    assemble_dual_sdp,
    atomic_norm_upper,
    build_atom,
    dual_atomic_norm,
    golden_section_max,
    noiseless_matrix,
    polynomial_norm_on_grid,
)
from wbdoa.focusing import FocusingSet
from wbdoa.model import WidebandScene, steering_vector, theta_to_f


@pytest.fixture
def focusing():
    return FocusingSet.build(np.arange(8, 4, -1) / 8, 6)


class TestBuildAtom:
    def test_unit_frobenius_norm(self, focusing):
        # ||A(f, c)||_F^2 = sum_j |c_j|^2 ||T_j a(f)||^2; at f = 0 and
        # alpha = 1 the first column alone has norm sqrt(M) |c_0|
        atom = build_atom(0.0, np.array([1, 0, 0, 0]), focusing)
        assert np.linalg.norm(atom.matrix) == pytest.approx(np.sqrt(6))
        assert np.allclose(atom.matrix[:, 0], np.ones(6))
        assert np.allclose(atom.matrix[:, 1:], 0.0)

    def test_column_oracle(self, focusing):
        rng = np.random.default_rng(2)
        c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        f = 0.21
        atom = build_atom(f, c, focusing)
        cu = c / np.linalg.norm(c)
        for j in range(4):
            expect = cu[j] * focusing.matrices[j] @ steering_vector(f, 6)
            assert np.allclose(atom.matrix[:, j], expect, atol=1e-13)

    def test_renormalizes(self, focusing):
        atom = build_atom(0.1, 5.0 * np.ones(4), focusing)
        assert np.linalg.norm(atom.c) == pytest.approx(1.0)

    def test_zero_coefficients_rejected(self, focusing):
        with pytest.raises(ValueError):
            build_atom(0.1, np.zeros(4), focusing)


class TestNoiselessMatrix:
    def test_matches_direct_loop(self, focusing):
        rng = np.random.default_rng(9)
        spectra = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        scene = WidebandScene(angles_deg=(-30.0, 0.0, 45.0), source_spectra=spectra)
        dec = noiseless_matrix(scene, focusing)
        # direct loop over sources and bands
        X = np.zeros((6, 4), dtype=complex)
        for k, th in enumerate(scene.angles_deg):
            a = steering_vector(theta_to_f(th), 6)
            for j in range(4):
                X[:, j] += spectra[k, j] * focusing.matrices[j] @ a
        assert np.allclose(dec.matrix, X, atol=1e-12)
        assert np.allclose(dec.betas, np.linalg.norm(spectra, axis=1))

    def test_zero_spectrum_dropped(self, focusing):
        spectra = np.vstack([np.ones(4), np.zeros(4)])
        scene = WidebandScene(angles_deg=(10.0, 20.0), source_spectra=spectra)
        with pytest.warns(UserWarning):
            dec = noiseless_matrix(scene, focusing)
        assert dec.betas.size == 1

    def test_atomic_norm_upper(self, focusing):
        spectra = np.array([[1.0, 2.0, 2.0, 0.0], [0.0, 3.0, 0.0, 4.0]])
        scene = WidebandScene(angles_deg=(-5.0, 25.0), source_spectra=spectra)
        dec = noiseless_matrix(scene, focusing)
        assert atomic_norm_upper(dec.matrix, dec) == pytest.approx(3.0 + 5.0)
        with pytest.raises(ValueError):
            atomic_norm_upper(dec.matrix + 1.0, dec)


class TestGoldenSection:
    def test_quadratic(self):
        x, v, width = golden_section_max(lambda t: -(t - 0.3) ** 2 + 2.0, 0.0, 1.0)
        assert x == pytest.approx(0.3, abs=1e-7)
        assert v == pytest.approx(2.0, abs=1e-12)
        assert width < 1e-11

    def test_cosine(self):
        x, _, _ = golden_section_max(np.cos, -1.0, 1.5)
        assert x == pytest.approx(0.0, abs=1e-7)


class TestDualAtomicNorm:
    def test_single_steering_column(self):
        # H with one column a(f0)/M: Hbar = a(f0)/M (alpha = 1), so the
        # polynomial |a(f0)^H a(f)| / M is the normalized Dirichlet kernel
        # with maximum exactly 1 at f = f0
        focusing = FocusingSet.build([1.0], 7)
        f0 = 0.123
        H = (steering_vector(f0, 7) / 7.0)[:, None]
        assert dual_atomic_norm(H, focusing) == pytest.approx(1.0, abs=1e-10)

    def test_against_dense_grid_oracle(self):
        # compare refined search against a brute-force 10^6-point grid
        rng = np.random.default_rng(17)
        focusing = FocusingSet.build([1.0, 0.8], 6)
        for _ in range(5):
            H = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
            got = dual_atomic_norm(H, focusing)
            fs, vals = polynomial_norm_on_grid(
                np.stack([focusing.matrices[j].conj().T @ H[:, j] for j in range(2)],
                         axis=1), 1_000_000)
            oracle = float(np.max(vals))
            assert got >= oracle - 1e-12
            assert got == pytest.approx(oracle, abs=1e-6)

    def test_scaling(self):
        rng = np.random.default_rng(3)
        focusing = FocusingSet.build([1.0, 0.9, 0.8], 5)
        H = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        n1 = dual_atomic_norm(H, focusing)
        n2 = dual_atomic_norm(2.5 * H, focusing)
        assert n2 == pytest.approx(2.5 * n1, rel=1e-10)

    def test_weak_duality(self, focusing):
        # <X, H> <= ||X||_A * ||H||_A^dual for atomic X
        rng = np.random.default_rng(29)
        spectra = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        scene = WidebandScene(angles_deg=(-15.0, 30.0), source_spectra=spectra)
        dec = noiseless_matrix(scene, focusing)
        for _ in range(20):
            H = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
            inner = np.real(np.trace(dec.matrix.conj().T @ H))
            bound = dec.total_weight * dual_atomic_norm(H, focusing)
            assert inner <= bound + 1e-9


class TestSdpProgram:
    def test_assemble_and_objective(self, focusing):
        rng = np.random.default_rng(1)
        Y = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        prog = assemble_dual_sdp(ConicProblem(Y=Y, focusing=focusing, gamma=4.0))
        assert prog.block_size == 10
        assert prog.trace_constraint_count() == 6
        H = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        expect = np.real(np.trace(Y.conj().T @ H)) - 2.0 * np.linalg.norm(H)
        assert prog.objective(H) == pytest.approx(expect, rel=1e-12)

    def test_shape_and_gamma_validation(self, focusing):
        with pytest.raises(ValueError):
            ConicProblem(Y=np.zeros((3, 4)), focusing=focusing, gamma=1.0)
        with pytest.raises(ValueError):
            ConicProblem(Y=np.zeros((6, 4)), focusing=focusing, gamma=-1.0)

    def test_hbar_columnwise(self, focusing):
        rng = np.random.default_rng(8)
        Y = np.zeros((6, 4), dtype=complex)
        prog = assemble_dual_sdp(ConicProblem(Y=Y, focusing=focusing, gamma=0.0))
        H = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        Hb = prog.hbar(H)
        for j in range(4):
            assert np.allclose(Hb[:, j], focusing.matrices[j].T @ H[:, j], atol=1e-13)

    def test_save_load_round_trip(self, focusing, tmp_path):
        rng = np.random.default_rng(4)
        Y = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        prog = assemble_dual_sdp(ConicProblem(Y=Y, focusing=focusing, gamma=2.5))
        path = tmp_path / "prog.json"
        prog.save(path)
        back = SdpProgram.load(path)
        assert np.array_equal(back.Y, Y)
        assert back.gamma == 2.5
        assert np.array_equal(back.focusing.matrices, focusing.matrices)
        assert (back.M, back.J) == (6, 4)
