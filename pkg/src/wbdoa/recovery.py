"""DOA recovery from the optimal dual variables.

At the dual optimum the polynomial P(f) = ||Hbar^H a(f)||_2 touches 1
exactly at the recovered spatial frequencies.  Peaks of P near 1 give the
frequency estimates, evaluating the polynomial vector there gives the
cross-band coefficient directions, and a nonnegative least squares fit on
the located atoms gives the amplitudes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .atoms import (
    ConicProblem,
    assemble_dual_sdp,
    build_atom,
    golden_section_max,
    polynomial_norm_on_grid,
)
from .focusing import FocusingSet
from .model import SubbandData, f_to_theta, steering_vector
from .solver import ConicSolution, SolverConfig, solve


@dataclass(frozen=True)
class DualPolynomial:
    """Wrapper around Hbar evaluating P(f) = ||Hbar^H a(f)||_2."""

    Hbar: np.ndarray

    def __call__(self, f):
        M = self.Hbar.shape[0]
        return float(np.linalg.norm(self.Hbar.conj().T @ steering_vector(f, M)))

    def vector(self, f) -> np.ndarray:
        """The J-vector [hbar_1^H a(f), ..., hbar_J^H a(f)]."""
        M = self.Hbar.shape[0]
        return self.Hbar.conj().T @ steering_vector(f, M)

    def on_grid(self, grid_size: int):
        return polynomial_norm_on_grid(self.Hbar, grid_size)


@dataclass
class DoaEstimate:
    fs: np.ndarray
    thetas: np.ndarray
    cs: list
    betas: np.ndarray
    Khat: int
    diagnostics: dict = field(default_factory=dict)

    def to_json(self, path=None):
        doc = {
            "angles_deg": [float(t) for t in self.thetas],
            "fs": [float(f) for f in self.fs],
            "betas": [float(b) for b in self.betas],
            "c_magnitudes": [[float(x) for x in np.abs(c)] for c in self.cs],
            "Khat": self.Khat,
            "diagnostics": {k: v for k, v in self.diagnostics.items()
                            if isinstance(v, (int, float, str, list))},
        }
        if path is None:
            return json.dumps(doc, indent=2)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)


def dual_polynomial(solution: ConicSolution) -> DualPolynomial:
    """Dual polynomial of an Optimal solve; refuses non-optimal input."""
    if solution.status != "Optimal":
        raise ValueError(f"solution status is {solution.status}, need Optimal")
    return DualPolynomial(Hbar=solution.Hbar.copy())


def locate_frequencies(poly: DualPolynomial, peak_tol: float = 0.05,
                       min_separation: float = None, grid_size: int = 8192) -> np.ndarray:
    """Spatial frequencies where P peaks within peak_tol of 1.

    Grid local maxima above 1 - peak_tol are refined by golden-section
    ascent; peaks closer than min_separation are merged keeping the larger
    value.  Returns sorted frequencies (possibly empty).
    """
    if not (0 < peak_tol < 0.5):
        raise ValueError("peak_tol must lie in (0, 0.5)")
    M = poly.Hbar.shape[0]
    if grid_size < 4 * M:
        raise ValueError(f"grid_size must be at least 4*M = {4 * M}")
    if min_separation is None:
        min_separation = 0.5 / M
    fs, vals = poly.on_grid(grid_size)
    if np.max(vals) < 1.0 - peak_tol:
        return np.array([])
    # local maxima on the circular grid
    left = np.roll(vals, 1)
    right = np.roll(vals, -1)
    cand = np.nonzero((vals >= left) & (vals >= right) & (vals >= 1.0 - peak_tol))[0]
    step = 1.0 / grid_size
    peaks = []
    for i in cand:
        f_hat, p_hat, _ = golden_section_max(poly, fs[i] - step, fs[i] + step, tol=1e-10)
        # wrap back into [-1/2, 1/2]
        f_hat = (f_hat + 0.5) % 1.0 - 0.5
        peaks.append((f_hat, p_hat))
    # merge near-duplicates (circular distance), keep the larger peak
    peaks.sort(key=lambda t: -t[1])
    kept = []
    for f_hat, p_hat in peaks:
        dup = any(min(abs(f_hat - g), 1.0 - abs(f_hat - g)) < min_separation
                  for g, _ in kept)
        if not dup:
            kept.append((f_hat, p_hat))
    return np.array(sorted(f for f, _ in kept))


def recover_coefficients(poly: DualPolynomial, fs) -> list:
    """Unit cross-band coefficient vectors at the located frequencies.

    The raw vector is the conjugate of the polynomial vector at f_hat; its
    norm is 1 at exact optimality and it is renormalized here.  Vectors
    with norm below 0.5 are kept but flagged unreliable.
    """
    cs, unreliable = [], []
    for i, f in enumerate(fs):
        v = poly.vector(f).conj()
        nrm = np.linalg.norm(v)
        if nrm < 0.5:
            unreliable.append(i)
        cs.append(v / nrm if nrm > 0 else v)
    return cs, unreliable


def recover_amplitudes(Y: np.ndarray, fs, cs, focusing: FocusingSet) -> np.ndarray:
    """Nonnegative least squares of vec(Y) onto the located atoms.

    Pass the primal reconstruction rather than the raw measurements when
    the amplitudes should certify the strong-duality identity."""
    fs = np.asarray(fs, dtype=float)
    K = fs.size
    if K == 0:
        return np.array([])
    cols = np.stack(
        [build_atom(f, c, focusing).matrix.ravel() for f, c in zip(fs, cs)], axis=1
    )
    A = np.vstack([cols.real, cols.imag])
    b = np.concatenate([np.asarray(Y, complex).ravel().real,
                        np.asarray(Y, complex).ravel().imag])
    gram = A.T @ A
    cond = np.linalg.cond(gram)
    if cond > 1e10:
        warnings.warn(f"atom Gram condition {cond:.2e}; using ridge fallback")
        ridge = 1e-8 * np.trace(gram)
        betas = np.linalg.solve(gram + ridge * np.eye(K), A.T @ b)
        return np.clip(betas, 0.0, None)
    betas, _ = nnls(A, b)
    return betas


@dataclass
class RecoveryConfig:
    peak_tol: float = 0.05
    min_separation: float = None
    grid_size: int = 8192
    # atoms below this fraction of the largest amplitude absorb focusing
    # error rather than indicate a source; they stay in diagnostics
    amp_floor: float = 0.05
    solver: SolverConfig = None


def primal_reconstruction(Y: np.ndarray, H: np.ndarray, gamma: float) -> np.ndarray:
    """Primal optimizer implied by the dual optimum.

    At optimality the fidelity constraint is tight and aligned with H, so
    X_opt = Y - sqrt(gamma) * H / ||H||_F (X_opt = Y when H = 0).
    """
    nrm = np.linalg.norm(H)
    if nrm == 0.0:
        return np.asarray(Y, complex).copy()
    return Y - np.sqrt(gamma) * H / nrm


def estimate_doa(subbands: SubbandData, gamma: float,
                 focusing: FocusingSet = None,
                 config: RecoveryConfig = None) -> DoaEstimate:
    """Full pipeline: focusing, dual SDP, peak localization, amplitudes.

    The duality gap |sum beta_hat - dual objective| is attached as a
    quality diagnostic; near zero on noiseless data by strong duality.
    """
    if config is None:
        config = RecoveryConfig()
    if focusing is None:
        focusing = FocusingSet.for_subbands(subbands)
    program = assemble_dual_sdp(ConicProblem(Y=subbands.Y, focusing=focusing,
                                             gamma=gamma))
    solution = solve(program, config.solver)
    if solution.status == "Infeasible":
        raise RuntimeError("dual SDP reported infeasible")
    poly = DualPolynomial(Hbar=solution.Hbar)
    fs = locate_frequencies(poly, peak_tol=config.peak_tol,
                            min_separation=config.min_separation,
                            grid_size=config.grid_size)
    cs, unreliable = recover_coefficients(poly, fs)
    X_opt = primal_reconstruction(subbands.Y, solution.H, gamma)
    betas = recover_amplitudes(X_opt, fs, cs, focusing)
    # strong-duality check over the full decomposition of X_opt
    total = float(np.sum(betas))
    gap = abs(total - solution.objective)
    peak_values = [poly(f) for f in fs]
    # model order: atoms far below the dominant amplitude absorb the
    # fidelity budget (focusing error, noise) and are not reported as sources
    if betas.size:
        keep = betas >= config.amp_floor * betas.max()
    else:
        keep = np.zeros(0, dtype=bool)
    minor = [
        {"f": float(f), "theta_deg": f_to_theta(f), "beta": float(b)}
        for f, b, k in zip(fs, betas, keep) if not k
    ]
    fs_kept = fs[keep]
    betas_kept = betas[keep]
    cs_kept = [c for c, k in zip(cs, keep) if k]
    thetas = np.array([f_to_theta(f) for f in fs_kept])
    return DoaEstimate(
        fs=fs_kept,
        thetas=thetas,
        cs=cs_kept,
        betas=betas_kept,
        Khat=fs_kept.size,
        diagnostics={
            "dualityGap": gap,
            "dualObjective": solution.objective,
            "totalAmplitude": total,
            "peakValues": peak_values,
            "minorAtoms": minor,
            "solverStatus": solution.status,
            "solverIterations": solution.iterations,
            "unreliablePeaks": unreliable,
        },
    )
