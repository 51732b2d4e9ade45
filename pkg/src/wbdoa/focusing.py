"""Sinc-interpolation focusing matrices and focusing-error bookkeeping.

Each subband j is mapped onto the reference band through a real M x M
matrix T_j with entries sinc(alpha_j*(m-1) - (m'-1)); the residual
e_j(f) = a(alpha_j f) - T_j a(f) is the focusing error that, together with
measurement noise, sets the data-fidelity budget gamma of the sparse
recovery problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ArrayConfig, SubbandData, WidebandScene, steering_vector, theta_to_f


def focusing_matrix(alpha: float, M: int) -> np.ndarray:
    """Sinc interpolation matrix mapping a(f) toward a(alpha*f).

    Entry (m, m') is sinc(alpha*m - m') with the normalized convention
    sinc(x) = sin(pi x)/(pi x), m, m' = 0..M-1.  alpha = 1 yields the
    identity.
    """
    if not (0 < alpha <= 1):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if M < 2:
        raise ValueError("M must be at least 2")
    m = np.arange(M)
    return np.sinc(alpha * m[:, None] - m[None, :])


@dataclass(frozen=True)
class FocusingSet:
    """The J focusing matrices for a set of frequency ratios."""

    matrices: np.ndarray  # J x M x M, real
    alphas: np.ndarray

    @classmethod
    def build(cls, alphas, M: int) -> "FocusingSet":
        alphas = np.asarray(alphas, dtype=float)
        mats = np.stack([focusing_matrix(a, M) for a in alphas])
        return cls(matrices=mats, alphas=alphas)

    @classmethod
    def for_subbands(cls, subbands: SubbandData) -> "FocusingSet":
        return cls.build(subbands.alphas, subbands.M)

    @property
    def J(self) -> int:
        return self.matrices.shape[0]

    @property
    def M(self) -> int:
        return self.matrices.shape[1]

    def to_csv(self, path):
        """Dump all J matrices stacked vertically for inspection."""
        np.savetxt(path, self.matrices.reshape(-1, self.M), delimiter=",",
                   header=f"J={self.J},M={self.M}")


@dataclass(frozen=True)
class FocusingError:
    """The residual vector e_j(f) = a(alpha*f) - T_j a(f) and its norm."""

    vector: np.ndarray
    norm: float


def focusing_error(alpha: float, f: float, M: int, T: np.ndarray = None) -> FocusingError:
    """Exact residual of the linear focusing model at spatial frequency f."""
    if T is None:
        T = focusing_matrix(alpha, M)
    vec = steering_vector(alpha * f, M) - T @ steering_vector(f, M)
    return FocusingError(vector=vec, norm=float(np.linalg.norm(vec)))


def noiseless_measurements(cfg: ArrayConfig, scene: WidebandScene,
                           focusing: FocusingSet) -> np.ndarray:
    """The focused-model matrix sum_k s_k(omega_j) * T_j a(f_k), column-wise."""
    M, J = cfg.M, focusing.J
    X = np.zeros((M, J), dtype=complex)
    fs = [theta_to_f(th) for th in scene.angles_deg]
    for j in range(J):
        for k, f in enumerate(fs):
            X[:, j] += scene.source_spectra[k, j] * (focusing.matrices[j] @ steering_vector(f, M))
    return X


def gamma_oracle(Y: np.ndarray, cfg: ArrayConfig, scene: WidebandScene,
                 focusing: FocusingSet) -> float:
    """Realized noise-plus-focusing-error power ||Y - X*||_F^2.

    Requires the true scene; Y must have been synthesized from it so the
    residual is exactly N + E.
    """
    X = noiseless_measurements(cfg, scene, focusing)
    return float(np.linalg.norm(Y - X) ** 2)


def gamma_blind(Y: np.ndarray, sigma2: float, focusing: FocusingSet,
                grid_size: int = 64) -> float:
    """Heuristic gamma when the scene is unknown.

    Noise power is taken as M*J*sigma2.  Focusing-error power is bounded by
    spreading the estimated per-band signal power over a coarse grid of
    candidate spatial frequencies, weighted by a conventional beamformer.
    """
    if sigma2 < 0:
        raise ValueError("noise variance must be nonnegative")
    M, J = Y.shape
    noise_power = M * J * sigma2
    f_grid = np.linspace(-0.5, 0.5, grid_size, endpoint=False)
    err_power = 0.0
    for j in range(J):
        alpha = focusing.alphas[j]
        T = focusing.matrices[j]
        # per-band signal power estimate (||a||^2 = M)
        p_sig = max(float(np.linalg.norm(Y[:, j]) ** 2) - M * sigma2, 0.0) / M
        if p_sig == 0.0:
            continue
        # beamformer weights over the candidate grid
        A = np.exp(-2j * np.pi * np.arange(M)[:, None] * (alpha * f_grid)[None, :])
        bf = np.abs(A.conj().T @ Y[:, j]) ** 2
        w = bf / bf.sum() if bf.sum() > 0 else np.full(grid_size, 1.0 / grid_size)
        e_norms = np.array([focusing_error(alpha, f, M, T).norm ** 2 for f in f_grid])
        err_power += p_sig * float(w @ e_norms)
    return noise_power + err_power


def gamma_bound(Y: np.ndarray, cfg: ArrayConfig, focusing: FocusingSet,
                mode: str = "oracle", scene: WidebandScene = None,
                sigma2: float = None, safety: float = 1.0) -> float:
    """Data-fidelity budget gamma for the sparse recovery problem.

    ``oracle`` mode needs the true scene and returns the exact realized
    power; ``blind`` mode needs only sigma2 and uses the heuristic bound.
    ``safety`` multiplies the result (under-estimating gamma can make the
    recovery problem infeasible in noise).
    """
    if mode == "oracle":
        if scene is None:
            raise ValueError("oracle mode requires the true scene")
        g = gamma_oracle(Y, cfg, scene, focusing)
    elif mode == "blind":
        if sigma2 is None:
            raise ValueError("blind mode requires a noise variance estimate")
        g = gamma_blind(Y, sigma2, focusing)
    else:
        raise ValueError(f"unknown gamma mode {mode!r}")
    return safety * g
