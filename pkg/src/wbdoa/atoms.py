"""Atom set, atomic/dual atomic norms, and assembly of the dual SDP.

An atom A(f, c) = [T_1 a(f), ..., T_J a(f)] diag(c) couples one spatial
frequency to all J subbands through a unit cross-band coefficient vector c.
Measurements are sparse nonnegative combinations of atoms; the recovery
problem minimizes the induced atomic norm, and its Lagrangian dual is a
semidefinite program over a dual matrix H and a Hermitian certificate Q.
"""

from __future__ import annotations

import base64
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor

from .focusing import FocusingSet
from .model import WidebandScene, steering_vector, theta_to_f


@dataclass(frozen=True)
class Atom:
    """One atom: spatial frequency f, unit coefficient vector c, and the
    M x J matrix with column j equal to c_j * T_j a(f)."""

    f: float
    c: np.ndarray
    matrix: np.ndarray


def build_atom(f: float, c, focusing: FocusingSet) -> Atom:
    """Construct A(f, c); c is renormalized to unit l2 norm."""
    c = np.asarray(c, dtype=complex).ravel()
    nrm = np.linalg.norm(c)
    if nrm < 1e-12:
        raise ValueError("coefficient vector must be nonzero")
    c = c / nrm
    M = focusing.M
    a = steering_vector(f, M)
    cols = [c[j] * (focusing.matrices[j] @ a) for j in range(focusing.J)]
    return Atom(f=float(f), c=c, matrix=np.stack(cols, axis=1))


@dataclass(frozen=True)
class AtomicDecomposition:
    """A weighted atom sum X = sum_k beta_k A(f_k, c_k)."""

    betas: np.ndarray
    atoms: tuple
    matrix: np.ndarray

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.betas))


def noiseless_matrix(scene: WidebandScene, focusing: FocusingSet) -> AtomicDecomposition:
    """Exact atomic decomposition of the focused noiseless data matrix.

    beta_k is the l2 norm of source k's cross-band spectrum and c_k its
    unit direction; sources with an all-zero spectrum are dropped.
    """
    if scene.K < 1:
        raise ValueError("scene must contain at least one source")
    betas, atoms = [], []
    for k, theta in enumerate(scene.angles_deg):
        s = scene.source_spectra[k]
        beta = float(np.linalg.norm(s))
        if beta == 0.0:
            warnings.warn(f"source {k} at {theta} deg has zero spectrum; dropped")
            continue
        atoms.append(build_atom(theta_to_f(theta), s / beta, focusing))
        betas.append(beta)
    betas = np.asarray(betas)
    X = sum(b * at.matrix for b, at in zip(betas, atoms)) if atoms else \
        np.zeros((focusing.M, focusing.J), dtype=complex)
    return AtomicDecomposition(betas=betas, atoms=tuple(atoms), matrix=X)


def atomic_norm_upper(X: np.ndarray, decomposition: AtomicDecomposition) -> float:
    """Certified upper bound sum_k beta_k on the atomic norm of X.

    The decomposition must actually reconstruct X; otherwise the
    certificate is rejected.
    """
    X = np.asarray(X, dtype=complex)
    if decomposition.betas.size == 0:
        if np.linalg.norm(X) > 0:
            raise ValueError("empty decomposition cannot certify a nonzero matrix")
        return 0.0
    resid = np.linalg.norm(X - decomposition.matrix)
    if resid > 1e-6 * max(np.linalg.norm(X), 1e-300):
        raise ValueError(f"decomposition residual {resid:.3e} too large for certificate")
    return decomposition.total_weight


def _hbar(H: np.ndarray, focusing: FocusingSet) -> np.ndarray:
    """Columnwise map h_j -> T_j^H h_j."""
    return np.stack(
        [focusing.matrices[j].conj().T @ H[:, j] for j in range(focusing.J)], axis=1
    )


def polynomial_norm_on_grid(Hbar: np.ndarray, grid_size: int) -> tuple:
    """Evaluate f -> ||Hbar^H a(f)||_2 on a uniform grid over [-1/2, 1/2)."""
    M = Hbar.shape[0]
    fs = np.linspace(-0.5, 0.5, grid_size, endpoint=False)
    A = np.exp(-2j * np.pi * np.arange(M)[:, None] * fs[None, :])
    vals = np.linalg.norm(Hbar.conj().T @ A, axis=0)
    return fs, vals


def golden_section_max(fun, lo, hi, tol=1e-12, max_iter=200):
    """Golden-section ascent of a unimodal function on [lo, hi].

    Returns (argmax, max, bracket width)."""
    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = (a + b) / 2
    return x, fun(x), b - a


def dual_atomic_norm(H: np.ndarray, focusing: FocusingSet, grid_size: int = 8192) -> float:
    """max_f ||Hbar^H a(f)||_2, by dense grid plus golden-section refinement."""
    M = focusing.M
    if grid_size < 4 * M:
        raise ValueError(f"grid_size must be at least 4*M = {4 * M}")
    Hbar = _hbar(np.asarray(H, dtype=complex), focusing)
    fs, vals = polynomial_norm_on_grid(Hbar, grid_size)
    i = int(np.argmax(vals))
    if vals[i] == 0.0:
        return 0.0
    step = 1.0 / grid_size
    m = np.arange(M)

    def p(f):
        return float(np.linalg.norm(Hbar.conj().T @ np.exp(-2j * np.pi * f * m)))

    _, peak, _ = golden_section_max(p, fs[i] - step, fs[i] + step)
    return max(peak, float(vals[i]))


@dataclass(frozen=True)
class ConicProblem:
    """Inputs of the dual SDP: data matrix, focusing set, fidelity budget."""

    Y: np.ndarray
    focusing: FocusingSet
    gamma: float

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=complex)
        object.__setattr__(self, "Y", Y)
        if Y.shape != (self.focusing.M, self.focusing.J):
            raise ValueError(
                f"Y shape {Y.shape} inconsistent with focusing set "
                f"({self.focusing.M} x {self.focusing.J})"
            )
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass
class SdpProgram:
    """Solver-ready structured form of the dual SDP.

    Decision variables are H (M x J complex) and the Hermitian block
    S = [[Q, Hbar], [Hbar^H, I_J]] of size M+J.  The affine constraints are
    the M Toeplitz-trace conditions on Q (off-diagonal sums vanish, main
    diagonal sums to 1), the columnwise coupling Hbar(:, j) = T_j^H H(:, j),
    and the fixed identity lower-right block.  The objective maximizes
    Re Tr(Y^H H) - sqrt(gamma) * ||H||_F.
    """

    Y: np.ndarray
    gamma: float
    focusing: FocusingSet
    M: int
    J: int
    _coupling_factors: list = field(default=None, repr=False)

    @property
    def block_size(self) -> int:
        return self.M + self.J

    def hbar(self, H: np.ndarray) -> np.ndarray:
        return _hbar(H, self.focusing)

    def coupling_factors(self):
        """Cholesky factors of I + 2 T_j T_j^T, used by the affine projection."""
        if self._coupling_factors is None:
            self._coupling_factors = [
                cho_factor(np.eye(self.M) + 2.0 * T @ T.T)
                for T in self.focusing.matrices
            ]
        return self._coupling_factors

    def objective(self, H: np.ndarray) -> float:
        return float(
            np.real(np.trace(self.Y.conj().T @ H))
            - np.sqrt(self.gamma) * np.linalg.norm(H)
        )

    def trace_constraint_count(self) -> int:
        return self.M

    def save(self, path):
        """Self-describing JSON with base64 binary blobs, for regression use."""
        def blob(a):
            a = np.ascontiguousarray(a)
            return {
                "dtype": str(a.dtype),
                "shape": list(a.shape),
                "data": base64.b64encode(a.tobytes()).decode("ascii"),
            }

        doc = {
            "kind": "dual-sdp",
            "M": self.M,
            "J": self.J,
            "gamma": self.gamma,
            "Y": blob(self.Y),
            "alphas": blob(self.focusing.alphas),
            "T": blob(self.focusing.matrices),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            doc = json.load(fh)

        def unblob(b):
            a = np.frombuffer(base64.b64decode(b["data"]), dtype=np.dtype(b["dtype"]))
            return a.reshape(b["shape"]).copy()

        foc = FocusingSet(matrices=unblob(doc["T"]), alphas=unblob(doc["alphas"]))
        return cls(Y=unblob(doc["Y"]), gamma=doc["gamma"], focusing=foc,
                   M=doc["M"], J=doc["J"])


def assemble_dual_sdp(problem: ConicProblem) -> SdpProgram:
    """Turn a ConicProblem into the structured SDP the solver consumes."""
    return SdpProgram(
        Y=problem.Y,
        gamma=float(problem.gamma),
        focusing=problem.focusing,
        M=problem.focusing.M,
        J=problem.focusing.J,
    )
