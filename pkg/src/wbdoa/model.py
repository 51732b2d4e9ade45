"""Array geometry, steering vectors, scene synthesis, and DFT subbanding.

A uniform linear array of M sensors observes K far-field wideband sources.
The time-domain outputs are split into J narrowband bins; each bin j carries
a single-snapshot vector y(omega_j) that follows the narrowband steering
model at the scaled spatial frequency alpha_j * f_k, where f_k is the
spatial frequency of source k at the reference (highest) bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array geometry and physical constants.

    The spacing is pinned to half the minimum wavelength of the selected
    band, d = pi * c / omega1, which keeps every subband unambiguous.

    Parameters
    ----------
    M : int
        Number of sensors (>= 2).
    c : float
        Propagation speed in m/s.
    omega1 : float
        Highest selected angular frequency in rad/s.
    """

    M: int
    c: float
    omega1: float

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"need at least 2 sensors, got M={self.M}")
        if self.c <= 0:
            raise ValueError(f"propagation speed must be positive, got {self.c}")
        if self.omega1 <= 0:
            raise ValueError(f"reference frequency must be positive, got {self.omega1}")

    @property
    def d(self) -> float:
        """Inter-sensor spacing in meters (half the minimum wavelength)."""
        return np.pi * self.c / self.omega1


@dataclass(frozen=True)
class WidebandScene:
    """A set of sources with per-bin spectra plus a noise level.

    ``source_spectra`` is K x J: row k holds s_k(omega_j) for the J bins.
    ``noise_variance`` is the total variance of each complex noise entry
    (real and imaginary parts carry half each). K = 0 means noise only.
    """

    angles_deg: tuple
    source_spectra: np.ndarray
    noise_variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        object.__setattr__(self, "angles_deg", angles)
        spectra = np.atleast_2d(np.asarray(self.source_spectra, dtype=complex))
        if len(angles) == 0:
            spectra = spectra.reshape(0, spectra.shape[1] if spectra.size else 0)
        object.__setattr__(self, "source_spectra", spectra)
        if len(set(angles)) != len(angles):
            raise ValueError("source angles must be pairwise distinct")
        if spectra.shape[0] != len(angles):
            raise ValueError(
                f"spectra rows ({spectra.shape[0]}) must match source count ({len(angles)})"
            )
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")

    @property
    def K(self) -> int:
        return len(self.angles_deg)


@dataclass
class SubbandData:
    """Single-snapshot measurements for J narrowband bins.

    ``Y`` is M x J with column j the snapshot at omega_j.  Bins are ordered
    by strictly decreasing frequency so alphas[0] = 1 at the reference bin.
    """

    Y: np.ndarray
    omegas: np.ndarray
    alphas: np.ndarray = field(default=None)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=complex)
        self.omegas = np.asarray(self.omegas, dtype=float)
        if self.alphas is None:
            self.alphas = self.omegas / self.omegas[0]
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.Y.ndim != 2 or self.Y.shape[1] != self.omegas.size:
            raise ValueError("Y must be M x J with one column per bin")
        if self.alphas.size != self.omegas.size:
            raise ValueError("alphas and omegas must have equal length")
        if not np.isclose(self.alphas[0], 1.0):
            raise ValueError("reference bin must have alpha = 1")
        if np.any(np.diff(self.alphas) >= 0):
            raise ValueError("alphas must be strictly decreasing")
        if np.any(self.alphas <= 0) or np.any(self.alphas > 1):
            raise ValueError("alphas must lie in (0, 1]")
        if not np.allclose(self.omegas, self.alphas * self.omegas[0], rtol=1e-12):
            raise ValueError("omegas must equal alphas * omega1")

    @property
    def M(self) -> int:
        return self.Y.shape[0]

    @property
    def J(self) -> int:
        return self.Y.shape[1]

    def save_csv(self, path):
        """Write interleaved real/imag values, row-major, with a header."""
        M, J = self.Y.shape
        header = "M=%d,J=%d,omegas=%s" % (
            M,
            J,
            ";".join(repr(float(w)) for w in self.omegas),
        )
        flat = np.empty((M, 2 * J))
        flat[:, 0::2] = self.Y.real
        flat[:, 1::2] = self.Y.imag
        np.savetxt(path, flat, delimiter=",", header=header)

    @classmethod
    def load_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().lstrip("# ").strip()
        fields = dict(kv.split("=", 1) for kv in header.split(",", 2))
        M, J = int(fields["M"]), int(fields["J"])
        omegas = np.array([float(w) for w in fields["omegas"].split(";")])
        flat = np.loadtxt(path, delimiter=",", skiprows=1).reshape(M, 2 * J)
        Y = flat[:, 0::2] + 1j * flat[:, 1::2]
        return cls(Y=Y, omegas=omegas)


def theta_to_f(theta_deg):
    """Map a DOA angle in degrees to its spatial frequency f = sin(theta)/2.

    Valid angles lie strictly inside (-90, 90); the mapping is strictly
    increasing and covers (-1/2, 1/2).
    """
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(theta <= -90) or np.any(theta >= 90):
        raise ValueError(f"angle must lie in (-90, 90) degrees, got {theta_deg}")
    f = 0.5 * np.sin(np.deg2rad(theta))
    return float(f) if np.isscalar(theta_deg) else f


def f_to_theta(f):
    """Inverse of :func:`theta_to_f`; accepts f in [-1/2, 1/2]."""
    fa = np.asarray(f, dtype=float)
    if np.any(np.abs(fa) > 0.5):
        raise ValueError(f"spatial frequency must lie in [-1/2, 1/2], got {f}")
    theta = np.rad2deg(np.arcsin(2.0 * fa))
    return float(theta) if np.isscalar(f) else theta


def steering_vector(f, M: int) -> np.ndarray:
    """Steering vector a(f) with entries exp(-i*2*pi*f*m), m = 0..M-1."""
    if M < 1:
        raise ValueError("M must be at least 1")
    m = np.arange(M)
    return np.exp(-2j * np.pi * f * m)


def steering_matrix(fs, M: int) -> np.ndarray:
    """Stack steering vectors columnwise: M x len(fs)."""
    fs = np.atleast_1d(np.asarray(fs, dtype=float))
    m = np.arange(M)[:, None]
    return np.exp(-2j * np.pi * m * fs[None, :])


def subband_template(omega1: float, alphas) -> SubbandData:
    """An empty SubbandData carrying only the bin frequencies."""
    alphas = np.asarray(alphas, dtype=float)
    return SubbandData(
        Y=np.zeros((1, alphas.size), dtype=complex),
        omegas=omega1 * alphas,
        alphas=alphas,
    )


def synthesize_scene(cfg: ArrayConfig, scene: WidebandScene, subbands: SubbandData) -> SubbandData:
    """Simulate the M x J measurement matrix for a scene.

    Column j is sum_k a(alpha_j * f_k) * s_k(omega_j) plus circular complex
    Gaussian noise of per-entry variance ``scene.noise_variance``.  The draw
    is deterministic given ``scene.seed``.
    """
    alphas = subbands.alphas
    J = alphas.size
    if scene.K and scene.source_spectra.shape[1] != J:
        raise ValueError(
            f"scene spectra have {scene.source_spectra.shape[1]} bins, subbands have {J}"
        )
    Y = np.zeros((cfg.M, J), dtype=complex)
    fs = np.array([theta_to_f(th) for th in scene.angles_deg])
    for j in range(J):
        for k in range(scene.K):
            Y[:, j] += steering_vector(alphas[j] * fs[k], cfg.M) * scene.source_spectra[k, j]
    if scene.noise_variance > 0:
        rng = np.random.default_rng(scene.seed)
        scale = np.sqrt(scene.noise_variance / 2.0)
        Y += scale * (rng.standard_normal((cfg.M, J)) + 1j * rng.standard_normal((cfg.M, J)))
    return SubbandData(Y=Y, omegas=subbands.omegas.copy(), alphas=alphas.copy())


def subband_transform(time_signals: np.ndarray, dft_size: int, band, J: int) -> SubbandData:
    """Extract J narrowband snapshots from time-domain sensor signals.

    Applies a ``dft_size``-point DFT (rectangular window on the leading
    samples) to each sensor and keeps the J in-band bins of largest
    frequency, ordered so omega_1 > omega_2 > ... > omega_J.  Frequencies
    are in rad/sample.
    """
    x = np.asarray(time_signals)
    if x.ndim != 2:
        raise ValueError("time_signals must be M x T")
    M, T = x.shape
    if dft_size > T:
        raise ValueError(f"dft_size={dft_size} exceeds signal length T={T}")
    lo, hi = band
    if not (0 < lo < hi < np.pi):
        raise ValueError(f"band must lie inside (0, pi), got {band}")
    spec = np.fft.fft(x[:, :dft_size], n=dft_size, axis=1)
    bin_omegas = 2 * np.pi * np.arange(dft_size) / dft_size
    in_band = np.nonzero((bin_omegas >= lo) & (bin_omegas <= hi))[0]
    if in_band.size < J:
        raise ValueError(f"only {in_band.size} bins inside band, need J={J}")
    chosen = in_band[np.argsort(bin_omegas[in_band])[::-1][:J]]
    omegas = bin_omegas[chosen]
    return SubbandData(Y=spec[:, chosen], omegas=omegas)
