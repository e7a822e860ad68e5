"""Frequency-domain objects: transfer functions, spectra, covariances.

The transfer function of a lag kernel g(t, .) is its Fourier transform
A(t, mu) = int e^{-i mu u} g(t, u) du, evaluated here by direct trapezoid
quadrature on the kernel grid (no FFT pairing constraints between the lag
and frequency grids).  The limiting spectral density is

    f(t, mu) = sigma_L / (2 pi) |A(t, mu)|^2,

and the finite-N time-frequency spectrum is the Fourier transform of the
symmetrically rescaled covariance s -> Cov(Y_N(t + s/2N), Y_N(t - s/2N)),
which converges to f as N grows.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    PostconditionError,
    PreconditionError,
    SmoothnessError,
    TruncationWarning,
)
from .kernels import kernel_grid
from .model import sup_norm

__all__ = [
    "GridConfig",
    "SpectrumGrid",
    "WvConvergenceReport",
    "transfer_function",
    "spectral_density",
    "covariance",
    "wigner_ville",
    "wv_convergence",
]


@dataclass
class GridConfig:
    """Grid resolutions for kernel and covariance quadrature.

    Unset lag/window sizes are derived from the attached stability
    certificate (envelope tail below 1e-8 for u_max, 30 decay times for
    s_max) or fall back to fixed defaults.
    """

    u_max: float = None
    du: float = 0.005
    s_max: float = None
    ds: float = 0.05
    transition_method: str = "auto"
    certificate: object = None

    def resolved_u_max(self):
        if self.u_max is not None:
            return float(self.u_max)
        if self.certificate is not None:
            return self.certificate.default_u_max()
        return 25.0

    def resolved_s_max(self):
        if self.s_max is not None:
            return float(self.s_max)
        if self.certificate is not None:
            return 30.0 / self.certificate.lam
        return 30.0


@dataclass
class SpectrumGrid:
    """Real spectrum values on a frequency grid."""

    t: float
    lambda_grid: np.ndarray
    values: np.ndarray
    kind: str  # "spectral_density" or "wigner_ville"
    N: object = None

    def symmetry_defect(self):
        """Max |f(mu) - f(-mu)| when the grid itself is symmetric."""
        lg = self.lambda_grid
        if not np.allclose(lg + lg[::-1], 0.0, atol=1e-12 * (1 + abs(lg[-1]))):
            return None
        return float(np.abs(self.values - self.values[::-1]).max())


@dataclass
class WvConvergenceReport:
    """Distances between finite-N spectra and the limiting density."""

    t: float
    rows: list  # (N, distance) pairs
    passes: bool
    conditions: str
    window: tuple

    @property
    def distances(self):
        return [d for _, d in self.rows]


def transfer_function(kern, lambda_grid):
    """Fourier transform of a kernel grid by direct trapezoid quadrature.

    Returns complex values A(mu) = int_0^{u_max} e^{-i mu u} g(u) du on
    the supplied frequency grid.
    """
    lam = np.asarray(lambda_grid, dtype=float)
    u = kern.u_grid
    if u[0] != 0.0:
        raise PreconditionError("transfer_function expects a causal grid starting at lag 0")
    weights = np.full(len(u), kern.du)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    wg = weights * kern.values
    out = np.empty(lam.shape, dtype=complex)
    chunk = max(1, 2_000_000 // max(1, len(u)))
    flat = lam.ravel()
    res = np.empty(flat.shape, dtype=complex)
    for i in range(0, len(flat), chunk):
        block = flat[i:i + chunk]
        res[i:i + chunk] = np.exp(-1j * np.outer(block, u)) @ wg
    out[...] = res.reshape(lam.shape)
    return out


def spectral_density(m, t, lambda_grid, config=None):
    """Limiting spectral density sigma_L/(2 pi) |A(t, mu)|^2 at time t."""
    config = config or GridConfig()
    kern = kernel_grid(m, "limit", t, config.resolved_u_max(), config.du,
                       config.transition_method, certificate=config.certificate)
    tf = transfer_function(kern, lambda_grid)
    vals = m.levy.sigma_l / (2.0 * np.pi) * (tf.real**2 + tf.imag**2)
    return SpectrumGrid(t=float(t), lambda_grid=np.asarray(lambda_grid, dtype=float),
                        values=vals, kind="spectral_density")


def covariance(m, N, t1, t2, config=None):
    """Cov(Y_N(t1), Y_N(t2)) by overlap quadrature of the two lag kernels.

    Writing the shift Nh = N (t1 - t2) >= 0, the covariance equals
    sigma_L int_0^inf g_N(N t1, Nh + v) g_N(N t2, v) dv; the first kernel
    is sampled on its own grid and read off at the shifted lags.
    """
    config = config or GridConfig()
    if t1 < t2:
        t1, t2 = t2, t1
    u_max = config.resolved_u_max()
    du = config.du
    k2 = kernel_grid(m, N, t2, u_max, du, config.transition_method)
    shift = N * (t1 - t2)
    if shift == 0.0:
        integrand = k2.values**2
    else:
        n1 = int(np.ceil((shift + u_max) / du)) + 1
        k1 = kernel_grid(m, N, t1, n1 * du, du, config.transition_method)
        vals1 = np.interp(shift + k2.u_grid, k1.u_grid, k1.values)
        integrand = vals1 * k2.values
    total = du * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
    return float(m.levy.sigma_l * total)


def wigner_ville(m, N, t, lambda_grid, config=None):
    """Finite-N time-frequency spectrum at rescaled time t.

    Fourier-transforms the symmetrically rescaled covariance
    c(s) = Cov(Y_N(t + s/2N), Y_N(t - s/2N)) over s in [-s_max, s_max],
    exploiting c(-s) = c(s).  Warns when the window truncates c before it
    has decayed; the imaginary part of the transform must vanish and is
    checked before being discarded.
    """
    config = config or GridConfig()
    lam = np.asarray(lambda_grid, dtype=float)
    s_max = config.resolved_s_max()
    ds = config.ds
    n_s = max(2, int(round(s_max / ds)))
    s_grid = np.arange(n_s + 1) * ds
    c_vals = np.empty(n_s + 1)
    half = 0.5 / N
    for j, s in enumerate(s_grid):
        c_vals[j] = covariance(m, N, t + s * half, t - s * half, config)
    if abs(c_vals[-1]) > 1e-4 * max(abs(c_vals[0]), 1e-300):
        warnings.warn(
            f"covariance window s_max={s_grid[-1]:.3g} truncates before decay "
            f"(|c(s_max)|/|c(0)| = {abs(c_vals[-1]) / abs(c_vals[0]):.2e})",
            TruncationWarning)
    s_full = np.concatenate([-s_grid[:0:-1], s_grid])
    c_full = np.concatenate([c_vals[:0:-1], c_vals])
    weights = np.full(len(s_full), ds)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    wc = weights * c_full
    vals = np.empty(lam.shape, dtype=complex)
    chunk = max(1, 2_000_000 // max(1, len(s_full)))
    for i in range(0, len(lam), chunk):
        block = lam[i:i + chunk]
        vals[i:i + chunk] = np.exp(-1j * np.outer(block, s_full)) @ wc
    vals /= 2.0 * np.pi
    scale = np.abs(vals.real).max()
    if np.abs(vals.imag).max() > 1e-8 * max(scale, 1e-300):
        raise PostconditionError("time-frequency transform has a non-vanishing imaginary part")
    return SpectrumGrid(t=float(t), lambda_grid=lam, values=vals.real,
                        kind="wigner_ville", N=N)


def _spectrum_l2(grid_a, grid_b):
    la, lb = grid_a.lambda_grid, grid_b.lambda_grid
    if len(la) != len(lb) or not np.allclose(la, lb, rtol=0.0, atol=1e-9):
        raise PreconditionError("spectrum grids must share the frequency grid")
    dl = la[1] - la[0]
    diff = (grid_a.values - grid_b.values) ** 2
    return float(np.sqrt(dl * (diff.sum() - 0.5 * (diff[0] + diff[-1]))))


def wv_convergence(m, t, lambda_grid, N_list, config=None):
    """Distances between finite-N spectra and the limit density at t.

    Sufficient conditions (a stability certificate for the coefficient
    family plus bounded observation/noise vectors on the visited window)
    are checked first and reported; when none verifies the distances are
    still computed but labeled accordingly.  Passing means non-increasing
    distances after the first entry with the final below a tenth of the
    first.
    """
    from .stability import eigen_bound_check, lambda_max_check

    config = config or GridConfig()
    n_min = min(int(N) for N in N_list)
    s_max = config.resolved_s_max()
    u_max = config.resolved_u_max()
    window = (t - (s_max / 2.0 + s_max + u_max) / n_min, t + s_max / (2.0 * n_min))
    cert = config.certificate
    if cert is None:
        cert = lambda_max_check(m.A, window)
        if not cert.passed:
            try:
                cert = eigen_bound_check(m.A, window)
            except SmoothnessError:
                pass
    if cert is not None and getattr(cert, "passed", False):
        b_sup = sup_norm(m.B, window[0], window[1])
        c_sup = sup_norm(m.C, window[0], window[1])
        conditions = (f"verified ({cert.route}: gamma={cert.gamma:.3g}, lam={cert.lam:.3g}; "
                      f"sup|B|={b_sup:.3g}, sup|C|={c_sup:.3g})")
    else:
        conditions = "unverified-preconditions"
    limit = spectral_density(m, t, lambda_grid, config)
    rows = []
    for N in N_list:
        wv = wigner_ville(m, int(N), t, lambda_grid, config)
        rows.append((int(N), _spectrum_l2(wv, limit)))
    dists = [d for _, d in rows]
    tail_ok = all(dists[i + 1] <= dists[i] + 1e-12 for i in range(1, len(dists) - 1))
    passes = bool(len(dists) >= 2 and tail_ok and dists[-1] < 0.1 * dists[0])
    return WvConvergenceReport(t=float(t), rows=rows, passes=passes,
                               conditions=conditions, window=window)
