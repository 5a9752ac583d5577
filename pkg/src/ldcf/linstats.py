"""Stationary autocorrelation estimation, patch/window covariances,
symmetric eigendecomposition, LDA directions, and feature whitening.

Two independent autocorrelation estimators are provided: an FFT route
(the fast path) and a direct per-offset summation (the oracle).  They
implement the same contract and must agree to near machine precision;
tests enforce 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import (
    ConfigError,
    DataError,
    DimensionMismatch,
    EmptyImageList,
    NoConvergence,
    NonPositiveEigenvalue,
    NotSymmetric,
    OffsetOutOfRange,
    PatchOutOfBounds,
    PlaneTooSmall,
    SingularSystem,
    TooFewSamples,
)
from .channels import ChannelStack

_MAX_EIG_DIM = 1024
_JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class Autocorrelation:
    """Per-channel stationary covariance C(dx, dy) for |dx|,|dy| <= radius.

    ``grids[c, dy + R, dx + R]`` holds C(dx, dy) for channel c; ``counts``
    holds the total number of pixel pairs that contributed to each offset
    (identical across channels, summed over images).
    """

    grids: np.ndarray
    counts: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        if self.grids.ndim != 3 or self.grids.shape[1] != self.grids.shape[2]:
            raise DataError("autocorrelation grids must be (channels, 2R+1, 2R+1)")
        if self.grids.shape[1] % 2 != 1:
            raise DataError("autocorrelation grid side must be odd")
        if self.counts.shape != self.grids.shape[1:]:
            raise DataError("counts grid must match offset grid")
        if len(self.labels) != self.grids.shape[0]:
            raise DataError("one label per channel required")

    @property
    def radius(self) -> int:
        return self.grids.shape[1] // 2

    def grid(self, channel: str) -> np.ndarray:
        return self.grids[self.labels.index(channel)]


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Orthogonal Q (eigenvectors as columns) and eigenvalues, descending.

    Sign convention: the largest-magnitude entry of each eigenvector is
    positive; ties resolved to the first such entry.
    """

    q: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        if self.q.ndim != 2 or self.q.shape[0] != self.q.shape[1]:
            raise DataError("Q must be square")
        if self.eigenvalues.shape != (self.q.shape[0],):
            raise DataError("one eigenvalue per column of Q required")


@dataclass(frozen=True, eq=False)
class LdaInputs:
    """Class means, shared covariance and regularization for Eq.-style LDA."""

    mu_plus: np.ndarray
    mu_minus: np.ndarray
    sigma: np.ndarray
    eps: float

    def __post_init__(self):
        d = self.mu_plus.shape
        if self.mu_minus.shape != d or self.sigma.shape != (d[0], d[0]):
            raise DimensionMismatch(
                f"means {self.mu_plus.shape}/{self.mu_minus.shape} vs "
                f"sigma {self.sigma.shape}"
            )
        _check_symmetric(self.sigma)
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError(f"eps must lie in [0, 1], got {self.eps}")


@dataclass(frozen=True, eq=False)
class WindowCovariance:
    """Sample covariance over flattened single-channel windows.

    ``height``/``width`` give the window geometry so that local patch
    sub-covariances can be fetched by pixel index (row-major).
    """

    sigma: np.ndarray
    mean: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        d = self.height * self.width
        if self.sigma.shape != (d, d) or self.mean.shape != (d,):
            raise DimensionMismatch(
                f"geometry {self.height}x{self.width} implies d={d}, got "
                f"sigma {self.sigma.shape}, mean {self.mean.shape}"
            )


def _check_symmetric(s: np.ndarray, tol: float = 1e-12) -> None:
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise NotSymmetric(f"matrix must be square, got {s.shape}")
    scale = max(1.0, float(np.abs(s).max()) if s.size else 0.0)
    if s.size and float(np.abs(s - s.T).max()) > tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")


def _validate_stacks(images, radius: int):
    if not images:
        raise EmptyImageList("need at least one image")
    labels = images[0].labels
    for st in images:
        if st.labels != labels:
            raise DimensionMismatch("all stacks must share channel labels")
        if st.height < 2 * radius + 1 or st.width < 2 * radius + 1:
            raise PlaneTooSmall(
                f"plane {st.height}x{st.width} smaller than {2 * radius + 1} "
                f"required for radius {radius}"
            )
    return labels


def _offset_counts(height: int, width: int, radius: int) -> np.ndarray:
    dy = np.abs(np.arange(-radius, radius + 1))
    dx = np.abs(np.arange(-radius, radius + 1))
    return np.outer(height - dy, width - dx)


def _accumulate(images, radius: int, per_plane_sums) -> Autocorrelation:
    """Shared reduction skeleton: per-image offset sums -> count-weighted
    average -> symmetrization.  ``per_plane_sums(plane)`` supplies the raw
    sum-of-products grid and is the only part the two estimators differ in.
    """
    labels = _validate_stacks(images, radius)
    side = 2 * radius + 1
    total = np.zeros((len(labels), side, side))
    counts = np.zeros((side, side), dtype=np.int64)
    for st in images:
        counts += _offset_counts(st.height, st.width, radius)
        for c in range(len(labels)):
            plane = st.planes[c]
            total[c] += per_plane_sums(plane - plane.mean(), radius)
    grids = total / counts
    grids = 0.5 * (grids + grids[:, ::-1, ::-1])
    return Autocorrelation(grids, counts, labels)


def _fft_plane_sums(plane: np.ndarray, radius: int) -> np.ndarray:
    """Linear autocovariance sums via the power spectrum of the
    zero-padded plane; padding >= size + radius kills circular wrap
    inside the extracted offset window.
    """
    h, w = plane.shape
    p1 = sfft.next_fast_len(h + radius)
    p2 = sfft.next_fast_len(w + radius)
    spec = sfft.rfft2(plane, s=(p1, p2))
    circ = sfft.irfft2(spec * np.conj(spec), s=(p1, p2))
    offs = np.arange(-radius, radius + 1)
    return circ[np.ix_(offs % p1, offs % p2)]


def _brute_plane_sums(plane: np.ndarray, radius: int) -> np.ndarray:
    """Direct per-offset summation over all overlapping pixel pairs."""
    h, w = plane.shape
    side = 2 * radius + 1
    out = np.zeros((side, side))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            a = plane[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
            b = plane[max(0, dy) : h - max(0, -dy), max(0, dx) : w - max(0, -dx)]
            out[dy + radius, dx + radius] = float(np.sum(a * b))
    return out


def estimate_autocorr_fft(images: list[ChannelStack], radius: int) -> Autocorrelation:
    """Estimate C(dx, dy) per channel over an image corpus (fast route).

    Per plane: mean subtraction, zero-padded spectral autocovariance,
    per-offset pair-count normalization; images averaged weighted by
    pair counts; result symmetrized and cropped to |offset| <= radius.
    """
    return _accumulate(images, radius, _fft_plane_sums)


def estimate_autocorr_brute(images: list[ChannelStack], radius: int) -> Autocorrelation:
    """Same contract as estimate_autocorr_fft via direct summation.

    Serves as the independent oracle for the FFT route.
    """
    return _accumulate(images, radius, _brute_plane_sums)


def stationary_rect_cov(grid: np.ndarray, ph: int, pw: int) -> np.ndarray:
    """Raw stationary covariance of a ph x pw pixel rectangle.

    Pixels are indexed row-major: p = a*pw + b for row a, column b.
    Entry [(a,b), (c,d)] = C(dx = d-b, dy = c-a); the result depends on
    offsets only, hence Toeplitz-block-Toeplitz.
    """
    radius = grid.shape[0] // 2
    if ph < 1 or pw < 1:
        raise ConfigError(f"rectangle must be positive, got {ph}x{pw}")
    if max(ph, pw) - 1 > radius:
        raise OffsetOutOfRange(
            f"rectangle {ph}x{pw} needs offsets up to {max(ph, pw) - 1}, "
            f"grid radius is {radius}"
        )
    a, b = np.divmod(np.arange(ph * pw), pw)
    dy = a[None, :] - a[:, None]
    dx = b[None, :] - b[:, None]
    cov = grid[dy + radius, dx + radius]
    return 0.5 * (cov + cov.T)


def toeplitz_block_toeplitz(grid: np.ndarray, m: int) -> np.ndarray:
    """Square m x m case of stationary_rect_cov (m odd enforced)."""
    if m < 1 or m % 2 == 0:
        raise ConfigError(f"patch size must be odd and positive, got {m}")
    return stationary_rect_cov(grid, m, m)


def ensure_psd(cov: np.ndarray) -> np.ndarray:
    """Project onto the PSD cone if needed.

    When a negative eigenvalue is present, eigenvalues are clipped at
    zero and a floor of 1e-6 * lambda_max is added back to the diagonal;
    otherwise the input is returned unchanged.
    """
    eig = sym_eig(cov)
    lam = eig.eigenvalues
    if lam.size == 0 or lam[-1] >= 0.0:
        return cov
    lam_max = max(float(lam[0]), 0.0)
    clipped = np.clip(lam, 0.0, None)
    out = (eig.q * clipped) @ eig.q.T
    out = out + (1e-6 * lam_max) * np.eye(out.shape[0])
    return 0.5 * (out + out.T)


def patch_covariance(ac: Autocorrelation, channel: str, m: int) -> np.ndarray:
    """Stationary m^2 x m^2 patch covariance for one channel, PSD-repaired."""
    return ensure_psd(toeplitz_block_toeplitz(ac.grid(channel), m))


def window_covariance(
    samples, height: int | None = None, width: int | None = None
) -> WindowCovariance:
    """Unbiased sample covariance and mean of flattened windows.

    ``height``/``width`` record the window geometry (default 1 x d).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch("samples must share a common dimension")
    n, d = x.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    if height is None and width is None:
        height, width = 1, d
    if height * width != d:
        raise DimensionMismatch(f"geometry {height}x{width} != dimension {d}")
    mean = x.mean(axis=0)
    xc = x - mean
    sigma = xc.T @ xc / (n - 1)
    sigma = 0.5 * (sigma + sigma.T)
    return WindowCovariance(sigma, mean, height, width)


def extract_rect_sigma(wc: WindowCovariance, top_left, ph: int, pw: int) -> np.ndarray:
    """Sub-covariance of one ph x pw rectangle of the window.

    ``top_left`` = (row, col) inside the window; rectangle pixel order is
    row-major, matching stationary_rect_cov.
    """
    i, j = top_left
    if i < 0 or j < 0 or i + ph > wc.height or j + pw > wc.width:
        raise PatchOutOfBounds(
            f"patch {ph}x{pw} at ({i},{j}) exceeds window "
            f"{wc.height}x{wc.width}"
        )
    rows = (i + np.arange(ph))[:, None] * wc.width + (j + np.arange(pw))[None, :]
    idx = rows.ravel()
    return wc.sigma[np.ix_(idx, idx)]


def extract_local_sigma(wc: WindowCovariance, top_left, m: int) -> np.ndarray:
    """Square m x m case of extract_rect_sigma."""
    return extract_rect_sigma(wc, top_left, m, m)


def sym_eig(s: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues descend; eigenvector signs follow the convention that the
    largest-magnitude entry is positive (first such entry on ties).
    Raises NoConvergence if the off-diagonal mass has not dropped below
    1e-12 * ||S||_F after 100 sweeps.
    """
    s = np.asarray(s, dtype=np.float64)
    _check_symmetric(s)
    n = s.shape[0]
    if n > _MAX_EIG_DIM:
        raise DataError(f"dimension {n} exceeds supported {_MAX_EIG_DIM}")
    b = 0.5 * (s + s.T)
    v = np.eye(n)
    tol = 1e-12 * float(np.linalg.norm(b))
    if n == 1:
        return _finalize_eig(np.array([float(b[0, 0])]), np.array([[1.0]]))

    def off_max(mat):
        a = np.abs(mat).copy()
        np.fill_diagonal(a, 0.0)
        return float(a.max())

    converged = off_max(b) <= tol
    for _ in range(_JACOBI_MAX_SWEEPS):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                bpq = b[p, q]
                if bpq == 0.0:
                    continue
                tau = (b[q, q] - b[p, p]) / (2.0 * bpq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c
                rp = b[p, :].copy()
                rq = b[q, :].copy()
                b[p, :] = c * rp - sn * rq
                b[q, :] = sn * rp + c * rq
                cp = b[:, p].copy()
                cq = b[:, q].copy()
                b[:, p] = c * cp - sn * cq
                b[:, q] = sn * cp + c * cq
                b[p, q] = 0.0
                b[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
        converged = off_max(b) <= tol
    if not converged:
        raise NoConvergence(
            f"Jacobi sweeps exceeded {_JACOBI_MAX_SWEEPS} without reaching "
            f"off-diagonal tolerance {tol:g}"
        )
    return _finalize_eig(np.diag(b).copy(), v)


def _finalize_eig(evals: np.ndarray, q: np.ndarray) -> EigenDecomposition:
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    q = q[:, order]
    peak = np.argmax(np.abs(q), axis=0)
    signs = np.where(q[peak, np.arange(q.shape[1])] < 0.0, -1.0, 1.0)
    return EigenDecomposition(q * signs, evals)


def floor_eigenvalues(eig: EigenDecomposition, rel_floor: float = 1e-12):
    """Clip eigenvalues below rel_floor * lambda_max (whitening guard)."""
    lam_max = float(np.max(eig.eigenvalues)) if eig.eigenvalues.size else 0.0
    floor = rel_floor * max(lam_max, 0.0)
    return EigenDecomposition(eig.q, np.clip(eig.eigenvalues, floor, None))


def lda_directions(
    mu_diffs: np.ndarray, sigma: np.ndarray, eps: float
) -> np.ndarray:
    """Solve ((1-eps)*Sigma + eps*I) W = mu_diffs^T for a batch of mean
    differences (rows of ``mu_diffs``); returns one direction per row.

    eps = 1 short-circuits to the mean differences themselves, bitwise.
    """
    mu_diffs = np.atleast_2d(np.asarray(mu_diffs, dtype=np.float64))
    if not 0.0 <= eps <= 1.0:
        raise ConfigError(f"eps must lie in [0, 1], got {eps}")
    if eps == 1.0:
        return mu_diffs.copy()
    d = mu_diffs.shape[1]
    if sigma.shape != (d, d):
        raise DimensionMismatch(f"sigma {sigma.shape} vs dimension {d}")
    system = (1.0 - eps) * sigma + eps * np.eye(d)
    try:
        sol = np.linalg.solve(system, mu_diffs.T)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            f"regularized scatter matrix singular at eps={eps}"
        ) from exc
    return sol.T


def lda_direction(inputs: LdaInputs) -> np.ndarray:
    """Regularized LDA direction w with ((1-eps)*Sigma + eps*I) w = mu+ - mu-."""
    diff = inputs.mu_plus - inputs.mu_minus
    if inputs.eps == 1.0:
        return diff.copy()
    return lda_directions(diff[None, :], inputs.sigma, inputs.eps)[0]


_TRANSFORM_MODES = ("decorrelate", "pca_whiten", "zca_whiten")


def transform_matrix(eig: EigenDecomposition, mode: str) -> np.ndarray:
    """The linear map of each mode: decorrelate Q^T, PCA-whiten
    L^-1/2 Q^T, ZCA-whiten Q L^-1/2 Q^T."""
    if mode not in _TRANSFORM_MODES:
        raise ConfigError(f"mode must be one of {_TRANSFORM_MODES}, got {mode!r}")
    qt = eig.q.T
    if mode == "decorrelate":
        return qt.copy()
    lam = eig.eigenvalues
    if np.any(lam <= 0.0):
        raise NonPositiveEigenvalue(
            "whitening requires strictly positive eigenvalues; apply "
            "floor_eigenvalues first"
        )
    scaled = qt / np.sqrt(lam)[:, None]
    if mode == "pca_whiten":
        return scaled
    return eig.q @ scaled


def transform_features(x: np.ndarray, eig: EigenDecomposition, mode: str) -> np.ndarray:
    """Apply a decorrelation/whitening map to rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    m = transform_matrix(eig, mode)
    if x.shape[-1] != m.shape[1]:
        raise DimensionMismatch(f"samples of dim {x.shape[-1]} vs map {m.shape}")
    return x @ m.T


# --- text serialization ---


def save_autocorr(ac: Autocorrelation, path) -> None:
    """Text format: radius, labels, shared integer count grid, then one
    float grid per channel (full precision)."""
    side = 2 * ac.radius + 1
    lines = [f"radius {ac.radius}", "labels " + " ".join(ac.labels), "counts"]
    for r in range(side):
        lines.append(" ".join(str(int(x)) for x in ac.counts[r]))
    for c, label in enumerate(ac.labels):
        lines.append(f"channel {label}")
        for r in range(side):
            lines.append(" ".join(repr(float(x)) for x in ac.grids[c, r]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_autocorr(path) -> Autocorrelation:
    with open(path) as fh:
        tokens = [ln.strip() for ln in fh if ln.strip()]
    try:
        radius = int(tokens[0].split()[1])
        labels = tuple(tokens[1].split()[1:])
        side = 2 * radius + 1
        if tokens[2] != "counts":
            raise ValueError("missing counts block")
        pos = 3
        counts = np.array(
            [[int(t) for t in tokens[pos + r].split()] for r in range(side)],
            dtype=np.int64,
        )
        pos += side
        grids = np.zeros((len(labels), side, side))
        for c, label in enumerate(labels):
            if tokens[pos] != f"channel {label}":
                raise ValueError(f"expected channel {label}")
            pos += 1
            grids[c] = [[float(t) for t in tokens[pos + r].split()] for r in range(side)]
            pos += side
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed autocorrelation file: {exc}") from exc
    return Autocorrelation(grids, counts, labels)
