"""Empirical mode decomposition and its noise-assisted ensemble variant.

``emd`` peels oscillatory modes off a series from highest to lowest
frequency by iterative sifting: cubic-spline envelopes are fit through the
local maxima and minima (mirror-extended at the boundaries), their mean is
subtracted, and the sift stops once the candidate is IMF-shaped and the
normalized squared change between iterations falls under a Cauchy-style
threshold.  Extraction ends when the running residue no longer has two
maxima and two minima to support envelopes.

``ceemdan`` runs the ensemble procedure: an initial mode averaged over
noise-perturbed copies of the input, then stage by stage the next mode is
the ensemble mean of first modes of (current residue + scaled k-th noise
mode).  Residues are formed by exact subtraction, so the modes plus the
final residue telescope back to the input to float precision regardless of
trial count or noise level.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "SiftConfig",
    "DecompositionResult",
    "DecompositionError",
    "emd",
    "ceemdan",
    "reconstruct",
    "zero_crossings",
]


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class SiftConfig:
    """Sifting controls shared by plain and ensemble decomposition."""

    max_sift_iterations: int = 100
    sd_threshold: float = 0.2
    max_imfs: int | None = None

    def __post_init__(self):
        if self.max_sift_iterations < 1:
            raise DecompositionError("max_sift_iterations must be >= 1")
        if self.sd_threshold <= 0:
            raise DecompositionError("sd_threshold must be > 0")
        if self.max_imfs is not None and self.max_imfs < 1:
            raise DecompositionError("max_imfs must be >= 1 when set")


@dataclass
class DecompositionResult:
    """Ordered modes (highest frequency first) plus the trend residue."""

    imfs: list[np.ndarray]
    residue: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    def as_matrix(self) -> np.ndarray:
        """Stack columns: imf_1 .. imf_n, residue -> shape [N, n_imfs + 1]."""
        return np.column_stack(self.imfs + [self.residue])


def reconstruct(result: DecompositionResult) -> np.ndarray:
    """Elementwise sum of all modes and the residue."""
    if result.residue is None or (not result.imfs and result.residue.size == 0):
        raise DecompositionError("cannot reconstruct an empty decomposition")
    out = result.residue.copy()
    for imf in result.imfs:
        out += imf
    return out


# ---------------------------------------------------------------------------
# extrema and envelopes


def _local_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima, plateau-aware.

    A flat run bounded by opposite slopes counts as one extremum at the
    middle of the run.
    """
    dx = np.diff(x)
    nz = np.flatnonzero(dx)
    if nz.size < 2:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    slopes = np.sign(dx[nz])
    flips = np.flatnonzero(slopes[1:] != slopes[:-1])
    if flips.size == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    # Extremum between the end of one monotone run and the start of the next.
    left = nz[flips] + 1
    right = nz[flips + 1]
    locs = (left + right) // 2
    is_max = slopes[flips] > 0
    return locs[is_max], locs[~is_max]


def zero_crossings(x: np.ndarray) -> int:
    """Number of sign changes, ignoring exact zeros."""
    s = np.sign(x)
    s = s[s != 0]
    if s.size < 2:
        return 0
    return int(np.count_nonzero(s[1:] != s[:-1]))


_NBSYM = 2  # extrema reflected across each boundary


def _extend_extrema(x: np.ndarray, maxima: np.ndarray, minima: np.ndarray):
    """Mirror extrema beyond both ends of the series.

    Reflection is taken about the first (last) extremum when the boundary
    sample lies inside the envelope band there; otherwise about the
    boundary itself, with the boundary sample joining the envelope it
    undercuts or overshoots.  This keeps trends from being flattened out
    of the envelopes at the ends.

    Returns padded (positions, values) knot arrays for the upper and lower
    envelope splines.
    """
    n = x.size
    nb = _NBSYM
    end_max, end_min = maxima.size, minima.size

    # Left side.
    if maxima[0] < minima[0]:
        if x[0] > x[minima[0]]:
            lmax = maxima[1 : min(end_max, nb + 1)][::-1]
            lmin = minima[0 : min(end_min, nb)][::-1]
            lsym = maxima[0]
        else:
            lmax = maxima[0 : min(end_max, nb)][::-1]
            lmin = np.append(minima[0 : min(end_min, nb - 1)][::-1], 0)
            lsym = 0
    else:
        if x[0] < x[maxima[0]]:
            lmax = maxima[0 : min(end_max, nb)][::-1]
            lmin = minima[1 : min(end_min, nb + 1)][::-1]
            lsym = minima[0]
        else:
            lmax = np.append(maxima[0 : min(end_max, nb - 1)][::-1], 0)
            lmin = minima[0 : min(end_min, nb)][::-1]
            lsym = 0

    # Right side.
    if maxima[-1] < minima[-1]:
        if x[-1] < x[maxima[-1]]:
            rmax = maxima[max(end_max - nb, 0) :][::-1]
            rmin = minima[max(end_min - nb - 1, 0) : -1][::-1]
            rsym = minima[-1]
        else:
            rmax = np.append(maxima[max(end_max - nb + 1, 0) :], n - 1)[::-1]
            rmin = minima[max(end_min - nb, 0) :][::-1]
            rsym = n - 1
    else:
        if x[-1] > x[minima[-1]]:
            rmax = maxima[max(end_max - nb - 1, 0) : -1][::-1]
            rmin = minima[max(end_min - nb, 0) :][::-1]
            rsym = maxima[-1]
        else:
            rmax = maxima[max(end_max - nb, 0) :][::-1]
            rmin = np.append(minima[max(end_min - nb + 1, 0) :], n - 1)[::-1]
            rsym = n - 1

    if lmax.size == 0:
        lmax = maxima[::-1]
    if lmin.size == 0:
        lmin = minima[::-1]
    if rmax.size == 0:
        rmax = maxima[::-1]
    if rmin.size == 0:
        rmin = minima[::-1]

    tlmax, tlmin = 2 * lsym - lmax, 2 * lsym - lmin
    # If the reflection failed to extend past the start, mirror about it.
    if tlmax[0] > 0 or tlmin[0] > 0:
        if lsym == maxima[0]:
            lmax = maxima[0 : min(end_max, nb)][::-1]
        else:
            lmin = minima[0 : min(end_min, nb)][::-1]
        lsym = 0
        tlmax, tlmin = -lmax, -lmin

    trmax, trmin = 2 * rsym - rmax, 2 * rsym - rmin
    if trmax[-1] < n - 1 or trmin[-1] < n - 1:
        if rsym == maxima[-1]:
            rmax = maxima[max(end_max - nb, 0) :][::-1]
        else:
            rmin = minima[max(end_min - nb, 0) :][::-1]
        rsym = n - 1
        trmax, trmin = 2 * rsym - rmax, 2 * rsym - rmin

    ux = np.concatenate([tlmax, maxima, trmax]).astype(np.float64)
    uy = np.concatenate([x[lmax], x[maxima], x[rmax]])
    lx = np.concatenate([tlmin, minima, trmin]).astype(np.float64)
    ly = np.concatenate([x[lmin], x[minima], x[rmin]])
    ku = np.concatenate([[True], np.diff(ux) > 0])
    kl = np.concatenate([[True], np.diff(lx) > 0])
    return ux[ku], uy[ku], lx[kl], ly[kl]


def _envelope_mean(x: np.ndarray) -> np.ndarray | None:
    """Mean of the upper and lower cubic-spline envelopes, or None when the
    signal has too few extrema to support both envelopes.

    A single maximum (or minimum) is not enough: its mirror images share
    its value, which degenerates the envelope to a constant and folds any
    trend into the extracted mode instead of the residue.
    """
    maxima, minima = _local_extrema(x)
    if maxima.size < 2 or minima.size < 2:
        return None
    t = np.arange(x.size, dtype=np.float64)
    ux, uy, lx, ly = _extend_extrema(x, maxima, minima)
    upper = CubicSpline(ux, uy)(t)
    lower = CubicSpline(lx, ly)(t)
    return 0.5 * (upper + lower)


def _is_imf_shaped(x: np.ndarray) -> bool:
    """A proper mode: extrema and zero-crossing counts differ by at most
    one, every maximum is positive and every minimum negative."""
    maxima, minima = _local_extrema(x)
    if abs(int(maxima.size + minima.size) - zero_crossings(x)) > 1:
        return False
    return not (np.any(x[maxima] < 0) or np.any(x[minima] > 0))


def _sift_mode(x: np.ndarray, config: SiftConfig) -> np.ndarray | None:
    """Extract one mode from ``x`` by iterative sifting; None if ``x`` has
    too few extrema to sift at all.

    A sift stops once the candidate is IMF-shaped and the normalized
    squared change between iterations falls under the threshold.  Without
    the shape requirement the late, extrema-poor stages absorb several
    scales into a single mode.
    """
    h = x
    mean_env = _envelope_mean(h)
    if mean_env is None:
        return None
    for _ in range(config.max_sift_iterations):
        h_new = h - mean_env
        denom = float(np.sum(h * h))
        if denom == 0.0:
            h = h_new
            break
        sd = float(np.sum((h - h_new) ** 2)) / denom
        h = h_new
        if sd < config.sd_threshold and _is_imf_shaped(h):
            break
        mean_env = _envelope_mean(h)
        if mean_env is None:
            break
    return h


def _decomposable(x: np.ndarray) -> bool:
    maxima, minima = _local_extrema(x)
    return maxima.size >= 2 and minima.size >= 2


def _mode_cap(n: int, config: SiftConfig) -> int:
    # Runaway protection: a clean decomposition of an n-point series has
    # roughly log2(n) modes, so anything far beyond that is pathological.
    if config.max_imfs is not None:
        return config.max_imfs
    return int(np.ceil(2.0 * np.log2(max(n, 2)))) + 8


def emd(signal, config: SiftConfig | None = None) -> DecompositionResult:
    """Decompose a 1-D series into modes plus a monotone-ish residue.

    A constant or monotone input (fewer than two interior extrema) yields
    zero modes with the residue equal to the input.  The modes and residue
    always sum back to the input exactly up to float rounding.
    """
    config = config or SiftConfig()
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DecompositionError(f"signal must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DecompositionError("signal contains non-finite values")
    meta = {"method": "emd"}
    if x.size < 8 or not _decomposable(x):
        return DecompositionResult(imfs=[], residue=x.copy(), meta=meta)
    imfs: list[np.ndarray] = []
    residue = x.copy()
    cap = _mode_cap(x.size, config)
    while _decomposable(residue):
        if len(imfs) >= cap:
            break
        mode = _sift_mode(residue, config)
        if mode is None:
            break
        imfs.append(mode)
        residue = residue - mode
    return DecompositionResult(imfs=imfs, residue=residue, meta=meta)


# ---------------------------------------------------------------------------
# ensemble decomposition


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # Child streams keyed by (seed, trial) so the ensemble mean is
    # independent of evaluation order and safe to parallelize.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def _noise_modes(args):
    seed, trial, n, config = args
    noise = _trial_rng(seed, trial).standard_normal(n)
    return noise, emd(noise, config).imfs


def _map_trials(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def ceemdan(
    signal,
    noise_ratio: float = 0.2,
    trials: int = 100,
    seed: int = 0,
    config: SiftConfig | None = None,
    jobs: int = 1,
) -> DecompositionResult:
    """Noise-assisted ensemble decomposition of a 1-D series.

    Parameters
    ----------
    signal : array-like
        Input series.
    noise_ratio : float
        Noise amplitude as a fraction of the signal's standard deviation;
        the same ratio is used at every stage.
    trials : int
        Ensemble size.
    seed : int
        Base seed; trial ``i`` uses an independent child stream, so results
        are bit-identical for a fixed (seed, trials, noise_ratio) and do
        not depend on ``jobs``.
    jobs : int
        Worker processes for the per-trial noise decompositions (1 = serial).

    With ``noise_ratio=0`` and ``trials=1`` the result is elementwise
    identical to :func:`emd`.
    """
    config = config or SiftConfig()
    if trials < 1:
        raise DecompositionError(f"trials must be >= 1, got {trials}")
    if noise_ratio < 0:
        raise DecompositionError(f"noise_ratio must be >= 0, got {noise_ratio}")
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DecompositionError(f"signal must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DecompositionError("signal contains non-finite values")

    meta = {
        "method": "ceemdan",
        "trials": trials,
        "noise_ratio": noise_ratio,
        "seed": seed,
        "noise_ratio_schedule": "constant",
    }
    if x.size < 8 or not _decomposable(x):
        return DecompositionResult(imfs=[], residue=x.copy(), meta=meta)

    sigma = float(np.std(x))
    eps = noise_ratio * sigma
    if eps == 0.0:
        # Every trial sees the bare signal; the ensemble collapses to plain
        # EMD, which we run directly so the reduction is exact.
        result = emd(x, config)
        result.meta = dict(meta)
        return result

    n = x.size
    work = [(seed, i, n, config) for i in range(trials)]
    decomposed = _map_trials(_noise_modes, work, jobs)
    noises = [sigma * d[0] for d in decomposed]
    noise_modes = [[sigma * m for m in d[1]] for d in decomposed]

    # Stage 1: first modes of the noise-perturbed inputs.
    first = np.zeros(n)
    for noise in noises:
        mode = _sift_mode(x + noise_ratio * noise, config)
        first += mode if mode is not None else np.zeros(n)
    first /= trials

    imfs = [first]
    residue = x - first
    cap = _mode_cap(n, config)
    while _decomposable(residue):
        if len(imfs) >= cap:
            break
        k = len(imfs)  # residue index: next mode uses the k-th noise mode
        acc = np.zeros(n)
        contributed = False
        for modes in noise_modes:
            if k <= len(modes):
                perturbed = residue + noise_ratio * modes[k - 1]
            else:
                perturbed = residue
            mode = _sift_mode(perturbed, config)
            if mode is not None:
                acc += mode
                contributed = True
        if not contributed:
            break
        mode_k = acc / trials
        if not np.any(mode_k):
            break
        imfs.append(mode_k)
        residue = residue - mode_k
    return DecompositionResult(imfs=imfs, residue=residue, meta=meta)
