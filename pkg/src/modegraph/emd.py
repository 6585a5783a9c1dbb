"""Empirical mode decomposition with ensemble variants.

A series is decomposed into intrinsic mode functions (IMFs) by iterative
sifting: subtract the mean of the upper and lower cubic-spline envelopes
until a stopping rule fires, then peel the mode off and repeat on the
remainder. Ensemble variants (EEMD, CEEMDAN) average decompositions of
noise-perturbed copies to reduce mode mixing. The residue is always the
source minus the sum of extracted IMFs, so reconstruction is exact by
construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import hilbert

from .series import zero_crossings

__all__ = [
    "EmdConfig",
    "Imf",
    "ImfMetrics",
    "Decomposition",
    "ReconstructionReport",
    "SiftResult",
    "InsufficientExtrema",
    "find_extrema",
    "envelope_mean",
    "sift",
    "emd",
    "eemd",
    "ceemdan",
    "characterize",
    "validate_reconstruction",
]

# iteration cap used when s_number is disabled (sentinel 0)
_FALLBACK_CAP = 1000


class InsufficientExtrema(ValueError):
    """Raised when a series lacks the extrema needed to build envelopes."""


def _values(s) -> np.ndarray:
    v = getattr(s, "values", s)
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    return v


@dataclass(frozen=True)
class EmdConfig:
    """Sifting and ensemble parameters.

    Parameters
    ----------
    max_imfs : int
        Upper bound on the number of modes extracted.
    sd_thresh : float
        Sifting stops when sum((h_prev - h)**2) / sum(h_prev**2) drops
        below this. 0 disables the rule.
    s_number : int
        Scales the hard iteration cap (100 * s_number). 0 disables the
        scaled cap; a fixed fallback cap of 1000 applies instead.
    fixe_h : int
        Sifting stops once the IMF condition (extrema and zero-crossing
        counts differ by at most one and stay constant) has held for this
        many consecutive iterations. 0 disables the rule.
    trials : int
        Ensemble size for eemd and ceemdan.
    noise_width : float
        Noise standard deviation as a fraction of the signal (or current
        residue) standard deviation.
    seed : int
        Root seed for the per-trial noise streams.
    """

    max_imfs: int = 14
    sd_thresh: float = 0.25
    s_number: int = 8
    fixe_h: int = 5
    trials: int = 100
    noise_width: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be at least 1")
        if self.sd_thresh < 0:
            raise ValueError("sd_thresh must be non-negative")
        if self.s_number < 0 or self.fixe_h < 0:
            raise ValueError("s_number and fixe_h must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.noise_width < 0:
            raise ValueError("noise_width must be non-negative")
        disabled = (self.sd_thresh == 0) + (self.s_number == 0) + (self.fixe_h == 0)
        if disabled > 1:
            raise ValueError("at most one stopping rule may be disabled")


@dataclass(frozen=True)
class ImfMetrics:
    energy: float
    variance: float
    dominant_frequency_cycles: int
    mean_amplitude: float
    std: float


@dataclass
class Imf:
    """One intrinsic mode function; ``index`` is 1-based extraction order."""

    values: np.ndarray
    index: int
    metrics: Optional[ImfMetrics] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def imf_condition_gap(self) -> int:
        """|#extrema - #zero-crossings|; at most 1 for a strict IMF."""
        maxima, minima = find_extrema(self.values)
        return abs((maxima.size + minima.size) - zero_crossings(self.values))


@dataclass
class Decomposition:
    imfs: List[Imf]
    residue: np.ndarray
    method: str
    config: EmdConfig
    source_length: int

    def __post_init__(self):
        self.residue = np.asarray(self.residue, dtype=float)
        if self.method not in ("emd", "eemd", "ceemdan"):
            raise ValueError("method must be one of emd, eemd, ceemdan")

    def imf_matrix(self) -> np.ndarray:
        """IMFs stacked as rows, shape (k, n); empty (0, n) when none."""
        if not self.imfs:
            return np.empty((0, self.source_length))
        return np.vstack([imf.values for imf in self.imfs])

    def reconstruct(self) -> np.ndarray:
        return self.imf_matrix().sum(axis=0) + self.residue

    def to_csv(self) -> str:
        header = ",".join(
            ["imf_%d" % imf.index for imf in self.imfs] + ["residue"]
        )
        cols = [imf.values for imf in self.imfs] + [self.residue]
        lines = [header]
        for row in zip(*cols):
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "source_length": self.source_length,
            "config": asdict(self.config),
            "imfs": [
                {
                    "index": imf.index,
                    "values": [float(x) for x in imf.values],
                    "metrics": asdict(imf.metrics) if imf.metrics else None,
                }
                for imf in self.imfs
            ],
            "residue": [float(x) for x in self.residue],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class SiftResult:
    values: np.ndarray
    iterations: int
    rule: str  # "fixe_h" | "sd" | "cap" | "envelope"


@dataclass(frozen=True)
class ReconstructionReport:
    rmse: float
    mae: float
    full_rmse: float
    residue_mean: float
    residue_std: float
    residue_min: float
    residue_max: float
    residue_extrema: int
    monotonic: bool


def find_extrema(s) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of strict local maxima and minima.

    Equal-valued runs count once, at the midpoint of the run (rounded
    down). Runs touching either boundary are not extrema.

    Returns
    -------
    (maxima, minima) : pair of int arrays
    """
    v = _values(s)
    if v.size < 3:
        raise ValueError("need at least 3 samples to locate extrema")
    # compress equal-valued runs, then compare each interior run to its
    # neighbors
    boundaries = np.flatnonzero(np.diff(v) != 0.0)
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries, [v.size - 1]))
    rv = v[starts]
    if rv.size < 3:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    left = rv[1:-1] - rv[:-2]
    right = rv[2:] - rv[1:-1]
    mids = (starts[1:-1] + ends[1:-1]) // 2
    maxima = mids[(left > 0) & (right < 0)]
    minima = mids[(left < 0) & (right > 0)]
    return maxima.astype(np.int64), minima.astype(np.int64)


def _mirror(idx: np.ndarray, vals: np.ndarray, n: int):
    """Reflect the two extrema nearest each end across the boundaries."""
    left_x = np.array([-idx[1], -idx[0]])
    left_y = np.array([vals[1], vals[0]])
    right_x = np.array([2 * (n - 1) - idx[-1], 2 * (n - 1) - idx[-2]])
    right_y = np.array([vals[-1], vals[-2]])
    return (
        np.concatenate((left_x, idx, right_x)),
        np.concatenate((left_y, vals, right_y)),
    )


def envelope_mean(s) -> np.ndarray:
    """Mean of the upper and lower natural-cubic-spline envelopes.

    Envelopes interpolate the local maxima (respectively minima) after
    mirroring the two extrema nearest each end across the boundary, and
    are evaluated at every sample index.

    Raises
    ------
    InsufficientExtrema
        If the series has fewer than 2 maxima or 2 minima.
    """
    v = _values(s)
    maxima, minima = find_extrema(v)
    if maxima.size < 2 or minima.size < 2:
        raise InsufficientExtrema(
            "need at least 2 maxima and 2 minima, found %d and %d"
            % (maxima.size, minima.size)
        )
    t = np.arange(v.size)
    ux, uy = _mirror(maxima, v[maxima], v.size)
    lx, ly = _mirror(minima, v[minima], v.size)
    upper = CubicSpline(ux, uy, bc_type="natural")(t)
    lower = CubicSpline(lx, ly, bc_type="natural")(t)
    return (upper + lower) / 2.0


def _imf_counts(h: np.ndarray) -> Tuple[int, int]:
    maxima, minima = find_extrema(h)
    return maxima.size + minima.size, zero_crossings(h)


def sift(s, config: EmdConfig) -> SiftResult:
    """Extract one IMF candidate by repeated envelope-mean subtraction.

    Stopping rules, checked in this order after every subtraction:
    the IMF condition held for ``fixe_h`` consecutive iterations, the
    normalized squared change falling below ``sd_thresh``, and a hard cap
    of ``100 * s_number`` iterations.

    Returns
    -------
    SiftResult
        The candidate values, the iteration count, and which rule fired.
        An envelope failure after the first iteration returns the last
        iterate with rule "envelope"; at iteration one it propagates.
    """
    h = _values(s).copy()
    cap = 100 * config.s_number if config.s_number > 0 else _FALLBACK_CAP
    streak = 0
    prev_counts = None
    for iteration in range(1, cap + 1):
        try:
            mean = envelope_mean(h)
        except InsufficientExtrema:
            if iteration == 1:
                raise
            return SiftResult(values=h, iterations=iteration - 1, rule="envelope")
        new_h = h - mean
        counts = _imf_counts(new_h)
        is_imf = abs(counts[0] - counts[1]) <= 1
        if config.fixe_h > 0:
            if is_imf:
                streak = streak + 1 if counts == prev_counts else 1
            else:
                streak = 0
            prev_counts = counts
            if streak >= config.fixe_h:
                return SiftResult(values=new_h, iterations=iteration, rule="fixe_h")
        # the SD rule may only emit a candidate that already meets the
        # extrema/zero-crossing condition
        if config.sd_thresh > 0 and is_imf:
            denom = float(np.sum(h * h))
            sd = float(np.sum(mean * mean)) / denom if denom > 0 else 0.0
            if sd < config.sd_thresh:
                return SiftResult(values=new_h, iterations=iteration, rule="sd")
        h = new_h
    return SiftResult(values=h, iterations=cap, rule="cap")


def _negligible(residue: np.ndarray, scale: float) -> bool:
    # stops the cascade once the remainder is numerical dust; without
    # this, float rounding left over from spline subtraction still has
    # extrema and would be sifted into spurious modes
    return float(np.max(np.abs(residue))) <= 1e-12 * scale


def _emd_values(v: np.ndarray, config: EmdConfig) -> List[np.ndarray]:
    """Plain EMD on a bare array; returns the list of IMF value arrays."""
    residue = v.copy()
    scale = float(np.max(np.abs(v)))
    modes: List[np.ndarray] = []
    while len(modes) < config.max_imfs and not _negligible(residue, scale):
        maxima, minima = find_extrema(residue)
        if maxima.size < 2 or minima.size < 2:
            break
        candidate = sift(residue, config)
        modes.append(candidate.values)
        residue = residue - candidate.values
    return modes


def _build(v, modes, method, config):
    imfs = [Imf(values=m, index=i + 1) for i, m in enumerate(modes)]
    total = np.sum(modes, axis=0) if modes else np.zeros_like(v)
    return Decomposition(
        imfs=imfs,
        residue=v - total,
        method=method,
        config=config,
        source_length=v.size,
    )


def emd(s, config: Optional[EmdConfig] = None) -> Decomposition:
    """Plain empirical mode decomposition.

    Modes are peeled off until the remainder has fewer than 2 maxima or
    2 minima, or ``max_imfs`` is reached. The residue is the source minus
    the sum of IMFs, so reconstruction telescopes exactly.
    """
    config = config or EmdConfig()
    v = _values(s)
    if v.size < 10:
        raise ValueError("series of length %d too short to decompose" % v.size)
    return _build(v, _emd_values(v, config), "emd", config)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # stream depends on (seed, trial) only, so changing the trial count
    # does not reshuffle earlier trials
    return np.random.default_rng((seed, trial))


def eemd(s, config: Optional[EmdConfig] = None) -> Decomposition:
    """Ensemble EMD: average plain decompositions of noise-perturbed copies.

    Each trial decomposes ``s + noise_width * std(s) * g_t`` with an
    independent Gaussian stream ``g_t``. IMFs are aligned by index;
    trials that produced fewer modes contribute zeros to the trailing
    ones. Deterministic given ``config.seed``.
    """
    config = config or EmdConfig()
    v = _values(s)
    if v.size < 10:
        raise ValueError("series of length %d too short to decompose" % v.size)
    scale = config.noise_width * float(v.std())
    per_trial: List[List[np.ndarray]] = []
    for trial in range(config.trials):
        noise = _trial_rng(config.seed, trial).standard_normal(v.size)
        per_trial.append(_emd_values(v + scale * noise, config))
    width = max((len(modes) for modes in per_trial), default=0)
    if width == 0:
        return _build(v, [], "eemd", config)
    stacked = np.zeros((config.trials, width, v.size))
    for t, modes in enumerate(per_trial):
        for k, m in enumerate(modes):
            stacked[t, k] = m
    averaged = list(stacked.mean(axis=0))
    return _build(v, averaged, "eemd", config)


def ceemdan(s, config: Optional[EmdConfig] = None) -> Decomposition:
    """CEEMDAN: noise injected adaptively at every extraction stage.

    Stage k averages, over trials, the first sift of the current residue
    perturbed by the k-th plain-EMD mode of each trial's unit noise,
    scaled by ``noise_width * std(residue)``. Trials whose noise has
    fewer than k modes contribute an unperturbed copy.
    """
    config = config or EmdConfig()
    v = _values(s)
    if v.size < 10:
        raise ValueError("series of length %d too short to decompose" % v.size)
    noise_modes: List[List[np.ndarray]] = []
    if config.noise_width > 0:
        for trial in range(config.trials):
            w = _trial_rng(config.seed, trial).standard_normal(v.size)
            noise_modes.append(_emd_values(w, config))
    else:
        noise_modes = [[] for _ in range(config.trials)]
    residue = v.copy()
    source_scale = float(np.max(np.abs(v)))
    modes: List[np.ndarray] = []
    while len(modes) < config.max_imfs and not _negligible(residue, source_scale):
        maxima, minima = find_extrema(residue)
        if maxima.size < 2 or minima.size < 2:
            break
        scale = config.noise_width * float(residue.std())
        stage = np.zeros_like(v)
        k = len(modes)
        for trial in range(config.trials):
            trial_modes = noise_modes[trial]
            perturbed = residue
            if scale > 0 and len(trial_modes) > k:
                perturbed = residue + scale * trial_modes[k]
            try:
                stage += sift(perturbed, config).values
            except InsufficientExtrema:
                pass  # degenerate perturbation contributes nothing
        mode = stage / config.trials
        modes.append(mode)
        residue = residue - mode
    return _build(v, modes, "ceemdan", config)


def characterize(d: Decomposition) -> List[ImfMetrics]:
    """Fill and return per-IMF metrics.

    Energy is the plain sum of squares; variance and std are the sample
    (ddof=1) statistics; the dominant frequency is the index of the
    largest-magnitude DFT bin of the mean-removed IMF, i.e. whole cycles
    across the record; the mean amplitude averages the modulus of the
    analytic signal of the mean-removed IMF.
    """
    if not d.imfs:
        raise ValueError("decomposition has no IMFs to characterize")
    out = []
    for imf in d.imfs:
        v = imf.values
        centered = v - v.mean()
        if np.any(centered != 0.0):
            spectrum = np.abs(np.fft.rfft(centered))
            dominant = int(np.argmax(spectrum))
            amplitude = float(np.mean(np.abs(hilbert(centered))))
        else:
            dominant = 0
            amplitude = 0.0
        metrics = ImfMetrics(
            energy=float(np.sum(v * v)),
            variance=float(v.var(ddof=1)),
            dominant_frequency_cycles=dominant,
            mean_amplitude=amplitude,
            std=float(v.std(ddof=1)),
        )
        imf.metrics = metrics
        out.append(metrics)
    return out


def validate_reconstruction(d: Decomposition, source) -> ReconstructionReport:
    """Reconstruction errors and residue diagnostics.

    ``rmse`` and ``mae`` compare the sum of IMFs alone against the
    source; ``full_rmse`` includes the residue and exposes the
    telescoping identity. ``monotonic`` is true iff the residue has no
    interior local extrema.
    """
    v = _values(source)
    if v.size != d.source_length or v.size != d.residue.size:
        raise ValueError(
            "source length %d does not match decomposition length %d"
            % (v.size, d.source_length)
        )
    imf_sum = d.imf_matrix().sum(axis=0)
    diff = v - imf_sum
    full_diff = diff - d.residue
    maxima, minima = find_extrema(d.residue)
    n_extrema = int(maxima.size + minima.size)
    return ReconstructionReport(
        rmse=float(np.sqrt(np.mean(diff * diff))),
        mae=float(np.mean(np.abs(diff))),
        full_rmse=float(np.sqrt(np.mean(full_diff * full_diff))),
        residue_mean=float(d.residue.mean()),
        residue_std=float(d.residue.std(ddof=1)),
        residue_min=float(d.residue.min()),
        residue_max=float(d.residue.max()),
        residue_extrema=n_extrema,
        monotonic=n_extrema == 0,
    )
