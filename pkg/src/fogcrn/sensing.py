"""Spectrum-sensing detectors and per-frame feature extraction.

Detectors:

* energy: M = sum |y(n)|^2
* waveform (matched filter): M = Re sum y(n) conj(x(n)) for a known pattern x
* cyclostationary: cyclic autocorrelation R_y^a(tau) and its transform over
  lags, scanned over a grid of cyclic frequencies a

Every detector compares its metric to its own threshold with ``decide``;
thresholds are calibrated by Monte Carlo quantiles of the metric under
noise only.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sp_signal

from .errors import InvalidArgumentError, SchemaMismatchError
from .rng import make_rng
from .signalgen import SignalFrame

FEATURE_SCHEMA_VERSION = 1
FEATURE_NAMES = (
    "normalized_energy",
    "waveform_corr",
    "max_cyclic_peak",
    "peak_alpha",
    "spectral_flatness",
    "bandwidth_est",
)
N_FEATURES = len(FEATURE_NAMES)

_CAL_BATCH = 4096


class Hypothesis(enum.IntEnum):
    H0 = 0  # idle: y = w
    H1 = 1  # occupied: y = h x + w


class Detector(enum.Enum):
    ENERGY = "energy"
    WAVEFORM = "waveform"
    CYCLOSTATIONARY = "cyclostationary"


@dataclass(frozen=True)
class EnergyMetric:
    value: float
    n_samples: int


@dataclass(frozen=True, eq=False)
class CyclicSpectrum:
    """Cyclic autocorrelation over lags and its truncated transform over f."""

    alpha: float
    lags: np.ndarray
    autocorr: np.ndarray
    freqs: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class CyclostationaryResult:
    hypothesis: Hypothesis
    peak_alpha: float
    peak_val: float


def _samples(y) -> np.ndarray:
    if isinstance(y, SignalFrame):
        return y.samples
    arr = np.asarray(y, dtype=np.complex128).reshape(-1)
    if arr.size == 0:
        raise InvalidArgumentError("empty frame")
    return arr


def _origin(y) -> int:
    return y.sample_index_origin if isinstance(y, SignalFrame) else 0


def _abs2(z: np.ndarray) -> np.ndarray:
    return z.real * z.real + z.imag * z.imag


# ---------------------------------------------------------------- energy ----

def energy_metric(y) -> EnergyMetric:
    """Total frame energy, the sum of |y(n)|^2 over all N samples."""
    s = _samples(y)
    return EnergyMetric(float(np.sum(_abs2(s))), int(s.size))


def decide(metric: float, rho: float) -> Hypothesis:
    """H1 iff metric > rho. A tie goes to H0, protecting the primary user."""
    return Hypothesis.H1 if metric > rho else Hypothesis.H0


def calibrate_threshold(null_metrics, pfa_target: float) -> float:
    """Empirical (1 - pfa_target) quantile of metric samples drawn under H0."""
    if not 0.0 < pfa_target < 1.0:
        raise InvalidArgumentError("pfa_target must lie in (0, 1)")
    m = np.asarray(null_metrics, dtype=float)
    if m.size == 0 or not np.all(np.isfinite(m)):
        raise InvalidArgumentError("need a non-empty finite sample of null metrics")
    return float(np.quantile(m, 1.0 - pfa_target, method="higher"))


def _noise_batches(n: int, noise_var: float, trials: int, rng):
    scale = math.sqrt(noise_var / 2.0)
    done = 0
    while done < trials:
        b = min(_CAL_BATCH, trials - done)
        d = rng.standard_normal((b, n, 2))
        yield scale * (d[..., 0] + 1j * d[..., 1])
        done += b


def null_energy_metrics(n: int, noise_var: float, trials: int, seed) -> np.ndarray:
    """Energy metric of ``trials`` independent noise-only frames."""
    rng = make_rng(seed)
    return np.concatenate([np.sum(_abs2(w), axis=1)
                           for w in _noise_batches(n, noise_var, trials, rng)])


def _check_calibration(pfa_target, noise_var, n, trials, min_trials=1000):
    if not 0.0 < pfa_target < 1.0:
        raise InvalidArgumentError("pfa_target must lie in (0, 1)")
    if not noise_var > 0.0:
        raise InvalidArgumentError("noise_var must be > 0")
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if trials < min_trials:
        raise InvalidArgumentError(f"trials must be >= {min_trials}")


def calibrate_energy_threshold(pfa_target: float, noise_var: float, n: int,
                               trials: int, seed) -> float:
    """Energy threshold rho with P(M > rho | H0) ~= pfa_target (Monte Carlo)."""
    _check_calibration(pfa_target, noise_var, n, trials)
    return calibrate_threshold(null_energy_metrics(n, noise_var, trials, seed), pfa_target)


# -------------------------------------------------------------- waveform ----

def waveform_metric(y, x_known) -> float:
    """Matched-filter statistic Re sum y(n) conj(x(n))."""
    ys, xs = _samples(y), _samples(x_known)
    if ys.size != xs.size:
        raise InvalidArgumentError(f"length mismatch: {ys.size} vs {xs.size}")
    return float(np.sum(ys.real * xs.real + ys.imag * xs.imag))


def null_waveform_metrics(x_known, noise_var: float, trials: int, seed) -> np.ndarray:
    xs = _samples(x_known)
    rng = make_rng(seed)
    out = [w.real @ xs.real + w.imag @ xs.imag
           for w in _noise_batches(xs.size, noise_var, trials, rng)]
    return np.concatenate(out)


def calibrate_waveform_threshold(pfa_target: float, noise_var: float, x_known,
                                 trials: int, seed) -> float:
    _check_calibration(pfa_target, noise_var, len(_samples(x_known)), trials)
    return calibrate_threshold(null_waveform_metrics(x_known, noise_var, trials, seed),
                               pfa_target)


# ------------------------------------------------------- cyclostationary ----

def _check_tau(tau: int, n: int):
    if not 2 * abs(int(tau)) < n:
        raise InvalidArgumentError(f"|tau| must be < N/2 (tau={tau}, N={n})")


def _lag_products(s: np.ndarray, tau: int, origin: int):
    """Products y(n+tau) conj(y(n-tau)) over the valid n, plus the absolute n."""
    n = s.shape[-1]
    a = abs(tau)
    idx = np.arange(a, n - a)
    if tau == 0:
        # |y|^2 exactly; a complex product may leave an FMA residue in the imag part
        p = _abs2(s[..., idx]).astype(np.complex128)
    else:
        p = s[..., idx + tau] * np.conj(s[..., idx - tau])
    return p, origin + idx


def cyclic_autocorr(y, alpha: float, tau: int) -> complex:
    """Estimate R_y^alpha(tau) = E[y(n+tau) conj(y(n-tau)) exp(+j 2 pi alpha n)].

    The expectation is the mean over indices n where both n+tau and n-tau
    fall inside the frame; no zero padding.
    """
    s = _samples(y)
    _check_tau(tau, s.size)
    p, n_abs = _lag_products(s, int(tau), _origin(y))
    return complex(np.mean(p * np.exp(2j * np.pi * alpha * n_abs)))


@functools.lru_cache(maxsize=64)
def _phase_matrix(lo: int, hi: int, alphas_key: bytes) -> np.ndarray:
    alphas = np.frombuffer(alphas_key, dtype=float)
    m = np.exp(2j * np.pi * np.outer(np.arange(lo, hi), alphas))
    m.setflags(write=False)
    return m


def _cyclic_table(s: np.ndarray, alphas: np.ndarray, taus, origin: int) -> np.ndarray:
    """R^alpha(tau) for every (tau, alpha); ``s`` may be a (trials, N) batch.

    Returns shape (..., len(taus), len(alphas)). The exponential splits into
    a cached local-index table times a per-frame origin rotation.
    """
    out = np.empty(s.shape[:-1] + (len(taus), alphas.size), dtype=np.complex128)
    key = np.ascontiguousarray(alphas, dtype=float).tobytes()
    rot = np.exp(2j * np.pi * alphas * origin)
    n = s.shape[-1]
    for i, tau in enumerate(taus):
        a = abs(int(tau))
        p = _lag_products(s, int(tau), 0)[0]
        out[..., i, :] = (p @ _phase_matrix(a, n - a, key)) * rot / (n - 2 * a)
    return out


def cyclic_spectral_density(y, alpha: float, max_lag: int) -> CyclicSpectrum:
    """S(f, alpha) = sum_{|tau| <= max_lag} R^alpha(tau) exp(-j 2 pi f tau).

    Evaluated on 2*max_lag + 1 uniformly spaced f in [-1/2, 1/2).
    """
    s = _samples(y)
    max_lag = int(max_lag)
    if max_lag < 0:
        raise InvalidArgumentError("max_lag must be >= 0")
    _check_tau(max_lag, s.size)
    lags = np.arange(-max_lag, max_lag + 1)
    acf = _cyclic_table(s, np.array([float(alpha)]), lags, _origin(y))[:, 0]
    m = lags.size
    freqs = (np.arange(m) - max_lag) / m
    values = np.exp(-2j * np.pi * np.outer(freqs, lags)) @ acf
    return CyclicSpectrum(float(alpha), lags, acf, freqs, values)


def _cyclic_scores(table: np.ndarray, zero_table: np.ndarray) -> np.ndarray:
    """sum_tau |R^alpha(tau)|^2, normalized by the same sum at alpha = 0."""
    num = np.sum(_abs2(table), axis=-2)
    den = np.sum(_abs2(zero_table), axis=-2)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = num / den
    return np.where(den > 0.0, score, 0.0)


def _nonzero_alphas(alpha_grid) -> np.ndarray:
    grid = np.asarray(alpha_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InvalidArgumentError("alpha_grid must be non-empty")
    nz = grid[grid != 0.0]
    if nz.size == 0:
        raise InvalidArgumentError("alpha_grid needs at least one non-zero cyclic frequency")
    return nz


def cyclic_peak(y, alpha_grid, tau_set) -> tuple[float, float]:
    """(peak_alpha, peak_val) of the normalized cyclic score over alpha != 0."""
    s = _samples(y)
    alphas = _nonzero_alphas(alpha_grid)
    taus = [int(t) for t in tau_set]
    if not taus:
        raise InvalidArgumentError("tau_set must be non-empty")
    for t in taus:
        _check_tau(t, s.size)
    origin = _origin(y)
    score = _cyclic_scores(_cyclic_table(s, alphas, taus, origin),
                           _cyclic_table(s, np.zeros(1), taus, origin))
    if not np.any(score > 0.0):
        return 0.0, 0.0
    k = int(np.argmax(score))
    return float(alphas[k]), float(score[k])


def detect_cyclostationary(y, alpha_grid, tau_set, rho_cyc: float) -> CyclostationaryResult:
    """Scan cyclic frequencies; H1 iff the peak normalized score exceeds rho_cyc."""
    peak_alpha, peak_val = cyclic_peak(y, alpha_grid, tau_set)
    return CyclostationaryResult(decide(peak_val, rho_cyc), peak_alpha, peak_val)


def null_cyclic_metrics(n: int, noise_var: float, trials: int, seed,
                        alpha_grid, tau_set) -> np.ndarray:
    """Peak cyclic score of ``trials`` noise-only frames."""
    alphas = _nonzero_alphas(alpha_grid)
    taus = [int(t) for t in tau_set]
    for t in taus:
        _check_tau(t, n)
    rng = make_rng(seed)
    out = []
    for w in _noise_batches(n, noise_var, trials, rng):
        # smaller sub-batches keep the (batch, taus, alphas) table modest
        for lo in range(0, w.shape[0], 256):
            wb = w[lo:lo + 256]
            score = _cyclic_scores(_cyclic_table(wb, alphas, taus, 0),
                                   _cyclic_table(wb, np.zeros(1), taus, 0))
            out.append(score.max(axis=-1))
    return np.concatenate(out)


def calibrate_cyclic_threshold(pfa_target: float, noise_var: float, n: int, trials: int,
                               seed, alpha_grid, tau_set) -> float:
    _check_calibration(pfa_target, noise_var, n, trials, min_trials=100)
    return calibrate_threshold(
        null_cyclic_metrics(n, noise_var, trials, seed, alpha_grid, tau_set), pfa_target)


# -------------------------------------------------------------- features ----

def default_alpha_grid(resolution: int = 64) -> np.ndarray:
    """Symmetric grid k/resolution, k = -resolution/2 .. resolution/2 - 1."""
    return np.arange(-resolution // 2, resolution // 2) / resolution


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature families to compute; skipped entries are reported as 0."""

    waveform: bool = True
    cyclic: bool = True
    spectral: bool = True
    alpha_grid: tuple = tuple(default_alpha_grid())
    tau_set: tuple = (0, 1, 2, 3)
    welch_segment: int = 64

    def mask(self) -> np.ndarray:
        return np.array([True, self.waveform, self.cyclic, self.cyclic,
                         self.spectral, self.spectral])


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema_version: int = FEATURE_SCHEMA_VERSION

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != N_FEATURES:
            raise InvalidArgumentError(f"feature vector must have {N_FEATURES} entries")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("feature values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.schema_version == other.schema_version
                and np.array_equal(self.values, other.values))

    def as_dict(self) -> dict:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def check_schema(feature: FeatureVector, schema_version: int):
    if feature.schema_version != schema_version:
        raise SchemaMismatchError(
            f"feature schema v{feature.schema_version} != expected v{schema_version}")


def spectral_flatness(y) -> float:
    """Geometric over arithmetic mean of the periodogram; 1 for a silent frame."""
    s = _samples(y)
    p = _abs2(np.fft.fft(s)) / s.size
    mean = p.mean()
    if mean == 0.0:
        return 1.0
    if np.any(p == 0.0):
        return 0.0
    return float(np.exp(np.mean(np.log(p))) / mean)


def bandwidth_estimate(y, segment: int = 64) -> float:
    """Fraction of the band (cycles/sample) within 3 dB of the Welch PSD peak."""
    s = _samples(y)
    nper = min(segment, s.size)
    _, psd = sp_signal.welch(s, nperseg=nper, noverlap=nper // 2, window="hann",
                             detrend=False, return_onesided=False)
    peak = psd.max()
    if peak <= 0.0:
        return 0.0
    return float(np.count_nonzero(psd >= peak * 10.0 ** -0.3) / psd.size)


def extract_features(y, x_known=None, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Fixed-order feature vector; see ``FEATURE_NAMES``."""
    s = _samples(y)
    n = s.size
    e = float(np.sum(_abs2(s)))
    vals = np.zeros(N_FEATURES)
    vals[0] = e / n
    if cfg.waveform and x_known is not None:
        ex = float(np.sum(_abs2(_samples(x_known))))
        if e > 0.0 and ex > 0.0:
            vals[1] = waveform_metric(y, x_known) / math.sqrt(e * ex)
    if cfg.cyclic:
        taus = [t for t in cfg.tau_set if 2 * abs(t) < n]
        if taus:
            vals[3], vals[2] = cyclic_peak(y, cfg.alpha_grid, taus)
    if cfg.spectral:
        vals[4] = spectral_flatness(y)
        vals[5] = bandwidth_estimate(y, cfg.welch_segment)
    return FeatureVector(vals)
