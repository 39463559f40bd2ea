"""Primary-user waveforms, AWGN and the received-signal model y = h*x + w.

All signals are complex baseband. Noise is circular: a per-sample variance
``noise_var`` is split evenly between the real and imaginary parts.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .rng import make_rng


class Modulation(enum.Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"


_CONSTELLATIONS = {
    Modulation.BPSK: np.array([1.0 + 0j, -1.0 + 0j]),
    Modulation.QPSK: np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2.0),
}


def constellation(modulation: Modulation) -> np.ndarray:
    """Unit-energy constellation points for ``modulation``."""
    return _CONSTELLATIONS[Modulation(modulation)].copy()


@dataclass(frozen=True, eq=False)
class SignalFrame:
    """A fixed-length window of complex baseband samples.

    ``sample_index_origin`` is the absolute sample index of ``samples[0]``;
    the cyclic-autocorrelation exponent is evaluated at absolute indices.
    """

    samples: np.ndarray
    sample_index_origin: int = 0
    channel_id: int = 0
    sample_rate: float = 1.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if arr.size < 1:
            raise InvalidArgumentError("a frame needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("frame samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def indices(self) -> np.ndarray:
        """Absolute sample indices of the frame."""
        return self.sample_index_origin + np.arange(self.samples.size)

    def energy(self) -> float:
        s = self.samples
        return float(np.sum(s.real * s.real + s.imag * s.imag))

    def replace(self, samples=None, **kw) -> "SignalFrame":
        return SignalFrame(
            self.samples if samples is None else samples,
            kw.get("sample_index_origin", self.sample_index_origin),
            kw.get("channel_id", self.channel_id),
            kw.get("sample_rate", self.sample_rate),
        )

    def __eq__(self, other):
        if not isinstance(other, SignalFrame):
            return NotImplemented
        return (
            self.sample_index_origin == other.sample_index_origin
            and self.channel_id == other.channel_id
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True)
class PuProfile:
    """Transmission pattern of a primary user."""

    modulation: Modulation = Modulation.BPSK
    carrier_freq: float = 0.1
    symbol_len: int = 8
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "modulation", Modulation(self.modulation))
        if not 0.0 < self.carrier_freq < 0.5:
            raise InvalidArgumentError("carrier_freq must lie strictly inside (0, 0.5)")
        if int(self.symbol_len) < 1:
            raise InvalidArgumentError("symbol_len must be >= 1")
        # amplitude=0 is accepted as the degenerate silent transmitter
        if not self.amplitude >= 0.0 or not math.isfinite(self.amplitude):
            raise InvalidArgumentError("amplitude must be finite and non-negative")


@dataclass(frozen=True)
class ChannelModel:
    h: complex = 1.0 + 0j
    noise_var: float = 1.0

    def __post_init__(self):
        if not (self.noise_var >= 0.0 and math.isfinite(self.noise_var)):
            raise InvalidArgumentError("noise_var must be finite and >= 0")
        if not np.isfinite(complex(self.h)):
            raise InvalidArgumentError("channel coefficient must be finite")


def noise_var_for_snr(snr_db: float, amplitude: float = 1.0, h: complex = 1.0) -> float:
    """Noise variance giving SNR = |h|^2 * amplitude^2 / noise_var."""
    return abs(h) ** 2 * amplitude**2 / 10.0 ** (snr_db / 10.0)


def gen_pu_signal(profile: PuProfile, n: int, seed, *, symbols=None,
                  sample_index_origin: int = 0, channel_id: int = 0) -> SignalFrame:
    """Modulated carrier: amplitude * c[symbol] * exp(j 2 pi f k).

    Symbols are drawn uniformly from the constellation unless ``symbols``
    (constellation indices, one per symbol period) is given.
    """
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    points = _CONSTELLATIONS[profile.modulation]
    n_sym = -(-n // profile.symbol_len)
    if symbols is None:
        symbols = make_rng(seed).integers(0, points.size, size=n_sym)
    else:
        symbols = np.asarray(symbols, dtype=np.int64)
        if symbols.size < n_sym:
            raise InvalidArgumentError(f"need {n_sym} symbols, got {symbols.size}")
    baseband = np.repeat(points[symbols[:n_sym]], profile.symbol_len)[:n]
    k = sample_index_origin + np.arange(n)
    carrier = np.exp(2j * np.pi * profile.carrier_freq * k)
    return SignalFrame(profile.amplitude * baseband * carrier, sample_index_origin, channel_id)


def _noise(n: int, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    scale = math.sqrt(noise_var / 2.0)
    draws = rng.standard_normal((n, 2))
    return scale * (draws[:, 0] + 1j * draws[:, 1])


def gen_noise(n: int, noise_var: float, seed, *, sample_index_origin: int = 0,
              channel_id: int = 0) -> SignalFrame:
    """Circular complex white Gaussian noise with E|w|^2 = noise_var."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if not noise_var >= 0.0:
        raise InvalidArgumentError("noise_var must be >= 0")
    return SignalFrame(_noise(n, noise_var, make_rng(seed)), sample_index_origin, channel_id)


def apply_channel(x: SignalFrame, ch: ChannelModel, seed) -> SignalFrame:
    """Received frame y(n) = h x(n) + w(n); an all-zero ``x`` yields pure noise."""
    y = complex(ch.h) * x.samples
    if ch.noise_var > 0.0:
        y = y + _noise(x.n, ch.noise_var, make_rng(seed))
    return x.replace(samples=y)


def silent_frame(n: int, *, sample_index_origin: int = 0, channel_id: int = 0) -> SignalFrame:
    return SignalFrame(np.zeros(n, dtype=np.complex128), sample_index_origin, channel_id)
