# Licensed under the MIT License

"""Frequency engine: 2D FFT, a naive DFT oracle, radial frequency geometry
and the residual band decomposition.

Convention: the forward transform is unnormalized and the inverse carries
the ``1/(H*W)`` factor, so ``spatial_energy * H * W == spectral_energy``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError

NAIVE_DFT_LIMIT = 4096

DEFAULT_TAUS = (1.0, 0.6, 0.3, 0.1)

BAND_NAMES = ("high", "mid", "low", "residual")


@dataclass(frozen=True)
class ThresholdLadder:
    """Normalized radii ``(tau0, tau1, tau2, tau3)`` delimiting the bands.

    ``tau0`` must be 1.0 and the radii strictly decreasing down to
    ``tau3 >= 0``. Band ``i`` holds the bins with ``tau_i < |w| <= tau_{i-1}``.
    """

    taus: tuple = DEFAULT_TAUS

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        object.__setattr__(self, "taus", taus)
        self.validate()

    def validate(self):
        taus = self.taus
        if len(taus) != 4:
            raise ValidationError(f"threshold ladder needs 4 radii, got {len(taus)}")
        if taus[0] != 1.0:
            raise ValidationError(f"threshold ladder must start at 1.0, got {taus[0]}")
        if taus[3] < 0.0:
            raise ValidationError(f"threshold ladder radii must be >= 0, got {taus[3]}")
        if not all(a > b for a, b in zip(taus, taus[1:])):
            raise ValidationError(f"threshold ladder must be strictly decreasing, got {taus}")

    @classmethod
    def parse(cls, text: str) -> "ThresholdLadder":
        """Parse a comma-separated list such as ``"1.0,0.6,0.3,0.1"``."""
        try:
            taus = tuple(float(t) for t in text.split(","))
        except ValueError as e:
            raise ValidationError(f"invalid threshold ladder {text!r}") from e
        return cls(taus)

    def __str__(self):
        return ",".join(repr(t) for t in self.taus)


@dataclass(frozen=True)
class RadialGrid:
    """Normalized radial frequency ``|w|`` of every bin of an ``[H, W]`` FFT."""

    magnitudes: np.ndarray


@dataclass
class BandSet:
    """The four disjoint sub-spectra of a spectrum.

    Attributes
    ----------
    high, mid, low, residual : np.ndarray
        Complex sub-spectra with the shape of the source spectrum.
    ladder : ThresholdLadder
        Ladder used for the decomposition.
    source_shape : tuple
        Shape of the decomposed spectrum.
    """

    high: np.ndarray
    mid: np.ndarray
    low: np.ndarray
    residual: np.ndarray
    ladder: ThresholdLadder
    source_shape: tuple

    def bands(self):
        """Return the bands in the order (high, mid, low, residual)."""
        return (self.high, self.mid, self.low, self.residual)

    def total(self) -> np.ndarray:
        """Element-wise sum of the four bands."""
        return ((self.high + self.mid) + self.low) + self.residual

    def energies(self) -> dict:
        """Energy of every band keyed by band name."""
        return {name: band_energy(b) for name, b in zip(BAND_NAMES, self.bands())}

    def replace_high(self, high: np.ndarray) -> "BandSet":
        """Return a copy whose high band is replaced."""
        if high.shape != self.high.shape:
            raise ShapeError(f"high band shape {high.shape} does not match {self.high.shape}")
        return BandSet(high, self.mid, self.low, self.residual, self.ladder, self.source_shape)


def _require_2d(x: np.ndarray, name: str):
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise ShapeError(f"{name} needs at least two non-empty trailing axes, got {x.shape}")


def fft2(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT over the last two axes (any extents)."""
    x = np.asarray(x)
    _require_2d(x, "fft2")
    return np.fft.fft2(x, axes=(-2, -1))


def ifft2(X: np.ndarray) -> np.ndarray:
    """Inverse DFT over the last two axes with ``1/(H*W)`` normalization."""
    X = np.asarray(X)
    _require_2d(X, "ifft2")
    return np.fft.ifft2(X, axes=(-2, -1))


def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def naive_dft2(x: np.ndarray) -> np.ndarray:
    """Direct double-sum DFT of a single ``[H, W]`` array.

    Used as an independent oracle for :func:`fft2`; refuses inputs with
    more than 4096 samples.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError(f"naive_dft2 takes an [H, W] array, got {x.shape}")
    h, w = x.shape
    if h * w > NAIVE_DFT_LIMIT:
        raise ValidationError(f"naive_dft2 limited to {NAIVE_DFT_LIMIT} samples, got {h}x{w}")
    return _dft_matrix(h) @ x.astype(np.complex128) @ _dft_matrix(w).T


def _centered(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.where(k <= n / 2, k, k - n).astype(np.float64)


def radial_grid(h: int, w: int) -> RadialGrid:
    """Normalized radial distance of every FFT bin.

    Signed frequencies are divided by ``max(n // 2, 1)`` per axis and the
    radius by ``sqrt(2)``, so the DC bin is 0 and the Nyquist corner is 1.
    """
    if h < 1 or w < 1:
        raise ValidationError(f"radial grid needs positive extents, got {h}x{w}")
    fu = _centered(h) / max(h // 2, 1)
    fv = _centered(w) / max(w // 2, 1)
    r = np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2) / np.sqrt(2.0)
    return RadialGrid(np.minimum(r, 1.0))


def band_masks(h: int, w: int, ladder: ThresholdLadder):
    """Boolean ``[H, W]`` masks of the high, mid and low annuli."""
    r = radial_grid(h, w).magnitudes
    taus = ladder.taus
    return [(r > taus[i]) & (r <= taus[i - 1]) for i in (1, 2, 3)]


def residual_decompose(X: np.ndarray, ladder: ThresholdLadder) -> BandSet:
    """Split a spectrum into high, mid, low and residual bands.

    Starting from the full spectrum, each band copies the bins of its annulus
    from the remaining spectrum, which is then reduced by that band. What
    remains (``|w| <= tau3``, including DC) is the residual band, so the four
    bands add up to ``X`` exactly.
    """
    ladder.validate()
    X = np.asarray(X, dtype=np.complex128)
    _require_2d(X, "residual_decompose")
    remaining = X
    bands = []
    for mask in band_masks(X.shape[-2], X.shape[-1], ladder):
        band = np.where(mask, remaining, 0.0)
        remaining = remaining - band
        bands.append(band)
    return BandSet(bands[0], bands[1], bands[2], remaining, ladder, X.shape)


def band_energy(X: np.ndarray) -> float:
    """Sum of squared magnitudes, accumulated in row-major order."""
    X = np.asarray(X)
    return float(np.sum(X.real**2 + X.imag**2))
