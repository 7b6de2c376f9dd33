# Licensed under the MIT License

"""Frequency-domain enhanced decomposer.

Features are preprocessed in the spatial domain (depthwise conv followed by
a grouped 1x1 conv), transformed with a 2D FFT and split into high, mid,
low and residual bands. Only the high band is enhanced, differently per
modality: a residual depthwise Conv3D for video (edge reinforcement) and a
channel-attention gate for audio (noise suppression). Every band is
transformed back on its own and the spatial images are recombined with
per-modality band weights.
"""

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import tensor
from .errors import ShapeError, ValidationError, shape_mismatch
from .spectral import BandSet, ThresholdLadder, band_masks, fft2, ifft2, residual_decompose
from .tensor import InitSpec, init_tensor

Modality = Literal["visual", "audio"]

_PREFIX = {"visual": "v", "audio": "a"}


@dataclass
class FdedBranch:
    """Preprocessing and recomposition weights of one modality.

    Attributes
    ----------
    dwc : np.ndarray
        Depthwise kernels ``[C, kh, kw]``.
    group : np.ndarray
        Grouped 1x1 mixing matrices ``[G, C/G, C/G]``.
    band_weights : np.ndarray
        Recomposition weights for (high, mid, low, residual).
    """

    dwc: np.ndarray
    group: np.ndarray
    band_weights: np.ndarray = field(default_factory=lambda: np.ones(4))


@dataclass
class FdedParams:
    """All weights of the decomposer for both modalities.

    Attributes
    ----------
    visual, audio : FdedBranch
        Per-modality preprocessing and band weights.
    conv3d : np.ndarray
        Depthwise Conv3D kernel ``[C, kt, kh, kw]`` for the visual high band.
    ca_w1, ca_w2 : np.ndarray
        Channel-attention MLP ``[C, C/r]`` and ``[C/r, C]`` for the audio
        high band.
    ladder : ThresholdLadder
        Band thresholds.
    enhance : bool
        When False the high band is passed through like the other bands.
    """

    visual: FdedBranch
    audio: FdedBranch
    conv3d: np.ndarray
    ca_w1: np.ndarray
    ca_w2: np.ndarray
    ladder: ThresholdLadder = field(default_factory=ThresholdLadder)
    enhance: bool = True

    @property
    def channels(self) -> int:
        return self.conv3d.shape[0]

    def branch(self, modality: Modality) -> FdedBranch:
        if modality == "visual":
            return self.visual
        if modality == "audio":
            return self.audio
        raise ValidationError(f"unknown modality {modality!r}")

    def validate(self):
        if self.conv3d.ndim != 4 or any(n % 2 == 0 for n in self.conv3d.shape[1:]):
            raise ValidationError(f"Conv3D kernels must be [C, kt, kh, kw] with odd extents, got {self.conv3d.shape}")
        c = self.channels
        for modality in ("visual", "audio"):
            b = self.branch(modality)
            if b.dwc.ndim != 3 or b.dwc.shape[0] != c:
                raise shape_mismatch(f"{modality} depthwise kernels", b.dwc.shape, (c, 3, 3))
            if any(n % 2 == 0 for n in b.dwc.shape[1:]):
                raise ValidationError(f"{modality} depthwise kernels must have odd extents, got {b.dwc.shape}")
            g = b.group.shape[0] if b.group.ndim else 0
            if b.group.ndim != 3 or g * b.group.shape[1] != c or b.group.shape[1] != b.group.shape[2]:
                raise shape_mismatch(f"{modality} group weights", b.group.shape, (g, c // max(g, 1), c // max(g, 1)))
            if np.shape(b.band_weights) != (4,):
                raise shape_mismatch(f"{modality} band weights", np.shape(b.band_weights), (4,))
        if self.ca_w1.ndim != 2 or self.ca_w1.shape[0] != c or self.ca_w2.shape != self.ca_w1.shape[::-1]:
            raise shape_mismatch("channel attention", self.ca_w1.shape, self.ca_w2.shape)
        if c % self.ca_w1.shape[1] != 0:
            raise ValidationError(f"channel attention reduction must divide {c}")

    def to_tensors(self, prefix: str = "fded") -> dict:
        """Named tensors for an FTEN1 container."""
        out = {}
        for modality, p in _PREFIX.items():
            b = self.branch(modality)
            out[f"{prefix}.{p}.dwc"] = b.dwc
            out[f"{prefix}.{p}.group"] = b.group
            out[f"{prefix}.{p}.band_weights"] = np.asarray(b.band_weights, dtype=np.float64)
        out[f"{prefix}.v.conv3d"] = self.conv3d
        out[f"{prefix}.a.ca.w1"] = self.ca_w1
        out[f"{prefix}.a.ca.w2"] = self.ca_w2
        return out

    @classmethod
    def from_tensors(cls, tensors: dict, ladder: ThresholdLadder, prefix: str = "fded", enhance: bool = True):
        """Rebuild parameters from named tensors written by :meth:`to_tensors`."""
        try:
            branches = {
                modality: FdedBranch(
                    tensors[f"{prefix}.{p}.dwc"],
                    tensors[f"{prefix}.{p}.group"],
                    tensors[f"{prefix}.{p}.band_weights"],
                )
                for modality, p in _PREFIX.items()
            }
            params = cls(
                branches["visual"],
                branches["audio"],
                tensors[f"{prefix}.v.conv3d"],
                tensors[f"{prefix}.a.ca.w1"],
                tensors[f"{prefix}.a.ca.w2"],
                ladder,
                enhance,
            )
        except KeyError as e:
            raise ValidationError(f"missing parameter tensor {e.args[0]}") from e
        params.validate()
        return params


@dataclass
class FdedOutput:
    """Result of :func:`fded_forward`.

    Attributes
    ----------
    features : np.ndarray
        Recomposed spatial features, same shape as the input.
    bands : BandSet
        Decomposition of the preprocessed spectrum (before enhancement).
    enhanced_high : np.ndarray
        High band after enhancement, confined to the high annulus.
    """

    features: np.ndarray
    bands: BandSet
    enhanced_high: np.ndarray


def identity_params(
    channels: int,
    groups: int = 4,
    reduction: int = 4,
    ladder: ThresholdLadder | None = None,
    enhance: bool = False,
) -> FdedParams:
    """Parameters for which the decomposer is the identity map.

    Identity depthwise kernels and group matrices, zero Conv3D kernel, zero
    channel-attention MLP, unit band weights and (by default) enhancement
    switched off.
    """
    dwc = np.zeros((channels, 3, 3))
    dwc[:, 1, 1] = 1.0
    group = np.tile(np.eye(channels // groups), (groups, 1, 1))
    return FdedParams(
        FdedBranch(dwc.copy(), group.copy()),
        FdedBranch(dwc.copy(), group.copy()),
        np.zeros((channels, 3, 3, 3)),
        np.zeros((channels, channels // reduction)),
        np.zeros((channels // reduction, channels)),
        ladder or ThresholdLadder(),
        enhance,
    )


def init_params(
    seed: int,
    channels: int,
    groups: int = 4,
    reduction: int = 4,
    ladder: ThresholdLadder | None = None,
    enhance: bool = True,
) -> FdedParams:
    """Seeded parameters: identity convs perturbed by small uniform noise."""
    if channels % groups != 0:
        raise ValidationError(f"{channels} channels are not divisible into {groups} groups")
    if channels % reduction != 0:
        raise ValidationError(f"reduction {reduction} must divide {channels} channels")
    p = identity_params(channels, groups, reduction, ladder, enhance)
    n = channels // groups
    for k, b in enumerate((p.visual, p.audio)):
        b.dwc = b.dwc + init_tensor(InitSpec(seed + 10 * k + 1, scale=0.1), b.dwc.shape)
        b.group = b.group + init_tensor(InitSpec(seed + 10 * k + 2, scale=1.0 / n), b.group.shape)
    p.conv3d = init_tensor(InitSpec(seed + 21, scale=0.05), p.conv3d.shape)
    p.ca_w1 = init_tensor(InitSpec(seed + 22, scale=1.0 / np.sqrt(channels)), p.ca_w1.shape)
    p.ca_w2 = init_tensor(InitSpec(seed + 23, scale=1.0 / np.sqrt(channels // reduction)), p.ca_w2.shape)
    return p


def preprocess(x: np.ndarray, p: FdedParams, modality: Modality = "visual"):
    """Depthwise conv, grouped 1x1 conv, then FFT.

    Returns
    -------
    tuple
        ``(F_pre, spectrum)`` with ``spectrum = fft2(F_pre)``.
    """
    b = p.branch(modality)
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise shape_mismatch(f"{modality} features", x.shape, ("T", p.channels, "H", "W"))
    f_pre = tensor.grouped_pointwise_conv(tensor.depthwise_conv2d(x, b.dwc), b.group)
    return f_pre, fft2(f_pre)


def enhance_high_visual(band: np.ndarray, p: FdedParams) -> np.ndarray:
    """Residual Conv3D on the visual high band: ``Conv3D(band) + band``."""
    return tensor.conv3d_residual(band, p.conv3d)


def channel_gate(band: np.ndarray, p: FdedParams) -> np.ndarray:
    """Channel-attention gate ``[T, C]`` computed from a complex band.

    Squeeze is the mean complex magnitude over the spatial bins, excitation
    is the two-layer MLP followed by a sigmoid.
    """
    if band.ndim != 4 or band.shape[1] != p.channels:
        raise shape_mismatch("audio high band", band.shape, ("T", p.channels, "H", "W"))
    squeezed = tensor.global_avg_pool(np.abs(band))
    return tensor.sigmoid_gate(tensor.mlp2(squeezed, p.ca_w1, p.ca_w2))


def enhance_high_audio(band: np.ndarray, p: FdedParams) -> np.ndarray:
    """Scale every (frame, channel) of the audio high band by its gate."""
    gate = channel_gate(band, p)
    return band * gate[:, :, np.newaxis, np.newaxis]


def confine(band: np.ndarray, ladder: ThresholdLadder) -> np.ndarray:
    """Zero every bin outside the high annulus."""
    high = band_masks(band.shape[-2], band.shape[-1], ladder)[0]
    return np.where(high, band, 0.0)


def recompose(bands: BandSet, weights) -> np.ndarray:
    """Inverse-transform each band separately and sum with band weights.

    Parameters
    ----------
    bands : BandSet
        Bands in (high, mid, low, residual) order, high possibly enhanced.
    weights : sequence of float
        One weight per band, same order.

    Returns
    -------
    np.ndarray
        ``sum_b w_b * real(ifft2(band_b))``.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (4,):
        raise ShapeError(f"recompose needs 4 band weights, got shape {weights.shape}")
    out = None
    for w, band in zip(weights, bands.bands()):
        term = w * ifft2(band).real
        out = term if out is None else out + term
    return out


def fded_forward(x: np.ndarray, modality: Modality, p: FdedParams) -> FdedOutput:
    """Run the full decomposer on one modality's features ``[T, C, H, W]``."""
    _, spectrum = preprocess(x, p, modality)
    bands = residual_decompose(spectrum, p.ladder)
    if not p.enhance:
        high = bands.high
    elif modality == "visual":
        high = confine(enhance_high_visual(bands.high, p), p.ladder)
    else:
        high = enhance_high_audio(bands.high, p)
    features = recompose(bands.replace_high(high), p.branch(modality).band_weights)
    return FdedOutput(features, bands, high)
