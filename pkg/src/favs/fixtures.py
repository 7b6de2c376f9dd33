# Licensed under the MIT License

"""Synthetic audio-visual scenes.

A scene is one square object moving over a smooth background, a mel
spectrogram proxy and the features a backbone would have produced. The
backbone is replaced by fixed seeded projections of pooled frames and
pooled spectrogram cells, so everything is a pure function of the seed
and the generation parameters.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from . import tensor
from .errors import ValidationError
from .ften import read_ften, write_ften
from .logging import info
from .tensor import InitSpec, init_tensor, uniform

Texture = Literal["checkerboard", "smooth"]
Motion = Literal["static", "linear"]

TIME_STEPS = 96
MEL_BINS = 64
NOISE_BINS = slice(48, 64)
RIDGE_PROFILE = (0.5, 1.0, 0.5)
CHANNEL_GAINS = (1.0, 0.9, 0.8)
VELOCITY = (1, 2)


@dataclass
class SceneFixture:
    """A generated scene.

    Attributes
    ----------
    frames : np.ndarray
        RGB frames ``[T, 3, H, W]``.
    spectrogram : np.ndarray
        Mel spectrogram proxy ``[T, 96, 64]`` (time steps, mel bins).
    gt_masks : np.ndarray
        Binary object masks ``[T, H, W]``.
    stage_features : list
        Pixel-decoder stand-ins, stage ``i`` at ``(H, W) / 2**(i + 1)``.
    audio_features : np.ndarray
        Audio features ``[T, C, g, g]``.
    manifest : dict
        Generation parameters.
    """

    frames: np.ndarray
    spectrogram: np.ndarray
    gt_masks: np.ndarray
    stage_features: list
    audio_features: np.ndarray
    manifest: dict = field(default_factory=dict)

    def to_tensors(self) -> dict:
        out = {
            "frames": self.frames,
            "spectrogram": self.spectrogram,
            "gt_masks": self.gt_masks,
        }
        for i, p in enumerate(self.stage_features, start=1):
            out[f"stage{i}.features"] = p
        out["audio_features"] = self.audio_features
        return out

    @classmethod
    def from_tensors(cls, tensors: dict, manifest: dict | None = None) -> "SceneFixture":
        stage_features = []
        while f"stage{len(stage_features) + 1}.features" in tensors:
            stage_features.append(tensors[f"stage{len(stage_features) + 1}.features"])
        missing = [k for k in ("frames", "spectrogram", "gt_masks", "audio_features") if k not in tensors]
        if missing or not stage_features:
            raise ValidationError(f"fixture is missing tensors: {missing or ['stage1.features']}")
        return cls(
            tensors["frames"],
            tensors["spectrogram"],
            tensors["gt_masks"],
            stage_features,
            tensors["audio_features"],
            dict(manifest or {}),
        )


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _triangle(start: int, step: int, span: int) -> int:
    """Position bouncing between 0 and ``span``."""
    if span == 0:
        return 0
    p = (start + step) % (2 * span)
    return p if p <= span else 2 * span - p


def object_positions(seed: int, frames: int, height: int, width: int, motion: Motion) -> list:
    """Top-left corner of the object in every frame."""
    side_h, side_w = height // 4, width // 4
    u = uniform(seed, 2)
    r0 = int(u[0] * (height - side_h + 1))
    c0 = int(u[1] * (width - side_w + 1))
    if motion == "static":
        return [(r0, c0)] * frames
    return [
        (
            _triangle(r0, VELOCITY[0] * t, height - side_h),
            _triangle(c0, VELOCITY[1] * t, width - side_w),
        )
        for t in range(frames)
    ]


def render_object(texture: Texture, r0: int, c0: int, height: int, width: int) -> np.ndarray:
    """Object layer of one frame with its top-left corner at ``(r0, c0)``."""
    side_h, side_w = height // 4, width // 4
    y, x = np.mgrid[0:height, 0:width]
    if texture == "checkerboard":
        inside = (y >= r0) & (y < r0 + side_h) & (x >= c0) & (x < c0 + side_w)
        cells = np.where((y - r0 + x - c0) % 2 == 0, 1.0, -1.0)
        return np.where(inside, cells, 0.0)
    # Gaussian bump, effectively band-limited far below the high band
    cy, cx = r0 + (side_h - 1) / 2, c0 + (side_w - 1) / 2
    sy, sx = side_h / 6, side_w / 6
    return np.exp(-0.5 * (((y - cy) / sy) ** 2 + ((x - cx) / sx) ** 2))


def _background(height: int, width: int) -> np.ndarray:
    y, x = np.mgrid[0:height, 0:width]
    return 0.1 * np.sin(2 * np.pi * x / width) * np.cos(2 * np.pi * y / height)


def render_frames(seed: int, frames: int, height: int, width: int, texture: Texture, motion: Motion, noise: float):
    """Frames ``[T, 3, H, W]`` and ground-truth masks ``[T, H, W]``."""
    side_h, side_w = height // 4, width // 4
    background = _background(height, width)
    video = np.empty((frames, 3, height, width))
    masks = np.zeros((frames, height, width))
    floor = noise * (2.0 * uniform(seed + 3, frames * 3 * height * width) - 1.0)
    floor = floor.reshape(video.shape)
    for t, (r0, c0) in enumerate(object_positions(seed + 1, frames, height, width, motion)):
        image = background + render_object(texture, r0, c0, height, width)
        for k, gain in enumerate(CHANNEL_GAINS):
            video[t, k] = gain * image
        masks[t, r0 : r0 + side_h, c0 : c0 + side_w] = 1.0
    return video + floor, masks


def mel_proxy(ridge_bin: int, noise_level: float, seed: int, frames: int) -> np.ndarray:
    """Mel spectrogram proxy ``[T, 96, 64]``.

    A three-bin energy ridge centered at mel bin ``ridge_bin`` on every time
    step, plus ``noise_level`` times seeded uniform noise in mel bins 48-63.
    """
    if noise_level < 0:
        raise ValidationError(f"noise level must be >= 0, got {noise_level}")
    if not 0 <= ridge_bin < MEL_BINS:
        raise ValidationError(f"ridge bin must lie in [0, {MEL_BINS}), got {ridge_bin}")
    if frames < 1:
        raise ValidationError(f"frame count must be >= 1, got {frames}")
    spec = np.zeros((frames, TIME_STEPS, MEL_BINS))
    for offset, level in zip((-1, 0, 1), RIDGE_PROFILE):
        b = ridge_bin + offset
        if 0 <= b < MEL_BINS:
            spec[:, :, b] += level
    width = NOISE_BINS.stop - NOISE_BINS.start
    noise = uniform(seed, frames * TIME_STEPS * width).reshape(frames, TIME_STEPS, width)
    spec[:, :, NOISE_BINS] += noise_level * noise
    return spec


def _project(features: np.ndarray, seed: int, channels: int) -> np.ndarray:
    n = features.shape[1]
    weights = init_tensor(InitSpec(seed, scale=1.0 / np.sqrt(n)), (channels, n))
    return tensor.pointwise_conv(features, weights)


def _block_mean(x: np.ndarray, fh: int, fw: int) -> np.ndarray:
    t, c, h, w = x.shape
    return x.reshape(t, c, h // fh, fh, w // fw, fw).mean(axis=(3, 5))


def stage_features(frames: np.ndarray, seed: int, channels: int, stages: int) -> list:
    """Backbone stand-in: pooled frames and squared frames, projected to ``C`` channels."""
    out = []
    for i in range(1, stages + 1):
        f = 2 ** (i + 1)
        pooled = np.concatenate([_block_mean(frames, f, f), _block_mean(frames**2, f, f)], axis=1)
        out.append(_project(pooled, seed + i, channels))
    return out


def audio_features(spectrogram: np.ndarray, seed: int, channels: int, grid: int) -> np.ndarray:
    """Spectrogram cells on a ``grid x grid`` layout projected to ``[T, C, g, g]``."""
    if grid < 1 or TIME_STEPS % grid or MEL_BINS % grid:
        raise ValidationError(f"audio grid {grid} must divide {TIME_STEPS} and {MEL_BINS}")
    cells = _block_mean(spectrogram[:, np.newaxis], TIME_STEPS // grid, MEL_BINS // grid)
    return _project(np.concatenate([cells, np.log1p(cells)], axis=1), seed, channels)


def gen_scene(
    seed: int,
    frames: int = 2,
    height: int = 64,
    width: int = 64,
    channels: int = 32,
    texture: Texture = "checkerboard",
    motion: Motion = "linear",
    stages: int = 3,
    audio_grid: int = 4,
    noise: float = 0.02,
) -> SceneFixture:
    """Generate a scene fixture.

    Parameters
    ----------
    seed : int
        Seed of every random draw.
    frames : int
        Number of frames ``T``.
    height, width : int
        Frame size; powers of two, at least 32.
    channels : int
        Feature width ``C``.
    texture : str
        ``"checkerboard"`` (unit cells, high-frequency) or ``"smooth"``
        (Gaussian bump).
    motion : str
        ``"static"`` or ``"linear"``.
    stages : int
        Number of stage feature maps.
    audio_grid : int
        Spatial size of the audio features.
    noise : float
        Amplitude of the uniform sensor-noise floor.

    Returns
    -------
    SceneFixture
    """
    for name, n in (("height", height), ("width", width)):
        if n < 32 or not _is_power_of_two(n):
            raise ValidationError(f"{name} must be a power of two >= 32, got {n}")
    if frames < 1:
        raise ValidationError(f"frame count must be >= 1, got {frames}")
    if channels < 1:
        raise ValidationError(f"channel count must be >= 1, got {channels}")
    if texture not in ("checkerboard", "smooth"):
        raise ValidationError(f"unknown texture {texture!r}")
    if motion not in ("static", "linear"):
        raise ValidationError(f"unknown motion {motion!r}")
    if stages < 1 or min(height, width) < 2 ** (stages + 1):
        raise ValidationError(f"{stages} stages do not fit a {height}x{width} frame")
    if noise < 0:
        raise ValidationError(f"noise must be >= 0, got {noise}")

    video, masks = render_frames(seed, frames, height, width, texture, motion, noise)
    spectrogram = mel_proxy(12, 0.1, seed + 7, frames)
    manifest = {
        "seed": seed,
        "frames": frames,
        "height": height,
        "width": width,
        "channels": channels,
        "texture": texture,
        "motion": motion,
        "stages": stages,
        "audio_grid": audio_grid,
        "noise": noise,
    }
    info(f"Generated {texture} scene: {frames} frames of {height}x{width}, seed {seed}")
    return SceneFixture(
        video,
        spectrogram,
        masks,
        stage_features(video, seed + 100, channels, stages),
        audio_features(spectrogram, seed + 200, channels, audio_grid),
        manifest,
    )


def manifest_path(path) -> Path:
    return Path(path).with_suffix(".manifest")


def format_manifest(manifest: dict) -> str:
    return "".join(f"{key}={value}\n" for key, value in manifest.items())


def parse_manifest(text: str) -> dict:
    manifest = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if sep:
            manifest[key.strip()] = value.strip()
    return manifest


def write_fixture(path, fixture: SceneFixture) -> list:
    """Write the fixture container and its manifest; return both paths."""
    path = Path(path)
    write_ften(path, fixture.to_tensors())
    sidecar = manifest_path(path)
    sidecar.write_text(format_manifest(fixture.manifest), encoding="utf-8")
    return [path, sidecar]


def load_fixture(path) -> SceneFixture:
    """Read a fixture container and, when present, its manifest."""
    sidecar = manifest_path(path)
    manifest = parse_manifest(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return SceneFixture.from_tensors(read_ften(path), manifest)
