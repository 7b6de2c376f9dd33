# Licensed under the MIT License

"""Synergistic cross-modal consistency: a mixture of cross-attention
experts with entropy-driven sparse routing.

Every expert enhances both modalities with spatial-temporal-channel (STC)
gates and correlates them with bidirectional cross-attention. The experts
for one modality are weighted by a router that looks at the *other*
modality; per frame, the entropy of the routing distribution decides how
many experts stay active.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import tensor
from .errors import ShapeError, ValidationError, shape_mismatch
from .logging import debug
from .tensor import InitSpec, init_tensor

EPSILON = 1e-8
SIMPLEX_TOLERANCE = 1e-9

Direction = Literal["a2v", "v2a"]
Side = Literal["for_visual", "for_audio"]


@dataclass
class StcParams:
    """Weights of one spatial-temporal-channel enhancer.

    Attributes
    ----------
    spatial : np.ndarray
        ``[1, k, k]`` kernel applied to the channel-mean map.
    temporal_w1, temporal_w2 : np.ndarray
        Per-frame gate MLP ``[C, C/r]``, ``[C/r, C]``.
    channel_w1, channel_w2 : np.ndarray
        Clip-level gate MLP ``[C, C/r]``, ``[C/r, C]``.
    """

    spatial: np.ndarray
    temporal_w1: np.ndarray
    temporal_w2: np.ndarray
    channel_w1: np.ndarray
    channel_w2: np.ndarray

    _NAMES = ("spatial", "temporal_w1", "temporal_w2", "channel_w1", "channel_w2")

    @property
    def channels(self) -> int:
        return self.temporal_w1.shape[0]

    def validate(self, channels: int, what: str = "STC"):
        s = self.spatial
        if s.ndim != 3 or s.shape[0] != 1 or s.shape[1] != s.shape[2] or s.shape[1] % 2 == 0:
            raise ValidationError(f"{what} spatial kernel must be [1, k, k] with odd k, got {s.shape}")
        for gate in ("temporal", "channel"):
            w1, w2 = getattr(self, f"{gate}_w1"), getattr(self, f"{gate}_w2")
            if w1.ndim != 2 or w1.shape[0] != channels or w1.shape[1] < 1:
                raise shape_mismatch(f"{what} {gate}_w1", w1.shape, (channels, "C/r"))
            if w2.shape != (w1.shape[1], channels):
                raise shape_mismatch(f"{what} {gate}_w2", w2.shape, (w1.shape[1], channels))

    def to_tensors(self, prefix: str) -> dict:
        return {f"{prefix}.{name}": getattr(self, name) for name in self._NAMES}

    @classmethod
    def from_tensors(cls, tensors: dict, prefix: str) -> "StcParams":
        return cls(*(_lookup(tensors, f"{prefix}.{name}") for name in cls._NAMES))

    @classmethod
    def zeros(cls, channels: int, reduction: int = 4, kernel: int = 3) -> "StcParams":
        hidden = channels // reduction
        return cls(
            np.zeros((1, kernel, kernel)),
            np.zeros((channels, hidden)),
            np.zeros((hidden, channels)),
            np.zeros((channels, hidden)),
            np.zeros((hidden, channels)),
        )

    @classmethod
    def init(cls, seed: int, channels: int, reduction: int = 4, kernel: int = 3) -> "StcParams":
        if channels % reduction != 0:
            raise ValidationError(f"STC reduction {reduction} must divide {channels} channels")
        z = cls.zeros(channels, reduction, kernel)
        return cls(
            *(
                init_tensor(InitSpec(seed + k, scale=1.0 / math.sqrt(a.shape[0])), a.shape)
                for k, a in enumerate(getattr(z, name) for name in cls._NAMES)
            )
        )


@dataclass
class AttentionProjections:
    """Square projections ``[C, C]`` of one attention direction."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    out: np.ndarray

    _NAMES = ("q", "k", "v", "out")

    def to_tensors(self, prefix: str) -> dict:
        return {f"{prefix}.{name}": getattr(self, name) for name in self._NAMES}

    @classmethod
    def from_tensors(cls, tensors: dict, prefix: str) -> "AttentionProjections":
        return cls(*(_lookup(tensors, f"{prefix}.{name}") for name in cls._NAMES))

    @classmethod
    def init(cls, seed: int, channels: int) -> "AttentionProjections":
        scale = 1.0 / math.sqrt(channels)
        return cls(
            *(init_tensor(InitSpec(seed + k, scale=scale), (channels, channels)) for k in range(4))
        )


@dataclass
class ExpertParams:
    """One attention expert: three STC enhancers shared by both directions
    and one set of projections per direction."""

    stc_q: StcParams
    stc_k: StcParams
    stc_v: StcParams
    a2v: AttentionProjections
    v2a: AttentionProjections

    def projections(self, direction: Direction) -> AttentionProjections:
        if direction == "a2v":
            return self.a2v
        if direction == "v2a":
            return self.v2a
        raise ValidationError(f"unknown attention direction {direction!r}")

    def to_tensors(self, prefix: str) -> dict:
        out = {}
        for name in ("stc_q", "stc_k", "stc_v", "a2v", "v2a"):
            out.update(getattr(self, name).to_tensors(f"{prefix}.{name}"))
        return out

    @classmethod
    def from_tensors(cls, tensors: dict, prefix: str) -> "ExpertParams":
        stc = [StcParams.from_tensors(tensors, f"{prefix}.{n}") for n in ("stc_q", "stc_k", "stc_v")]
        proj = [AttentionProjections.from_tensors(tensors, f"{prefix}.{n}") for n in ("a2v", "v2a")]
        return cls(*stc, *proj)


@dataclass
class RouterParams:
    """Routing enhancers and MLPs; ``mlp_a`` reads audio and weights the
    visual experts, ``mlp_v`` reads video and weights the audio experts."""

    stc_a: StcParams
    stc_v: StcParams
    mlp_a_w1: np.ndarray
    mlp_a_w2: np.ndarray
    mlp_v_w1: np.ndarray
    mlp_v_w2: np.ndarray

    def validate(self, channels: int, experts: int):
        self.stc_a.validate(channels, "router stc_a")
        self.stc_v.validate(channels, "router stc_v")
        for side in ("a", "v"):
            w1, w2 = getattr(self, f"mlp_{side}_w1"), getattr(self, f"mlp_{side}_w2")
            if w1.ndim != 2 or w1.shape[0] != channels or w1.shape[1] < 1:
                raise shape_mismatch(f"router mlp_{side}.w1", w1.shape, (channels, "C/2"))
            if w2.shape != (w1.shape[1], experts):
                raise shape_mismatch(f"router mlp_{side}.w2", w2.shape, (w1.shape[1], experts))

    def to_tensors(self, prefix: str) -> dict:
        out = {}
        out.update(self.stc_a.to_tensors(f"{prefix}.stc_a"))
        out.update(self.stc_v.to_tensors(f"{prefix}.stc_v"))
        for name in ("mlp_a_w1", "mlp_a_w2", "mlp_v_w1", "mlp_v_w2"):
            out[f"{prefix}.{name.replace('_w', '.w')}"] = getattr(self, name)
        return out

    @classmethod
    def from_tensors(cls, tensors: dict, prefix: str) -> "RouterParams":
        return cls(
            StcParams.from_tensors(tensors, f"{prefix}.stc_a"),
            StcParams.from_tensors(tensors, f"{prefix}.stc_v"),
            *(
                _lookup(tensors, f"{prefix}.{name}")
                for name in ("mlp_a.w1", "mlp_a.w2", "mlp_v.w1", "mlp_v.w2")
            ),
        )


@dataclass
class ScmcParams:
    """Experts and router of one consistency module."""

    experts: list
    router: RouterParams

    @property
    def channels(self) -> int:
        return self.router.mlp_a_w1.shape[0]

    def validate(self):
        if not self.experts:
            raise ValidationError("the consistency module needs at least one expert")
        if self.router.mlp_a_w1.ndim != 2:
            raise shape_mismatch("router mlp_a.w1", self.router.mlp_a_w1.shape, ("C", "C/2"))
        c = self.channels
        self.router.validate(c, len(self.experts))
        for e, expert in enumerate(self.experts):
            for name in ("stc_q", "stc_k", "stc_v"):
                getattr(expert, name).validate(c, f"expert {e} {name}")
            for d in ("a2v", "v2a"):
                for name, m in vars(expert.projections(d)).items():
                    if m.shape != (c, c):
                        raise shape_mismatch(f"expert {e} {d}.{name}", m.shape, (c, c))

    def to_tensors(self, prefix: str = "scmc") -> dict:
        out = {}
        for e, expert in enumerate(self.experts):
            out.update(expert.to_tensors(f"{prefix}.expert{e}"))
        out.update(self.router.to_tensors(f"{prefix}.router"))
        return out

    @classmethod
    def from_tensors(cls, tensors: dict, prefix: str = "scmc") -> "ScmcParams":
        experts = []
        while f"{prefix}.expert{len(experts)}.a2v.q" in tensors:
            experts.append(ExpertParams.from_tensors(tensors, f"{prefix}.expert{len(experts)}"))
        params = cls(experts, RouterParams.from_tensors(tensors, f"{prefix}.router"))
        params.validate()
        return params


@dataclass
class RoutingDecision:
    """Per-frame routing of one modality.

    Attributes
    ----------
    weights : np.ndarray
        Dense routing weights ``[T, N_e]``, rows on the simplex.
    entropy : np.ndarray
        Routing entropy per frame in nats, ``[T]``.
    k_eff : np.ndarray
        Number of active experts per frame, ``[T]``.
    selected : tuple
        Active expert indices per frame (ascending).
    sparse_weights : np.ndarray
        Renormalized weights of the active experts, zero elsewhere.
    """

    weights: np.ndarray
    entropy: np.ndarray
    k_eff: np.ndarray
    selected: tuple
    sparse_weights: np.ndarray

    @property
    def support(self) -> list:
        """Experts active in at least one frame."""
        return sorted({e for frame in self.selected for e in frame})


@dataclass
class ScmcOutput:
    """Fused features and the routing decisions behind them."""

    visual: np.ndarray
    audio: np.ndarray
    visual_routing: RoutingDecision
    audio_routing: RoutingDecision


def _lookup(tensors: dict, name: str) -> np.ndarray:
    try:
        return tensors[name]
    except KeyError:
        raise ValidationError(f"missing parameter tensor {name}") from None


def stc_enhance(x: np.ndarray, p: StcParams) -> np.ndarray:
    """Apply the spatial, temporal and channel gates in that order.

    Each gate is a sigmoid and is computed from the output of the previous
    one: a conv over the channel-mean map (per pixel), an MLP on the
    per-frame pooled vector (per frame and channel) and an MLP on the
    clip-level pooled vector (per channel).
    """
    if x.ndim != 4 or x.shape[1] != p.channels:
        raise shape_mismatch("STC input", x.shape, ("T", p.channels, "H", "W"))
    channel_mean = np.mean(x, axis=1, keepdims=True)
    x = x * tensor.sigmoid_gate(tensor.depthwise_conv2d(channel_mean, p.spatial))
    frame_pool = tensor.global_avg_pool(x)
    x = x * tensor.sigmoid_gate(tensor.mlp2(frame_pool, p.temporal_w1, p.temporal_w2))[:, :, None, None]
    clip_pool = np.mean(tensor.global_avg_pool(x), axis=0)
    return x * tensor.sigmoid_gate(tensor.mlp2(clip_pool, p.channel_w1, p.channel_w2))[None, :, None, None]


def attend(queries: np.ndarray, keys: np.ndarray, values: np.ndarray, p: AttentionProjections) -> np.ndarray:
    """Scaled dot-product attention on token rows, projected by ``p.out``."""
    c = queries.shape[-1]
    q = queries @ p.q.T
    k = keys @ p.k.T
    v = values @ p.v.T
    a = tensor.softmax(q @ k.T / math.sqrt(c), axis=-1)
    return (a @ v) @ p.out.T


def bca(target: np.ndarray, source: np.ndarray, e: ExpertParams, direction: Direction) -> np.ndarray:
    """Cross-attention of ``target`` tokens onto ``source`` tokens, per frame.

    Queries come from ``STC_q(target)``, keys and values from ``STC_k`` and
    ``STC_v`` of the source. The projected attention output is added to the
    target.
    """
    if target.ndim != 4 or source.ndim != 4:
        raise ShapeError(f"bca expects [T, C, H, W] inputs, got {target.shape} and {source.shape}")
    if target.shape[:2] != source.shape[:2]:
        raise shape_mismatch("bca frames/channels", target.shape, source.shape)
    p = e.projections(direction)
    q = stc_enhance(target, e.stc_q)
    k = stc_enhance(source, e.stc_k)
    v = stc_enhance(source, e.stc_v)
    t, c, h, w = target.shape
    out = np.empty(target.shape)
    for i in range(t):
        mixed = attend(tensor.to_tokens(q[i]), tensor.to_tokens(k[i]), tensor.to_tokens(v[i]), p)
        out[i] = target[i] + mixed.T.reshape(c, h, w)
    return out


def route_weights(features: np.ndarray, r: RouterParams, side: Side) -> np.ndarray:
    """Routing weights ``[T, N_e]`` computed from the other modality.

    ``side="for_visual"`` expects audio features and uses ``stc_a``/``mlp_a``;
    ``side="for_audio"`` expects visual features and uses ``stc_v``/``mlp_v``.
    """
    if side == "for_visual":
        stc, w1, w2 = r.stc_a, r.mlp_a_w1, r.mlp_a_w2
    elif side == "for_audio":
        stc, w1, w2 = r.stc_v, r.mlp_v_w1, r.mlp_v_w2
    else:
        raise ValidationError(f"unknown routing side {side!r}")
    pooled = tensor.global_avg_pool(stc_enhance(features, stc))
    return tensor.softmax(tensor.mlp2(pooled, w1, w2), axis=-1)


def _check_simplex(row: np.ndarray):
    if row.ndim != 1 or row.size < 1:
        raise ShapeError(f"routing row must be a non-empty vector, got shape {row.shape}")
    if not np.all(np.isfinite(row)) or np.any(row < 0.0):
        raise ValidationError(f"routing row has negative or non-finite entries: {row}")
    if abs(float(np.sum(row)) - 1.0) > SIMPLEX_TOLERANCE:
        raise ValidationError(f"routing row sums to {np.sum(row)!r}, not 1")


def dynamic_k(row: np.ndarray, epsilon: float = EPSILON):
    """Number of experts to keep for one routing row, from its entropy.

    ``E = -sum(w * ln(w + eps))`` is normalized by ``ln(N_e)`` and clamped to
    [0, 1]; ``k = ceil(N_e * norm(E))`` (``k_min = 0``, ``k_max = N_e``),
    floored at 1.

    Returns
    -------
    tuple
        ``(k_eff, entropy)``.
    """
    row = np.asarray(row, dtype=np.float64)
    _check_simplex(row)
    n = row.size
    entropy = float(-np.sum(row * np.log(row + epsilon)))
    norm = min(max(entropy / math.log(n), 0.0), 1.0) if n > 1 else 0.0
    k_raw = math.ceil(n * norm)
    k_eff = min(max(k_raw, 1), n)
    if k_raw < 1:
        debug(f"Routing entropy {entropy:.3g} gives k = {k_raw}, keeping 1 expert")
    return k_eff, entropy


def top_k(row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ties broken by the lower index."""
    return np.argsort(-np.asarray(row), kind="stable")[:k]


def sparsify(row: np.ndarray, k_eff: int) -> np.ndarray:
    """Keep the ``k_eff`` largest weights (ties to the lower index) and
    renormalize them to sum 1. A row is returned unchanged when the kept
    weights cover all of its nonzero entries."""
    row = np.asarray(row, dtype=np.float64)
    n = row.size
    if not 1 <= k_eff <= n:
        raise ValidationError(f"k_eff must lie in [1, {n}], got {k_eff}")
    if k_eff >= np.count_nonzero(row):
        return row.copy()
    keep = top_k(row, k_eff)
    out = np.zeros(n)
    out[keep] = row[keep]
    return out / np.sum(out)


def route(weights: np.ndarray, force_dense: bool = False, fixed_k: int = 0) -> RoutingDecision:
    """Turn dense routing weights ``[T, N_e]`` into a :class:`RoutingDecision`.

    By default every frame uses :func:`dynamic_k`. ``force_dense`` keeps all
    experts; ``fixed_k > 0`` keeps a fixed number of experts instead. In
    every mode ``k_eff`` is capped at the number of positive weights in the
    row (at least 1), so a saturated softmax never selects zero-weight
    experts.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2:
        raise ShapeError(f"routing weights must be [T, N_e], got {weights.shape}")
    n = weights.shape[1]
    entropy = np.empty(weights.shape[0])
    k_eff = np.empty(weights.shape[0], dtype=np.int64)
    sparse = np.empty(weights.shape)
    selected = []
    for t, row in enumerate(weights):
        k, entropy[t] = dynamic_k(row)
        if force_dense:
            k = n
        elif fixed_k > 0:
            k = min(fixed_k, n)
        positive = max(int(np.count_nonzero(row)), 1)
        if k > positive:
            debug(f"Frame {t}: only {positive} of {n} routing weights are positive, keeping {positive} experts")
            k = positive
        k_eff[t] = k
        sparse[t] = sparsify(row, k)
        selected.append(tuple(sorted(int(e) for e in top_k(row, k))))
    return RoutingDecision(weights, entropy, k_eff, tuple(selected), sparse)


def _expert_outputs(fn, support, threads: int) -> dict:
    if threads > 1 and len(support) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return dict(zip(support, pool.map(fn, support)))
    return {e: fn(e) for e in support}


def aggregate(expert_outputs: dict, sparse_weights: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Sum ``w_e * F_e`` over the given experts in ascending index order."""
    out = np.zeros(like.shape)
    for e in sorted(expert_outputs):
        out = out + sparse_weights[:, e, None, None, None] * expert_outputs[e]
    return out


def scmc_forward(
    v: np.ndarray,
    a: np.ndarray,
    experts: list,
    r: RouterParams,
    force_dense: bool = False,
    fixed_k: int = 0,
    threads: int = 1,
) -> ScmcOutput:
    """Fuse visual ``[T, C, H, W]`` and audio ``[T, C, Ha, Wa]`` features.

    Routing is decided first; only experts that are active in some frame are
    evaluated, which gives the same result as evaluating all of them. Expert
    evaluation may use up to ``threads`` worker threads; the aggregation
    order is fixed.
    """
    if not experts:
        raise ValidationError("the consistency module needs at least one expert")
    for w2 in (r.mlp_a_w2, r.mlp_v_w2):
        if w2.shape[-1] != len(experts):
            raise ValidationError(f"router produces {w2.shape[-1]} weights for {len(experts)} experts")
    visual_routing = route(route_weights(a, r, "for_visual"), force_dense, fixed_k)
    audio_routing = route(route_weights(v, r, "for_audio"), force_dense, fixed_k)

    v_experts = _expert_outputs(lambda e: bca(v, a, experts[e], "a2v"), visual_routing.support, threads)
    a_experts = _expert_outputs(lambda e: bca(a, v, experts[e], "v2a"), audio_routing.support, threads)
    return ScmcOutput(
        aggregate(v_experts, visual_routing.sparse_weights, v),
        aggregate(a_experts, audio_routing.sparse_weights, a),
        visual_routing,
        audio_routing,
    )


def init_params(seed: int, channels: int, experts: int = 4, reduction: int = 4, kernel: int = 3) -> ScmcParams:
    """Seeded consistency-module parameters."""
    if experts < 1:
        raise ValidationError(f"expert count must be >= 1, got {experts}")
    if channels % 2 != 0:
        raise ValidationError(f"router hidden width needs an even channel count, got {channels}")
    expert_list = []
    for e in range(experts):
        s = seed + 1000 * (e + 1)
        expert_list.append(
            ExpertParams(
                StcParams.init(s, channels, reduction, kernel),
                StcParams.init(s + 10, channels, reduction, kernel),
                StcParams.init(s + 20, channels, reduction, kernel),
                AttentionProjections.init(s + 30, channels),
                AttentionProjections.init(s + 40, channels),
            )
        )
    hidden = channels // 2
    router = RouterParams(
        StcParams.init(seed + 1, channels, reduction, kernel),
        StcParams.init(seed + 11, channels, reduction, kernel),
        init_tensor(InitSpec(seed + 21, scale=1.0 / math.sqrt(channels)), (channels, hidden)),
        init_tensor(InitSpec(seed + 22, scale=1.0 / math.sqrt(hidden)), (hidden, experts)),
        init_tensor(InitSpec(seed + 23, scale=1.0 / math.sqrt(channels)), (channels, hidden)),
        init_tensor(InitSpec(seed + 24, scale=1.0 / math.sqrt(hidden)), (hidden, experts)),
    )
    return ScmcParams(expert_list, router)
