# Licensed under the MIT License

"""Three-stage fusion pipeline, object queries, a one-layer decoder
stand-in and the parameter container for a full model.

Stage ``i`` (1-based) works on visual features at ``(H, W) / 2**(i + 1)``.
Stage 1 fuses the first pixel-decoder map with the audio features; later
stages resize the previous visual output, concatenate it with their own
map, reduce back to ``C`` channels with a 1x1 conv and use the previous
stage's audio output.

The decoder is a stand-in: one cross-attention layer from the
queries to the final visual tokens followed by a dot-product mask head.
It is not a faithful transformer decoder.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import fded, scmc, tensor
from .errors import ConfigError, ShapeError, ValidationError, shape_mismatch
from .fded import FdedParams
from .logging import debug, info
from .scmc import AttentionProjections, RoutingDecision, ScmcParams
from .spectral import ThresholdLadder
from .tensor import InitSpec, init_tensor


@dataclass(frozen=True)
class ModelConfig:
    """Typed, validated model configuration.

    Attributes
    ----------
    stages : int
        Number of decomposer + consistency stages.
    channels : int
        Feature width ``C``.
    expert_count : int
        Attention experts per consistency module ``N_e``.
    query_count : int
        Object queries ``N_q``.
    num_classes : int
        Width of the class head.
    base_resolution : tuple
        Frame size ``(H, W)``.
    ladder : ThresholdLadder
        Band thresholds.
    seed : int
        Seed for parameter initialization.
    """

    stages: int = 3
    channels: int = 32
    expert_count: int = 4
    query_count: int = 8
    num_classes: int = 2
    base_resolution: tuple = (64, 64)
    ladder: ThresholdLadder = field(default_factory=ThresholdLadder)
    seed: int = 42
    groups: int = 4
    reduction: int = 4
    stc_reduction: int = 4
    stc_kernel: int = 3
    audio_grid: int = 4
    force_dense: bool = False
    fixed_k: int = 0
    use_fded: bool = True
    use_scmc: bool = True
    enhance: bool = True
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        c = self.channels
        checks = [
            (self.stages >= 1, f"stages must be >= 1, got {self.stages}"),
            (self.expert_count >= 1, f"experts must be >= 1, got {self.expert_count}"),
            (self.query_count >= 1, f"queries must be >= 1, got {self.query_count}"),
            (self.num_classes >= 1, f"classes must be >= 1, got {self.num_classes}"),
            (c >= 2 and c % 2 == 0, f"channels must be even and >= 2, got {c}"),
            (self.groups >= 1 and c % self.groups == 0, f"groups={self.groups} must divide channels={c}"),
            (self.reduction >= 1 and c % self.reduction == 0, f"reduction={self.reduction} must divide channels={c}"),
            (
                self.stc_reduction >= 1 and c % self.stc_reduction == 0,
                f"stc_reduction={self.stc_reduction} must divide channels={c}",
            ),
            (self.stc_kernel >= 1 and self.stc_kernel % 2 == 1, f"stc_kernel must be odd, got {self.stc_kernel}"),
            (self.audio_grid >= 1, f"audio_grid must be >= 1, got {self.audio_grid}"),
            (self.fixed_k >= 0, f"fixed_k must be >= 0, got {self.fixed_k}"),
            (self.threads >= 1, f"threads must be >= 1, got {self.threads}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        h, w = self.base_resolution
        for i in range(1, self.stages + 1):
            if h % 2 ** (i + 1) or w % 2 ** (i + 1):
                raise ConfigError(f"size {h}x{w} cannot be halved down to stage {i}")

    @classmethod
    def from_parameters(cls, p: dict) -> "ModelConfig":
        """Build a configuration from a parameter dictionary (see :mod:`favs.parameters`)."""
        try:
            ladder = ThresholdLadder(tuple(p["tau"]))
        except ValidationError as e:
            raise ConfigError(str(e)) from e
        return cls(
            stages=p["stages"],
            channels=p["channels"],
            expert_count=p["experts"],
            query_count=p["queries"],
            num_classes=p["classes"],
            base_resolution=(p["size"], p["size"]),
            ladder=ladder,
            seed=p["seed"],
            groups=p["groups"],
            reduction=p["reduction"],
            stc_reduction=p["stc_reduction"],
            stc_kernel=p["stc_kernel"],
            audio_grid=p["audio_grid"],
            force_dense=p["force_dense"],
            fixed_k=p["fixed_k"],
            use_fded=p["fded"],
            use_scmc=p["scmc"],
            enhance=p["enhance"],
            threads=p["threads"],
        )

    def stage_resolution(self, i: int) -> tuple:
        """Visual extents of stage ``i``: ``(H, W) / 2**(i + 1)``."""
        h, w = self.base_resolution
        return (h // 2 ** (i + 1), w // 2 ** (i + 1))


@dataclass
class StageParams:
    """Weights of one stage; ``fuse`` is the ``[C, 2C]`` 1x1 conv of stages > 1."""

    fded: FdedParams
    scmc: ScmcParams
    fuse: np.ndarray | None = None


@dataclass
class QueryParams:
    """Learned query embeddings ``[N_q, C]`` and the channel MLP on pooled audio."""

    embed: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass
class DecoderHead:
    """Decoder stand-in: query-to-pixel attention, pixel embedding ``[C, C]``
    and class head ``[C, classes]``."""

    attention: AttentionProjections
    mask_embed: np.ndarray
    class_weights: np.ndarray


@dataclass
class FavsParams:
    """All parameters of a model."""

    stages: list
    queries: QueryParams
    head: DecoderHead

    def to_tensors(self) -> dict:
        """Named tensors for an FTEN1 container."""
        out = {}
        for i, s in enumerate(self.stages, start=1):
            out.update(s.fded.to_tensors(f"stage{i}.fded"))
            out.update(s.scmc.to_tensors(f"stage{i}.scmc"))
            if s.fuse is not None:
                out[f"stage{i}.fuse"] = s.fuse
        out["queries.embed"] = self.queries.embed
        out["queries.mlp.w1"] = self.queries.w1
        out["queries.mlp.w2"] = self.queries.w2
        out.update(self.head.attention.to_tensors("decoder.attn"))
        out["decoder.mask_embed"] = self.head.mask_embed
        out["decoder.class"] = self.head.class_weights
        return out

    @classmethod
    def from_tensors(cls, tensors: dict, cfg: ModelConfig) -> "FavsParams":
        """Rebuild parameters and check them against ``cfg``.

        Raises
        ------
        ValidationError
            If a tensor is missing or the widths, expert count or stage
            count disagree with the configuration.
        """
        if any(k.startswith(f"stage{cfg.stages + 1}.") for k in tensors):
            raise ValidationError(f"parameters have more stages than the configured {cfg.stages}")
        try:
            stages = []
            for i in range(1, cfg.stages + 1):
                stages.append(
                    StageParams(
                        FdedParams.from_tensors(tensors, cfg.ladder, f"stage{i}.fded", cfg.enhance),
                        ScmcParams.from_tensors(tensors, f"stage{i}.scmc"),
                        tensors[f"stage{i}.fuse"] if i > 1 else None,
                    )
                )
            params = cls(
                stages,
                QueryParams(tensors["queries.embed"], tensors["queries.mlp.w1"], tensors["queries.mlp.w2"]),
                DecoderHead(
                    AttentionProjections.from_tensors(tensors, "decoder.attn"),
                    tensors["decoder.mask_embed"],
                    tensors["decoder.class"],
                ),
            )
        except KeyError as e:
            raise ValidationError(f"missing parameter tensor {e.args[0]}") from e
        except ShapeError as e:
            raise ValidationError(str(e)) from e
        params.validate(cfg)
        return params

    def validate(self, cfg: ModelConfig):
        c = cfg.channels
        if len(self.stages) != cfg.stages:
            raise ValidationError(f"parameters have {len(self.stages)} stages, config expects {cfg.stages}")
        for i, s in enumerate(self.stages, start=1):
            if s.fded.channels != c or s.scmc.channels != c:
                raise ValidationError(
                    f"stage {i} parameters have width {s.fded.channels}/{s.scmc.channels}, config expects {c}"
                )
            if len(s.scmc.experts) != cfg.expert_count:
                raise ValidationError(
                    f"stage {i} has {len(s.scmc.experts)} experts, config expects {cfg.expert_count}"
                )
            if i > 1 and (s.fuse is None or s.fuse.shape != (c, 2 * c)):
                raise ValidationError(f"stage {i} fuse conv must be [{c}, {2 * c}]")
        if self.queries.embed.shape != (cfg.query_count, c):
            raise ValidationError(f"query embeddings {self.queries.embed.shape}, config expects {(cfg.query_count, c)}")
        for name in ("w1", "w2"):
            m = getattr(self.queries, name)
            if m.shape != (c, c):
                raise ValidationError(f"query mlp.{name} is {m.shape}, config expects {(c, c)}")
        if self.head.class_weights.shape != (c, cfg.num_classes):
            raise ValidationError(f"class head {self.head.class_weights.shape}, config expects {(c, cfg.num_classes)}")
        for name, m in [("mask_embed", self.head.mask_embed), *vars(self.head.attention).items()]:
            if m.shape != (c, c):
                raise ValidationError(f"decoder {name} is {m.shape}, config expects {(c, c)}")


@dataclass
class StageState:
    """Outputs of one stage.

    Attributes
    ----------
    stage_index : int
        1-based stage number.
    v_feat, a_feat : np.ndarray
        Fused visual ``[T, C, H_i, W_i]`` and audio ``[T, C, Ha, Wa]`` features.
    v_input, v_decomposed : np.ndarray
        Visual features entering and leaving the decomposer.
    visual_routing, audio_routing : RoutingDecision or None
        Routing decisions, None when the consistency module is disabled.
    """

    stage_index: int
    v_feat: np.ndarray
    a_feat: np.ndarray
    v_input: np.ndarray
    v_decomposed: np.ndarray
    visual_routing: RoutingDecision | None = None
    audio_routing: RoutingDecision | None = None


@dataclass
class Prediction:
    """Decoder output.

    Attributes
    ----------
    mask_logits : np.ndarray
        ``[T, N_q, H, W]`` at base resolution.
    class_logits : np.ndarray
        ``[T, N_q, classes]``.
    binary_mask : np.ndarray
        ``[T, H, W]`` in {0, 1}.
    """

    mask_logits: np.ndarray
    class_logits: np.ndarray
    binary_mask: np.ndarray

    def to_tensors(self) -> dict:
        return {
            "mask_logits": self.mask_logits,
            "class_logits": self.class_logits,
            "binary_mask": self.binary_mask,
        }


@dataclass
class PipelineResult:
    states: list
    queries: np.ndarray
    prediction: Prediction


def init_params(cfg: ModelConfig) -> FavsParams:
    """Seeded parameters for every stage, the queries and the decoder head."""
    c = cfg.channels
    stages = []
    for i in range(1, cfg.stages + 1):
        seed = cfg.seed + 100_000 * i
        fuse = None
        if i > 1:
            # previous visual output half is identity-initialized
            fuse = np.concatenate([np.eye(c), np.zeros((c, c))], axis=1)
            fuse = fuse + init_tensor(InitSpec(seed + 99, scale=1.0 / np.sqrt(2 * c)), (c, 2 * c))
        stages.append(
            StageParams(
                fded.init_params(seed, c, cfg.groups, cfg.reduction, cfg.ladder, cfg.enhance),
                scmc.init_params(seed + 50_000, c, cfg.expert_count, cfg.stc_reduction, cfg.stc_kernel),
                fuse,
            )
        )
    scale = 1.0 / np.sqrt(c)
    queries = QueryParams(
        init_tensor(InitSpec(cfg.seed + 1, scale=1.0), (cfg.query_count, c)),
        init_tensor(InitSpec(cfg.seed + 2, scale=scale), (c, c)),
        init_tensor(InitSpec(cfg.seed + 3, scale=scale), (c, c)),
    )
    head = DecoderHead(
        AttentionProjections.init(cfg.seed + 10, c),
        init_tensor(InitSpec(cfg.seed + 20, scale=scale), (c, c)),
        init_tensor(InitSpec(cfg.seed + 21, scale=scale), (c, cfg.num_classes)),
    )
    return FavsParams(stages, queries, head)


def check_inputs(stage_features: list, audio: np.ndarray, cfg: ModelConfig):
    """Validate the pixel-decoder maps and audio features against ``cfg``."""
    if len(stage_features) != cfg.stages:
        raise ShapeError(f"expected {cfg.stages} stage feature maps, got {len(stage_features)}")
    if audio.ndim != 4 or audio.shape[1] != cfg.channels:
        raise shape_mismatch("audio features", audio.shape, ("T", cfg.channels, "Ha", "Wa"))
    for i, p in enumerate(stage_features, start=1):
        expected = (audio.shape[0], cfg.channels) + cfg.stage_resolution(i)
        if p.shape != expected:
            raise shape_mismatch(f"stage {i} features", p.shape, expected)


def run_stages(stage_features: list, audio: np.ndarray, cfg: ModelConfig, params: FavsParams) -> list:
    """Run every stage and return their :class:`StageState` in order."""
    check_inputs(stage_features, audio, cfg)
    states = []
    v_prev, a_prev = None, audio
    for i, (p_i, sp) in enumerate(zip(stage_features, params.stages), start=1):
        if i == 1:
            v_in = p_i
        else:
            resized = tensor.bilinear_resize(v_prev, *p_i.shape[-2:])
            v_in = tensor.pointwise_conv(np.concatenate([resized, p_i], axis=1), sp.fuse)
        if cfg.use_fded:
            v_hat = fded.fded_forward(v_in, "visual", sp.fded).features
            a_hat = fded.fded_forward(a_prev, "audio", sp.fded).features
        else:
            v_hat, a_hat = v_in, a_prev
        state = StageState(i, v_hat, a_hat, v_in, v_hat)
        if cfg.use_scmc:
            out = scmc.scmc_forward(
                v_hat,
                a_hat,
                sp.scmc.experts,
                sp.scmc.router,
                force_dense=cfg.force_dense,
                fixed_k=cfg.fixed_k,
                threads=cfg.threads,
            )
            state = replace(
                state,
                v_feat=out.visual,
                a_feat=out.audio,
                visual_routing=out.visual_routing,
                audio_routing=out.audio_routing,
            )
            debug(f"Stage {i} k_eff: visual {out.visual_routing.k_eff.tolist()}, audio {out.audio_routing.k_eff.tolist()}")
        if state.v_feat.shape[-2:] != cfg.stage_resolution(i):
            raise ShapeError(f"stage {i} produced {state.v_feat.shape[-2:]}, expected {cfg.stage_resolution(i)}")
        info(f"Stage {i}: visual features {state.v_feat.shape}, audio features {state.a_feat.shape}")
        states.append(state)
        v_prev, a_prev = state.v_feat, state.a_feat
    return states


def derive_queries(a_final: np.ndarray, learned_embed: np.ndarray, q: QueryParams) -> np.ndarray:
    """Object queries ``[T, N_q, C]`` from the final audio features.

    The pooled audio vector of each frame goes through the channel MLP and
    is added to every learned query embedding.
    """
    if a_final.ndim != 4 or learned_embed.shape[1] != a_final.shape[1]:
        raise shape_mismatch("query derivation", a_final.shape, learned_embed.shape)
    audio_query = tensor.mlp2(tensor.global_avg_pool(a_final), q.w1, q.w2)
    return audio_query[:, np.newaxis, :] + learned_embed[np.newaxis]


def decode_masks(
    queries: np.ndarray, v_final: np.ndarray, head: DecoderHead, base_resolution: tuple
) -> Prediction:
    """One cross-attention layer plus a dot-product mask head.

    Refined queries are ``q + attend(q, tokens, tokens)``; mask logits are
    their dot products with the per-pixel embeddings, resized to the base
    resolution; the binary mask is ``max_q sigmoid(logit) > 0.5``.
    """
    t, n_q, c = queries.shape
    if v_final.ndim != 4 or v_final.shape[:2] != (t, c):
        raise shape_mismatch("decoder inputs", queries.shape, v_final.shape)
    h, w = v_final.shape[-2:]
    logits = np.empty((t, n_q, h, w))
    classes = np.empty((t, n_q, head.class_weights.shape[1]))
    for i in range(t):
        tokens = tensor.to_tokens(v_final[i])
        refined = queries[i] + scmc.attend(queries[i], tokens, tokens, head.attention)
        pixels = tokens @ head.mask_embed.T
        logits[i] = (refined @ pixels.T).reshape(n_q, h, w)
        classes[i] = refined @ head.class_weights
    mask_logits = tensor.bilinear_resize(logits, *base_resolution)
    probability = np.max(tensor.sigmoid_gate(mask_logits), axis=1)
    binary = (probability > 0.5).astype(np.float64)
    return Prediction(mask_logits, classes, binary)


def predict(stage_features: list, audio: np.ndarray, cfg: ModelConfig, params: FavsParams) -> PipelineResult:
    """Run stages, derive queries and decode masks."""
    states = run_stages(stage_features, audio, cfg, params)
    final = states[-1]
    queries = derive_queries(final.a_feat, params.queries.embed, params.queries)
    prediction = decode_masks(queries, final.v_feat, params.head, cfg.base_resolution)
    return PipelineResult(states, queries, prediction)
