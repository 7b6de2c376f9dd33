# Licensed under the MIT License

"""Command-line interface: ``favs <command> [options]``.

Commands write CSV tables, PGM heatmaps and FTEN1 containers. Exit codes
are 0 on success, 1 for validation failures and 2 for I/O failures.
"""

import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import artifacts, fixtures, metrics, parameters, pipeline
from .errors import FavsError, FtenError, ValidationError
from .ften import read_ften, write_ften
from .logging import info, warning
from .pipeline import FavsParams, ModelConfig
from .spectral import BAND_NAMES, ThresholdLadder, band_energy, fft2, ifft2, residual_decompose

THREADS_ENV = "FAVS_THREADS"

ABLATION_VARIANTS = (
    ("baseline", False, False),
    ("+fded", True, False),
    ("+fded+scmc", True, True),
)


@dataclass
class CommandResult:
    """Outcome of a command: exit code and the paths it wrote."""

    exit_code: int = 0
    artifacts: list = field(default_factory=list)


def _env_threads():
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return None
    try:
        n = int(value)
    except ValueError:
        n = 0
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return n


def load_config(path) -> ModelConfig:
    """Config file (or the defaults) plus the thread cap from the environment."""
    p = parameters.load_parameters(path) if path else parameters.default()
    threads = _env_threads()
    if threads is not None:
        if path and threads != p["threads"]:
            warning(f"{THREADS_ENV}={threads} overrides threads={p['threads']} from {path}")
        p["threads"] = threads
    return ModelConfig.from_parameters(p)


def load_params(path, cfg: ModelConfig) -> FavsParams:
    """Read and validate a parameter container, or initialize one from the seed."""
    if path is None:
        info(f"No parameter file given, initializing from seed {cfg.seed}")
        return pipeline.init_params(cfg)
    return FavsParams.from_tensors(read_ften(path), cfg)


def load_scene(path, cfg: ModelConfig) -> fixtures.SceneFixture:
    """Read a fixture and check it against the configuration."""
    scene = fixtures.load_fixture(path)
    if scene.frames.shape[-2:] != cfg.base_resolution:
        raise ValidationError(f"fixture frames are {scene.frames.shape[-2:]}, config size is {cfg.base_resolution}")
    if len(scene.stage_features) != cfg.stages:
        raise ValidationError(f"fixture has {len(scene.stage_features)} stage maps, config expects {cfg.stages}")
    if scene.audio_features.shape[1] != cfg.channels:
        raise ValidationError(
            f"fixture features have {scene.audio_features.shape[1]} channels, config expects {cfg.channels}"
        )
    return scene


def cmd_gen_fixture(args) -> CommandResult:
    scene = fixtures.gen_scene(
        args.seed,
        frames=args.frames,
        height=args.size,
        width=args.size,
        channels=args.channels,
        texture=args.texture,
        motion=args.motion,
        stages=args.stages,
        audio_grid=args.audio_grid,
        noise=args.noise,
    )
    return CommandResult(0, fixtures.write_fixture(args.out, scene))


def high_band_density_ratio(high: np.ndarray, masks: np.ndarray) -> float:
    """Mean high-band spatial energy inside the masks over the mean outside.

    ``high`` is the high band of ``[T, c, H, W]`` frames and ``masks`` the
    ``[T, H, W]`` object masks.
    """
    energy = np.sum(ifft2(high).real ** 2, axis=1)
    inside = masks > 0.5
    if not np.any(inside) or np.all(inside):
        raise ValidationError("density ratio needs both object and background pixels")
    background = float(np.mean(energy[~inside]))
    if background == 0.0:
        return float("inf")
    return float(np.mean(energy[inside])) / background


def cmd_decompose(args) -> CommandResult:
    tensors = read_ften(args.input)
    if args.tensor not in tensors:
        raise ValidationError(f"{args.input} has no tensor named {args.tensor!r}")
    x = tensors[args.tensor]
    ladder = ThresholdLadder.parse(args.tau)
    spectrum = fft2(x)
    bands = residual_decompose(spectrum, ladder)
    exact = bool(np.array_equal(bands.total(), spectrum))
    energies = bands.energies()
    total = band_energy(spectrum)
    rel_error = abs(sum(energies.values()) - total) / total if total > 0 else 0.0

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, band in zip(BAND_NAMES, bands.bands()):
        image = np.mean(np.abs(band).reshape(-1, *band.shape[-2:]), axis=0)
        written.append(artifacts.write_pgm(out / f"band_{name}.pgm", artifacts.spectrum_image(image)))
    rows = [(name, e, e / total if total > 0 else 0.0) for name, e in energies.items()]
    written.append(artifacts.write_csv(out / "band_energies.csv", ["band", "energy", "share"], rows))

    summary = [("partition_exact", str(exact).lower()), ("energy_rel_error", rel_error)]
    print(f"partition exact: {'yes' if exact else 'no'} (energy relative error {rel_error:.3g})")
    masks = tensors.get("gt_masks")
    if masks is not None and x.ndim == 4 and masks.shape == (x.shape[0],) + x.shape[-2:]:
        ratio = high_band_density_ratio(bands.high, masks)
        summary.append(("high_density_ratio", ratio))
        print(f"high-band energy density, object/background: {ratio:.4g}")
    written.append(artifacts.write_csv(out / "decompose_summary.csv", ["key", "value"], summary))
    if not exact:
        raise ValidationError("band decomposition does not add up to the source spectrum")
    return CommandResult(0, written)


def _routing_rows(decision, modality: str):
    for t in range(decision.weights.shape[0]):
        yield (t, modality, decision.entropy[t], decision.k_eff[t], *decision.weights[t])


def _feature_energy(v: np.ndarray) -> np.ndarray:
    return np.sum(v[0] ** 2, axis=0)


def cmd_run(args) -> CommandResult:
    cfg = load_config(args.config)
    params = load_params(args.params, cfg)
    scene = load_scene(args.fixture, cfg)
    result = pipeline.predict(scene.stage_features, scene.audio_features, cfg, params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    prediction = result.prediction
    if args.oracle_mask:
        prediction = replace(prediction, binary_mask=np.array(scene.gt_masks, dtype=np.float64))
    path = out / "prediction.ften"
    write_ften(path, prediction.to_tensors())
    written.append(path)
    for t, mask in enumerate(prediction.binary_mask):
        written.append(artifacts.write_mask_pgm(out / f"mask_t{t}.pgm", mask))

    m_j = metrics.metric_jaccard(prediction.binary_mask, scene.gt_masks)
    m_f = metrics.metric_fscore(prediction.binary_mask, scene.gt_masks)
    written.append(artifacts.write_csv(out / "metrics.csv", ["metric", "value"], [("M_J", m_j), ("M_F", m_f)]))
    print(f"M_J = {m_j:.4f}, M_F = {m_f:.4f}")

    header = ["frame", "modality", "entropy", "k_eff"] + [f"w{e}" for e in range(cfg.expert_count)]
    for state in result.states:
        i = state.stage_index
        if state.visual_routing is not None:
            rows = [
                *_routing_rows(state.visual_routing, "visual"),
                *_routing_rows(state.audio_routing, "audio"),
            ]
            written.append(artifacts.write_csv(out / f"routing_stage{i}.csv", header, rows))
        if cfg.use_fded:
            written.append(artifacts.write_pgm(out / f"fded_stage{i}_before.pgm", _feature_energy(state.v_input)))
            written.append(artifacts.write_pgm(out / f"fded_stage{i}_after.pgm", _feature_energy(state.v_decomposed)))
    return CommandResult(0, written)


def utilization(decision) -> np.ndarray:
    """Mean sparse routing weight of every expert over the frames."""
    return np.mean(decision.sparse_weights, axis=0)


def cmd_route_stats(args) -> CommandResult:
    cfg = load_config(args.config)
    params = load_params(args.params, cfg)
    scene = load_scene(args.fixture, cfg)
    if not cfg.use_scmc:
        raise ValidationError("routing statistics need the consistency module (scmc=true)")
    states = pipeline.run_stages(scene.stage_features, scene.audio_features, cfg, params)

    n = cfg.expert_count
    header = ["stage", "frame", "visual_entropy", "visual_k_eff", "audio_entropy", "audio_k_eff"]
    header += [f"visual_w{e}" for e in range(n)] + [f"audio_w{e}" for e in range(n)]
    rows = []
    for state in states:
        v, a = state.visual_routing, state.audio_routing
        for t in range(v.weights.shape[0]):
            rows.append(
                (state.stage_index, t, v.entropy[t], v.k_eff[t], a.entropy[t], a.k_eff[t])
                + tuple(v.sparse_weights[t])
                + tuple(a.sparse_weights[t])
            )
        for modality, decision in (("visual", v), ("audio", a)):
            bars = " ".join(f"{u:.3f}" for u in utilization(decision))
            print(
                f"stage {state.stage_index} {modality}: utilization [{bars}], "
                f"entropy mean {np.mean(decision.entropy):.4f} "
                f"min {np.min(decision.entropy):.4f} max {np.max(decision.entropy):.4f}, "
                f"k_eff mean {np.mean(decision.k_eff):.2f}"
            )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    return CommandResult(0, [artifacts.write_csv(out, header, rows)])


def cmd_init_params(args) -> CommandResult:
    cfg = load_config(args.config)
    out = Path(args.out)
    write_ften(out, pipeline.init_params(cfg).to_tensors())
    info(f"Wrote parameters for {cfg.stages} stages, {cfg.expert_count} experts to {out}")
    return CommandResult(0, [out])


def _parse_counts(text: str) -> list:
    try:
        counts = [int(n) for n in text.split(",") if n.strip()]
    except ValueError:
        raise ValidationError(f"invalid expert counts {text!r}") from None
    if not counts or min(counts) < 1:
        raise ValidationError(f"expert counts must be positive integers, got {text!r}")
    return counts


def _score(scene, cfg, params):
    prediction = pipeline.predict(scene.stage_features, scene.audio_features, cfg, params).prediction
    m_j = metrics.metric_jaccard(prediction.binary_mask, scene.gt_masks)
    m_f = metrics.metric_fscore(prediction.binary_mask, scene.gt_masks)
    return m_j, m_f, (m_j + m_f) / 2


def cmd_ablate(args) -> CommandResult:
    cfg = load_config(args.config)
    params = load_params(args.params, cfg)
    scene = load_scene(args.fixture, cfg)
    counts = _parse_counts(args.experts)

    rows = []
    for name, use_fded, use_scmc in ABLATION_VARIANTS:
        variant = replace(cfg, use_fded=use_fded, use_scmc=use_scmc)
        rows.append((name, cfg.expert_count, *_score(scene, variant, params)))
    for n in counts:
        variant = replace(cfg, expert_count=n, use_fded=True, use_scmc=True)
        rows.append((f"experts={n}", n, *_score(scene, variant, pipeline.init_params(variant))))
    for row in rows:
        print(f"{row[0]:>12}  M_J {row[2]:.4f}  M_F {row[3]:.4f}  mean {row[4]:.4f}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    return CommandResult(0, [artifacts.write_csv(out, ["variant", "experts", "M_J", "M_F", "mean"], rows)])


def _model_arguments(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file (defaults when omitted)")
    p.add_argument("--params", help="FTEN1 parameter container (seeded init when omitted)")
    p.add_argument("--fixture", required=True, help="FTEN1 fixture container")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="favs", description="Frequency-aware audio-visual fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-fixture", help="generate a synthetic scene fixture")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--texture", choices=("checkerboard", "smooth"), default="checkerboard")
    p.add_argument("--motion", choices=("static", "linear"), default="linear")
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--audio-grid", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_gen_fixture)

    p = sub.add_parser("decompose", help="split a tensor into frequency bands")
    p.add_argument("--input", required=True)
    p.add_argument("--tensor", default="frames")
    p.add_argument("--tau", default=str(ThresholdLadder()))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_decompose)

    p = sub.add_parser("run", help="run the pipeline on a fixture")
    _model_arguments(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--oracle-mask", action="store_true", help="score the ground truth as the prediction")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("route-stats", help="expert utilization and routing entropy")
    _model_arguments(p)
    p.add_argument("--out", default="route_stats.csv", help="CSV output path")
    p.set_defaults(handler=cmd_route_stats)

    p = sub.add_parser("init-params", help="write seeded parameters for a config")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_init_params)

    p = sub.add_parser("ablate", help="module ablation and expert-count sweep")
    _model_arguments(p)
    p.add_argument("--experts", default="1,2,4,8")
    p.add_argument("--out", default="ablation.csv", help="CSV output path")
    p.set_defaults(handler=cmd_ablate)
    return parser


def execute(argv=None) -> CommandResult:
    """Parse ``argv`` and run the command, mapping errors to exit codes."""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (OSError, FtenError) as e:
        print(f"favs: error: {e}", file=sys.stderr)
        return CommandResult(2)
    except (FavsError, ValueError) as e:
        print(f"favs: error: {e}", file=sys.stderr)
        return CommandResult(1)


def main(argv=None) -> int:
    return execute(argv).exit_code


if __name__ == "__main__":
    sys.exit(main())
