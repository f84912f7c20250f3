"""Command-line entry points: synth, train, eval, predict, simulate.

Exit codes: 0 success, 1 usage error, 2 data/model error. All JSON output
goes through the schema-stable writer (sorted keys, 6 significant
digits).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import nn
from .checkpoint import checkpoint_load, checkpoint_save
from .dataset import load_dataset
from .energy import power_profile_csv, read_trace_csv, simulate, classify_category
from .errors import SpeckleCutError, UsageError
from .imaging import AugmentSpec, ChannelMode, extract_channel, read_image
from .jsonutil import dump_json
from .metrics import accuracy, classification_report, confusion_matrix
from .synth import (
    SpeckleClassSpec,
    SynthDatasetSpec,
    default_material_classes,
    generate_dataset,
)
from .training import TrainConfig, evaluate, fit
from .zoo import ArchitectureId, build

_EXTRA_MATERIAL_NAMES = (
    "leather", "styrene", "cardboard", "bamboo", "tpu", "cork", "matboard",
    "suede", "delrin", "paper",
)
_RADII_CYCLE = ((1.0, 2.0), (2.0, 3.0), (1.0, 3.0), (3.0, 5.0))
_ANISO_CYCLE = (1.0, 1.4, 1.8, 1.2)


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run() owns exit codes."""

    def error(self, message):
        raise UsageError(message)


def make_class_specs(n: int) -> tuple[SpeckleClassSpec, ...]:
    """Deterministic class parameters for n synthetic materials.

    Up to four classes this is the canonical separable fixture; beyond
    that, spot densities ramp geometrically from 20 to 300 per 10^4 px.
    """
    if n < 2:
        raise UsageError("--classes must be >= 2")
    defaults = default_material_classes()
    if n <= len(defaults):
        return defaults[:n]
    names = [c.class_name for c in defaults] + list(_EXTRA_MATERIAL_NAMES)
    out = []
    for i in range(n):
        name = names[i] if i < len(names) else f"material{i:02d}"
        density = 20.0 * (300.0 / 20.0) ** (i / (n - 1))
        out.append(SpeckleClassSpec(
            class_name=name, spot_density=round(density, 3),
            spot_radius=_RADII_CYCLE[i % 4], anisotropy=_ANISO_CYCLE[i % 4]))
    return tuple(out)


# ----------------------------------------------------------------- run config

_TRAIN_KEYS = set(TrainConfig().to_json())
_ARCH_KEYS = {"name", "input_side", "num_classes", "head_width"}
_CHANNEL_KEYS = {"kind", "wavelength_nm"}
_AUGMENT_KEYS = {"zoom_range", "rotation_max_deg", "width_shift",
                 "height_shift", "horizontal_flip", "seed"}
_TOP_KEYS = {"architecture", "channel", "augment", "train", "data"}


def _reject_unknown(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise SpeckleCutError(
            f"unknown config key(s) in {where}: {', '.join(sorted(unknown))}")


@dataclass(frozen=True)
class RunConfig:
    architecture: ArchitectureId
    channel: ChannelMode
    augment: AugmentSpec | None
    train: TrainConfig
    data: str | None
    num_classes_explicit: bool


def parse_run_config(text: str) -> RunConfig:
    """Parse and validate a run-config JSON document; unknown keys reject."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpeckleCutError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SpeckleCutError("config must be a JSON object")
    _reject_unknown(obj, _TOP_KEYS, "config root")
    for key in ("architecture", "channel", "train"):
        if key not in obj:
            raise SpeckleCutError(f"config is missing {key!r}")
        if not isinstance(obj[key], dict):
            raise SpeckleCutError(f"config {key!r} must be an object")
    _reject_unknown(obj["architecture"], _ARCH_KEYS, "architecture")
    _reject_unknown(obj["channel"], _CHANNEL_KEYS, "channel")
    _reject_unknown(obj["train"], _TRAIN_KEYS, "train")
    augment_spec = None
    if obj.get("augment") is not None:
        if not isinstance(obj["augment"], dict):
            raise SpeckleCutError("config 'augment' must be an object or null")
        _reject_unknown(obj["augment"], _AUGMENT_KEYS, "augment")
        augment_spec = AugmentSpec.from_json(obj["augment"])
    return RunConfig(
        architecture=ArchitectureId.from_json(obj["architecture"]),
        channel=ChannelMode.from_json(obj["channel"]),
        augment=augment_spec,
        train=TrainConfig.from_json(obj["train"]),
        data=obj.get("data"),
        num_classes_explicit="num_classes" in obj["architecture"])


# ---------------------------------------------------------------- subcommands

def _cmd_synth(args) -> int:
    spec = SynthDatasetSpec(
        classes=make_class_specs(args.classes),
        images_per_class=args.per_class, image_size=args.size,
        laser_wavelength_nm=args.wavelength, seed=args.seed,
        laser_power_mw=args.laser_mw)
    index = generate_dataset(spec, args.out)
    print(f"wrote {len(index)} images in {len(index.classes)} classes "
          f"under {args.out}")
    return 0


def _cmd_train(args) -> int:
    run_cfg = parse_run_config(Path(args.config).read_text())
    arch, channel, cfg = run_cfg.architecture, run_cfg.channel, run_cfg.train
    root = args.data or run_cfg.data
    if root is None:
        raise UsageError("no dataset: pass --data or put 'data' in the config")
    index = load_dataset(root)
    if arch.name == "ch3_material" and not run_cfg.num_classes_explicit:
        arch = ArchitectureId(arch.name, input_side=arch.input_side,
                              num_classes=len(index.classes),
                              head_width=arch.head_width)
    net = build(arch, seed=cfg.seed)
    net, history = fit(net, index.split("train"), index.split("val"),
                       cfg, channel, run_cfg.augment)
    meta = {"class_names": index.classes, "channel_mode": channel.to_json(),
            "architecture": arch.to_json(),
            "wavelength_nm": channel.wavelength_nm}
    checkpoint_save(net, meta, args.out)
    history_path = Path(str(args.out) + ".history.csv")
    history_path.write_text(history.to_csv())
    best = history.epochs[history.best_epoch]
    print(f"trained {len(history.epochs)} epochs "
          f"(best epoch {history.best_epoch}: val_loss={best.val_loss:.4f} "
          f"val_acc={best.val_acc:.4f}); model -> {args.out}, "
          f"history -> {history_path}")
    return 0


def _cmd_eval(args) -> int:
    net, meta = checkpoint_load(args.model)
    channel = ChannelMode.from_json(meta["channel_mode"])
    index = load_dataset(args.data)
    subset = index.split(args.split)
    loss, acc, probs = evaluate(net, subset, channel)
    labels = subset.labels()
    if probs.shape[1] == 1:
        predicted = (probs[:, 0] > 0.5).astype(int)
    else:
        predicted = probs.argmax(axis=1)
    cm = confusion_matrix(labels, predicted, k=len(subset.classes))
    report = classification_report(cm, subset.classes)
    payload = {
        "split": args.split,
        "loss": loss,
        "accuracy": accuracy(cm),
        "classes": subset.classes,
        "confusion_matrix": cm.counts.tolist(),
        "report": json.loads(report.to_json()),
    }
    Path(args.report).write_text(dump_json(payload))
    print(f"{args.split} accuracy {acc:.4f} over {len(subset)} images; "
          f"report -> {args.report}")
    return 0


def _cmd_predict(args) -> int:
    net, meta = checkpoint_load(args.model)
    channel = ChannelMode.from_json(meta["channel_mode"])
    classes = meta.get("class_names")
    if not classes:
        raise SpeckleCutError("checkpoint lacks class names")
    plane = extract_channel(read_image(args.image), channel)
    out = nn.network_forward(net, plane)
    if out.shape[0] == 1:
        label = int(out[0] > 0.5)
        prob = float(out[0]) if label == 1 else 1.0 - float(out[0])
    else:
        label = int(out.argmax())
        prob = float(out[label])
    name = classes[label]
    category = classify_category(name)
    print(f"{name} probability={prob:.4f} "
          f"category={category.value} tier={category.tier:.2f}")
    return 0


def _cmd_simulate(args) -> int:
    trace = read_trace_csv(Path(args.trace).read_text())
    report = simulate(trace, purge_s=args.purge)
    Path(args.report).write_text(dump_json(report.to_json_obj()))
    power_path = Path(str(args.report) + ".power.csv")
    power_path.write_text(power_profile_csv(trace, purge_s=args.purge))
    print(f"savings {report.savings_percent:.2f}% "
          f"({report.e_baseline_kwh:.4f} kWh -> {report.e_adaptive_kwh:.4f} kWh); "
          f"report -> {args.report}, power profile -> {power_path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="specklecut", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic speckle dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--wavelength", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--laser-mw", type=float, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--data", default=None)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="classify a single image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("simulate", help="run the pump controller on a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--purge", type=float, default=0.0)
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_simulate)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SpeckleCutError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
