"""Deterministic synthetic speckle-pattern generator.

Stands in for the physical laser/camera rig: each class renders a
Poisson-counted field of bright elliptical Gaussian spots whose density,
radius, elongation, and noise floor differ per class, into the RGB plane
matching the laser wavelength. The same (seed, class, index) triple
always produces the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DatasetIndex, ImageRecord
from .errors import IoFailure
from .imaging import RasterImage, encode_ppm, wavelength_to_plane
from .jsonutil import dump_json

SPLIT_FRACTIONS = {"train": 0.7, "val": 0.2, "test": 0.1}
# non-laser planes carry 5% of the primary noise floor, capped well below signal
SIDE_NOISE_SCALE = 0.05
SIDE_CHANNEL_CEIL = 0.2


@dataclass(frozen=True)
class SpeckleClassSpec:
    class_name: str
    spot_density: float          # expected bright spots per 10^4 pixels
    spot_radius: tuple[float, float]
    anisotropy: float = 1.0      # elongation of the major axis
    brightness: float = 0.9      # peak spot amplitude
    background_noise: float = 0.02

    def __post_init__(self):
        if self.spot_density <= 0:
            raise ValueError("spot density must be positive")
        if self.spot_radius[0] > self.spot_radius[1] or self.spot_radius[0] <= 0:
            raise ValueError("radius interval must be positive and ordered")
        if self.anisotropy < 1.0:
            raise ValueError("anisotropy must be >= 1")
        if not 0.0 <= self.brightness <= 1.0:
            raise ValueError("brightness must lie in [0, 1]")
        if self.background_noise < 0:
            raise ValueError("noise level must be >= 0")


@dataclass(frozen=True)
class SynthDatasetSpec:
    classes: tuple[SpeckleClassSpec, ...]
    images_per_class: int
    image_size: int
    laser_wavelength_nm: float
    seed: int
    laser_power_mw: float | None = None  # metadata only

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("need at least 2 classes")
        keys = [(c.spot_density, c.spot_radius, c.anisotropy, c.brightness,
                 c.background_noise) for c in self.classes]
        if len(set(keys)) != len(keys):
            raise ValueError("class parameter tuples must be distinct")
        if len({c.class_name for c in self.classes}) != len(self.classes):
            raise ValueError("class names must be distinct")
        wavelength_to_plane(self.laser_wavelength_nm)


def default_material_classes() -> tuple[SpeckleClassSpec, ...]:
    """Four separable stand-in materials, densities 20/60/140/300."""
    return (
        SpeckleClassSpec("acrylic", spot_density=20, spot_radius=(1, 2),
                         anisotropy=1.0),
        SpeckleClassSpec("felt", spot_density=60, spot_radius=(2, 3),
                         anisotropy=1.4),
        SpeckleClassSpec("mdf", spot_density=140, spot_radius=(1, 3),
                         anisotropy=1.8),
        SpeckleClassSpec("plywood", spot_density=300, spot_radius=(3, 5),
                         anisotropy=1.2),
    )


def smoke_detection_classes() -> tuple[SpeckleClassSpec, ...]:
    """Sharp speckle ("clear") vs diffuse drifting blobs ("smoke")."""
    return (
        SpeckleClassSpec("clear", spot_density=140, spot_radius=(1, 3),
                         anisotropy=1.5, brightness=0.9,
                         background_noise=0.02),
        SpeckleClassSpec("smoke", spot_density=30, spot_radius=(6, 12),
                         anisotropy=1.3, brightness=0.6,
                         background_noise=0.05),
    )


def expected_spot_count(spec: SpeckleClassSpec, size: int) -> float:
    return spec.spot_density * size * size / 1e4


def _image_rng(seed: int, class_name: str, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index, *class_name.encode()])


def synth_speckle(spec: SpeckleClassSpec, wavelength_nm: float, size: int,
                  seed: int, index: int) -> RasterImage:
    """Render one 3-channel speckle image for (seed, class, index)."""
    primary = wavelength_to_plane(wavelength_nm)
    rng = _image_rng(seed, spec.class_name, index)
    plane = np.zeros((size, size), dtype=np.float64)

    count = rng.poisson(expected_spot_count(spec, size))
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(count):
        cy = rng.uniform(0, size)
        cx = rng.uniform(0, size)
        radius = rng.uniform(*spec.spot_radius)
        angle = rng.uniform(0, 2 * np.pi)
        amp = spec.brightness * rng.uniform(0.6, 1.0)
        s_major = radius * spec.anisotropy
        s_minor = radius
        reach = int(np.ceil(3 * s_major))
        y0, y1 = max(0, int(cy) - reach), min(size, int(cy) + reach + 1)
        x0, x1 = max(0, int(cx) - reach), min(size, int(cx) + reach + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        dy = yy[y0:y1, x0:x1] - cy
        dx = xx[y0:y1, x0:x1] - cx
        u = dx * np.cos(angle) + dy * np.sin(angle)
        v = -dx * np.sin(angle) + dy * np.cos(angle)
        plane[y0:y1, x0:x1] += amp * np.exp(
            -(u * u / (2 * s_major * s_major) + v * v / (2 * s_minor * s_minor)))

    noise = rng.normal(0.0, spec.background_noise, (size, size)) \
        if spec.background_noise > 0 else np.zeros((size, size))
    rgb = np.zeros((size, size, 3), dtype=np.float64)
    rgb[:, :, primary] = np.clip(plane + noise, 0.0, 1.0)
    for ch in range(3):
        if ch == primary:
            continue
        side = rng.normal(0.0, SIDE_NOISE_SCALE * spec.background_noise,
                          (size, size)) if spec.background_noise > 0 else 0.0
        rgb[:, :, ch] = np.clip(side, 0.0, SIDE_CHANNEL_CEIL)
    pixels = np.floor(rgb * 255.0 + 0.5).astype(np.uint8)
    return RasterImage(width=size, height=size, channels=3, pixels=pixels)


def split_counts(images_per_class: int) -> dict[str, int]:
    n_train = int(images_per_class * SPLIT_FRACTIONS["train"])
    n_val = int(images_per_class * SPLIT_FRACTIONS["val"])
    return {"train": n_train, "val": n_val,
            "test": images_per_class - n_train - n_val}


def _split_of(index: int, counts: dict[str, int]) -> str:
    if index < counts["train"]:
        return "train"
    if index < counts["train"] + counts["val"]:
        return "val"
    return "test"


def generate_dataset(spec: SynthDatasetSpec, root) -> DatasetIndex:
    """Write the full tree root/<split>/<class>/<index>.ppm plus manifest."""
    root = Path(root)
    counts = split_counts(spec.images_per_class)
    classes = sorted(c.class_name for c in spec.classes)
    by_name = {c.class_name: c for c in spec.classes}
    label = {name: i for i, name in enumerate(classes)}
    records = []
    try:
        for split, n in counts.items():
            if n:
                for name in classes:
                    (root / split / name).mkdir(parents=True, exist_ok=True)
        for name in classes:
            cls = by_name[name]
            for index in range(spec.images_per_class):
                img = synth_speckle(cls, spec.laser_wavelength_nm,
                                    spec.image_size, spec.seed, index)
                split = _split_of(index, counts)
                path = root / split / name / f"{index:04d}.ppm"
                path.write_bytes(encode_ppm(img))
                records.append(ImageRecord(path=path, class_name=name,
                                           label=label[name], split=split))
        manifest = {
            "classes": classes,
            "images_per_class": spec.images_per_class,
            "image_size": spec.image_size,
            "wavelength_nm": spec.laser_wavelength_nm,
            "laser_power_mw": spec.laser_power_mw,
            "seed": spec.seed,
            "split_counts": counts,
        }
        (root / "dataset.json").write_text(dump_json(manifest))
    except OSError as exc:
        raise IoFailure(f"cannot write dataset under {root}: {exc}") from exc
    records.sort(key=lambda r: (r.split, r.class_name, r.path.name))
    return DatasetIndex(root=root, classes=classes, records=records)
