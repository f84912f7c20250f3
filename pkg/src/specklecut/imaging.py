"""Raster image handling: PGM/PPM/PNG codecs, laser-wavelength channel
extraction, bilinear resizing, and seeded augmentation.

Channel extraction is the preprocessing step the classifier depends on:
the RGB plane matching the laser wavelength carries the speckle signal,
so training runs on that single plane scaled to [0, 1].
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelMismatch,
    MalformedFile,
    UnsupportedVariant,
    WavelengthOutOfRange,
)

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
# green-emphasizing weighted average used as one of the comparison modes
WEIGHTED_GRAY_WEIGHTS = (0.10, 0.80, 0.10)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass
class RasterImage:
    """8-bit raster; pixels shaped (height, width, channels), interleaved."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.pixels.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"pixel block {self.pixels.shape} != "
                f"({self.height}, {self.width}, {self.channels})")

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "RasterImage":
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        h, w, c = pixels.shape
        return cls(width=w, height=h, channels=c, pixels=pixels)


# -------------------------------------------------------------- channel modes

def wavelength_to_plane(wavelength_nm: float) -> int:
    """RGB plane index lit by a laser of the given wavelength."""
    if 380 <= wavelength_nm < 500:
        return 2
    if 500 <= wavelength_nm < 600:
        return 1
    if 600 <= wavelength_nm <= 750:
        return 0
    raise WavelengthOutOfRange(
        f"wavelength {wavelength_nm} nm outside visible 380-750 nm")


@dataclass(frozen=True)
class ChannelMode:
    """One of rgb / red / green / blue / grayscale / weighted_grayscale /
    by_wavelength(nm)."""

    kind: str
    wavelength_nm: float | None = None

    KINDS = ("rgb", "red", "green", "blue", "grayscale",
             "weighted_grayscale", "by_wavelength")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown channel mode {self.kind!r}")
        if self.kind == "by_wavelength":
            if self.wavelength_nm is None:
                raise ValueError("by_wavelength needs a wavelength")
            wavelength_to_plane(self.wavelength_nm)

    @classmethod
    def by_wavelength(cls, nm: float) -> "ChannelMode":
        return cls("by_wavelength", nm)

    def resolved_kind(self) -> str:
        if self.kind == "by_wavelength":
            return ("red", "green", "blue")[wavelength_to_plane(self.wavelength_nm)]
        return self.kind

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.wavelength_nm is not None:
            out["wavelength_nm"] = self.wavelength_nm
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ChannelMode":
        return cls(obj["kind"], obj.get("wavelength_nm"))


def extract_channel(img: RasterImage, mode: ChannelMode) -> np.ndarray:
    """Pull the requested plane(s) as float32 scaled to [0, 1]."""
    kind = mode.resolved_kind()
    scaled = img.pixels.astype(np.float32) / np.float32(255.0)
    if kind == "grayscale" and img.channels == 1:
        return scaled
    if img.channels != 3:
        raise ChannelMismatch(f"mode {kind!r} needs a 3-channel image")
    if kind == "rgb":
        return scaled
    if kind in ("red", "green", "blue"):
        plane = ("red", "green", "blue").index(kind)
        return scaled[:, :, plane:plane + 1]
    weights = GRAY_WEIGHTS if kind == "grayscale" else WEIGHTED_GRAY_WEIGHTS
    mixed = (scaled[:, :, 0] * np.float32(weights[0])
             + scaled[:, :, 1] * np.float32(weights[1])
             + scaled[:, :, 2] * np.float32(weights[2]))
    return mixed[:, :, None]


# -------------------------------------------------------------------- codecs

def _parse_netpbm_header(data: bytes, magic: bytes):
    if not data.startswith(magic):
        raise MalformedFile(f"expected {magic.decode()} header")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedFile("truncated header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError as exc:
            raise MalformedFile("non-numeric header field") from exc
    return fields[0], fields[1], fields[2], pos + 1  # single whitespace after maxval


def _decode_netpbm(data: bytes, magic: bytes, channels: int) -> RasterImage:
    width, height, maxval, offset = _parse_netpbm_header(data, magic)
    if width < 1 or height < 1:
        raise MalformedFile("non-positive dimensions")
    if maxval != 255:
        raise UnsupportedVariant(f"only maxval 255 supported, got {maxval}")
    need = width * height * channels
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise MalformedFile(f"expected {need} samples, got {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return RasterImage(width=width, height=height, channels=channels,
                       pixels=pixels.copy())


def encode_pgm(img: RasterImage) -> bytes:
    if img.channels != 1:
        raise ChannelMismatch("PGM holds a single channel")
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    return header + img.pixels.tobytes()


def encode_ppm(img: RasterImage) -> bytes:
    if img.channels != 3:
        raise ChannelMismatch("PPM holds three channels")
    header = f"P6\n{img.width} {img.height}\n255\n".encode()
    return header + img.pixels.tobytes()


def _png_chunks(data: bytes):
    pos = 8
    while pos < len(data):
        if pos + 8 > len(data):
            raise MalformedFile("truncated PNG chunk header")
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        ctype = data[pos + 4:pos + 8]
        body = data[pos + 8:pos + 8 + length]
        if len(body) != length or pos + 12 + length > len(data):
            raise MalformedFile("truncated PNG chunk")
        (crc,) = struct.unpack(">I", data[pos + 8 + length:pos + 12 + length])
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise MalformedFile(f"bad CRC in {ctype!r} chunk")
        yield ctype, body
        pos += 12 + length


def _paeth(a, b, c):
    p = a.astype(np.int32) + b - c
    pa = np.abs(p - a)
    pb = np.abs(p - b)
    pc = np.abs(p - c)
    out = np.where((pa <= pb) & (pa <= pc), a, np.where(pb <= pc, b, c))
    return out.astype(np.uint8)


def _unfilter_scanlines(raw: bytes, width: int, height: int, bpp: int) -> np.ndarray:
    stride = width * bpp
    if len(raw) != height * (stride + 1):
        raise MalformedFile("decompressed PNG data has the wrong length")
    out = np.zeros((height, stride), dtype=np.uint8)
    raw = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride + 1)
    for y in range(height):
        ftype = raw[y, 0]
        line = raw[y, 1:].astype(np.int32)
        prev = out[y - 1].astype(np.int32) if y else np.zeros(stride, np.int32)
        if ftype == 0:
            rec = line
        elif ftype == 2:
            rec = (line + prev) % 256
        elif ftype in (1, 3, 4):
            rec = np.zeros(stride, dtype=np.int32)
            for x in range(stride):
                left = rec[x - bpp] if x >= bpp else 0
                up = prev[x]
                ul = prev[x - bpp] if x >= bpp else 0
                if ftype == 1:
                    rec[x] = (line[x] + left) % 256
                elif ftype == 3:
                    rec[x] = (line[x] + (left + up) // 2) % 256
                else:
                    rec[x] = (line[x] + _paeth(np.uint8(left), np.uint8(up),
                                               np.uint8(ul))) % 256
        else:
            raise MalformedFile(f"unknown PNG filter type {ftype}")
        out[y] = rec.astype(np.uint8)
    return out


def decode_png(data: bytes) -> RasterImage:
    if not data.startswith(PNG_SIGNATURE):
        raise MalformedFile("missing PNG signature")
    ihdr = None
    idat = bytearray()
    for ctype, body in _png_chunks(data):
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif ctype == b"IDAT":
            idat.extend(body)
        elif ctype == b"IEND":
            break
    if ihdr is None:
        raise MalformedFile("PNG has no IHDR chunk")
    width, height, depth, color, comp, filt, interlace = ihdr
    if depth != 8 or color not in (0, 2):
        raise UnsupportedVariant(
            "only 8-bit grayscale or RGB PNGs are supported")
    if comp != 0 or filt != 0:
        raise MalformedFile("non-standard compression/filter method")
    if interlace != 0:
        raise UnsupportedVariant("interlaced PNGs are not supported")
    channels = 1 if color == 0 else 3
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise MalformedFile("corrupt PNG pixel stream") from exc
    flat = _unfilter_scanlines(raw, width, height, channels)
    pixels = flat.reshape(height, width, channels)
    return RasterImage(width=width, height=height, channels=channels,
                       pixels=pixels)


def encode_png(img: RasterImage) -> bytes:
    color = 0 if img.channels == 1 else 2
    header = struct.pack(">IIBBBBB", img.width, img.height, 8, color, 0, 0, 0)
    rows = img.pixels.reshape(img.height, img.width * img.channels)
    raw = bytearray()
    for y in range(img.height):
        raw.append(0)  # filter type none
        raw.extend(rows[y].tobytes())

    def chunk(ctype, body):
        return (struct.pack(">I", len(body)) + ctype + body
                + struct.pack(">I", zlib.crc32(ctype + body) & 0xFFFFFFFF))

    return (PNG_SIGNATURE + chunk(b"IHDR", header)
            + chunk(b"IDAT", zlib.compress(bytes(raw)))
            + chunk(b"IEND", b""))


def decode_image(data: bytes, fmt: str | None = None) -> RasterImage:
    """Decode PGM (P5), PPM (P6) or 8-bit non-interlaced PNG bytes.

    With fmt=None the format is sniffed from the magic bytes.
    """
    if fmt is None:
        if data.startswith(b"P5"):
            fmt = "pgm"
        elif data.startswith(b"P6"):
            fmt = "ppm"
        elif data.startswith(PNG_SIGNATURE):
            fmt = "png"
        else:
            raise MalformedFile("unrecognized image magic")
    if fmt == "pgm":
        return _decode_netpbm(data, b"P5", 1)
    if fmt == "ppm":
        return _decode_netpbm(data, b"P6", 3)
    if fmt == "png":
        return decode_png(data)
    raise UnsupportedVariant(f"unsupported format {fmt!r}")


def encode_image(img: RasterImage, fmt: str) -> bytes:
    if fmt == "pgm":
        return encode_pgm(img)
    if fmt == "ppm":
        return encode_ppm(img)
    if fmt == "png":
        return encode_png(img)
    raise UnsupportedVariant(f"unsupported format {fmt!r}")


def read_image(path) -> RasterImage:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def write_image(img: RasterImage, path) -> None:
    fmt = str(path).rsplit(".", 1)[-1].lower()
    with open(path, "wb") as fh:
        fh.write(encode_image(img, fmt))


# -------------------------------------------------------------------- resize

def _bilinear_sample(plane: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                     fill: float = 0.0) -> np.ndarray:
    """Sample (h, w, c) float data at fractional coordinates, zero outside."""
    h, w, _ = plane.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]

    def grab(yy, xx):
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        vals = plane[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1), :]
        return np.where(inside[..., None], vals, plane.dtype.type(fill))

    top = grab(y0, x0) * (1 - fx) + grab(y0, x0 + 1) * fx
    bot = grab(y0 + 1, x0) * (1 - fx) + grab(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: RasterImage, out_h: int, out_w: int) -> RasterImage:
    """Bilinear resize on a corner-aligned grid; corners map to corners."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output extents must be >= 1")
    if out_h == img.height and out_w == img.width:
        return RasterImage(img.width, img.height, img.channels,
                           img.pixels.copy())
    src = img.pixels.astype(np.float64)
    ys = (np.arange(out_h) * (img.height - 1) / (out_h - 1)
          if out_h > 1 else np.zeros(1))
    xs = (np.arange(out_w) * (img.width - 1) / (out_w - 1)
          if out_w > 1 else np.zeros(1))
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    vals = _bilinear_sample(src, grid_y, grid_x)
    pixels = np.floor(vals + 0.5).astype(np.uint8)
    return RasterImage(width=out_w, height=out_h, channels=img.channels,
                       pixels=pixels)


# -------------------------------------------------------------- augmentation

@dataclass(frozen=True)
class AugmentSpec:
    """Random zoom/rotate/shift/flip parameters, drawn per (seed, index).

    Defaults are the material-classifier profile: zoom within +-20% and
    nothing else. ch4_profile() adds rotation, shifts, and flips.
    """

    zoom_range: tuple[float, float] = (0.8, 1.2)
    rotation_max_deg: float = 0.0
    width_shift: float = 0.0
    height_shift: float = 0.0
    horizontal_flip: bool = False
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.zoom_range
        if lo <= 0 or hi <= 0 or lo > hi:
            raise ValueError("zoom interval must be positive and ordered")
        if not (0 <= self.width_shift < 1 and 0 <= self.height_shift < 1):
            raise ValueError("shift fractions must lie in [0, 1)")
        if not 0 <= self.rotation_max_deg <= 180:
            raise ValueError("rotation must lie in [0, 180] degrees")

    @classmethod
    def ch4_profile(cls, seed: int = 0) -> "AugmentSpec":
        return cls(zoom_range=(0.8, 1.2), rotation_max_deg=40.0,
                   width_shift=0.20, height_shift=0.20,
                   horizontal_flip=True, seed=seed)

    def to_json(self) -> dict:
        return {"zoom_range": list(self.zoom_range),
                "rotation_max_deg": self.rotation_max_deg,
                "width_shift": self.width_shift,
                "height_shift": self.height_shift,
                "horizontal_flip": self.horizontal_flip,
                "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "AugmentSpec":
        return cls(zoom_range=tuple(obj.get("zoom_range", (0.8, 1.2))),
                   rotation_max_deg=obj.get("rotation_max_deg", 0.0),
                   width_shift=obj.get("width_shift", 0.0),
                   height_shift=obj.get("height_shift", 0.0),
                   horizontal_flip=obj.get("horizontal_flip", False),
                   seed=obj.get("seed", 0))


def draw_augment_params(spec: AugmentSpec, draw_index: int):
    """(zoom, rotation_deg, dx_frac, dy_frac, flip) for one draw.

    Pure in (spec.seed, draw_index); draw order is fixed so adding fields
    later cannot silently reshuffle existing streams.
    """
    rng = np.random.default_rng([spec.seed, draw_index])
    zoom = rng.uniform(spec.zoom_range[0], spec.zoom_range[1])
    rot = rng.uniform(-spec.rotation_max_deg, spec.rotation_max_deg)
    dx = rng.uniform(-spec.width_shift, spec.width_shift)
    dy = rng.uniform(-spec.height_shift, spec.height_shift)
    flip = bool(spec.horizontal_flip and rng.random() < 0.5)
    return zoom, rot, dx, dy, flip


def augment(plane: np.ndarray, spec: AugmentSpec, draw_index: int) -> np.ndarray:
    """Apply flip -> rotate -> zoom -> shift to one (h, w, c) plane.

    Sampling is bilinear with zero fill outside the source; identity
    parameters reproduce the input exactly.
    """
    plane = np.asarray(plane)
    h, w, _ = plane.shape
    zoom, rot_deg, dx_frac, dy_frac, flip = draw_augment_params(spec, draw_index)
    identity = (zoom == 1.0 and rot_deg == 0.0 and dx_frac == 0.0
                and dy_frac == 0.0 and not flip)
    if identity:
        return plane.copy()

    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    dx = dx_frac * w
    dy = dy_frac * h
    theta = np.deg2rad(rot_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    out_y, out_x = np.meshgrid(np.arange(h, dtype=np.float64),
                               np.arange(w, dtype=np.float64), indexing="ij")
    # invert the forward map shift(zoom(rotate(flip(p)))) step by step
    xs = out_x - dx
    ys = out_y - dy
    xs = cx + (xs - cx) / zoom
    ys = cy + (ys - cy) / zoom
    xr = cx + (xs - cx) * cos_t + (ys - cy) * sin_t
    yr = cy - (xs - cx) * sin_t + (ys - cy) * cos_t
    if flip:
        xr = (w - 1) - xr
    out = _bilinear_sample(plane.astype(np.float64), yr, xr)
    return out.astype(plane.dtype)
