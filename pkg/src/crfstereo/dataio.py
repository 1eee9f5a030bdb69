"""File formats: KITTI disparity PNGs, PFM rasters, checkpoints.

Disparity PNGs follow the KITTI convention: 16-bit single-channel,
raw = 256 * disparity, raw 0 meaning missing. PFM holds float rasters
("Pf" grayscale, "PF" 3-channel) stored bottom-up with the scale line's
sign encoding endianness. Checkpoints are a small versioned binary
container of named arrays; round-trips are bit-exact.

Synthetic datasets live in flat directories: per sample index i,
``{i:04d}_left.pfm``, ``{i:04d}_right.pfm``, ``{i:04d}_gt_left.png``,
``{i:04d}_gt_right.png``.
"""

import os
import re
import struct

import numpy as np
from PIL import Image as PilImage

from .errors import FormatError, ParameterError
from .meanfield import CrfParams, params_from_text, params_to_text
from .siamese import SiameseNet
from .synthetic import StereoSample
from .volume import INVALID_DISPARITY

_CHECKPOINT_MAGIC = b"CRFS"
_CHECKPOINT_VERSION = 1

KITTI_SCALE = 256.0


# -- KITTI 16-bit disparity PNG ------------------------------------------


def load_kitti_disparity(path) -> np.ndarray:
    """Read a 16-bit single-channel PNG; raw/256, raw 0 -> sentinel."""
    with PilImage.open(path) as img:
        if img.mode not in ("I", "I;16", "I;16B"):
            raise FormatError(
                f"{path}: expected 16-bit single-channel image, got mode {img.mode}"
            )
        raw = np.asarray(img, dtype=np.int64)
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected single channel, got shape {raw.shape}")
    if raw.min() < 0 or raw.max() > 0xFFFF:
        raise FormatError(f"{path}: pixel values outside 16-bit range")
    disp = raw.astype(np.float64) / KITTI_SCALE
    disp[raw == 0] = INVALID_DISPARITY
    return disp


def save_kitti_disparity(path, disparity: np.ndarray) -> None:
    """Write raw = round(256 * d) as 16-bit PNG; invalid pixels -> raw 0."""
    d = np.asarray(disparity, dtype=np.float64)
    if d.ndim != 2:
        raise ParameterError(f"disparity must be 2-D, got shape {d.shape}")
    raw = np.rint(d * KITTI_SCALE)
    raw[(d < 0) | ~np.isfinite(d)] = 0.0
    if raw.max(initial=0.0) > 0xFFFF:
        raise ParameterError("disparity too large for 16-bit storage")
    img = PilImage.fromarray(raw.astype(np.uint16))
    img.save(path, format="PNG")


# -- PFM ------------------------------------------------------------------


def _read_token(f) -> bytes:
    """One whitespace-delimited token; comments are not part of PFM."""
    tok = b""
    while True:
        c = f.read(1)
        if c == b"":
            raise FormatError("truncated PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def load_pfm(path):
    """Decode a PFM file to a top-down float raster.

    "Pf" gives a (H, W) map with non-finite entries replaced by the
    invalid-disparity sentinel; "PF" gives a (H, W, 3) image unchanged.
    """
    with open(path, "rb") as f:
        header = _read_token(f)
        if header not in (b"Pf", b"PF"):
            raise FormatError(f"{path}: bad PFM magic {header!r}")
        color = header == b"PF"
        try:
            w = int(_read_token(f))
            h = int(_read_token(f))
            scale = float(_read_token(f))
        except ValueError as exc:
            raise FormatError(f"{path}: malformed PFM header") from exc
        if w <= 0 or h <= 0:
            raise FormatError(f"{path}: bad PFM dimensions {w}x{h}")
        if scale == 0:
            raise FormatError(f"{path}: PFM scale must be nonzero")
        endian = "<" if scale < 0 else ">"
        count = w * h * (3 if color else 1)
        payload = f.read(4 * count)
        if len(payload) != 4 * count:
            raise FormatError(f"{path}: truncated PFM payload")
        data = np.frombuffer(payload, dtype=endian + "f4").astype(np.float64)
    shape = (h, w, 3) if color else (h, w)
    raster = data.reshape(shape)[::-1].copy()  # rows are stored bottom-up
    if not color:
        raster[~np.isfinite(raster)] = INVALID_DISPARITY
    return raster


def save_pfm(path, raster: np.ndarray) -> None:
    """Write (H, W) as "Pf" or (H, W, 3) as "PF", little-endian float32."""
    arr = np.asarray(raster, dtype=np.float32)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise ParameterError(f"raster must be (H,W) or (H,W,3), got {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(arr[::-1].astype("<f4").tobytes())


# -- checkpoint container -------------------------------------------------


def save_checkpoint(path, arrays: dict) -> None:
    """Write named arrays to a versioned binary container."""
    items = list(arrays.items())
    with open(path, "wb") as f:
        f.write(_CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", _CHECKPOINT_VERSION, len(items)))
        for name, arr in items:
            arr = np.asarray(arr, order="C")  # keeps 0-d arrays 0-d
            name_b = name.encode()
            dtype_b = arr.dtype.str.encode()
            f.write(struct.pack("<H", len(name_b)) + name_b)
            f.write(struct.pack("<H", len(dtype_b)) + dtype_b)
            f.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<Q", dim))
            f.write(arr.tobytes())


def load_checkpoint(path) -> dict:
    """Read a container written by save_checkpoint; order preserved."""

    def need(f, n, what):
        b = f.read(n)
        if len(b) != n:
            raise FormatError(f"{path}: truncated checkpoint ({what})")
        return b

    out = {}
    with open(path, "rb") as f:
        if need(f, 4, "magic") != _CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", need(f, 8, "version"))
        if version != _CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        for _ in range(count):
            (nlen,) = struct.unpack("<H", need(f, 2, "name length"))
            name = need(f, nlen, "name").decode()
            (dlen,) = struct.unpack("<H", need(f, 2, "dtype length"))
            dtype = np.dtype(need(f, dlen, "dtype").decode())
            (ndim,) = struct.unpack("<I", need(f, 4, "rank"))
            shape = tuple(
                struct.unpack("<Q", need(f, 8, "dimension"))[0] for _ in range(ndim)
            )
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            data = need(f, nbytes, f"array {name}")
            out[name] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
        if f.read(1) != b"":
            raise FormatError(f"{path}: trailing bytes after checkpoint payload")
    return out


# -- model and parameter files -------------------------------------------


def save_net(path, net: SiameseNet) -> None:
    arrays = {
        "meta": np.array(
            [len(net.weights), int(net.normalize_output), int(net.standardize_input)],
            dtype=np.int64,
        )
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    save_checkpoint(path, arrays)


def load_net(path) -> SiameseNet:
    arrays = load_checkpoint(path)
    if "meta" not in arrays:
        raise FormatError(f"{path}: checkpoint is not a descriptor network")
    n_layers, norm, std = (int(v) for v in arrays["meta"])
    try:
        weights = [arrays[f"w{i}"] for i in range(n_layers)]
        biases = [arrays[f"b{i}"] for i in range(n_layers)]
    except KeyError as exc:
        raise FormatError(f"{path}: missing layer array {exc}") from exc
    return SiameseNet(
        weights=weights,
        biases=biases,
        normalize_output=bool(norm),
        standardize_input=bool(std),
    )


def save_crf_params(path, params: CrfParams) -> None:
    with open(path, "w") as f:
        f.write(params_to_text(params))


def load_crf_params(path) -> CrfParams:
    with open(path) as f:
        return params_from_text(f.read())


# -- dataset directories ---------------------------------------------------

_LEFT_RE = re.compile(r"^(\d{4})_left\.pfm$")


def sample_paths(directory, index: int) -> dict:
    stem = os.path.join(directory, f"{index:04d}")
    return {
        "left": stem + "_left.pfm",
        "right": stem + "_right.pfm",
        "gt_left": stem + "_gt_left.png",
        "gt_right": stem + "_gt_right.png",
    }


def write_sample(directory, index: int, sample: StereoSample) -> None:
    paths = sample_paths(directory, index)
    save_pfm(paths["left"], sample.left)
    save_pfm(paths["right"], sample.right)
    save_kitti_disparity(paths["gt_left"], sample.gt_left)
    if sample.gt_right is not None:
        save_kitti_disparity(paths["gt_right"], sample.gt_right)


def read_sample(directory, index: int) -> StereoSample:
    paths = sample_paths(directory, index)
    left = load_pfm(paths["left"])
    right = load_pfm(paths["right"])
    gt_left = load_kitti_disparity(paths["gt_left"])
    gt_right = None
    if os.path.exists(paths["gt_right"]):
        gt_right = load_kitti_disparity(paths["gt_right"])
    mask = gt_left != INVALID_DISPARITY
    return StereoSample(
        left=left, right=right, gt_left=gt_left, gt_right=gt_right, mask=mask
    )


def list_samples(directory) -> list:
    """Sorted sample indices present in a dataset directory."""
    indices = []
    for name in os.listdir(directory):
        m = _LEFT_RE.match(name)
        if m:
            indices.append(int(m.group(1)))
    return sorted(indices)
