"""Synthetic rectified stereograms with dense exact ground truth.

A scene is a textured background plane plus a few textured rectangles
floating nearer to the camera, each at its own integer disparity. The
right view renders every layer shifted left by its disparity with
painter's-algorithm occlusion (nearer layers drawn last), so both
disparity maps are exact by construction. The background texture extends
``d_max`` columns past the right edge so the right view never runs out
of background.

Each layer's texture is its base intensity plus fine iid noise, which
gives the matcher something to lock onto inside otherwise flat regions;
independent Gaussian pixel noise is then added to both rendered views.
Everything derives from one seeded generator, so samples are
bit-identical per seed.

The sample's validity mask marks pixels whose true match is visible in
the right view: the match column is inside the image and the right
view's ground truth agrees with the left's (pixels occluded by a nearer
layer fail this and are excluded from losses and evaluation).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError
from .volume import INVALID_DISPARITY

#: Default fine-texture amplitude (intensity units).
DEFAULT_TEXTURE = 2.0

#: Background disparity is drawn from [1, MAX_BACKGROUND_DISPARITY].
MAX_BACKGROUND_DISPARITY = 3


@dataclass
class Layer:
    """One scene layer: disparity, footprint, and base intensity."""

    disparity: int
    y0: int
    y1: int
    x0: int
    x1: int
    base: float


@dataclass
class StereoSample:
    """A rectified pair with dense ground truth and a validity mask."""

    left: np.ndarray
    right: np.ndarray
    gt_left: np.ndarray
    gt_right: np.ndarray | None
    mask: np.ndarray
    layers: list = field(default_factory=list)

    def __post_init__(self):
        shape = self.left.shape[:2]
        for name in ("right", "gt_left", "mask"):
            arr = getattr(self, name)
            if arr.shape[:2] != shape:
                raise GenerationError(f"{name} shape {arr.shape} != {shape}")


def make_stereogram(
    seed: int,
    h: int = 64,
    w: int = 64,
    d_max: int = 16,
    shapes: int = 3,
    noise: float = 1.0,
    texture: float = DEFAULT_TEXTURE,
) -> StereoSample:
    """Generate one stereogram; deterministic per seed."""
    if h < 8 or w < 8:
        raise GenerationError(f"image must be at least 8x8, got {h}x{w}")
    if d_max < 2:
        raise GenerationError(f"d_max must be >= 2, got {d_max}")
    if d_max > w / 4:
        raise GenerationError(
            f"d_max {d_max} too large for width {w} (needs d_max <= w/4)"
        )
    if shapes < 0 or noise < 0 or texture < 0:
        raise GenerationError("shapes, noise, and texture must be non-negative")

    rng = np.random.default_rng(seed)
    d_bg = int(rng.integers(1, MAX_BACKGROUND_DISPARITY + 1))
    # Leave at least one disparity level above the background for shapes.
    cap = d_max - 2 if shapes > 0 else d_max - 1
    d_bg = max(0, min(d_bg, cap))

    base_bg = float(rng.uniform(60.0, 200.0))
    bg_tex = base_bg + rng.normal(0.0, texture, size=(h, w + d_max))
    layers = [Layer(d_bg, 0, h, 0, w, base_bg)]

    if shapes > 0:
        lo = d_bg + 1
        if lo > d_max - 1:
            raise GenerationError(
                f"no room for shapes between background {d_bg} and d_max {d_max}"
            )
        disps = np.sort(rng.integers(lo, d_max, size=shapes))
        rect_tex = []
        for d in disps:
            rh = int(rng.integers(h // 6, h // 2 + 1))
            rw = int(rng.integers(w // 6, w // 2 + 1))
            y0 = int(rng.integers(0, h - rh + 1))
            x0 = int(rng.integers(0, w - rw + 1))
            base = float(rng.uniform(60.0, 200.0))
            layers.append(Layer(int(d), y0, y0 + rh, x0, x0 + rw, base))
            rect_tex.append(base + rng.normal(0.0, texture, size=(rh, rw)))

    # Left view: painter's algorithm in ascending disparity.
    left = bg_tex[:, :w].copy()
    gt_left = np.full((h, w), float(d_bg))
    for i, lay in enumerate(layers[1:]):
        tex = rect_tex[i]
        left[lay.y0 : lay.y1, lay.x0 : lay.x1] = tex
        gt_left[lay.y0 : lay.y1, lay.x0 : lay.x1] = float(lay.disparity)

    # Right view: each layer shifts left by its disparity.
    right = bg_tex[:, d_bg : w + d_bg].copy()
    gt_right = np.full((h, w), float(d_bg))
    for i, lay in enumerate(layers[1:]):
        tex = rect_tex[i]
        d = lay.disparity
        c0 = max(lay.x0 - d, 0)
        c1 = min(lay.x1 - d, w)
        if c1 <= c0:
            continue
        src0 = c0 + d - lay.x0
        right[lay.y0 : lay.y1, c0:c1] = tex[:, src0 : src0 + (c1 - c0)]
        gt_right[lay.y0 : lay.y1, c0:c1] = float(d)

    # A left pixel is trustworthy when its match is in-image and the
    # right view still shows the same surface there.
    cols = np.arange(w)[None, :]
    match = cols - gt_left.astype(np.int64)
    in_img = match >= 0
    match_c = np.clip(match, 0, w - 1)
    same = np.take_along_axis(gt_right, match_c, axis=1) == gt_left
    mask = in_img & same

    if noise > 0:
        left = left + rng.normal(0.0, noise, size=left.shape)
        right = right + rng.normal(0.0, noise, size=right.shape)
    left = np.clip(left, 0.0, 255.0)
    right = np.clip(right, 0.0, 255.0)

    return StereoSample(
        left=left,
        right=right,
        gt_left=gt_left,
        gt_right=gt_right,
        mask=mask,
        layers=layers,
    )
