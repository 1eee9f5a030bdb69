"""Siamese patch-descriptor network built from plain convolutions.

The net is a stack of same-padded 3x3 convolutions with rectification
between layers (none after the last) and an optional L2 normalization of
the final per-pixel descriptor, so inner products between descriptors
lie in [-1, 1]. Both stereo branches share the same weights, so one
``SiameseNet`` serves both images.

All forward and backward passes are hand-written numpy: convolution via
sliding-window im2col, its input adjoint via the mirrored scatter of the
same windows, rectification and normalization via their closed-form
Jacobians. Gradients are produced with respect to the network weights;
images are data, not parameters, so no gradient flows to them.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

#: Euclidean-norm floor used by descriptor normalization.
NORM_FLOOR = 1e-12

#: Standard-deviation floor used by input standardization.
STD_FLOOR = 1e-6

DEFAULT_LAYERS = 4
DEFAULT_CHANNELS = 32
DEFAULT_KERNEL = 3
DEFAULT_MARGIN = 0.2


@dataclass
class DescriptorField:
    """Dense per-pixel descriptors for one image side."""

    values: np.ndarray  # (H, W, dim)
    side: str = "left"

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ShapeError("descriptor field must be (H, W, dim)")
        if self.side not in ("left", "right"):
            raise ParameterError(f"side must be 'left' or 'right', got {self.side!r}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass
class SiameseNet:
    """Weights of the shared descriptor network.

    ``weights[i]`` has shape (k, k, c_in, c_out); ``biases[i]`` has shape
    (c_out,). Rectification follows every layer except the last.
    """

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    normalize_output: bool = True
    standardize_input: bool = True

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ShapeError("weights and biases must pair up")
        if not self.weights:
            raise ParameterError("net needs at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 4 or w.shape[0] != w.shape[1]:
                raise ShapeError(f"layer {i} weight must be (k, k, c_in, c_out)")
            if b.shape != (w.shape[3],):
                raise ShapeError(f"layer {i} bias must be (c_out,)")
            if i and self.weights[i - 1].shape[3] != w.shape[2]:
                raise ShapeError(f"layer {i} input channels do not match layer {i-1}")

    @property
    def in_channels(self) -> int:
        return self.weights[0].shape[2]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[3]


@dataclass
class NetTape:
    """Per-layer intermediates recorded by :func:`describe_forward`."""

    inputs: list = field(default_factory=list)  # activation entering each conv
    pre_relu: list = field(default_factory=list)  # conv output before rectification
    pre_norm: np.ndarray | None = None  # descriptor before L2 normalization
    norms: np.ndarray | None = None  # clamped per-pixel norms


def create_net(
    seed: int,
    in_channels: int = 1,
    channels: int = DEFAULT_CHANNELS,
    layers: int = DEFAULT_LAYERS,
    kernel: int = DEFAULT_KERNEL,
    normalize_output: bool = True,
    standardize_input: bool = True,
) -> SiameseNet:
    """He-initialized net: ``layers`` convolutions, ``channels`` wide."""
    if layers < 1:
        raise ParameterError(f"layers must be >= 1, got {layers}")
    if kernel < 1 or kernel % 2 == 0:
        raise ParameterError(f"kernel must be odd and positive, got {kernel}")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    c_in = in_channels
    for _ in range(layers):
        fan_in = kernel * kernel * c_in
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(kernel, kernel, c_in, channels))
        ws.append(w)
        bs.append(np.zeros(channels))
        c_in = channels
    return SiameseNet(
        weights=ws,
        biases=bs,
        normalize_output=normalize_output,
        standardize_input=standardize_input,
    )


def _as_channels(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise ShapeError(f"image must be (H, W) or (H, W, C), got {image.shape}")
    return img


def _standardize(img: np.ndarray) -> np.ndarray:
    mean = img.mean(axis=(0, 1), keepdims=True)
    std = img.std(axis=(0, 1), keepdims=True)
    return (img - mean) / np.maximum(std, STD_FLOOR)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 convolution of (H, W, Cin) with (k, k, Cin, Cout)."""
    k = w.shape[0]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(0, 1))
    # win: (H, W, Cin, k, k) -> columns (H, W, k*k*Cin) matching w's layout
    cols = win.transpose(0, 1, 3, 4, 2).reshape(x.shape[0], x.shape[1], -1)
    return cols @ w.reshape(-1, w.shape[3]) + b


def _conv_backward(
    x: np.ndarray, w: np.ndarray, g_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adjoints of :func:`_conv_forward` for weights, bias, and input."""
    h, wd, _ = x.shape
    k = w.shape[0]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(0, 1))
    cols = win.transpose(0, 1, 3, 4, 2).reshape(h * wd, -1)
    g_flat = g_out.reshape(h * wd, -1)
    d_w = (cols.T @ g_flat).reshape(w.shape)
    d_b = g_flat.sum(axis=0)

    # Input adjoint: scatter each output gradient back through its window.
    g_w = g_out @ w.reshape(-1, w.shape[3]).T  # (H, W, k*k*Cin)
    g_w = g_w.reshape(h, wd, k, k, x.shape[2])
    d_xp = np.zeros_like(xp)
    for dy in range(k):
        for dx in range(k):
            d_xp[dy : dy + h, dx : dx + wd, :] += g_w[:, :, dy, dx, :]
    return d_w, d_b, d_xp[pad : pad + h, pad : pad + wd, :]


def describe_forward(
    net: SiameseNet, image: np.ndarray, tape: NetTape | None = None
) -> DescriptorField:
    """Dense per-pixel descriptors of one image."""
    x = _as_channels(image)
    if x.shape[2] != net.in_channels:
        raise ShapeError(
            f"net expects {net.in_channels} input channels, image has {x.shape[2]}"
        )
    if net.standardize_input:
        x = _standardize(x)
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        if tape is not None:
            tape.inputs.append(x)
        x = _conv_forward(x, w, b)
        if i < n_layers - 1:
            if tape is not None:
                tape.pre_relu.append(x)
            x = np.maximum(x, 0.0)
    if net.normalize_output:
        if tape is not None:
            tape.pre_norm = x
        norms = np.maximum(np.linalg.norm(x, axis=2, keepdims=True), NORM_FLOOR)
        if tape is not None:
            tape.norms = norms
        x = x / norms
    return DescriptorField(values=x)


def describe(net: SiameseNet, image: np.ndarray) -> DescriptorField:
    """Tape-free descriptor pass."""
    return describe_forward(net, image)


def describe_backward(
    net: SiameseNet, tape: NetTape, grad_desc: np.ndarray
) -> tuple[list, list]:
    """Weight and bias gradients from a descriptor-field gradient."""
    g = np.asarray(grad_desc, dtype=np.float64)
    if net.normalize_output:
        x = tape.pre_norm
        norms = tape.norms
        inner = np.sum(g * x, axis=2, keepdims=True)
        g = g / norms - x * inner / norms**3
    d_ws = [None] * len(net.weights)
    d_bs = [None] * len(net.biases)
    n_layers = len(net.weights)
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            g = g * (tape.pre_relu[i] > 0.0)
        d_w, d_b, g = _conv_backward(tape.inputs[i], net.weights[i], g)
        d_ws[i] = d_w
        d_bs[i] = d_b
    return d_ws, d_bs


def sample_patch_pairs(
    gt_left: np.ndarray,
    d_max: int,
    n_pairs: int,
    rng: np.random.Generator,
    min_negative_offset: int = 2,
    max_negative_offset: int = 6,
) -> list[tuple[int, int, int, int]]:
    """Sample (y, x, x_pos, x_neg) tuples for hinge pretraining.

    Positions have valid integer ground truth and in-image positive and
    negative right-side columns; the negative offset is drawn uniformly
    from +-[min_negative_offset, max_negative_offset] around the true
    match.
    """
    h, w = gt_left.shape
    ys, xs = np.nonzero(gt_left >= 0)
    d = np.rint(gt_left[ys, xs]).astype(np.int64)
    keep = (d < d_max) & (xs - d >= 0)
    ys, xs, d = ys[keep], xs[keep], d[keep]
    if ys.size == 0:
        raise ParameterError("no pixels with usable ground truth")
    pairs = []
    guard = 0
    while len(pairs) < n_pairs and guard < n_pairs * 50:
        guard += 1
        i = int(rng.integers(0, ys.size))
        y, x, x_pos = int(ys[i]), int(xs[i]), int(xs[i] - d[i])
        off = int(rng.integers(min_negative_offset, max_negative_offset + 1))
        if rng.integers(0, 2):
            off = -off
        x_neg = x_pos + off
        if 0 <= x_neg < w:
            pairs.append((y, x, x_pos, x_neg))
    if not pairs:
        raise ParameterError("could not sample any valid patch pairs")
    return pairs


def hinge_pretrain(
    net: SiameseNet,
    images: list,
    margin: float = DEFAULT_MARGIN,
    epochs: int = 30,
    pairs_per_image: int = 256,
    learning_rate: float = 0.003,
    seed: int = 0,
) -> tuple[SiameseNet, list]:
    """Train descriptors with a match/non-match hinge loss.

    ``images`` is a list of (left, right, gt_left, d_max) tuples. Each
    epoch resamples pairs, accumulates hinge gradients through both
    branches (shared weights), and applies one Adagrad step per image.
    Returns the net (updated in place) and the per-epoch mean losses.
    """
    from .optim import AdagradState, adagrad_step

    if not images:
        raise ParameterError("empty pretraining set")
    rng = np.random.default_rng(seed)
    params = list(net.weights) + list(net.biases)
    state = AdagradState.for_params(params)
    history = []
    for _ in range(epochs):
        losses = []
        for left, right, gt_left, d_max in images:
            pairs = sample_patch_pairs(gt_left, d_max, pairs_per_image, rng)
            tape_l, tape_r = NetTape(), NetTape()
            desc_l = describe_forward(net, left, tape_l).values
            desc_r = describe_forward(net, right, tape_r).values

            g_l = np.zeros_like(desc_l)
            g_r = np.zeros_like(desc_r)
            total = 0.0
            for y, x, x_pos, x_neg in pairs:
                pl = desc_l[y, x]
                s_pos = float(pl @ desc_r[y, x_pos])
                s_neg = float(pl @ desc_r[y, x_neg])
                h = margin + s_neg - s_pos
                if h > 0.0:
                    total += h
                    g_l[y, x] += desc_r[y, x_neg] - desc_r[y, x_pos]
                    g_r[y, x_neg] += pl
                    g_r[y, x_pos] -= pl
            losses.append(total / len(pairs))

            scale = 1.0 / len(pairs)
            dw_l, db_l = describe_backward(net, tape_l, g_l * scale)
            dw_r, db_r = describe_backward(net, tape_r, g_r * scale)
            grads = [a + b for a, b in zip(dw_l, dw_r)] + [
                a + b for a, b in zip(db_l, db_r)
            ]
            adagrad_step(params, grads, state, learning_rate)
        history.append(float(np.mean(losses)))
    return net, history
