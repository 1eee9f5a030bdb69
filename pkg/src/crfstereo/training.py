"""Model wrapper, training masks, the two-phase schedule, calibration.

A model is a descriptor network plus CRF parameters. One training step
runs describe -> join -> mean-field on a single image pair, evaluates
the masked loss (plus entropy penalty) on the beliefs, and replays the
taped backward pass. Phase 1 updates only the CRF parameters (label
weights and compatibility); phase 2 continues through the join into the
network weights with its own smaller learning rate and fresh Adagrad
accumulators for every group.

Kernel widths are not gradient-trained; they come from Nelder-Mead
calibration over the five scalars (three widths plus one scalar per
kernel weight vector), scored by 3-pixel error on a fixed image subset.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyMaskError, ParameterError
from .features import KernelWidths
from .filtering import FilterBank
from .join import (
    join_backward_left,
    join_backward_right,
    join_forward,
    join_right_reference,
)
from .losses import cross_entropy, entropy_penalty, piecewise_linear
from .meanfield import (
    CrfParams,
    init_compatibility,
    meanfield_backward,
    meanfield_forward,
)
from .metrics import error_rate
from .optim import AdagradState, adagrad_step
from .sgm import (
    SgmConfig,
    argmin_disparity,
    postprocess,
    probabilities_to_cost,
    sgm_aggregate,
    similarity_to_cost,
)
from .siamese import NetTape, SiameseNet, describe_forward, describe_backward
from .synthetic import StereoSample
from .volume import CostVolume, GradientTape, argmax_disparity, valid_mask

DEFAULT_INTENSITY_CEILING = 250.0
DEFAULT_PHASE1_EPOCHS = 30
DEFAULT_PHASE2_EPOCHS = 50
DEFAULT_CRF_LEARNING_RATE = 0.1
DEFAULT_NET_LEARNING_RATE = 0.003
DEFAULT_ENTROPY_ALPHA = 0.1
CALIBRATION_SUBSET = 20

INFER_MODES = ("crf", "sgm", "crf+sgm")


@dataclass
class StereoModel:
    """Descriptor network plus CRF parameters."""

    net: SiameseNet
    crf: CrfParams


@dataclass
class TrainLogRow:
    epoch: int
    phase: int
    mean_loss: float
    mean_err3: float
    wall_time: float

    def to_csv(self) -> str:
        return (
            f"{self.epoch},{self.phase},{repr(self.mean_loss)},"
            f"{repr(self.mean_err3)},{self.wall_time:.3f}"
        )


TRAIN_LOG_HEADER = "epoch,phase,mean_loss,mean_err3,wall_time"


def build_training_mask(
    sample: StereoSample,
    d_max: int,
    exclude_occluded: bool = True,
    exclude_overexposed: bool = True,
    intensity_ceiling: float = DEFAULT_INTENSITY_CEILING,
    tolerance: float = 0.5,
) -> np.ndarray:
    """Pixels whose ground truth is usable as a training target.

    Requires a valid ground-truth value below d_max whose match column
    is inside the right image. Optionally drops pixels failing
    left-right ground-truth consistency (occlusions, where gt_right
    exists) and pixels at or above the intensity ceiling (sensor
    saturation leaves no texture to match).
    """
    gt = sample.gt_left
    h, w = gt.shape
    mask = sample.mask.astype(bool) & valid_mask(gt) & (gt < d_max)

    cols = np.arange(w)[None, :]
    match = cols - np.rint(gt).astype(np.int64)
    mask &= match >= 0

    if exclude_occluded and sample.gt_right is not None:
        match_c = np.clip(match, 0, w - 1)
        gt_r = np.take_along_axis(sample.gt_right, match_c, axis=1)
        mask &= np.abs(gt_r - gt) <= tolerance

    if exclude_overexposed:
        intensity = sample.left
        if intensity.ndim == 3:
            intensity = intensity.max(axis=2)
        mask &= intensity < intensity_ceiling

    return mask


@dataclass
class InferResult:
    disparity: np.ndarray
    beliefs: CostVolume | None = None
    volume: CostVolume | None = None


def infer_pair(
    model: StereoModel,
    left: np.ndarray,
    right: np.ndarray,
    mode: str = "crf",
    post: str = "none",
    method: str = "lattice",
    iterations: int | None = None,
    sgm_config: SgmConfig | None = None,
) -> InferResult:
    """Disparity for one pair under the chosen regularization arm.

    "crf" takes the belief argmax; "sgm" aggregates negated similarity
    from the raw volume; "crf+sgm" feeds -log beliefs to SGM. With
    post="full" the consistency/fill/subpixel/median chain runs, using
    a right-reference pass of the same arm for the consistency check.
    """
    if mode not in INFER_MODES:
        raise ParameterError(f"mode must be one of {INFER_MODES}, got {mode!r}")
    if post not in ("none", "full"):
        raise ParameterError(f"post must be 'none' or 'full', got {post!r}")
    params = model.crf
    if iterations is not None:
        params = replace(params, iterations=iterations)
    d_max = params.d_max
    config = sgm_config if sgm_config is not None else SgmConfig()

    dl = describe_forward(model.net, left)
    dr = describe_forward(model.net, right)

    def regularize(vol, ref_image):
        beliefs = None
        if mode == "sgm":
            costs = sgm_aggregate(similarity_to_cost(vol), config)
        else:
            beliefs = meanfield_forward(vol, ref_image, params, method=method)
            costs = probabilities_to_cost(beliefs)
            if mode == "crf+sgm":
                costs = sgm_aggregate(costs, config)
        return beliefs, costs, argmin_disparity(costs)

    vol = join_forward(dl, dr, d_max)
    beliefs, costs, disp = regularize(vol, left)
    if post == "none":
        return InferResult(disparity=disp, beliefs=beliefs, volume=vol)

    vol_r = join_right_reference(dl, dr, d_max)
    _, _, disp_r = regularize(vol_r, right)
    refined = postprocess(costs, disp, disp_r)
    return InferResult(disparity=refined, beliefs=beliefs, volume=vol)


def _loss_fn(kind: str):
    if kind == "cross-entropy":
        return cross_entropy
    if kind == "piecewise-linear":
        return piecewise_linear
    raise ParameterError(f"unknown loss kind {kind!r}")


def _train_step(
    model: StereoModel,
    sample: StereoSample,
    bank: FilterBank,
    mask: np.ndarray,
    loss_kind: str,
    entropy_alpha: float,
    train_net: bool,
):
    """Forward, loss, and backward for one pair; returns loss, err3, grads."""
    net = model.net
    d_max = model.crf.d_max
    tape_l = NetTape() if train_net else None
    tape_r = NetTape() if train_net else None
    dl = describe_forward(net, sample.left, tape_l)
    dr = describe_forward(net, sample.right, tape_r)
    vol = join_forward(dl, dr, d_max)

    tape = GradientTape()
    q = meanfield_forward(vol, bank, model.crf, tape=tape)
    loss, grad = _loss_fn(loss_kind)(q, sample.gt_left, mask)
    grad_q = grad.values
    if entropy_alpha > 0.0:
        pen, grad_pen = entropy_penalty(q, entropy_alpha, mask)
        loss += pen
        grad_q = grad_q + grad_pen.values

    err3 = error_rate(argmax_disparity(q).astype(float), sample.gt_left, mask, 3.0)
    crf_grads = meanfield_backward(CostVolume(grad_q), tape, model.crf)

    net_grads = None
    if train_net:
        g_vol = CostVolume(crf_grads.d_unary.reshape(vol.values.shape))
        g_left = join_backward_left(g_vol, dr)
        g_right = join_backward_right(g_vol, dl)
        dw_l, db_l = describe_backward(net, tape_l, g_left)
        dw_r, db_r = describe_backward(net, tape_r, g_right)
        net_grads = [a + b for a, b in zip(dw_l, dw_r)] + [
            a + b for a, b in zip(db_l, db_r)
        ]
    return loss, err3, crf_grads, net_grads


def train_schedule(
    model: StereoModel,
    samples: list,
    phase1_epochs: int = DEFAULT_PHASE1_EPOCHS,
    phase2_epochs: int = DEFAULT_PHASE2_EPOCHS,
    crf_learning_rate: float = DEFAULT_CRF_LEARNING_RATE,
    net_learning_rate: float = DEFAULT_NET_LEARNING_RATE,
    loss_kind: str = "cross-entropy",
    entropy_alpha: float = DEFAULT_ENTROPY_ALPHA,
    method: str = "lattice",
    seed: int = 0,
    mask_options: dict | None = None,
) -> tuple[StereoModel, list]:
    """Two-phase schedule: CRF-only epochs, then joint epochs.

    One image pair per optimizer step. Returns the trained model and
    one log row per epoch. Filter banks are built once per image (the
    widths stay fixed throughout) and reused across epochs.
    """
    if not samples:
        raise ParameterError("empty training set")
    d_max = model.crf.d_max
    opts = mask_options or {}
    masks = [build_training_mask(s, d_max, **opts) for s in samples]
    keep = [i for i, m in enumerate(masks) if m.any()]
    if not keep:
        raise EmptyMaskError("no sample has any valid training pixel")
    samples = [samples[i] for i in keep]
    masks = [masks[i] for i in keep]

    banks = [FilterBank(s.left, model.crf.widths, method=method) for s in samples]
    rng = np.random.default_rng(seed)
    rows = []

    def run_phase(phase: int, epochs: int, epoch_base: int) -> None:
        train_net = phase == 2
        w1 = model.crf.w_appearance.copy()
        w2 = model.crf.w_spatial.copy()
        mu = model.crf.compatibility.copy()
        crf_vals = [w1, w2, mu]
        crf_state = AdagradState.for_params(crf_vals, crf_learning_rate)
        if train_net:
            net_vals = list(model.net.weights) + list(model.net.biases)
            net_state = AdagradState.for_params(net_vals, net_learning_rate)
        for e in range(epochs):
            t0 = time.perf_counter()
            losses = []
            errs = []
            order = rng.permutation(len(samples))
            for i in order:
                loss, err3, crf_grads, net_grads = _train_step(
                    model,
                    samples[i],
                    banks[i],
                    masks[i],
                    loss_kind,
                    entropy_alpha,
                    train_net,
                )
                adagrad_step(
                    crf_vals,
                    [
                        crf_grads.d_w_appearance,
                        crf_grads.d_w_spatial,
                        crf_grads.d_compatibility,
                    ],
                    crf_state,
                )
                model.crf = replace(
                    model.crf,
                    w_appearance=w1,
                    w_spatial=w2,
                    compatibility=mu,
                )
                if train_net:
                    adagrad_step(net_vals, net_grads, net_state)
                losses.append(loss)
                errs.append(err3)
            rows.append(
                TrainLogRow(
                    epoch=epoch_base + e + 1,
                    phase=phase,
                    mean_loss=float(np.mean(losses)),
                    mean_err3=float(np.mean(errs)),
                    wall_time=time.perf_counter() - t0,
                )
            )

    run_phase(1, phase1_epochs, 0)
    run_phase(2, phase2_epochs, phase1_epochs)
    return model, rows


def params_from_point(point, d_max: int, iterations: int) -> CrfParams:
    """CrfParams from the five calibration scalars
    (theta_alpha, theta_beta, theta_gamma, w_appearance, w_spatial)."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (5,):
        raise ParameterError(f"calibration point must have 5 entries, got {p.shape}")
    return CrfParams(
        widths=KernelWidths(p[0], p[1], p[2]),
        w_appearance=np.full(d_max, p[3]),
        w_spatial=np.full(d_max, p[4]),
        compatibility=init_compatibility(d_max),
        iterations=iterations,
    )


def calibration_objective(
    net: SiameseNet,
    samples: list,
    d_max: int,
    iterations: int = 5,
    method: str = "lattice",
    subset: int = CALIBRATION_SUBSET,
    mask_options: dict | None = None,
):
    """3-pixel-error objective over the five CRF scalars.

    Descriptor volumes are computed once (the net is fixed during
    calibration); each evaluation rebuilds filter banks at the
    candidate widths. Images with empty masks are dropped up front.
    """
    opts = mask_options or {}
    vols = []
    kept = []
    for s in samples[:subset]:
        m = build_training_mask(s, d_max, **opts)
        if not m.any():
            continue
        dl = describe_forward(net, s.left)
        dr = describe_forward(net, s.right)
        vols.append(join_forward(dl, dr, d_max))
        kept.append((s, m))
    if not kept:
        raise EmptyMaskError("no calibration image has valid pixels")

    def objective(point) -> float:
        params = params_from_point(point, d_max, iterations)
        wrong = 0
        total = 0
        for vol, (s, m) in zip(vols, kept):
            q = meanfield_forward(vol, s.left, params, method=method)
            pred = argmax_disparity(q).astype(float)
            n = int(m.sum())
            wrong += int(round(error_rate(pred, s.gt_left, m, 3.0) * n))
            total += n
        return wrong / total

    return objective
