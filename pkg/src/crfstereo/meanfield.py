"""Unrolled mean-field inference for a densely connected pairwise CRF.

One iteration transforms a per-pixel label distribution Q in five stages:

1. *Message passing*: filter Q under the appearance and smoothness
   kernels, excluding each pixel's own contribution, and divide by the
   per-pixel kernel mass (the bank's normalizer) so messages are convex
   averages of the neighbours' beliefs. Pixels with no effective
   neighbours receive zero messages.
2. *Kernel weighting*: per-label weight vectors scale each kernel's
   message channel-wise; the two kernels are summed.
3. *Compatibility transform*: the weighted message is mixed across
   labels by the compatibility matrix.
4. *Unary addition*: the pairwise term is subtracted from the unary
   similarity scores.
5. *Renormalization*: softmax per pixel.

The whole stack is a deterministic differentiable program; the backward
pass replays the recorded intermediates in reverse and hand-applies each
stage's adjoint. Gradients flow to the unary volume (which feeds every
iteration as well as the initial softmax), to both kernel-weight
vectors, and to the compatibility matrix. The Gaussian widths are
calibration-only inputs and receive no gradient.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    FormatError,
    NumericError,
    ParameterError,
    ShapeError,
    TapeError,
)
from .features import KernelWidths
from .filtering import NORMALIZER_FLOOR, FilterBank
from .volume import (
    CostVolume,
    GradientTape,
    softmax_backward,
    softmax_over_disparities,
)

#: Calibrated default parameter values (widths and kernel weights).
DEFAULT_THETA_ALPHA = 18.65
DEFAULT_THETA_BETA = 4.39
DEFAULT_THETA_GAMMA = 2.13
DEFAULT_W_APPEARANCE = 18.68
DEFAULT_W_SPATIAL = 68.68
DEFAULT_ITERATIONS = 5


def init_compatibility(d_max: int) -> np.ndarray:
    """Banded compatibility init: -1 on the diagonal, rising by 0.2 per
    label of disparity difference, zero beyond a difference of 4."""
    if d_max < 1:
        raise ParameterError(f"d_max must be >= 1, got {d_max}")
    idx = np.arange(d_max)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    mu = np.where(dist <= 4, -1.0 + 0.2 * dist, 0.0)
    return mu


@dataclass(frozen=True)
class CrfParams:
    """Trainable CRF parameters plus the fixed kernel widths.

    ``w_appearance`` and ``w_spatial`` weight each label channel of the
    corresponding kernel's message; cross-label mixing is carried solely
    by ``compatibility``. ``iterations`` is the unroll depth T; T = 0
    reduces the CRF to softmax over the unaries.
    """

    widths: KernelWidths
    w_appearance: np.ndarray
    w_spatial: np.ndarray
    compatibility: np.ndarray
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self):
        w1 = np.array(self.w_appearance, dtype=np.float64)
        w2 = np.array(self.w_spatial, dtype=np.float64)
        mu = np.array(self.compatibility, dtype=np.float64)
        if w1.ndim != 1 or w2.ndim != 1:
            raise ShapeError("kernel weights must be 1-D vectors")
        d = w1.shape[0]
        if w2.shape[0] != d:
            raise ShapeError("kernel weight vectors must share length")
        if mu.shape != (d, d):
            raise ShapeError(
                f"compatibility must be ({d}, {d}), got {mu.shape}"
            )
        for name, arr in (("w_appearance", w1), ("w_spatial", w2), ("compatibility", mu)):
            if not np.isfinite(arr).all():
                raise ParameterError(f"{name} contains non-finite entries")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ParameterError(
                f"iterations must be a non-negative integer, got {self.iterations}"
            )
        for arr in (w1, w2, mu):
            arr.flags.writeable = False
        object.__setattr__(self, "w_appearance", w1)
        object.__setattr__(self, "w_spatial", w2)
        object.__setattr__(self, "compatibility", mu)
        object.__setattr__(self, "iterations", int(self.iterations))

    @property
    def d_max(self) -> int:
        return self.w_appearance.shape[0]

    @classmethod
    def calibrated(cls, d_max: int, iterations: int = DEFAULT_ITERATIONS) -> "CrfParams":
        """Default parameter point: calibrated widths, uniform kernel
        weights, banded compatibility."""
        return cls(
            widths=KernelWidths(
                DEFAULT_THETA_ALPHA, DEFAULT_THETA_BETA, DEFAULT_THETA_GAMMA
            ),
            w_appearance=np.full(d_max, DEFAULT_W_APPEARANCE),
            w_spatial=np.full(d_max, DEFAULT_W_SPATIAL),
            compatibility=init_compatibility(d_max),
            iterations=iterations,
        )


@dataclass
class CrfGradients:
    """Adjoints produced by one backward replay."""

    d_unary: np.ndarray
    d_w_appearance: np.ndarray
    d_w_spatial: np.ndarray
    d_compatibility: np.ndarray


def _messages(bank: FilterBank, q_flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized self-excluded messages under both kernels."""
    out = []
    for kind in ("appearance", "smoothness"):
        raw = bank.apply(kind, q_flat)
        n = bank.normalizer(kind)
        ok = n > NORMALIZER_FLOOR
        msg = np.where(ok[:, None], raw / np.where(ok, n, 1.0)[:, None], 0.0)
        out.append(msg)
    return out[0], out[1]


def _resolve_bank(
    image: np.ndarray | FilterBank | None,
    params: CrfParams,
    method: str,
) -> FilterBank:
    if isinstance(image, FilterBank):
        return image
    if image is None:
        raise ParameterError("an image or a prebuilt FilterBank is required")
    return FilterBank(image, params.widths, method=method)


def meanfield_forward(
    unary_scores: CostVolume,
    image: np.ndarray | FilterBank,
    params: CrfParams,
    tape: GradientTape | None = None,
    method: str = "lattice",
) -> CostVolume:
    """Run T unrolled mean-field iterations; returns the final beliefs.

    ``image`` may be a raw image array or a :class:`FilterBank` built
    from it (reusing a bank amortizes lattice construction across calls).
    Passing a ``tape`` records every intermediate needed by
    :func:`meanfield_backward`.
    """
    u = unary_scores.values
    h, w, d = u.shape
    if d != params.d_max:
        raise ShapeError(
            f"volume has {d} disparity bins but params expect {params.d_max}"
        )
    bank = _resolve_bank(image, params, method)
    if (bank.height, bank.width) != (h, w):
        raise ShapeError(
            f"filter bank is {bank.height}x{bank.width}, volume is {h}x{w}"
        )

    n = h * w
    u_flat = u.reshape(n, d)
    q = softmax_over_disparities(unary_scores).values.reshape(n, d)

    if tape is not None:
        tape.q0 = q
        tape.unary = u_flat
        tape.bank = bank
        tape.params_snapshot = params
        tape.records = []
        tape.consumed = False

    w1 = params.w_appearance
    w2 = params.w_spatial
    mu = params.compatibility
    for t in range(params.iterations):
        m1, m2 = _messages(bank, q)
        weighted = w1[None, :] * m1 + w2[None, :] * m2
        pairwise = weighted @ mu.T
        scores = u_flat - pairwise
        q_next = softmax_over_disparities(
            CostVolume(scores.reshape(h, w, d))
        ).values.reshape(n, d)
        if not np.isfinite(q_next).all():
            raise NumericError(f"non-finite beliefs at iteration {t + 1}")
        if tape is not None:
            tape.records.append((q, m1, m2, q_next))
        q = q_next

    return CostVolume(q.reshape(h, w, d).copy(), normalized=True)


def meanfield_backward(
    grad_out: CostVolume,
    tape: GradientTape,
    params: CrfParams,
) -> CrfGradients:
    """Reverse-mode replay of a taped forward pass.

    The unary volume feeds the initial softmax and every iteration's
    score sum, so its gradient accumulates across all uses.
    """
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward pass")
    if tape.q0 is None or tape.unary is None or tape.bank is None:
        raise TapeError("tape does not hold a recorded forward pass")
    if tape.params_snapshot is not params:
        raise TapeError("params do not match the taped forward pass")
    if len(tape.records) != params.iterations:
        raise TapeError(
            f"tape records {len(tape.records)} iterations, params expect "
            f"{params.iterations}"
        )
    g = grad_out.values
    n, d = tape.unary.shape
    if g.shape[0] * g.shape[1] != n or g.shape[2] != d:
        raise TapeError("grad_out shape does not match the taped forward pass")

    bank: FilterBank = tape.bank
    w1 = params.w_appearance
    w2 = params.w_spatial
    mu = params.compatibility

    norms = {}
    for kind in ("appearance", "smoothness"):
        nn = bank.normalizer(kind)
        ok = nn > NORMALIZER_FLOOR
        norms[kind] = (ok, np.where(ok, nn, 1.0))

    g_q = g.reshape(n, d).astype(np.float64, copy=True)
    d_unary = np.zeros((n, d))
    d_w1 = np.zeros(d)
    d_w2 = np.zeros(d)
    d_mu = np.zeros((d, d))

    for q_prev, m1, m2, q_next in reversed(tape.records):
        g_scores = softmax_backward(g_q, q_next)
        d_unary += g_scores
        g_pair = -g_scores
        weighted = w1[None, :] * m1 + w2[None, :] * m2
        # pairwise = weighted @ mu.T
        d_mu += g_pair.T @ weighted
        g_weighted = g_pair @ mu
        d_w1 += (g_weighted * m1).sum(axis=0)
        d_w2 += (g_weighted * m2).sum(axis=0)
        g_q = np.zeros((n, d))
        for kind, g_msg in (
            ("appearance", g_weighted * w1[None, :]),
            ("smoothness", g_weighted * w2[None, :]),
        ):
            ok, nn = norms[kind]
            g_raw = np.where(ok[:, None], g_msg / nn[:, None], 0.0)
            g_q += bank.apply(kind, g_raw, transpose=True)

    d_unary += softmax_backward(g_q, tape.q0)
    tape.consumed = True
    return CrfGradients(
        d_unary=d_unary.reshape(grad_out.values.shape),
        d_w_appearance=d_w1,
        d_w_spatial=d_w2,
        d_compatibility=d_mu,
    )


def compute_energy(
    labeling: np.ndarray,
    unary_scores: CostVolume,
    image: np.ndarray,
    params: CrfParams,
) -> float:
    """Exact CRF energy of one integer labeling; O(N^2), diagnostics only.

    E = sum_i -unary(i, x_i)
      + sum_{i<j} mu(x_i, x_j) * (w1_ij * k_app(i,j) + w2_ij * k_sp(i,j)),

    where each kernel weight is the mean of the two pixels' per-label
    weights, so the pairwise term stays symmetric under label exchange.
    """
    u = unary_scores.values
    h, w, d = u.shape
    lab = np.asarray(labeling)
    if lab.shape != (h, w):
        raise ShapeError(f"labeling must be ({h}, {w}), got {lab.shape}")
    lab = lab.astype(np.int64)
    if lab.min() < 0 or lab.max() >= d:
        raise ParameterError(f"labels must lie in [0, {d})")

    bank = FilterBank(image, params.widths, method="bruteforce")
    fa = bank.features("appearance")
    fs = bank.features("smoothness")
    x = lab.reshape(-1)
    n = x.shape[0]

    unary_term = -u.reshape(n, d)[np.arange(n), x].sum()

    k_app = np.exp(-0.5 * ((fa[:, None, :] - fa[None, :, :]) ** 2).sum(-1))
    k_sp = np.exp(-0.5 * ((fs[:, None, :] - fs[None, :, :]) ** 2).sum(-1))
    w1m = 0.5 * (params.w_appearance[x][:, None] + params.w_appearance[x][None, :])
    w2m = 0.5 * (params.w_spatial[x][:, None] + params.w_spatial[x][None, :])
    mu_pair = params.compatibility[x[:, None], x[None, :]]
    pair = mu_pair * (w1m * k_app + w2m * k_sp)
    iu = np.triu_indices(n, k=1)
    return float(unary_term + pair[iu].sum())


def params_to_text(params: CrfParams) -> str:
    """Flat key-value serialization, one key per line, exact round-trip."""
    lines = [
        f"theta_alpha {params.widths.theta_alpha!r}",
        f"theta_beta {params.widths.theta_beta!r}",
        f"theta_gamma {params.widths.theta_gamma!r}",
        f"iterations {params.iterations}",
        "w_appearance " + " ".join(repr(float(v)) for v in params.w_appearance),
        "w_spatial " + " ".join(repr(float(v)) for v in params.w_spatial),
        "compatibility " + " ".join(repr(float(v)) for v in params.compatibility.ravel()),
    ]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> CrfParams:
    """Parse the output of :func:`params_to_text`."""
    fields: dict[str, list[str]] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key, vals = parts[0], parts[1:]
        if key in fields:
            raise FormatError(f"duplicate key {key!r} on line {ln}")
        if not vals:
            raise FormatError(f"key {key!r} on line {ln} has no values")
        fields[key] = vals

    required = (
        "theta_alpha", "theta_beta", "theta_gamma",
        "iterations", "w_appearance", "w_spatial", "compatibility",
    )
    missing = [k for k in required if k not in fields]
    if missing:
        raise FormatError(f"missing keys: {', '.join(missing)}")
    extra = [k for k in fields if k not in required]
    if extra:
        raise FormatError(f"unknown keys: {', '.join(extra)}")

    def scalar(key: str) -> float:
        if len(fields[key]) != 1:
            raise FormatError(f"key {key!r} must have exactly one value")
        try:
            return float(fields[key][0])
        except ValueError as exc:
            raise FormatError(f"bad float for {key!r}: {fields[key][0]!r}") from exc

    def vector(key: str) -> np.ndarray:
        try:
            return np.array([float(v) for v in fields[key]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"bad float in {key!r}") from exc

    iters_raw = fields["iterations"]
    if len(iters_raw) != 1 or not iters_raw[0].lstrip("-").isdigit():
        raise FormatError(f"iterations must be a single integer, got {iters_raw}")
    iterations = int(iters_raw[0])

    w1 = vector("w_appearance")
    w2 = vector("w_spatial")
    mu_flat = vector("compatibility")
    d = w1.shape[0]
    if mu_flat.shape[0] != d * d:
        raise FormatError(
            f"compatibility has {mu_flat.shape[0]} values, expected {d * d}"
        )
    try:
        return CrfParams(
            widths=KernelWidths(scalar("theta_alpha"), scalar("theta_beta"),
                                scalar("theta_gamma")),
            w_appearance=w1,
            w_spatial=w2,
            compatibility=mu_flat.reshape(d, d),
            iterations=iterations,
        )
    except (ParameterError, ShapeError) as exc:
        raise FormatError(f"invalid parameter values: {exc}") from exc
