"""Disparity error rates over validity masks.

The error rule is the plain threshold count: a valid pixel is wrong at
threshold tau when |pred - gt| > tau. Rates and the mean absolute error
aggregate across images weighted by valid-pixel count, so the aggregate
equals the statistic over the pooled pixels.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMaskError, ParameterError

DEFAULT_THRESHOLDS = (1.0, 3.0)


@dataclass
class EvalReport:
    """Error rates and MAE per image and pooled, keyed by threshold."""

    thresholds: tuple
    per_image: list  # one dict {tau: rate} per image
    per_image_mae: list
    valid_counts: list  # valid pixels per image
    aggregate: dict = field(default_factory=dict)
    aggregate_mae: float = 0.0
    wall_times: dict = field(default_factory=dict)  # stage name -> seconds

    def to_csv(self) -> str:
        header = ["image", "valid"] + [f"err>{t:g}" for t in self.thresholds]
        header.append("mae")
        lines = [",".join(header)]
        rows = zip(self.per_image, self.per_image_mae, self.valid_counts)
        for i, (rates, mae, n) in enumerate(rows):
            row = [str(i), str(n)] + [repr(rates[t]) for t in self.thresholds]
            row.append(repr(mae))
            lines.append(",".join(row))
        agg = ["aggregate", str(sum(self.valid_counts))]
        agg += [repr(self.aggregate[t]) for t in self.thresholds]
        agg.append(repr(self.aggregate_mae))
        lines.append(",".join(agg))
        # Wall times stay out of the CSV so reports are bit-reproducible.
        return "\n".join(lines) + "\n"


def error_rate(
    pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, threshold: float
) -> float:
    """Fraction of valid pixels with |pred - gt| > threshold."""
    if pred.shape != gt.shape or pred.shape != mask.shape:
        raise ParameterError(
            f"shape mismatch: pred {pred.shape}, gt {gt.shape}, mask {mask.shape}"
        )
    m = mask.astype(bool)
    n = int(m.sum())
    if n == 0:
        raise EmptyMaskError("no valid pixels")
    wrong = np.abs(pred[m] - gt[m]) > threshold
    return float(wrong.sum()) / n


def evaluate(
    preds,
    gts,
    masks,
    thresholds=DEFAULT_THRESHOLDS,
) -> EvalReport:
    """Score one or more images; aggregate weights by valid-pixel count.

    Accepts single arrays or equal-length sequences of arrays.
    """
    if isinstance(preds, np.ndarray):
        preds, gts, masks = [preds], [gts], [masks]
    preds, gts, masks = list(preds), list(gts), list(masks)
    if not (len(preds) == len(gts) == len(masks)):
        raise ParameterError("pred/gt/mask sequences differ in length")
    if len(preds) == 0:
        raise EmptyMaskError("no images to evaluate")
    thresholds = tuple(float(t) for t in thresholds)

    per_image = []
    per_mae = []
    counts = []
    wrong_total = {t: 0 for t in thresholds}
    abs_total = 0.0
    n_total = 0
    for p, g, m in zip(preds, gts, masks):
        rates = {}
        mb = m.astype(bool)
        n = int(mb.sum())
        for t in thresholds:
            r = error_rate(p, g, m, t)
            rates[t] = r
            wrong_total[t] += int(round(r * n))
        if n == 0:
            raise EmptyMaskError("no valid pixels")
        abs_err = float(np.abs(p[mb] - g[mb]).sum())
        per_image.append(rates)
        per_mae.append(abs_err / n)
        counts.append(n)
        abs_total += abs_err
        n_total += n
    aggregate = {t: wrong_total[t] / n_total for t in thresholds}
    return EvalReport(
        thresholds=thresholds,
        per_image=per_image,
        per_image_mae=per_mae,
        valid_counts=counts,
        aggregate=aggregate,
        aggregate_mae=abs_total / n_total,
    )
