import numpy as np
import pytest

from crfstereo.errors import EmptyMaskError, ParameterError
from crfstereo.meanfield import CrfParams, init_compatibility
from crfstereo.sgm import SgmConfig
from crfstereo.siamese import create_net
from crfstereo.synthetic import StereoSample, make_stereogram
from crfstereo.training import (
    CALIBRATION_SUBSET,
    INFER_MODES,
    TRAIN_LOG_HEADER,
    StereoModel,
    TrainLogRow,
    build_training_mask,
    calibration_objective,
    infer_pair,
    params_from_point,
    train_schedule,
)
from crfstereo.volume import INVALID_DISPARITY, argmax_disparity


def _flat_sample(h=3, w=10, gt=2.0):
    left = np.full((h, w), 100.0)
    right = np.full((h, w), 100.0)
    gt_left = np.full((h, w), gt)
    gt_right = np.full((h, w), gt)
    mask = np.ones((h, w), dtype=bool)
    return StereoSample(
        left=left, right=right, gt_left=gt_left, gt_right=gt_right, mask=mask
    )


def _small_model(d_max=4, iterations=2, seed=0):
    net = create_net(seed, in_channels=1, channels=6, layers=2)
    crf = params_from_point([40.0, 0.3, 3.0, 1.5, 0.01], d_max, iterations)
    return StereoModel(net=net, crf=crf)


# -- training mask ----------------------------------------------------------


def test_mask_requires_match_inside_right_image():
    s = _flat_sample()
    m = build_training_mask(s, d_max=4)
    assert not m[:, :2].any()  # match column x - 2 must be >= 0
    assert m[:, 2:].all()


def test_mask_drops_gt_at_or_above_d_max():
    s = _flat_sample()
    s.gt_left[1, 7] = 4.0
    s.gt_right[1, 3] = 4.0  # consistency partner at column 7 - 4
    m = build_training_mask(s, d_max=4)
    assert not m[1, 7]
    assert build_training_mask(s, d_max=5)[1, 7]


def test_mask_drops_invalid_and_premasked_pixels():
    s = _flat_sample()
    s.gt_left[2, 9] = INVALID_DISPARITY
    s.mask[2, 4] = False
    m = build_training_mask(s, d_max=4)
    assert not m[2, 9]
    assert not m[2, 4]


def test_mask_left_right_consistency():
    s = _flat_sample()
    s.gt_right[0, 3] = 5.0  # partner of left pixel (0, 5)
    m = build_training_mask(s, d_max=4)
    assert not m[0, 5]
    assert m[0, 6]
    # within tolerance passes
    s2 = _flat_sample()
    s2.gt_right[0, 3] = 2.4
    assert build_training_mask(s2, d_max=4)[0, 5]
    # check can be disabled, or is skipped without a right ground truth
    assert build_training_mask(s, d_max=4, exclude_occluded=False)[0, 5]
    s3 = StereoSample(
        left=s.left, right=s.right, gt_left=s.gt_left, gt_right=None, mask=s.mask
    )
    assert build_training_mask(s3, d_max=4)[0, 5]


def test_mask_intensity_ceiling():
    s = _flat_sample()
    s.left[0, 8] = 255.0
    m = build_training_mask(s, d_max=4)
    assert not m[0, 8]
    assert build_training_mask(s, d_max=4, exclude_overexposed=False)[0, 8]
    assert build_training_mask(s, d_max=4, intensity_ceiling=256.0)[0, 8]
    # saturation in any channel of a color image counts
    rgb = np.repeat(s.left[:, :, None], 3, axis=2)
    rgb[0, 8] = (10.0, 255.0, 10.0)
    s_rgb = StereoSample(
        left=rgb,
        right=np.repeat(s.right[:, :, None], 3, axis=2),
        gt_left=s.gt_left,
        gt_right=s.gt_right,
        mask=s.mask,
    )
    assert not build_training_mask(s_rgb, d_max=4)[0, 8]


def test_mask_on_generated_sample_is_subset_of_sample_mask():
    s = make_stereogram(4, h=24, w=32, d_max=6, shapes=2)
    m = build_training_mask(s, d_max=6)
    assert m.any()
    assert not (m & ~s.mask).any()


# -- inference --------------------------------------------------------------


@pytest.fixture(scope="module")
def pair_and_model():
    s = make_stereogram(2, h=24, w=32, d_max=4, shapes=1)
    return s, _small_model(d_max=4, iterations=2)


def test_infer_rejects_bad_mode_and_post(pair_and_model):
    s, model = pair_and_model
    with pytest.raises(ParameterError):
        infer_pair(model, s.left, s.right, mode="viterbi")
    with pytest.raises(ParameterError):
        infer_pair(model, s.left, s.right, post="median")


def test_infer_zero_iterations_matches_raw_argmax(pair_and_model):
    s, model = pair_and_model
    res = infer_pair(model, s.left, s.right, mode="crf", iterations=0)
    raw = argmax_disparity(res.volume)
    assert np.array_equal(res.disparity, raw)


def test_infer_modes_shapes_and_beliefs(pair_and_model):
    s, model = pair_and_model
    for mode in INFER_MODES:
        res = infer_pair(model, s.left, s.right, mode=mode)
        assert res.disparity.shape == s.left.shape
        assert res.volume is not None
        d = res.disparity
        assert ((d >= 0) & (d < 4)).all()
        if mode == "sgm":
            assert res.beliefs is None
        else:
            assert res.beliefs is not None
            assert res.beliefs.normalized


def test_infer_full_postprocess(pair_and_model):
    s, model = pair_and_model
    res = infer_pair(
        model, s.left, s.right, mode="crf", post="full", sgm_config=SgmConfig(1.0, 4.0)
    )
    d = res.disparity
    assert d.shape == s.left.shape
    ok = d != INVALID_DISPARITY
    assert ok.any()
    assert (d[ok] >= 0).all() and (d[ok] < 4).all()


def test_infer_deterministic(pair_and_model):
    s, model = pair_and_model
    a = infer_pair(model, s.left, s.right, mode="crf+sgm", post="full")
    b = infer_pair(model, s.left, s.right, mode="crf+sgm", post="full")
    assert np.array_equal(a.disparity, b.disparity)


# -- training schedule ------------------------------------------------------


def test_train_rejects_empty_inputs():
    model = _small_model()
    with pytest.raises(ParameterError):
        train_schedule(model, [])
    s = _flat_sample(gt=9.0)  # everything at or above d_max
    with pytest.raises(EmptyMaskError):
        train_schedule(model, [s], phase1_epochs=1, phase2_epochs=0)


def test_phase_one_never_touches_the_net():
    s = make_stereogram(3, h=24, w=32, d_max=4, shapes=1)
    model = _small_model(d_max=4, iterations=1)
    before_w = [w.copy() for w in model.net.weights]
    before_b = [b.copy() for b in model.net.biases]
    w_app_before = model.crf.w_appearance.copy()
    _, rows = train_schedule(model, [s], phase1_epochs=2, phase2_epochs=0)
    for w0, w1 in zip(before_w, model.net.weights):
        assert np.array_equal(w0, w1)
    for b0, b1 in zip(before_b, model.net.biases):
        assert np.array_equal(b0, b1)
    assert not np.array_equal(w_app_before, model.crf.w_appearance)
    assert len(rows) == 2


def test_phase_two_updates_the_net():
    s = make_stereogram(3, h=24, w=32, d_max=4, shapes=1)
    model = _small_model(d_max=4, iterations=1)
    before_w = [w.copy() for w in model.net.weights]
    train_schedule(model, [s], phase1_epochs=0, phase2_epochs=1)
    changed = any(
        not np.array_equal(w0, w1) for w0, w1 in zip(before_w, model.net.weights)
    )
    assert changed


def test_epoch_numbering_and_phases():
    s = make_stereogram(3, h=16, w=24, d_max=4, shapes=0)
    model = _small_model(d_max=4, iterations=1)
    _, rows = train_schedule(model, [s], phase1_epochs=2, phase2_epochs=2)
    assert [r.epoch for r in rows] == [1, 2, 3, 4]
    assert [r.phase for r in rows] == [1, 1, 2, 2]
    for r in rows:
        assert 0.0 <= r.mean_err3 <= 1.0
        assert r.wall_time >= 0.0
        assert np.isfinite(r.mean_loss)


def test_training_reduces_loss():
    samples = [make_stereogram(seed, h=24, w=32, d_max=4, shapes=1) for seed in (5, 6)]
    model = _small_model(d_max=4, iterations=2)
    _, rows = train_schedule(
        model, samples, phase1_epochs=8, phase2_epochs=0, seed=0
    )
    assert rows[-1].mean_loss < rows[0].mean_loss


def test_log_row_csv_format():
    assert TRAIN_LOG_HEADER == "epoch,phase,mean_loss,mean_err3,wall_time"
    row = TrainLogRow(epoch=3, phase=2, mean_loss=0.5, mean_err3=0.25, wall_time=1.2345)
    assert row.to_csv() == "3,2,0.5,0.25,1.234"


# -- calibration ------------------------------------------------------------


def test_params_from_point_fields():
    p = params_from_point([40.0, 0.3, 3.0, 1.5, 0.01], d_max=5, iterations=2)
    assert p.widths.theta_alpha == 40.0
    assert p.widths.theta_beta == 0.3
    assert p.widths.theta_gamma == 3.0
    assert np.array_equal(p.w_appearance, np.full(5, 1.5))
    assert np.array_equal(p.w_spatial, np.full(5, 0.01))
    assert np.array_equal(p.compatibility, init_compatibility(5))
    assert p.iterations == 2
    with pytest.raises(ParameterError):
        params_from_point([1.0, 2.0, 3.0], d_max=5, iterations=2)


def test_calibration_objective_is_deterministic_and_bounded():
    samples = [make_stereogram(seed, h=24, w=32, d_max=4, shapes=1) for seed in (7, 8)]
    net = create_net(0, in_channels=1, channels=6, layers=2)
    obj = calibration_objective(net, samples, d_max=4, iterations=1)
    point = [40.0, 0.3, 3.0, 1.5, 0.01]
    v1 = obj(point)
    v2 = obj(point)
    assert v1 == v2
    assert 0.0 <= v1 <= 1.0
    # a subset of one image still yields a usable objective
    obj1 = calibration_objective(net, samples, d_max=4, iterations=1, subset=1)
    assert 0.0 <= obj1(point) <= 1.0
    assert CALIBRATION_SUBSET == 20


def test_calibration_objective_requires_valid_pixels():
    s = _flat_sample(gt=9.0)
    net = create_net(0, in_channels=1, channels=6, layers=2)
    with pytest.raises(EmptyMaskError):
        calibration_objective(net, [s], d_max=4)
