import struct

import numpy as np
import pytest
from PIL import Image as PilImage

from crfstereo.dataio import (
    KITTI_SCALE,
    list_samples,
    load_checkpoint,
    load_crf_params,
    load_kitti_disparity,
    load_net,
    load_pfm,
    read_sample,
    sample_paths,
    save_checkpoint,
    save_crf_params,
    save_kitti_disparity,
    save_net,
    save_pfm,
    write_sample,
)
from crfstereo.errors import FormatError, ParameterError
from crfstereo.meanfield import CrfParams
from crfstereo.siamese import create_net
from crfstereo.synthetic import make_stereogram
from crfstereo.volume import INVALID_DISPARITY


# -- KITTI disparity PNG ----------------------------------------------------


def test_kitti_raw_decoding(tmp_path):
    raw = np.array([[0, 256], [16960, 1]], dtype=np.uint16)
    p = tmp_path / "d.png"
    PilImage.fromarray(raw).save(p, format="PNG")
    disp = load_kitti_disparity(p)
    assert disp[0, 0] == INVALID_DISPARITY  # raw 0 means missing
    assert disp[0, 1] == 1.0
    assert disp[1, 0] == 66.25
    assert disp[1, 1] == 1.0 / 256.0


def test_kitti_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    disp = rng.integers(0, 60 * 256, size=(5, 7)).astype(np.float64) / KITTI_SCALE
    disp[0, 0] = INVALID_DISPARITY
    disp[1, 1] = np.nan
    p = tmp_path / "d.png"
    save_kitti_disparity(p, disp)
    back = load_kitti_disparity(p)
    expected = disp.copy()
    # invalid and zero-disparity pixels collapse to raw 0 on write
    expected[0, 0] = INVALID_DISPARITY
    expected[1, 1] = INVALID_DISPARITY
    expected[disp == 0.0] = INVALID_DISPARITY
    assert np.array_equal(back, expected)


def test_kitti_zero_disparity_becomes_invalid(tmp_path):
    p = tmp_path / "d.png"
    save_kitti_disparity(p, np.zeros((2, 2)))
    assert (load_kitti_disparity(p) == INVALID_DISPARITY).all()


def test_kitti_rejects_wrong_mode(tmp_path):
    p = tmp_path / "rgb.png"
    PilImage.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(p, format="PNG")
    with pytest.raises(FormatError):
        load_kitti_disparity(p)
    p2 = tmp_path / "gray8.png"
    PilImage.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(p2, format="PNG")
    with pytest.raises(FormatError):
        load_kitti_disparity(p2)


def test_kitti_save_validation(tmp_path):
    with pytest.raises(ParameterError):
        save_kitti_disparity(tmp_path / "x.png", np.zeros((2, 2, 3)))
    with pytest.raises(ParameterError):
        save_kitti_disparity(tmp_path / "x.png", np.full((2, 2), 300.0))


# -- PFM --------------------------------------------------------------------


def test_pfm_single_pixel(tmp_path):
    p = tmp_path / "one.pfm"
    with open(p, "wb") as f:
        f.write(b"Pf\n1 1\n-1.0\n")
        f.write(np.array([2.5], dtype="<f4").tobytes())
    r = load_pfm(p)
    assert r.shape == (1, 1)
    assert r[0, 0] == 2.5


def test_pfm_big_endian_positive_scale(tmp_path):
    p = tmp_path / "be.pfm"
    with open(p, "wb") as f:
        f.write(b"Pf\n2 1\n1.0\n")
        f.write(np.array([3.0, 4.0], dtype=">f4").tobytes())
    r = load_pfm(p)
    assert np.array_equal(r, [[3.0, 4.0]])


def test_pfm_rows_are_bottom_up(tmp_path):
    p = tmp_path / "rows.pfm"
    with open(p, "wb") as f:
        f.write(b"Pf\n1 2\n-1.0\n")
        # payload order: bottom row first
        f.write(np.array([10.0, 20.0], dtype="<f4").tobytes())
    r = load_pfm(p)
    assert r[0, 0] == 20.0
    assert r[1, 0] == 10.0


def test_pfm_color_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.uniform(0, 255, (3, 4, 3)).astype(np.float32).astype(np.float64)
    p = tmp_path / "c.pfm"
    save_pfm(p, img)
    back = load_pfm(p)
    assert back.shape == (3, 4, 3)
    assert np.array_equal(back, img)


def test_pfm_gray_round_trip_and_nan(tmp_path):
    img = np.array([[1.5, np.nan], [-2.0, 0.25]])
    p = tmp_path / "g.pfm"
    save_pfm(p, img)
    back = load_pfm(p)
    assert back[0, 1] == INVALID_DISPARITY  # non-finite collapses to sentinel
    assert back[0, 0] == 1.5
    assert back[1, 0] == -2.0
    assert back[1, 1] == 0.25


def test_pfm_format_errors(tmp_path):
    cases = {
        "magic.pfm": b"PX\n1 1\n-1.0\n" + b"\x00" * 4,
        "dims.pfm": b"Pf\n0 1\n-1.0\n",
        "scale.pfm": b"Pf\n1 1\n0\n" + b"\x00" * 4,
        "header.pfm": b"Pf\n1 abc\n-1.0\n",
        "payload.pfm": b"Pf\n2 2\n-1.0\n" + b"\x00" * 8,
        "empty.pfm": b"",
    }
    for name, blob in cases.items():
        p = tmp_path / name
        p.write_bytes(blob)
        with pytest.raises(FormatError):
            load_pfm(p)


def test_pfm_save_rejects_bad_rank(tmp_path):
    with pytest.raises(ParameterError):
        save_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 4)))


# -- checkpoint container ---------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    arrays = {
        "a": rng.normal(size=(3, 4)),
        "scalar": np.float64(1.25),
        "ints": np.arange(5, dtype=np.int64),
        "flag": np.array(True),
        "f32": rng.normal(size=(2,)).astype(np.float32),
    }
    p = tmp_path / "ck.bin"
    save_checkpoint(p, arrays)
    back = load_checkpoint(p)
    assert list(back) == list(arrays)
    for name, arr in arrays.items():
        got = back[name]
        assert got.dtype == np.asarray(arr).dtype
        assert got.shape == np.asarray(arr).shape
        assert np.array_equal(got, np.asarray(arr))


def test_checkpoint_zero_dim_array_stays_zero_dim(tmp_path):
    p = tmp_path / "ck.bin"
    save_checkpoint(p, {"x": np.array(3.5)})
    back = load_checkpoint(p)
    assert back["x"].shape == ()
    assert back["x"] == 3.5


def test_checkpoint_errors(tmp_path):
    good = tmp_path / "good.bin"
    save_checkpoint(good, {"x": np.arange(3.0)})
    blob = good.read_bytes()

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        load_checkpoint(bad_magic)

    bad_version = tmp_path / "version.bin"
    bad_version.write_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
    with pytest.raises(FormatError):
        load_checkpoint(bad_version)

    trailing = tmp_path / "trail.bin"
    trailing.write_bytes(blob + b"\x00")
    with pytest.raises(FormatError):
        load_checkpoint(trailing)

    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(blob[:-4])
    with pytest.raises(FormatError):
        load_checkpoint(truncated)


# -- network and CRF parameter files ---------------------------------------


def test_net_round_trip(tmp_path):
    net = create_net(seed=3, layers=3, channels=8)
    p = tmp_path / "net.ckpt"
    save_net(p, net)
    back = load_net(p)
    assert len(back.weights) == len(net.weights)
    for w0, w1 in zip(net.weights, back.weights):
        assert np.array_equal(w0, w1)
    for b0, b1 in zip(net.biases, back.biases):
        assert np.array_equal(b0, b1)
    assert back.normalize_output == net.normalize_output
    assert back.standardize_input == net.standardize_input


def test_net_loader_rejects_plain_checkpoint(tmp_path):
    p = tmp_path / "not_net.ckpt"
    save_checkpoint(p, {"x": np.zeros(2)})
    with pytest.raises(FormatError):
        load_net(p)


def test_crf_params_file_round_trip(tmp_path):
    params = CrfParams.calibrated(d_max=6)
    p = tmp_path / "crf.txt"
    save_crf_params(p, params)
    back = load_crf_params(p)
    assert np.array_equal(back.w_appearance, params.w_appearance)
    assert np.array_equal(back.w_spatial, params.w_spatial)
    assert back.iterations == params.iterations
    assert np.array_equal(back.compatibility, params.compatibility)
    assert np.array_equal(back.widths, params.widths)


# -- dataset directories ----------------------------------------------------


def test_sample_write_read_round_trip(tmp_path):
    s = make_stereogram(5, h=16, w=24, d_max=4, shapes=1)
    write_sample(tmp_path, 7, s)
    back = read_sample(tmp_path, 7)
    # images go through float32 PFM storage
    assert np.array_equal(back.left, s.left.astype(np.float32).astype(np.float64))
    assert np.array_equal(back.right, s.right.astype(np.float32).astype(np.float64))
    # synthetic ground truth is integer-valued, so 1/256 quantization is exact
    assert np.array_equal(back.gt_left, s.gt_left)
    assert np.array_equal(back.gt_right, s.gt_right)
    # read-back mask marks gt validity; occlusion is recomputed downstream
    assert back.mask.dtype == np.bool_
    assert back.mask.all()


def test_sample_paths_naming(tmp_path):
    paths = sample_paths(tmp_path, 12)
    assert paths["left"].endswith("0012_left.pfm")
    assert paths["right"].endswith("0012_right.pfm")
    assert paths["gt_left"].endswith("0012_gt_left.png")
    assert paths["gt_right"].endswith("0012_gt_right.png")


def test_list_samples_filters_and_sorts(tmp_path):
    s = make_stereogram(1, h=16, w=16, d_max=4, shapes=0)
    for idx in (3, 1, 10):
        write_sample(tmp_path, idx, s)
    (tmp_path / "junk.txt").write_text("x")
    (tmp_path / "12_left.pfm").write_bytes(b"")  # wrong width, ignored
    assert list_samples(tmp_path) == [1, 3, 10]
