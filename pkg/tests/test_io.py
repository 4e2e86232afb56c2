import json

import numpy as np
import pytest
from PIL import Image

from polarcue import io as pio
from polarcue.polarimage import DofpRaw, InvalidInputError, PolarParams


def test_mosaic_round_trip_with_sidecar(tmp_path):
    values = np.random.default_rng(0).integers(0, 65536, (8, 10)) / 65535.0
    raw = DofpRaw(values, ((0, 45), (135, 90)))
    pio.write_mosaic(tmp_path / "m.png", raw)
    back = pio.read_mosaic(tmp_path / "m.png")
    assert back.layout == raw.layout
    np.testing.assert_array_equal(back.values, values)
    assert json.loads((tmp_path / "m.json").read_text())["bit_depth"] == 16


def test_twelve_bit_container(tmp_path):
    codes = np.array([[0, 4095], [2048, 100]], dtype=np.uint16)
    Image.fromarray(codes).save(tmp_path / "r.png")
    raw = pio.read_mosaic(tmp_path / "r.png", {"bit_depth": 12})
    np.testing.assert_array_equal(raw.values, codes / 4095.0)
    # a 12-bit declaration on values beyond 4095 is rejected
    Image.fromarray(np.array([[5000, 0], [0, 0]], dtype=np.uint16)).save(tmp_path / "bad.png")
    with pytest.raises(InvalidInputError):
        pio.read_mosaic(tmp_path / "bad.png", {"bit_depth": 12})


def test_eight_bit_pgm(tmp_path):
    codes = np.array([[0, 255], [128, 7]], dtype=np.uint8)
    Image.fromarray(codes).save(tmp_path / "r.pgm")
    np.testing.assert_array_equal(pio.read_gray(tmp_path / "r.pgm"), codes / 255.0)


def test_color_input_rejected(tmp_path):
    Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
    with pytest.raises(InvalidInputError):
        pio.read_gray(tmp_path / "c.png")


@pytest.mark.parametrize("name", sorted(pio.ENCODINGS))
def test_encodings_quantize_within_half_code(name):
    lo, hi = pio.ENCODINGS[name]
    x = np.linspace(lo, hi, 1001)
    if name == "aop":
        x = x[:-1]
    back = pio.decode_codes(pio.encode(x, name), name)
    assert np.abs(back - x).max() <= 0.5 * (hi - lo) / pio.CODE_MAX + 1e-15


def test_params_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    p = PolarParams(rng.uniform(0, 2, (6, 6)), rng.uniform(0, np.pi, (6, 6)), rng.uniform(0, 1, (6, 6)))
    p.aop[0, 0] = np.nextafter(np.pi, 0)  # rounds to the top code
    paths = pio.write_params(tmp_path, p, mask=np.eye(6, dtype=bool))
    assert set(paths) == {"intensity", "aop", "dop", "mask"}
    q = pio.read_params(tmp_path)
    assert q.aop[0, 0] == 0.0
    np.testing.assert_allclose(q.dop, p.dop, atol=1e-5)
    with pytest.raises(InvalidInputError):
        pio.read_params(tmp_path / "missing")


def test_depth_round_trip(tmp_path):
    depth = np.array([[1.0, 2.5], [100.0, 0.75]])
    pio.write_depth(tmp_path / "d.png", depth)
    np.testing.assert_array_equal(pio.read_depth(tmp_path / "d.png"), depth)
    pio.write_depth(tmp_path / "z.png", np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        pio.read_depth(tmp_path / "z.png")


def test_labels_round_trip(tmp_path):
    labels = np.array([[0, 1], [6, 3]], dtype=np.uint8)
    legend = {0: "sky", 1: "water", 3: "road", 6: "none"}
    pio.write_labels(tmp_path / "l.png", labels, legend)
    got, leg = pio.read_labels(tmp_path / "l.png")
    assert np.array_equal(got, labels) and leg == legend


def test_read_json_errors(tmp_path):
    (tmp_path / "x.json").write_text("{nope")
    with pytest.raises(InvalidInputError):
        pio.read_json(tmp_path / "x.json")
    with pytest.raises(InvalidInputError):
        pio.read_json(tmp_path / "absent.json")
