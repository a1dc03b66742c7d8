import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from stegochain.errors import DecodeError, FormatError, ParameterError
from stegochain.image_io import Raster, load_raster, save_raster


def test_rgb_layout(tmp_path):
    px = np.array([[[1, 2, 3], [4, 5, 6]], [[7, 8, 9], [10, 11, 12]]], dtype=np.uint8)
    Image.fromarray(px).save(tmp_path / "a.png")
    r = load_raster(tmp_path / "a.png")
    assert (r.width, r.height, r.channels) == (2, 2, 3)
    assert r.tobytes() == bytes(range(1, 13))


def test_jpeg_rejected(tmp_path):
    Image.new("RGB", (8, 8), (10, 20, 30)).save(tmp_path / "a.jpg", format="JPEG")
    with pytest.raises(FormatError, match="lossless"):
        load_raster(tmp_path / "a.jpg")


@pytest.mark.parametrize("fmt", ["GIF", "TIFF", "BMP"])
def test_other_formats_rejected(tmp_path, fmt):
    Image.new("RGB", (4, 4)).save(tmp_path / "a.img", format=fmt)
    with pytest.raises(FormatError):
        load_raster(tmp_path / "a.img")


def test_corrupt_png(tmp_path):
    Image.new("RGB", (16, 16), (1, 2, 3)).save(tmp_path / "a.png")
    data = (tmp_path / "a.png").read_bytes()
    (tmp_path / "b.png").write_bytes(data[:40])
    with pytest.raises(DecodeError):
        load_raster(tmp_path / "b.png")


def test_palette_and_sixteen_bit(tmp_path):
    Image.new("P", (3, 2), 5).save(tmp_path / "p.png")
    r = load_raster(tmp_path / "p.png")
    assert r.channels == 3 and r.width == 3 and r.height == 2

    arr = np.full((2, 2), 0xABCD, dtype=np.uint16)
    Image.fromarray(arr).save(tmp_path / "g16.png")
    r = load_raster(tmp_path / "g16.png")
    assert r.channels == 1
    assert set(r.pixels.tolist()) == {0xAB}


def test_alpha_preserved(tmp_path, rng):
    r = Raster(5, 4, 4, rng.integers(0, 256, 80, dtype=np.uint8))
    save_raster(r, tmp_path / "a.png")
    with Image.open(tmp_path / "a.png") as img:
        assert img.mode == "RGBA"
        assert not img.info.get("interlace")
    assert load_raster(tmp_path / "a.png") == r


@pytest.mark.parametrize("w,h", [(0, 3), (3, 0)])
def test_zero_size_rejected(tmp_path, w, h):
    with pytest.raises(ParameterError):
        save_raster(Raster(w, h, 3, b""), tmp_path / "z.png")


def test_raster_validation():
    with pytest.raises(ParameterError):
        Raster(2, 2, 2, bytes(8))
    with pytest.raises(ParameterError):
        Raster(2, 2, 3, bytes(11))
    r = Raster.from_bytes(2, 1, 1, b"\x01\x02")
    with pytest.raises(ValueError):
        r.pixels[0] = 9


@settings(max_examples=40, deadline=None)
@given(w=st.integers(1, 24), h=st.integers(1, 24), c=st.sampled_from([1, 3, 4]), seed=st.integers(0, 2**32 - 1))
def test_roundtrip_property(tmp_path_factory, w, h, c, seed):
    rng = np.random.default_rng(seed)
    r = Raster(w, h, c, rng.integers(0, 256, w * h * c, dtype=np.uint8))
    path = tmp_path_factory.mktemp("rt") / "r.png"
    save_raster(r, path)
    assert load_raster(path) == r
