import numpy as np
import pytest

from epp.rasters import (ImageFormatError, read_eppf, read_image, read_pgm, write_eppf,
                         write_image, write_pgm)


def test_eppf_bit_exact(tmp_path, rng):
    x = rng.standard_normal((9, 9)) * 1e3
    x[0, 0] = np.nextafter(0.0, 1.0)
    path = tmp_path / "x.eppf"
    write_image(x, path)
    y = read_image(path)
    assert y.tobytes() == x.tobytes()
    assert path.stat().st_size == 16 + 8 * 81


def test_eppf_rejects_non_square(tmp_path):
    with pytest.raises(ValueError):
        write_eppf(np.zeros((2, 3)), tmp_path / "x.eppf")


def test_eppf_truncated(tmp_path):
    path = tmp_path / "x.eppf"
    write_eppf(np.ones((4, 4)), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ImageFormatError):
        read_eppf(path)
    path.write_bytes(b"EPPF\x01")
    with pytest.raises(ImageFormatError):
        read_image(path)


def test_p5_max_is_one(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5\n2 1\n255\n" + bytes([255, 0]))
    np.testing.assert_array_equal(read_pgm(path), [[1.0, 0.0]])


def test_p2_equals_p5(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7)) / 255.0
    write_pgm(img, tmp_path / "a.pgm")
    write_pgm(img, tmp_path / "b.pgm", plain=True)
    a = read_image(tmp_path / "a.pgm")
    b = read_image(tmp_path / "b.pgm")
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, img, atol=1e-15)


def test_p2_with_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# made by hand\n2 2\n# max\n4\n0 1\n2 4\n")
    np.testing.assert_array_equal(read_pgm(path), [[0, 0.25], [0.5, 1.0]])


def test_sixteen_bit(tmp_path, rng):
    img = rng.integers(0, 65536, (4, 4)) / 65535.0
    write_pgm(img, tmp_path / "w.pgm", maxval=65535)
    np.testing.assert_allclose(read_image(tmp_path / "w.pgm"), img, atol=1e-15)


def test_write_clips(tmp_path):
    write_pgm(np.array([[-0.5, 1.5]]), tmp_path / "c.pgm")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[0.0, 1.0]])


@pytest.mark.parametrize("data", [b"P5\n2 x\n255\n\x00\x00", b"P5\n2 1\n0\n\x00\x00",
                                  b"P5\n2 2\n255\n\x00", b"P2\n2 1\n255\n1", b"P6\n1 1\n255\n\x00",
                                  b"P5\n2"])
def test_malformed_pgm(tmp_path, data):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_image(path)


def test_unknown_format(tmp_path):
    path = tmp_path / "x.png"
    path.write_bytes(b"\x89PNG\r\n")
    with pytest.raises(ImageFormatError):
        read_image(path)
