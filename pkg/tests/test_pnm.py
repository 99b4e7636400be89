import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itoedit.pnm import MAXVAL, contact_sheet, read_pbm, read_pnm, write_pbm, write_pnm


def test_ppm_header_and_roundtrip(tmp_path, rng):
    img = rng.uniform(-1.5, 1.5, (5, 7, 3))
    p = write_pnm(tmp_path / "a.ppm", img)
    data = p.read_bytes()
    assert data.startswith(b"P6\n7 5\n65535\n")
    assert len(data) == len(b"P6\n7 5\n65535\n") + 5 * 7 * 3 * 2
    back = read_pnm(p)
    assert np.max(np.abs(back - img)) <= 0.5 * 4.0 / MAXVAL + 1e-15


def test_pgm_roundtrip_custom_range(tmp_path, rng):
    img = rng.random((6, 4))
    p = write_pnm(tmp_path / "m.pgm", img[..., None], 0.0, 1.0)
    assert p.read_bytes()[:2] == b"P5"
    assert np.max(np.abs(read_pnm(p, 0.0, 1.0) - img)) <= 0.5 / MAXVAL + 1e-15


def test_clipping(tmp_path):
    p = write_pnm(tmp_path / "c.pgm", np.array([[-9.0, 9.0]]))
    np.testing.assert_array_equal(read_pnm(p), [[-2.0, 2.0]])


def test_reads_8bit_and_comments(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255]))
    np.testing.assert_allclose(read_pnm(p, 0.0, 1.0), [[0.0, 1.0]])


def test_rejects_bad_shape_and_magic(tmp_path):
    with pytest.raises(ValueError):
        write_pnm(tmp_path / "x.ppm", np.zeros((2, 2, 2)))
    (tmp_path / "t.txt").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(ValueError):
        read_pnm(tmp_path / "t.txt")


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 20), w=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
def test_pbm_roundtrip(tmp_path_factory, h, w, seed):
    bits = np.random.default_rng(seed).random((h, w)) > 0.5
    p = write_pbm(tmp_path_factory.mktemp("pbm") / "b.pbm", bits)
    assert p.read_bytes().startswith(b"P4\n%d %d\n" % (w, h))
    np.testing.assert_array_equal(read_pbm(p), bits)


def test_contact_sheet_layout(rng):
    tiles = [[np.full((2, 3, 3), i * 10 + j) for j in range(3)] for i in range(2)]
    sheet = contact_sheet(tiles, gap=1, fill=-1)
    assert sheet.shape == (5, 11, 3)
    assert sheet[3, 4, 0] == 11 and sheet[2, 0, 0] == -1
