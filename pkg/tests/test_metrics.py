import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itoedit.ito import EditParams, EditResult
from itoedit.mask import EditMask
from itoedit.metrics import CSV_COLUMNS, CsvAppender, EditTruth, evaluate, iou, l1, metrics_row
from itoedit.scene import render_scene

TRUTH = EditTruth(0, (4, 4), 2, (10, 7))


def result(img, binary):
    return EditResult(edited=img, mask=EditMask.from_binary(binary))


class TestL1:
    def test_identical(self, rng):
        a = rng.standard_normal((4, 4, 3))
        assert l1(a, a) == 0

    def test_constant_shift(self, rng):
        a = rng.standard_normal((4, 4, 3))
        assert l1(a + 0.5, a) == pytest.approx(0.5, abs=1e-15)

    def test_half_region_bruteforce(self, rng):
        a, b = rng.standard_normal((2, 6, 6, 3))
        region = np.zeros((6, 6), dtype=bool)
        region[:, :3] = True
        total, count = 0.0, 0
        for y in range(6):
            for x in range(3):
                for c in range(3):
                    total += abs(a[y, x, c] - b[y, x, c])
                    count += 1
        assert l1(a, b, region) == pytest.approx(total / count, rel=1e-14)

    def test_errors(self, rng):
        a = rng.standard_normal((4, 4, 3))
        with pytest.raises(ValueError, match="empty"):
            l1(a, a, np.zeros((4, 4), dtype=bool))
        with pytest.raises(ValueError):
            l1(a, a[:2])
        with pytest.raises(ValueError):
            l1(a, a, np.ones((3, 3), dtype=bool))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_l1_is_a_metric(seed):
    r = np.random.default_rng(seed)
    a, b, c = r.standard_normal((3, 5, 5, 2))
    region = r.random((5, 5)) > 0.4
    region[0, 0] = True
    assert l1(a, b, region) == l1(b, a, region) >= 0
    assert l1(a, c, region) <= l1(a, b, region) + l1(b, c, region) + 1e-12


class TestEvaluate:
    def test_exact_target(self, mix):
        x0 = render_scene(0, (4, 4))
        union = TRUTH.union_footprint(mix)
        rec = evaluate(x0, result(render_scene(2, (10, 7)), union), TRUTH, mix)
        assert rec.edit_success and not rec.original_retained and rec.mask_iou == 1.0
        assert rec.l1_background == 0.0 and rec.l1_full > 0

    def test_unchanged_input(self, mix):
        x0 = render_scene(0, (4, 4))
        rec = evaluate(x0, result(x0, np.zeros((16, 16), bool)), TRUTH, mix)
        assert not rec.edit_success and rec.original_retained
        assert rec.l1_full == 0 and rec.mask_iou == 0.0

    def test_iou(self):
        a = np.zeros((4, 4), bool)
        b = np.zeros((4, 4), bool)
        assert iou(a, b) == 1.0
        a[0, :2] = True
        b[0, 1:3] = True
        assert iou(a, b) == pytest.approx(1 / 3)


def test_csv_append_fixed_columns(tmp_path, mix):
    x0 = render_scene(0, (4, 4))
    rec = evaluate(x0, result(x0, TRUTH.union_footprint(mix)), TRUTH, mix)
    path = tmp_path / "r.csv"
    app = CsvAppender(path)
    app.append(metrics_row(0, "ours", EditParams(), TRUTH, rec))
    app.append([metrics_row(1, "diffedit", EditParams(), TRUTH, None, status="error: boom")])
    with path.open() as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3
    assert rows[1][CSV_COLUMNS.index("method")] == "ours"
    assert rows[2][CSV_COLUMNS.index("l1_full")] == ""
    assert rows[2][CSV_COLUMNS.index("status")] == "error: boom"
