import numpy as np
import pytest

from mupotrack.detector.labels import assign_labels
from mupotrack.detector.net import NetConfig
from mupotrack.raster import RasterRegion


def region(n=128, cell=10.0, x0=0.0, y0=0.0):
    return RasterRegion(x0=x0, y0=y0, cell=cell, height=n, width=n)


def cfg(**kw):
    return NetConfig(**kw)


class TestAssign:
    def test_interior_truth_3x3(self):
        r = region()
        c = cfg()
        # truth at pixel (row 40.6, col 33.2) -> tep (1.26875, 1.0375)
        truth = r.pixel_to_world((40.6, 33.2))
        lab = assign_labels(r, truth, imm_error=10.0, meas_error=40.0, cfg=c)
        assert lab is not None
        assert lab.p.shape == (4, 4)
        want = np.zeros((4, 4))
        want[0:3, 0:3] = 1.0
        assert np.array_equal(lab.p, want)
        assert lab.pos_mask.sum() == 9
        assert np.allclose(lab.truth_tep, [40.6 / 32, 33.2 / 32])

    def test_offsets_are_truth_minus_anchor(self):
        r = region()
        c = cfg()
        truth = r.pixel_to_world((40.6, 33.2))
        lab = assign_labels(r, truth, 10.0, 40.0, c)
        for i in range(4):
            for j in range(4):
                if lab.pos_mask[i, j]:
                    assert lab.offsets[0, i, j] == pytest.approx(40.6 / 32 - i)
                    assert lab.offsets[1, i, j] == pytest.approx(33.2 / 32 - j)
                    assert -1.0 < lab.offsets[0, i, j] < 2.0
                    assert -1.0 < lab.offsets[1, i, j] < 2.0

    def test_corner_truth_clipped_neighborhood(self):
        r = region()
        c = cfg()
        lab = assign_labels(r, r.pixel_to_world((1.0, 1.0)), 10.0, 40.0, c)
        # containing cell (0,0); the 3x3 block clips to 2x2
        assert lab.pos_mask.sum() == 4
        assert lab.pos_mask[0, 0] and lab.pos_mask[1, 1]

    def test_near_edge_pixel_floor_clamped(self):
        r = region()
        c = cfg()
        # row in [-0.5, 0): containing cell clamps to 0, still valid
        lab = assign_labels(r, r.pixel_to_world((-0.4, 5.0)), 10.0, 40.0, c)
        assert lab is not None
        assert lab.pos_mask[0, 0]
        assert lab.offsets[0, 0, 0] == pytest.approx(-0.4 / 32)

    def test_outside_returns_none(self):
        r = region()
        c = cfg()
        assert assign_labels(r, r.pixel_to_world((-1.0, 5.0)), 10.0, 40.0, c) is None
        assert assign_labels(r, r.pixel_to_world((5.0, 1e5)), 10.0, 40.0, c) is None

    def test_o_alpha_clamp(self):
        r = region()
        c = cfg()
        truth = r.pixel_to_world((64.0, 64.0))
        assert assign_labels(r, truth, 10.0, 40.0, c).o_alpha == pytest.approx(0.75)
        assert assign_labels(r, truth, 50.0, 40.0, c).o_alpha == 0.0     # clamped up
        assert assign_labels(r, truth, 0.0, 40.0, c).o_alpha == 1.0
        assert assign_labels(r, truth, 10.0, 0.0, c).o_alpha == 0.0      # degenerate meas

    def test_c_mask_radius(self):
        r = region()
        c = cfg()   # d = (2*32)^2 px^2
        truth = r.pixel_to_world((64.0, 64.0))
        lab = assign_labels(r, truth, 10.0, 40.0, c)
        # anchors at multiples of 32 px; |anchor - truth| < 64 px
        for i in range(4):
            for j in range(4):
                d2 = (i * 32 - 64.0) ** 2 + (j * 32 - 64.0) ** 2
                assert lab.c_mask[i, j] == (d2 < 64.0**2)
        assert lab.c_mask.sum() == 9

    def test_custom_radius(self):
        r = region()
        c = cfg(radius_d=1.0)
        truth = r.pixel_to_world((64.0, 64.0))
        lab = assign_labels(r, truth, 10.0, 40.0, c)
        assert lab.c_mask.sum() == 1

    def test_stride_divisibility_enforced(self):
        r = RasterRegion(x0=0.0, y0=0.0, cell=10.0, height=100, width=128)
        with pytest.raises(ValueError):
            assign_labels(r, (0.0, 0.0), 1.0, 2.0, cfg())

    def test_stride_8_grid(self):
        r = region()
        c = cfg(tep_density=1.0 / 8.0)
        lab = assign_labels(r, r.pixel_to_world((64.0, 64.0)), 10.0, 40.0, c)
        assert lab.p.shape == (16, 16)
