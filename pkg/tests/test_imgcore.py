import numpy as np
import pytest

from fovealprep.imgcore import (
    BoundingBox,
    BoxOutsideImage,
    FlowStack,
    Image,
    InvalidNormalizedBox,
    UnsupportedFormat,
    clamp_box,
    denormalize_box,
    read_flow,
    read_flow_stack,
    read_image,
    write_flow,
    write_image,
)


class TestImage:
    def test_shape_and_properties(self):
        img = Image(np.zeros((4, 6, 3), dtype=np.float32))
        assert (img.height, img.width, img.channels) == (4, 6, 3)

    def test_2d_input_becomes_single_channel(self):
        img = Image(np.zeros((5, 7)))
        assert img.channels == 1
        assert img.data.shape == (5, 7, 1)

    def test_data_is_frozen(self):
        img = Image(np.zeros((2, 2, 1), dtype=np.float32))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0

    @pytest.mark.parametrize("channels", [0, 4, 5])
    def test_rejects_bad_channel_counts(self, channels):
        with pytest.raises(ValueError):
            Image(np.zeros((2, 2, channels), dtype=np.float32))

    def test_rejects_empty_extent(self):
        with pytest.raises(ValueError):
            Image(np.zeros((0, 3, 1), dtype=np.float32))

    def test_flow_flag(self):
        assert Image(np.zeros((2, 2, 2))).is_flow
        assert not Image(np.zeros((2, 2, 3))).is_flow


class TestBoundingBox:
    def test_rejects_nonpositive_extent(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 5)
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 5, -1)

    def test_derived_geometry(self):
        box = BoundingBox(10, 20, 30, 40)
        assert (box.x2, box.y2) == (40, 60)
        assert box.area == 1200
        assert box.center == (25, 40)


class TestClampBox:
    def test_edge_clamp(self):
        assert clamp_box(BoundingBox(-5, 0, 20, 10), 224, 224) == BoundingBox(0, 0, 15, 10)

    def test_identity_when_inside(self):
        box = BoundingBox(10, 10, 50, 50)
        assert clamp_box(box, 224, 224) == box

    def test_disjoint_box_raises(self):
        with pytest.raises(BoxOutsideImage):
            clamp_box(BoundingBox(300, 300, 10, 10), 224, 224)

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            box = BoundingBox(
                rng.integers(-50, 250),
                rng.integers(-50, 250),
                rng.integers(1, 120),
                rng.integers(1, 120),
            )
            try:
                once = clamp_box(box, 224, 224)
            except BoxOutsideImage:
                continue
            assert clamp_box(once, 224, 224) == once


class TestDenormalizeBox:
    def test_full_frame(self):
        assert denormalize_box(0, 0, 1, 1, 224, 224) == BoundingBox(0, 0, 224, 224)

    def test_quarter_frame(self):
        assert denormalize_box(0.25, 0.25, 0.75, 0.75, 224, 224) == BoundingBox(56, 56, 112, 112)

    def test_reversed_corners_raise(self):
        with pytest.raises(InvalidNormalizedBox):
            denormalize_box(0.5, 0.2, 0.4, 0.8, 224, 224)

    def test_minimum_extent_is_one_pixel(self):
        box = denormalize_box(0.5, 0.5, 0.5005, 0.5005, 224, 224)
        assert box.w == 1 and box.h == 1

    def test_monotone_in_each_coordinate(self):
        xs = np.linspace(0.0, 0.49, 25)
        lefts = [denormalize_box(x, 0.0, 0.5, 0.5, 224, 224).x for x in xs]
        assert lefts == sorted(lefts)
        x2s = np.linspace(0.51, 1.0, 25)
        rights = [denormalize_box(0.5, 0.0, x2, 0.5, 224, 224).w for x2 in x2s]
        assert rights == sorted(rights)


class TestPngRoundTrip:
    def test_rgb_gradient_round_trips_exactly(self, tmp_path):
        rng = np.random.default_rng(3)
        original = Image(rng.random((17, 23, 3), dtype=np.float32))
        path = tmp_path / "img.png"
        write_image(original, path)
        loaded = read_image(path)
        quantized = np.rint(np.clip(original.data, 0, 1) * 255) / 255
        np.testing.assert_array_equal(loaded.data, quantized.astype(np.float32))
        # a second trip through disk is a fixpoint
        write_image(loaded, path)
        np.testing.assert_array_equal(read_image(path).data, loaded.data)

    def test_single_channel(self, tmp_path):
        path = tmp_path / "gray.png"
        write_image(Image(np.linspace(0, 1, 64, dtype=np.float32).reshape(8, 8, 1)), path)
        loaded = read_image(path)
        assert loaded.channels == 1
        assert (loaded.height, loaded.width) == (8, 8)

    def test_read_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            read_image(tmp_path / "nope.png")

    def test_write_flow_as_png_rejected(self, tmp_path):
        with pytest.raises(UnsupportedFormat):
            write_image(Image(np.zeros((4, 4, 2))), tmp_path / "f.png")

    def test_write_non_png_extension_rejected(self, tmp_path):
        with pytest.raises(UnsupportedFormat):
            write_image(Image(np.zeros((4, 4, 3))), tmp_path / "img.jpg")


class TestFlowIo:
    def test_flo_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        flow = Image((rng.random((9, 13, 2)).astype(np.float32) - 0.5) * 40)
        path = tmp_path / "a.flo"
        write_flow(flow, path)
        loaded = read_flow(path)
        np.testing.assert_array_equal(loaded.data, flow.data)

    def test_flo_layout(self, tmp_path):
        flow = Image(np.arange(12, dtype=np.float32).reshape(2, 3, 2))
        path = tmp_path / "b.flo"
        write_flow(flow, path)
        raw = path.read_bytes()
        assert raw[:4] == b"PIEH"
        assert int.from_bytes(raw[4:8], "little") == 3  # width
        assert int.from_bytes(raw[8:12], "little") == 2  # height
        samples = np.frombuffer(raw[12:], dtype="<f4")
        np.testing.assert_array_equal(samples.reshape(2, 3, 2), flow.data)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.flo"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(UnsupportedFormat):
            read_flow(path)

    def test_truncated_payload_rejected(self, tmp_path):
        flow = Image(np.zeros((4, 4, 2), dtype=np.float32))
        path = tmp_path / "cut.flo"
        write_flow(flow, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(UnsupportedFormat):
            read_flow(path)

    def test_write_flow_needs_two_channels(self, tmp_path):
        with pytest.raises(UnsupportedFormat):
            write_flow(Image(np.zeros((4, 4, 3))), tmp_path / "c.flo")

    def test_read_flow_stack(self, tmp_path):
        paths = []
        for i in range(3):
            p = tmp_path / f"{i}.flo"
            write_flow(Image(np.full((4, 5, 2), float(i), dtype=np.float32)), p)
            paths.append(p)
        stack = read_flow_stack(paths)
        assert len(stack) == 3
        assert (stack.width, stack.height) == (5, 4)


class TestFlowStack:
    def test_rejects_mixed_sizes(self):
        a = Image(np.zeros((4, 4, 2)))
        b = Image(np.zeros((4, 5, 2)))
        with pytest.raises(ValueError):
            FlowStack((a, b))

    def test_rejects_non_flow_frames(self):
        with pytest.raises(ValueError):
            FlowStack((Image(np.zeros((4, 4, 3))),))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FlowStack(())
