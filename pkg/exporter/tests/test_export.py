import os
import warnings

import numpy as np
import pytest
from PIL import Image

from hycal import (
    FusionMode,
    HybridConfig,
    RegularizationConfig,
    SettingKind,
    SettingSpec,
    last_acc,
    read_dataset,
    run_session,
    sample_shots,
)
from hyeb_exporter import ExportSpec, PixelStatsEncoder, export, merge
from hyeb_exporter.cli import main


def write_image(path, mean, rng, size=(12, 12), mode="RGB"):
    channels = 3 if mode == "RGB" else 1
    pixels = np.clip(
        rng.normal(mean, 12.0, size=(size[1], size[0], channels)), 0, 255
    ).astype(np.uint8)
    if channels == 1:
        pixels = pixels[:, :, 0]
    Image.fromarray(pixels, mode=mode).save(path)


@pytest.fixture
def toy_root(tmp_path):
    """Two visually distinct classes with train/test splits."""
    rng = np.random.default_rng(99)
    root = tmp_path / "toy"
    for split, count in (("train", 10), ("test", 6)):
        for name, mean in (("dark", 40.0), ("bright", 210.0)):
            d = root / split / name
            d.mkdir(parents=True)
            for i in range(count):
                write_image(d / f"{i:03d}.png", mean, rng)
    return root


def toy_spec(root, out, **overrides):
    base = dict(
        dataset_name="toy",
        data_root=str(root),
        output_path=str(out),
        encoder="pixel-stats:16",
    )
    base.update(overrides)
    return ExportSpec(**base)


class TestExport:
    def test_three_image_folder_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        root = tmp_path / "mini"
        d = root / "train" / "only"
        d.mkdir(parents=True)
        for i in range(3):
            write_image(d / f"{i}.png", 120.0, rng)
        out = tmp_path / "mini.hyeb"
        export(toy_spec(root, out))
        ds = read_dataset(out)
        assert len(ds.samples) == 3
        assert len(ds.registry) == 1
        assert ds.registry.entry(0).class_name == "only"

    def test_reader_validates_with_zero_warnings(self, toy_root, tmp_path):
        out = tmp_path / "toy.hyeb"
        export(toy_spec(toy_root, out))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ds = read_dataset(out)
        assert len(ds.registry) == 2
        assert len(ds.samples) == 2 * (10 + 6)
        assert {s.split.value for s in ds.samples} == {"train", "test"}

    def test_repeated_export_is_byte_identical(self, toy_root, tmp_path):
        p1, p2 = tmp_path / "a.hyeb", tmp_path / "b.hyeb"
        export(toy_spec(toy_root, p1))
        export(toy_spec(toy_root, p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_end_to_end_run_beats_chance(self, toy_root, tmp_path):
        out = tmp_path / "toy.hyeb"
        export(toy_spec(toy_root, out))
        ds = read_dataset(out)
        stream = sample_shots(
            ds, SettingSpec(SettingKind.FIXED_SHOT_FSCIL, {"shots": 5}, seed=0)
        )
        outcome = run_session(
            stream, HybridConfig(alpha=10.0, beta=5.0), ds.registry,
            RegularizationConfig(), FusionMode.SUM,
        )
        assert last_acc(outcome.result) > 50.0  # strictly above 2-class chance

    def test_per_class_cap(self, toy_root, tmp_path):
        out = tmp_path / "capped.hyeb"
        export(toy_spec(toy_root, out, per_class_cap=4))
        ds = read_dataset(out)
        assert len(ds.samples) == 2 * (4 + 4)

    def test_grayscale_images_are_replicated(self, tmp_path):
        rng = np.random.default_rng(5)
        root = tmp_path / "gray"
        d = root / "train" / "scan"
        d.mkdir(parents=True)
        for i in range(2):
            write_image(d / f"{i}.png", 90.0, rng, mode="L")
        out = tmp_path / "gray.hyeb"
        export(toy_spec(root, out))
        assert len(read_dataset(out).samples) == 2

    def test_prompt_template_must_have_placeholder(self, toy_root, tmp_path):
        with pytest.raises(ValueError):
            toy_spec(toy_root, tmp_path / "x.hyeb", prompt_template="no placeholder")

    def test_missing_root_fails(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            export(toy_spec(tmp_path / "nope", tmp_path / "x.hyeb"))

    def test_class_id_offset_and_domain_id(self, toy_root, tmp_path):
        out = tmp_path / "off.hyeb"
        export(toy_spec(toy_root, out, class_id_offset=100, domain_id=3))
        ds = read_dataset(out)
        assert ds.registry.class_ids() == (100, 101)
        assert ds.registry.domain_of(100) == 3


class TestMerge:
    def test_two_exports_merge_into_two_domains(self, toy_root, tmp_path):
        a, b = tmp_path / "a.hyeb", tmp_path / "b.hyeb"
        export(toy_spec(toy_root, a, domain_id=0, class_id_offset=0))
        export(toy_spec(toy_root, b, domain_id=1, class_id_offset=10))
        merged = merge([str(a), str(b)], str(tmp_path / "all.hyeb"))
        ds = read_dataset(merged)
        assert ds.registry.domain_ids() == (0, 1)
        assert len(ds.registry) == 4
        # Merged file drives a 2-step incremental session end to end.
        stream = sample_shots(
            ds, SettingSpec(SettingKind.FIXED_SHOT_FSCIL, {"shots": 5}, seed=0)
        )
        assert len(stream) == 2

    def test_colliding_class_ids_rejected(self, toy_root, tmp_path):
        a, b = tmp_path / "a.hyeb", tmp_path / "b.hyeb"
        export(toy_spec(toy_root, a))
        export(toy_spec(toy_root, b, domain_id=1))
        from hycal import ProtocolError

        with pytest.raises(ProtocolError):
            merge([str(a), str(b)], str(tmp_path / "all.hyeb"))


class TestEncoders:
    def test_pixel_stats_text_is_deterministic(self):
        enc = PixelStatsEncoder(dim=8)
        t1 = enc.encode_texts(["a photo of a dog", "a photo of a cat"])
        t2 = enc.encode_texts(["a photo of a dog", "a photo of a cat"])
        assert np.array_equal(t1, t2)
        assert t1.shape == (2, 8)
        assert not np.array_equal(t1[0], t1[1])

    def test_unknown_encoder_identifier(self):
        from hyeb_exporter import make_encoder

        with pytest.raises(ValueError):
            make_encoder("quantum")

    @pytest.mark.skipif(
        os.environ.get("HYEB_TEST_CLIP") != "1",
        reason="set HYEB_TEST_CLIP=1 to exercise the CLIP encoder path",
    )
    def test_clip_encoder_loads_if_checkpoint_available(self):
        pytest.importorskip("transformers")
        from hyeb_exporter import ClipEncoder

        try:
            enc = ClipEncoder()
        except Exception:
            pytest.skip("CLIP checkpoint not available offline")
        vecs = enc.encode_texts(["a photo of a dog"])
        assert vecs.shape == (1, enc.dim)


class TestCli:
    def test_export_and_merge_commands(self, toy_root, tmp_path):
        out = tmp_path / "cli.hyeb"
        code = main([
            "export", "--root", str(toy_root), "--name", "toy",
            "--out", str(out), "--encoder", "pixel-stats:16",
        ])
        assert code == 0 and out.exists()
        merged = tmp_path / "merged.hyeb"
        code = main(["merge", "--inputs", str(out), "--out", str(merged)])
        assert code == 0 and merged.exists()

    def test_missing_root_is_io_error(self, tmp_path):
        code = main([
            "export", "--root", str(tmp_path / "absent"), "--name", "x",
            "--out", str(tmp_path / "x.hyeb"), "--encoder", "pixel-stats:8",
        ])
        assert code == 2

    def test_bad_encoder_is_validation_error(self, toy_root, tmp_path):
        code = main([
            "export", "--root", str(toy_root), "--name", "x",
            "--out", str(tmp_path / "x.hyeb"), "--encoder", "quantum",
        ])
        assert code == 1

    def test_usage_error(self):
        assert main(["export", "--nonsense"]) == 1
