"""Synthetic data tests: clip format, generator invariants, manifests."""

from __future__ import annotations

import json

import numpy as np
import pytest

from texfuse import (
    DOMAINS,
    auc,
    build_dataset,
    generate_clip,
    generate_clip_with_region,
    read_clip,
    read_manifest,
    write_clip,
)
from texfuse.errors import ClipFormatError, ManifestError, ParameterError
from texfuse.synth import FORMAT_VERSION, MAGIC, _HEADER
from texfuse.texture import KIRSCH_MASKS, _neighbor_stack, to_grayscale


HEADER_SIZE = 26  # 4s magic + u16 version + five u32 fields


def _edge_energy(clip) -> float:
    """Mean max-absolute Kirsch response over all frames (a texture score)."""
    data = clip.data[0]
    total = 0.0
    for t in range(data.shape[0]):
        gray = to_grayscale(np.moveaxis(data[t], 0, -1) * 255.0)
        resp = np.einsum("kij,ij...->k...", KIRSCH_MASKS, _neighbor_stack(gray))
        total += float(np.abs(resp).max(axis=0).mean())
    return total / data.shape[0]


class TestClipFormat:
    def test_header_is_26_bytes(self):
        assert _HEADER.size == HEADER_SIZE

    def test_round_trip_bit_exact(self, tmp_path, rng):
        clip = generate_clip(DOMAINS["alpha"], 1, 42)
        path = tmp_path / "clip.fsvc"
        write_clip(clip, path)
        loaded = read_clip(path)
        assert loaded.data.dtype == np.float32
        assert np.array_equal(loaded.data, clip.data)
        assert loaded.modality == "RGB"
        assert loaded.clip_ids == ["clip"]  # falls back to the file stem
        assert path.stat().st_size == HEADER_SIZE + clip.data.size * 4

    def test_explicit_clip_id_wins(self, tmp_path):
        clip = generate_clip(DOMAINS["alpha"], 0, 1)
        path = tmp_path / "x.fsvc"
        write_clip(clip, path)
        assert read_clip(path, clip_id="alpha-train-0001").clip_ids == [
            "alpha-train-0001"
        ]

    def test_write_rejects_batched_clips(self, tmp_path, desk_geometry, rng):
        from conftest import random_clip
        from texfuse import VideoClip

        data = random_clip(rng, 2, desk_geometry)
        with pytest.raises(ParameterError):
            write_clip(VideoClip(data=data, modality="RGB"), tmp_path / "bad.fsvc")

    def test_bad_magic_names_offset_0(self, tmp_path):
        path = tmp_path / "bad.fsvc"
        path.write_bytes(b"XXXX" + bytes(HEADER_SIZE - 4))
        with pytest.raises(ClipFormatError, match="offset 0"):
            read_clip(path)

    def test_truncated_header_names_offset_0(self, tmp_path):
        path = tmp_path / "short.fsvc"
        path.write_bytes(MAGIC + b"\x01")
        with pytest.raises(ClipFormatError, match="offset 0"):
            read_clip(path)

    def test_bad_version_names_offset_4(self, tmp_path):
        path = tmp_path / "v9.fsvc"
        path.write_bytes(_HEADER.pack(MAGIC, 9, 1, 3, 8, 8, 0) + bytes(3 * 8 * 8 * 4))
        with pytest.raises(ClipFormatError, match="version 9 at offset 4"):
            read_clip(path)

    def test_bad_dtype_tag_names_offset_22(self, tmp_path):
        path = tmp_path / "dtype.fsvc"
        path.write_bytes(
            _HEADER.pack(MAGIC, FORMAT_VERSION, 1, 3, 8, 8, 7) + bytes(3 * 8 * 8 * 4)
        )
        with pytest.raises(ClipFormatError, match="dtype tag 7 at offset 22"):
            read_clip(path)

    def test_zero_dimension_names_offset_6(self, tmp_path):
        path = tmp_path / "zero.fsvc"
        path.write_bytes(_HEADER.pack(MAGIC, FORMAT_VERSION, 0, 3, 8, 8, 0))
        with pytest.raises(ClipFormatError, match="offset 6"):
            read_clip(path)

    def test_payload_size_mismatch_names_offset_26(self, tmp_path):
        path = tmp_path / "trunc.fsvc"
        path.write_bytes(
            _HEADER.pack(MAGIC, FORMAT_VERSION, 2, 3, 8, 8, 0) + bytes(100)
        )
        with pytest.raises(ClipFormatError, match="offset 26"):
            read_clip(path)

    def test_absurd_dimensions_rejected_before_allocation(self, tmp_path):
        path = tmp_path / "huge.fsvc"
        path.write_bytes(
            _HEADER.pack(MAGIC, FORMAT_VERSION, 2**31 - 1, 3, 4096, 4096, 0)
        )
        with pytest.raises(ClipFormatError, match="payload limit"):
            read_clip(path)


class TestGenerator:
    def test_deterministic_per_key(self):
        a = generate_clip(DOMAINS["alpha"], 1, 7)
        b = generate_clip(DOMAINS["alpha"], 1, 7)
        assert np.array_equal(a.data, b.data)

    def test_seed_changes_content(self):
        a = generate_clip(DOMAINS["alpha"], 1, 7)
        b = generate_clip(DOMAINS["alpha"], 1, 8)
        assert not np.array_equal(a.data, b.data)

    def test_domains_differ(self):
        a = generate_clip(DOMAINS["alpha"], 0, 7)
        b = generate_clip(DOMAINS["beta"], 0, 7)
        assert not np.array_equal(a.data, b.data)

    def test_unit_range_and_shape(self):
        for name in DOMAINS:
            clip = generate_clip(DOMAINS[name], 1, 3, frames=4, height=16, width=24)
            assert clip.data.shape == (1, 4, 3, 16, 24)
            assert clip.data.min() >= 0.0 and clip.data.max() <= 1.0

    def test_bad_label_rejected(self):
        with pytest.raises(ParameterError):
            generate_clip(DOMAINS["alpha"], 2, 0)

    def test_fake_differs_from_real_only_inside_region(self):
        for name in DOMAINS:
            real, region_r = generate_clip_with_region(DOMAINS[name], 0, 5)
            fake, region = generate_clip_with_region(DOMAINS[name], 1, 5)
            assert region_r.sum() == 0
            assert region.sum() > 0
            outside = region == 0
            diff = np.abs(fake.data[0] - real.data[0])  # (T,C,H,W)
            assert float(diff[..., outside].max()) == 0.0
            assert float(diff[..., region == 1].mean()) > 0.0

    def test_region_is_one_contiguous_rectangle(self):
        for seed in range(10):
            _, region = generate_clip_with_region(DOMAINS["alpha"], 1, seed)
            rows = np.flatnonzero(region.any(axis=1))
            cols = np.flatnonzero(region.any(axis=0))
            box = (rows[-1] - rows[0] + 1) * (cols[-1] - cols[0] + 1)
            assert int(region.sum()) == box

    def test_region_area_near_configured_fraction(self):
        areas = []
        for seed in range(30):
            _, region = generate_clip_with_region(DOMAINS["alpha"], 1, seed)
            areas.append(region.mean())
        assert 0.25 <= min(areas) and max(areas) <= 0.40  # fraction 0.32 + jitter

    def test_artifact_region_fixed_across_frames(self):
        real, _ = generate_clip_with_region(DOMAINS["beta"], 0, 9)
        fake, region = generate_clip_with_region(DOMAINS["beta"], 1, 9)
        diff = np.abs(fake.data[0] - real.data[0]).max(axis=1)  # (T,H,W)
        for t in range(diff.shape[0]):
            touched = diff[t] > 0
            assert not np.any(touched & (region == 0))

    def test_local_texture_contrast_concentrates_in_region(self):
        # The artifact must perturb local texture statistics inside the
        # region more than outside, across domains and seeds.
        hits = 0
        trials = 0
        for name in DOMAINS:
            for seed in range(20):
                real, _ = generate_clip_with_region(DOMAINS[name], 0, 100 + seed)
                fake, region = generate_clip_with_region(DOMAINS[name], 1, 100 + seed)
                inside = region == 1
                diffs = []
                for t in range(real.data.shape[1]):
                    gray_r = to_grayscale(
                        np.moveaxis(real.data[0, t], 0, -1) * 255.0
                    )
                    gray_f = to_grayscale(
                        np.moveaxis(fake.data[0, t], 0, -1) * 255.0
                    )
                    resp_r = np.abs(
                        np.einsum(
                            "kij,ij...->k...", KIRSCH_MASKS, _neighbor_stack(gray_r)
                        )
                    ).max(axis=0)
                    resp_f = np.abs(
                        np.einsum(
                            "kij,ij...->k...", KIRSCH_MASKS, _neighbor_stack(gray_f)
                        )
                    ).max(axis=0)
                    diffs.append(np.abs(resp_f - resp_r))
                diff = np.mean(diffs, axis=0)
                trials += 1
                if diff[inside].mean() > diff[~inside].mean():
                    hits += 1
        assert hits / trials >= 0.95

    def test_edge_energy_baseline_finds_signal(self):
        # A hand-built texture-energy feature must clearly beat chance in
        # every domain: local texture statistics are the designed tell.
        for name in DOMAINS:
            feats, labels = [], []
            for j in range(60):
                clip = generate_clip(DOMAINS[name], j % 2, 11_000 + j)
                feats.append(_edge_energy(clip))
                labels.append(j % 2)
            a = auc(np.array(feats), np.array(labels))
            folded = max(a, 1.0 - a)
            assert folded >= 0.6, f"{name}: folded AUC {folded:.3f}"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    manifests = build_dataset(
        out, counts={"train": 4, "test": 2}, seed=3, frames=4,
        height=16, width=16,
    )
    return out, manifests


class TestDatasetBuild:
    def test_manifest_files_exist(self, dataset):
        out, manifests = dataset
        expected = {
            "manifest", "train", "test",
            "train_alpha", "train_beta", "test_alpha", "test_beta",
        }
        assert set(manifests) == expected
        for path in manifests.values():
            assert path.exists()

    def test_counts_labels_and_ids(self, dataset):
        out, manifests = dataset
        records = read_manifest(manifests["manifest"])
        assert len(records) == 2 * (4 + 2)  # two domains
        train = [r for r in records if r.split == "train"]
        assert len(train) == 8
        for r in records:
            assert r.label == int(r.id.split("-")[-1]) % 2
            assert r.id == f"{r.domain}-{r.split}-{int(r.id.split('-')[-1]):04d}"
        labels = [r.label for r in train]
        assert labels.count(0) == labels.count(1)

    def test_per_domain_manifests_partition_split(self, dataset):
        out, manifests = dataset
        both = read_manifest(manifests["train"])
        alpha = read_manifest(manifests["train_alpha"])
        beta = read_manifest(manifests["train_beta"])
        assert {r.id for r in alpha} | {r.id for r in beta} == {r.id for r in both}
        assert all(r.domain == "alpha" for r in alpha)
        assert all(r.domain == "beta" for r in beta)

    def test_clips_regenerable_from_recorded_seed(self, dataset):
        out, manifests = dataset
        for r in read_manifest(manifests["test"])[:4]:
            stored = read_clip(out / r.path)
            regen = generate_clip(
                DOMAINS[r.domain], r.label, r.seed, frames=4, height=16, width=16
            )
            assert np.array_equal(stored.data, regen.data)

    def test_odd_count_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="even"):
            build_dataset(tmp_path, counts={"train": 3})

    def test_paths_are_relative(self, dataset):
        out, manifests = dataset
        for r in read_manifest(manifests["manifest"]):
            assert not r.path.startswith("/")
            assert (out / r.path).exists()


class TestManifestReader:
    def _write(self, path, rows):
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")

    def _row(self, i=0, **kw):
        row = {
            "id": f"c-{i}", "path": f"clips/c-{i}.fsvc", "label": i % 2,
            "domain": "alpha", "split": "train", "seed": i,
        }
        row.update(kw)
        return row

    def test_reads_rows_in_order(self, tmp_path):
        path = tmp_path / "m.jsonl"
        self._write(path, [self._row(0), self._row(1)])
        records = read_manifest(path)
        assert [r.id for r in records] == ["c-0", "c-1"]
        assert records[1].seed == 1

    def test_duplicate_id_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        self._write(path, [self._row(0), self._row(0)])
        with pytest.raises(ManifestError, match=r":2: duplicate"):
            read_manifest(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        row = self._row(0)
        del row["label"]
        self._write(path, [row])
        with pytest.raises(ManifestError, match="label"):
            read_manifest(path)

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        self._write(path, [self._row(0, label=3)])
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_empty_manifest_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("")
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(self._row(0)) + "\nnot json\n")
        with pytest.raises(ManifestError, match=r":2: invalid JSON"):
            read_manifest(path)
