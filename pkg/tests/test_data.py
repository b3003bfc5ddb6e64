import json
import math

import numpy as np
import pytest

from vatcmr.data import (
    AudioParams,
    SAMPLING_RANGES,
    TactileParams,
    VisualParams,
    audio_spectrogram,
    build_dataset,
    generate_object_bank,
    load_dataset,
    render_audio,
    render_tactile,
    render_visual,
    save_dataset,
)
from vatcmr.errors import CompatibilityError, DataFormatError, InvalidArgumentError

VIS = VisualParams(camera=(2.0, 1.0, 1.5), light=(0.3, -0.2, 1.0))
AUD = AudioParams(contact_point=(0.0, 0.0, 1.0), force=(0.5, -0.25, 1.0))
TAC = TactileParams(contact_point=(0.0, 1.0, 0.0), gel_pose=(0.4, 1.1, 0.8))


# --- object bank -----------------------------------------------------------


def test_bank_has_expected_size_and_ids():
    bank = generate_object_bank(20, seed=0)
    assert [s.class_id for s in bank] == list(range(20))


def test_bank_is_deterministic():
    assert generate_object_bank(2, seed=7) == generate_object_bank(2, seed=7)


def test_bank_differs_across_seeds():
    a = generate_object_bank(5, seed=1)
    b = generate_object_bank(5, seed=2)
    assert any(x != y for x, y in zip(a, b))


def test_bank_frequencies_increasing_and_class_disjoint():
    bank = generate_object_bank(8, seed=3)
    for spec in bank:
        freqs = np.array(spec.modal_frequencies)
        assert np.all(freqs > 0) and np.all(np.diff(freqs) > 0)
        assert 3 <= len(freqs) <= 5
        assert all(d > 0 for d in spec.damping)
    for a, b in zip(bank, bank[1:]):
        assert max(a.modal_frequencies) < min(b.modal_frequencies)


def test_bank_rejects_single_class():
    with pytest.raises(InvalidArgumentError):
        generate_object_bank(1, seed=0)


# --- parameter validation --------------------------------------------------


def test_visual_params_reject_nonfinite_and_zero_camera():
    with pytest.raises(InvalidArgumentError):
        VisualParams(camera=(float("nan"), 0, 1), light=(0, 0, 1))
    with pytest.raises(InvalidArgumentError):
        VisualParams(camera=(0.0, 0.0, 0.0), light=(0, 0, 1))


def test_audio_params_require_unit_contact():
    with pytest.raises(InvalidArgumentError):
        AudioParams(contact_point=(0.0, 0.0, 0.5), force=(1, 0, 0))
    with pytest.raises(InvalidArgumentError):
        AudioParams(contact_point=(0.0, 0.0, 1.0), force=(float("inf"), 0, 0))


def test_tactile_params_validate_pose():
    with pytest.raises(InvalidArgumentError):
        TactileParams(contact_point=(0, 0, 1.0), gel_pose=(0.0, 0.0, -0.1))
    with pytest.raises(InvalidArgumentError):
        TactileParams(contact_point=(0, 0, 1.0), gel_pose=(7.0, 0.0, 0.5))
    with pytest.raises(InvalidArgumentError):
        TactileParams(contact_point=(0, 0, 1.0), gel_pose=(0.0, 4.0, 0.5))


# --- visual renderer -------------------------------------------------------


def test_visual_render_is_deterministic_and_bounded():
    spec = generate_object_bank(3, seed=0)[1]
    a = render_visual(spec, VIS, height=24)
    b = render_visual(spec, VIS, height=24)
    assert np.array_equal(a, b)
    assert a.shape == (24, 24, 3) and a.dtype == np.float32
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_visual_zero_light_is_strictly_darker():
    spec = generate_object_bank(3, seed=0)[0]
    lit = render_visual(spec, VIS, height=24)
    dark = render_visual(
        spec, VisualParams(camera=VIS.camera, light=(0.0, 0.0, 0.0)), height=24
    )
    assert dark.mean() < lit.mean()


def test_visual_differs_across_shape_params():
    bank = generate_object_bank(3, seed=0)
    a = render_visual(bank[0], VIS, height=24)
    b = render_visual(bank[1], VIS, height=24)
    assert not np.array_equal(a, b)


def test_visual_sensitive_to_camera_shift():
    spec = generate_object_bank(3, seed=0)[0]
    base = render_visual(spec, VIS, height=24)
    for axis in range(3):
        cam = list(VIS.camera)
        cam[axis] += 0.1
        moved = render_visual(spec, VisualParams(camera=tuple(cam), light=VIS.light), height=24)
        assert not np.array_equal(base, moved)


# --- audio renderer --------------------------------------------------------


def test_audio_zero_force_gives_zero_signal():
    spec = generate_object_bank(3, seed=0)[0]
    silent = render_audio(spec, AudioParams(contact_point=(0, 0, 1.0), force=(0.0, 0.0, 0.0)), length=128)
    assert np.array_equal(silent, np.zeros(128, dtype=np.float32))


def test_audio_doubling_force_doubles_signal():
    spec = generate_object_bank(3, seed=0)[0]
    single = render_audio(spec, AUD, length=256)
    doubled = render_audio(
        spec, AudioParams(contact_point=AUD.contact_point, force=tuple(2 * f for f in AUD.force)), length=256
    )
    assert np.array_equal(doubled, 2.0 * single)


def test_audio_scaling_is_linear_for_any_nonnegative_factor():
    spec = generate_object_bank(3, seed=1)[2]
    base = render_audio(spec, AUD, length=256).astype(np.float64)
    for c in (0.0, 0.3, 1.7):
        scaled = render_audio(
            spec, AudioParams(contact_point=AUD.contact_point, force=tuple(c * f for f in AUD.force)), length=256
        )
        assert np.allclose(scaled, c * base, atol=1e-7)


def test_audio_spectrum_peaks_differ_across_classes():
    # Peak-pick the discrete spectrum; disjoint modal bands must not collide.
    bank = generate_object_bank(4, seed=0)
    peaks = []
    for spec in bank[:2]:
        signal = render_audio(spec, AUD, length=4096)
        spectrum = np.abs(np.fft.rfft(signal))
        peaks.append(int(np.argmax(spectrum)))
    assert peaks[0] != peaks[1]


def test_audio_rejects_nonfinite_force():
    with pytest.raises(InvalidArgumentError):
        AudioParams(contact_point=(0, 0, 1.0), force=(float("nan"), 0, 0))


# --- tactile renderer ------------------------------------------------------


def test_tactile_zero_displacement_is_constant():
    spec = generate_object_bank(3, seed=0)[0]
    flat = render_tactile(spec, TactileParams(contact_point=(0, 0, 1.0), gel_pose=(0.3, 0.2, 0.0)), height=16)
    assert np.array_equal(flat, np.full((16, 16, 3), 0.5, dtype=np.float32))


def test_tactile_is_deterministic():
    spec = generate_object_bank(3, seed=0)[2]
    assert np.array_equal(render_tactile(spec, TAC, height=16), render_tactile(spec, TAC, height=16))


def test_tactile_contrast_grows_with_displacement():
    spec = generate_object_bank(3, seed=0)[1]
    low = render_tactile(spec, TactileParams(contact_point=TAC.contact_point, gel_pose=(0.4, 1.1, 0.5)), height=16)
    high = render_tactile(spec, TactileParams(contact_point=TAC.contact_point, gel_pose=(0.4, 1.1, 1.0)), height=16)
    assert high.std() > low.std()


# --- dataset assembly ------------------------------------------------------


def test_build_dataset_counts_and_balance():
    ds = build_dataset(5, (100, 25, 25), seed=3, image_size=16, audio_length=256)
    assert ds.manifest["counts"] == {"train": 100, "val": 25, "test": 25}
    counts = np.bincount([s.class_id for s in ds.train], minlength=5)
    assert counts.max() - counts.min() <= 1
    assert abs(counts[0] - 20) <= 1
    for split in (ds.val, ds.test):
        assert set(s.class_id for s in split) == set(range(5))


def test_build_dataset_paper_scale_counts():
    # Paper-scale split sizes stay selectable; tiny tensors keep this fast.
    ds = build_dataset(20, (25500, 4500, 4500), seed=0, image_size=8, audio_length=64)
    assert ds.manifest["counts"] == {"train": 25500, "val": 4500, "test": 4500}
    assert ds.manifest["num_classes"] == 20
    assert len(ds.train) == 25500 and len(ds.val) == 4500 and len(ds.test) == 4500


def test_build_dataset_is_deterministic():
    a = build_dataset(5, (100, 25, 25), seed=3, image_size=16, audio_length=256)
    b = build_dataset(5, (100, 25, 25), seed=3, image_size=16, audio_length=256)
    assert a.manifest == b.manifest
    for sa, sb in zip(a.train + a.val + a.test, b.train + b.val + b.test):
        assert sa.sample_id == sb.sample_id
        assert np.array_equal(sa.visual, sb.visual)
        assert np.array_equal(sa.audio, sb.audio)
        assert np.array_equal(sa.tactile, sb.tactile)
        assert np.array_equal(sa.label, sb.label)


def test_build_dataset_ids_are_disjoint_across_splits(tiny_dataset):
    ids = [s.sample_id for s in tiny_dataset.train + tiny_dataset.val + tiny_dataset.test]
    assert len(ids) == len(set(ids))


def test_build_dataset_labels_are_one_hot(tiny_dataset):
    for sample in tiny_dataset.train:
        assert sample.label.sum() == 1.0
        assert set(np.unique(sample.label)) <= {0.0, 1.0}


def test_build_dataset_rejects_small_splits():
    with pytest.raises(InvalidArgumentError):
        build_dataset(5, (4, 25, 25), seed=0, image_size=16, audio_length=256)


def test_manifest_records_sampling_ranges(tiny_dataset):
    assert tiny_dataset.manifest["sampling_ranges"] == SAMPLING_RANGES
    assert tiny_dataset.manifest["sampling_ranges"]["camera_radius"] == [2.0, 4.0]


def test_class_separability_from_raw_audio_spectra():
    # Learnability gate: nearest-centroid on flattened spectra, no model.
    ds = build_dataset(5, (50, 25, 25), seed=9, image_size=16, audio_length=1024)

    def spectra(samples):
        return np.stack([np.abs(np.fft.rfft(s.audio)) for s in samples])

    train_x, train_y = spectra(ds.train), np.array([s.class_id for s in ds.train])
    val_x, val_y = spectra(ds.val), np.array([s.class_id for s in ds.val])
    centroids = np.stack([train_x[train_y == c].mean(axis=0) for c in range(5)])
    pred = np.argmin(((val_x[:, None, :] - centroids[None, :, :]) ** 2).sum(-1), axis=1)
    accuracy = float((pred == val_y).mean())
    assert accuracy > 0.8


# --- persistence -----------------------------------------------------------


def test_save_load_round_trip_is_bit_exact(tmp_path, tiny_dataset):
    save_dataset(tiny_dataset, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds")
    assert back.manifest == tiny_dataset.manifest
    for orig, loaded in zip(tiny_dataset.train + tiny_dataset.val + tiny_dataset.test,
                            back.train + back.val + back.test):
        assert loaded.sample_id == orig.sample_id
        assert np.array_equal(loaded.visual, orig.visual)
        assert np.array_equal(loaded.audio, orig.audio)
        assert np.array_equal(loaded.tactile, orig.tactile)
        assert np.array_equal(loaded.label, orig.label)


def test_load_empty_directory_raises_format_error(tmp_path):
    with pytest.raises(DataFormatError, match="manifest"):
        load_dataset(tmp_path)


def test_load_with_wrong_count_raises_compatibility_error(tmp_path, tiny_dataset):
    save_dataset(tiny_dataset, tmp_path / "ds")
    manifest_path = tmp_path / "ds" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["counts"]["train"] += 1
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(CompatibilityError, match="train"):
        load_dataset(tmp_path / "ds")


def test_load_with_missing_tensor_raises_format_error(tmp_path, tiny_dataset):
    save_dataset(tiny_dataset, tmp_path / "ds")
    victim = sorted((tmp_path / "ds" / "val").glob("*.aud.vatt"))[0]
    victim.unlink()
    with pytest.raises(DataFormatError, match=victim.name):
        load_dataset(tmp_path / "ds")


def test_load_with_wrong_version_raises_compatibility_error(tmp_path, tiny_dataset):
    save_dataset(tiny_dataset, tmp_path / "ds")
    manifest_path = tmp_path / "ds" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["version"] = 999
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(CompatibilityError):
        load_dataset(tmp_path / "ds")


def test_spectrogram_shape_and_rejection():
    signal = np.sin(np.linspace(0, 40 * math.pi, 1024))
    spec = audio_spectrogram(signal, frame=256, hop=128)
    assert spec.shape == ((1024 - 256) // 128 + 1, 129)
    with pytest.raises(InvalidArgumentError):
        audio_spectrogram(signal[:100], frame=256)
