"""Synthetic paired vision / audio / touch dataset.

Every object class is an :class:`ObjectSpec`: a set of strictly increasing
modal frequencies with per-mode damping (the acoustic identity), plus shape
parameters and a texture seed that drive a shared analytic height field (the
visual / tactile identity). The three render functions are pure: the same
spec and parameters always produce bit-identical tensors, and class identity
provably reaches every modality:

* audio     - sum of damped sinusoids at the spec's modal frequencies,
              linear in the applied force magnitude;
* vision    - the height field shaded by a point light, warped by the
              camera pose;
* touch     - a local patch of the same height field at the contact point,
              rotated/sheared by the gel pose, contrast scaled by gel
              displacement.

Class frequency bands are disjoint by construction, so even a nearest
centroid classifier on raw spectra separates classes; the tests rely on
this as the learnability gate for the whole pipeline.
"""

from __future__ import annotations

import colorsys
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CompatibilityError, DataFormatError, InvalidArgumentError
from .tensorio import read_tensor, write_tensor

DATASET_FORMAT = "vatcmr.dataset"
DATASET_VERSION = 1
RENDERER_VERSION = "analytic-1"

# Golden-ratio strides spread per-class pattern parameters over their ranges.
_PHI = 0.6180339887498949

# Fixed parameter sampling ranges; recorded in every manifest.
SAMPLING_RANGES = {
    "camera_radius": [2.0, 4.0],
    "light_magnitude": [1.0, 1.4],
    "force_magnitude": [0.5, 2.0],
    "gel_displacement": [0.2, 1.5],
}

DEFAULT_IMAGE_SIZE = 64
DEFAULT_AUDIO_LENGTH = 4096


def _check_finite(name: str, value: np.ndarray) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
    return arr


@dataclass(frozen=True)
class ObjectSpec:
    """Identity of one object class, consumed by all three renderers."""

    class_id: int
    modal_frequencies: tuple[float, ...]
    damping: tuple[float, ...]
    texture_seed: int
    shape_params: tuple[float, float, float, float]

    def __post_init__(self):
        freqs = np.asarray(self.modal_frequencies, dtype=np.float64)
        if not (3 <= freqs.size <= 5):
            raise InvalidArgumentError("modal_frequencies must hold 3 to 5 modes")
        if np.any(freqs <= 0) or np.any(np.diff(freqs) <= 0):
            raise InvalidArgumentError("modal_frequencies must be positive and strictly increasing")
        damping = np.asarray(self.damping, dtype=np.float64)
        if damping.size != freqs.size or np.any(damping <= 0):
            raise InvalidArgumentError("damping must be positive, one value per mode")
        if len(self.shape_params) != 4:
            raise InvalidArgumentError("shape_params must have exactly 4 entries")
        _check_finite("shape_params", np.asarray(self.shape_params))


@dataclass(frozen=True)
class VisualParams:
    """Camera and point-light position for one visual render."""

    camera: tuple[float, float, float]
    light: tuple[float, float, float]

    def __post_init__(self):
        cam = _check_finite("camera", np.asarray(self.camera))
        _check_finite("light", np.asarray(self.light))
        if cam.shape != (3,) or len(self.light) != 3:
            raise InvalidArgumentError("camera and light must be 3-vectors")
        if np.linalg.norm(cam) == 0.0:
            raise InvalidArgumentError("camera must have nonzero norm")


@dataclass(frozen=True)
class AudioParams:
    """Surface contact point (unit vector) and applied force for one impact."""

    contact_point: tuple[float, float, float]
    force: tuple[float, float, float]

    def __post_init__(self):
        cp = _check_finite("contact_point", np.asarray(self.contact_point))
        _check_finite("force", np.asarray(self.force))
        if cp.shape != (3,) or len(self.force) != 3:
            raise InvalidArgumentError("contact_point and force must be 3-vectors")
        if abs(np.linalg.norm(cp) - 1.0) > 1e-6:
            raise InvalidArgumentError("contact_point must lie on the unit sphere")


@dataclass(frozen=True)
class TactileParams:
    """Contact point plus gel pose (rotation, shear angle, displacement)."""

    contact_point: tuple[float, float, float]
    gel_pose: tuple[float, float, float]  # (theta, phi, displacement)

    def __post_init__(self):
        cp = _check_finite("contact_point", np.asarray(self.contact_point))
        _check_finite("gel_pose", np.asarray(self.gel_pose))
        if cp.shape != (3,) or len(self.gel_pose) != 3:
            raise InvalidArgumentError("contact_point and gel_pose must be 3-vectors")
        if abs(np.linalg.norm(cp) - 1.0) > 1e-6:
            raise InvalidArgumentError("contact_point must lie on the unit sphere")
        theta, phi, displacement = self.gel_pose
        if not (0.0 <= theta < 2.0 * math.pi):
            raise InvalidArgumentError("gel theta must lie in [0, 2*pi)")
        if not (0.0 <= phi <= math.pi):
            raise InvalidArgumentError("gel phi must lie in [0, pi]")
        if displacement < 0.0:
            raise InvalidArgumentError("gel displacement must be nonnegative")


@dataclass
class MultimodalSample:
    """One object instance: paired visual, audio and tactile renders plus label."""

    visual: np.ndarray  # [H, W, 3] float32 in [0, 1]
    audio: np.ndarray  # [L] float32
    tactile: np.ndarray  # [H, W, 3] float32 in [0, 1]
    label: np.ndarray  # one-hot [C] float32
    sample_id: int

    @property
    def class_id(self) -> int:
        return int(np.argmax(self.label))


@dataclass
class DatasetSplits:
    """Train/val/test split collections plus the generation manifest."""

    train: list[MultimodalSample]
    val: list[MultimodalSample]
    test: list[MultimodalSample]
    manifest: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return int(self.manifest["num_classes"])

    def split(self, name: str) -> list[MultimodalSample]:
        if name not in ("train", "val", "test"):
            raise InvalidArgumentError(f"unknown split {name!r}")
        return getattr(self, name)


def generate_object_bank(num_classes: int, seed: int) -> list[ObjectSpec]:
    """Create ``num_classes`` distinguishable object specs, deterministically.

    Modal frequencies tile disjoint bands across classes, so any two specs
    differ in their frequency content; pattern parameters are spread with
    golden-ratio strides so visual/tactile textures differ as well.
    """
    if num_classes < 2:
        raise InvalidArgumentError("num_classes must be at least 2")
    rng = np.random.default_rng([int(seed), 0xB41C])
    band_pitch = 1720.0 / num_classes
    specs = []
    for c in range(num_classes):
        num_modes = int(rng.integers(3, 6))
        base = 80.0 + band_pitch * c
        gaps = rng.uniform(0.10, 0.16, num_modes) * band_pitch
        freqs = base + np.cumsum(gaps)
        damping = rng.uniform(2.0, 6.0, num_modes)
        orientation = math.pi * ((c * _PHI) % 1.0) + rng.uniform(-0.02, 0.02)
        plaid_freq = 1.5 + 2.5 * ((c * 0.3819660113) % 1.0) + rng.uniform(-0.1, 0.1)
        ring_freq = 2.0 + 3.0 * ((c * 0.7548776662) % 1.0) + rng.uniform(-0.1, 0.1)
        mix = rng.uniform(0.35, 0.65)
        specs.append(
            ObjectSpec(
                class_id=c,
                modal_frequencies=tuple(float(f) for f in freqs),
                damping=tuple(float(d) for d in damping),
                texture_seed=int(rng.integers(0, 2**31 - 1)),
                shape_params=(float(orientation), float(plaid_freq), float(ring_freq), float(mix)),
            )
        )
    return specs


def _texture_waves(texture_seed: int):
    rng = np.random.default_rng([int(texture_seed), 0x7E47])
    angles = rng.uniform(0.0, 2.0 * math.pi, 6)
    freqs = rng.uniform(1.0, 4.0, 6)
    phases = rng.uniform(0.0, 2.0 * math.pi, 6)
    amps = rng.uniform(0.2, 0.5, 6)
    return angles, freqs, phases, amps


def _height_field(u: np.ndarray, v: np.ndarray, spec: ObjectSpec) -> np.ndarray:
    """Class-characteristic scalar field over the (u, v) plane.

    Analytic (plaid + rings + random sinusoid texture), so it can be sampled
    at any resolution or window without interpolation artifacts.
    """
    orientation, plaid_freq, ring_freq, mix = spec.shape_params
    along = u * math.cos(orientation) + v * math.sin(orientation)
    radius = np.sqrt(u * u + v * v + 0.05)
    height = mix * np.sin(2.0 * math.pi * plaid_freq * along)
    height += (1.0 - mix) * np.cos(2.0 * math.pi * ring_freq * radius)
    angles, freqs, phases, amps = _texture_waves(spec.texture_seed)
    for a, f, p, amp in zip(angles, freqs, phases, amps):
        height += amp * np.sin(2.0 * math.pi * f * (u * math.cos(a) + v * math.sin(a)) + p)
    return height


def _class_color(spec: ObjectSpec) -> np.ndarray:
    """Pose-invariant class cue: a hue derived from the shape parameters.

    Camera rotation scrambles pattern orientation, so color carries class
    identity across viewpoints.
    """
    orientation, _, ring_freq, _ = spec.shape_params
    hue = (orientation / math.pi + _PHI * ring_freq) % 1.0
    return np.asarray(colorsys.hsv_to_rgb(hue, 0.75, 0.9))


def render_visual(
    spec: ObjectSpec, params: VisualParams, height: int = DEFAULT_IMAGE_SIZE, width: int | None = None
) -> np.ndarray:
    """Render the class pattern under a camera warp and point-light shading.

    Returns an [H, W, 3] float32 tensor in [0, 1]. Zero light falls back to
    ambient-only shading, which is strictly darker than any lit render of
    the same pose.
    """
    width = height if width is None else width
    cam = np.asarray(params.camera, dtype=np.float64)
    light = np.asarray(params.light, dtype=np.float64)

    ys = np.linspace(-1.0, 1.0, height)
    xs = np.linspace(-1.0, 1.0, width)
    vv, uu = np.meshgrid(ys, xs, indexing="ij")

    # Camera pose -> zoom (distance), in-plane rotation (azimuth) and an
    # anisotropic squash (elevation), an injective stand-in for a 3D view.
    dist = np.linalg.norm(cam)
    pan = math.atan2(cam[1], cam[0])
    tilt = math.atan2(cam[2], math.hypot(cam[0], cam[1]))
    scale = 2.5 / dist
    squash = 0.45 + 0.55 * math.cos(tilt)
    u = scale * (uu * math.cos(pan) + vv * math.sin(pan))
    v = scale * squash * (-uu * math.sin(pan) + vv * math.cos(pan))

    h = _height_field(u, v, spec)
    shade = 0.5 + 0.5 * np.tanh(h)
    albedo = _class_color(spec)[None, None, :] * (0.55 + 0.45 * shade[:, :, None])

    # High ambient keeps within-class brightness variation modest, so the
    # class hue cue stays stable across light poses.
    ambient = 0.4
    light_norm = np.linalg.norm(light)
    if light_norm > 0.0:
        gy, gx = np.gradient(h)
        normals = np.stack([-gx, -gy, np.ones_like(h)], axis=-1)
        normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
        diffuse = np.clip(normals @ (light / light_norm), 0.0, None)
        brightness = ambient + (1.0 - ambient) * min(1.0, light_norm / 2.0) * diffuse
    else:
        brightness = np.full_like(h, ambient)

    image = np.clip(brightness[:, :, None] * albedo, 0.0, 1.0)
    return image.astype(np.float32)


def _mode_direction(texture_seed: int, mode: int) -> np.ndarray:
    rng = np.random.default_rng([int(texture_seed), 0xA0D10, int(mode)])
    vec = rng.normal(size=3)
    return vec / np.linalg.norm(vec)


def render_audio(
    spec: ObjectSpec, params: AudioParams, length: int = DEFAULT_AUDIO_LENGTH
) -> np.ndarray:
    """Render an impact response: damped sinusoids at the spec's modes.

    signal(t) = sum_k g_k(contact) * |force| * exp(-damping_k t) * sin(2 pi f_k t)
    over one unit of time sampled at ``length`` points. Linear in |force| by
    construction: zero force yields the zero signal.
    """
    force = np.asarray(params.force, dtype=np.float64)
    contact = np.asarray(params.contact_point, dtype=np.float64)
    t = np.arange(length, dtype=np.float64) / float(length)
    magnitude = np.linalg.norm(force) / len(spec.modal_frequencies)
    signal = np.zeros(length, dtype=np.float64)
    if magnitude > 0.0:
        for k, (freq, damp) in enumerate(zip(spec.modal_frequencies, spec.damping)):
            gain = 0.3 + 0.7 * (1.0 + float(contact @ _mode_direction(spec.texture_seed, k))) / 2.0
            signal += gain * np.exp(-damp * t) * np.sin(2.0 * math.pi * freq * t)
        signal *= magnitude
    return signal.astype(np.float32)


def render_tactile(
    spec: ObjectSpec, params: TactileParams, height: int = DEFAULT_IMAGE_SIZE, width: int | None = None
) -> np.ndarray:
    """Render a gel patch: local height field at the contact point.

    The patch is rotated by theta, sheared by phi, and its contrast grows
    linearly with gel displacement (flat gel at zero displacement gives a
    uniform tensor).
    """
    width = height if width is None else width
    theta, phi, displacement = params.gel_pose
    contact = np.asarray(params.contact_point, dtype=np.float64)

    if displacement == 0.0:
        return np.full((height, width, 3), 0.5, dtype=np.float32)

    azimuth = math.atan2(contact[1], contact[0])
    polar = math.acos(float(np.clip(contact[2], -1.0, 1.0)))
    center_u = azimuth / math.pi
    center_v = 2.0 * polar / math.pi - 1.0

    window = 0.35
    ys = np.linspace(-window, window, height)
    xs = np.linspace(-window, window, width)
    bb, aa = np.meshgrid(ys, xs, indexing="ij")
    a = aa * math.cos(theta) - bb * math.sin(theta)
    b = aa * math.sin(theta) + bb * math.cos(theta)
    a = a + 0.6 * math.cos(phi) * b  # shear along the rotated axis

    h = _height_field(center_u + a, center_v + b, spec)
    centered = h - h.mean()
    peak = np.max(np.abs(centered))
    pattern = centered / peak if peak > 0.0 else centered

    # Contact strength scales both the embossed texture and a faint
    # class-colored tint, so contrast stays strictly monotone in displacement.
    contact = min(displacement, 2.0) / 2.0
    color = _class_color(spec)
    channel_gain = 0.55 + 0.45 * color
    image = (
        0.5
        + 0.38 * contact * pattern[:, :, None] * channel_gain[None, None, :]
        + 0.12 * contact * (color - 0.5)[None, None, :]
    )
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def _unit_vector(rng: np.random.Generator) -> np.ndarray:
    vec = rng.normal(size=3)
    return vec / np.linalg.norm(vec)


def _sample_params(rng: np.random.Generator):
    lo, hi = SAMPLING_RANGES["camera_radius"]
    camera = _unit_vector(rng) * rng.uniform(lo, hi)
    light_dir = _unit_vector(rng)
    light_dir[2] = abs(light_dir[2])  # light from above, so shading is informative
    lo, hi = SAMPLING_RANGES["light_magnitude"]
    light = light_dir * rng.uniform(lo, hi)

    contact_audio = _unit_vector(rng)
    lo, hi = SAMPLING_RANGES["force_magnitude"]
    force = _unit_vector(rng) * rng.uniform(lo, hi)

    contact_tactile = _unit_vector(rng)
    lo, hi = SAMPLING_RANGES["gel_displacement"]
    gel = (rng.uniform(0.0, 2.0 * math.pi), rng.uniform(0.0, math.pi), rng.uniform(lo, hi))

    return (
        VisualParams(camera=tuple(camera), light=tuple(light)),
        AudioParams(contact_point=tuple(contact_audio), force=tuple(force)),
        TactileParams(contact_point=tuple(contact_tactile), gel_pose=gel),
    )


def _balanced_classes(count: int, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    classes = np.array([i % num_classes for i in range(count)], dtype=np.int64)
    return rng.permutation(classes)


def build_dataset(
    num_classes: int,
    per_split_counts: tuple[int, int, int],
    seed: int,
    image_size: int = DEFAULT_IMAGE_SIZE,
    audio_length: int = DEFAULT_AUDIO_LENGTH,
) -> DatasetSplits:
    """Generate paired-modality splits; deterministic in ``seed``.

    Each sample draws one parameter triple and renders all three modalities
    from the same object spec, so the modalities are paired per instance.
    Classes are balanced within +-1 inside every split.
    """
    counts = tuple(int(c) for c in per_split_counts)
    if len(counts) != 3:
        raise InvalidArgumentError("per_split_counts must be (train, val, test)")
    if any(c < num_classes for c in counts):
        raise InvalidArgumentError("every split count must be >= num_classes")

    bank = generate_object_bank(num_classes, seed)
    rng = np.random.default_rng([int(seed), 0x5A3B1E])

    splits: dict[str, list[MultimodalSample]] = {}
    next_id = 0
    for split_name, count in zip(("train", "val", "test"), counts):
        class_ids = _balanced_classes(count, num_classes, rng)
        samples = []
        for class_id in class_ids:
            spec = bank[int(class_id)]
            visual_p, audio_p, tactile_p = _sample_params(rng)
            label = np.zeros(num_classes, dtype=np.float32)
            label[int(class_id)] = 1.0
            samples.append(
                MultimodalSample(
                    visual=render_visual(spec, visual_p, image_size),
                    audio=render_audio(spec, audio_p, audio_length),
                    tactile=render_tactile(spec, tactile_p, image_size),
                    label=label,
                    sample_id=next_id,
                )
            )
            next_id += 1
        splits[split_name] = samples

    manifest = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "renderer": RENDERER_VERSION,
        "seed": int(seed),
        "num_classes": int(num_classes),
        "counts": {"train": counts[0], "val": counts[1], "test": counts[2]},
        "image_size": [int(image_size), int(image_size)],
        "audio_length": int(audio_length),
        "sampling_ranges": SAMPLING_RANGES,
    }
    return DatasetSplits(train=splits["train"], val=splits["val"], test=splits["test"], manifest=manifest)


def audio_spectrogram(signal: np.ndarray, frame: int = 256, hop: int = 128) -> np.ndarray:
    """Magnitude spectrogram for plotting; the model consumes raw signals."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < frame:
        raise InvalidArgumentError("signal shorter than one frame")
    window = np.hanning(frame)
    starts = range(0, signal.size - frame + 1, hop)
    frames = np.stack([signal[s : s + frame] * window for s in starts])
    return np.abs(np.fft.rfft(frames, axis=1)).astype(np.float32)


def save_dataset(splits: DatasetSplits, directory: str | Path) -> None:
    """Write manifest, per-split tensors and labels under ``directory``."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "manifest.json", "w") as fh:
        json.dump(splits.manifest, fh, indent=2, sort_keys=True)
    for split_name in ("train", "val", "test"):
        split_dir = root / split_name
        split_dir.mkdir(exist_ok=True)
        rows = []
        for sample in splits.split(split_name):
            stem = f"sample_{sample.sample_id:06d}"
            write_tensor(split_dir / f"{stem}.vis.vatt", sample.visual)
            write_tensor(split_dir / f"{stem}.aud.vatt", sample.audio)
            write_tensor(split_dir / f"{stem}.tac.vatt", sample.tactile)
            rows.append((sample.sample_id, sample.class_id))
        with open(split_dir / "labels.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "class_id"])
            writer.writerows(rows)


def load_dataset(directory: str | Path) -> DatasetSplits:
    """Load a dataset written by :func:`save_dataset`; bit-exact round trip.

    Raises DataFormatError for missing/corrupt files and CompatibilityError
    when the contents disagree with the manifest.
    """
    root = Path(directory)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DataFormatError(f"missing manifest file {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"corrupt manifest file {manifest_path}: {exc}") from exc

    if manifest.get("format") != DATASET_FORMAT or manifest.get("version") != DATASET_VERSION:
        raise CompatibilityError(
            f"unsupported dataset format {manifest.get('format')!r} "
            f"version {manifest.get('version')!r}"
        )
    num_classes = int(manifest["num_classes"])

    loaded: dict[str, list[MultimodalSample]] = {}
    for split_name in ("train", "val", "test"):
        split_dir = root / split_name
        labels_path = split_dir / "labels.csv"
        if not labels_path.is_file():
            raise DataFormatError(f"missing labels file {labels_path}")
        with open(labels_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["sample_id", "class_id"]:
                raise DataFormatError(f"bad header in {labels_path}: {header!r}")
            rows = [(int(sid), int(cid)) for sid, cid in reader]

        expected = int(manifest["counts"][split_name])
        if len(rows) != expected:
            raise CompatibilityError(
                f"split {split_name!r} holds {len(rows)} samples, manifest says {expected}"
            )

        samples = []
        for sample_id, class_id in rows:
            if not (0 <= class_id < num_classes):
                raise CompatibilityError(
                    f"sample {sample_id} has class {class_id} outside [0, {num_classes})"
                )
            stem = split_dir / f"sample_{sample_id:06d}"
            label = np.zeros(num_classes, dtype=np.float32)
            label[class_id] = 1.0
            samples.append(
                MultimodalSample(
                    visual=read_tensor(f"{stem}.vis.vatt"),
                    audio=read_tensor(f"{stem}.aud.vatt"),
                    tactile=read_tensor(f"{stem}.tac.vatt"),
                    label=label,
                    sample_id=sample_id,
                )
            )
        loaded[split_name] = samples

    return DatasetSplits(train=loaded["train"], val=loaded["val"], test=loaded["test"], manifest=manifest)
