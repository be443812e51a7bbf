"""Synthetic scenes: a smooth background with small, high-frequency face and hand patches."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open, x = column

MAX_REGION_FRACTION = 0.25


@dataclass(frozen=True)
class Texture:
    frequency: float  # cycles per pixel
    amplitude: float


@dataclass(frozen=True)
class SceneSpec:
    image_size: int
    face_box: Box | None
    hand_box: Box | None
    face_texture: Texture = Texture(0.35, 0.8)
    hand_texture: Texture = Texture(0.25, 0.7)
    background: Texture = Texture(0.03, 0.4)
    latent_factor: int = 1

    def __post_init__(self):
        n = self.image_size
        if n < 1:
            raise ValueError(f"image_size must be positive, got {n}")
        if self.latent_factor < 1 or n % self.latent_factor:
            raise ValueError(f"image_size {n} is not divisible by latent_factor {self.latent_factor}")
        for label, box in (("face", self.face_box), ("hand", self.hand_box)):
            if box is None:
                continue
            x0, y0, x1, y1 = box
            if not (0 <= x0 < x1 <= n and 0 <= y0 < y1 <= n):
                raise ValueError(f"{label} box {box} is not inside a {n}x{n} image")
            if (x1 - x0) * (y1 - y0) > MAX_REGION_FRACTION * n * n:
                raise ValueError(f"{label} box {box} covers more than 25% of the image")

    @property
    def latent_size(self) -> int:
        return self.image_size // self.latent_factor

    def condition(self) -> np.ndarray:
        """Box centres scaled to [0, 1]: (face_x, face_y, hand_x, hand_y); absent boxes map to 0."""
        out = []
        for box in (self.face_box, self.hand_box):
            if box is None:
                out += [0.0, 0.0]
            else:
                x0, y0, x1, y1 = box
                out += [(x0 + x1) / (2.0 * self.image_size), (y0 + y1) / (2.0 * self.image_size)]
        return np.array(out)


@dataclass(frozen=True)
class RegionMasks:
    face_image: np.ndarray
    hand_image: np.ndarray
    face_latent: np.ndarray
    hand_latent: np.ndarray
    latent_factor: int = 1


def box_mask(box: Box | None, image_size: int) -> np.ndarray:
    m = np.zeros((image_size, image_size))
    if box is not None:
        x0, y0, x1, y1 = box
        m[y0:y1, x0:x1] = 1.0
    return m


def downscale_mask(box: Box | None, image_size: int, latent_factor: int) -> np.ndarray:
    """Latent-resolution mask: a cell is 1 iff its factor×factor image patch overlaps the box."""
    if latent_factor < 1 or image_size % latent_factor:
        raise ValueError(f"image_size {image_size} is not divisible by latent_factor {latent_factor}")
    n = image_size // latent_factor
    m = np.zeros((n, n))
    if box is None:
        return m
    x0, y0, x1, y1 = box
    f = latent_factor
    r0, r1 = y0 // f, -(-y1 // f)
    c0, c1 = x0 // f, -(-x1 // f)
    m[r0:r1, c0:c1] = 1.0
    return m


def region_masks(spec: SceneSpec) -> RegionMasks:
    n, f = spec.image_size, spec.latent_factor
    return RegionMasks(
        face_image=box_mask(spec.face_box, n),
        hand_image=box_mask(spec.hand_box, n),
        face_latent=downscale_mask(spec.face_box, n, f),
        hand_latent=downscale_mask(spec.hand_box, n, f),
        latent_factor=f,
    )


def _phases(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * np.pi, size=count)


def render_image(seed: int, spec: SceneSpec) -> np.ndarray:
    """Image-resolution scene in [-1, 1], deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    n = spec.image_size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    bg = spec.background
    p = _phases(rng, 4)
    offset = rng.uniform(-0.2, 0.2)
    img = offset + bg.amplitude * 0.5 * (
        np.sin(2 * np.pi * bg.frequency * xx + p[0]) + np.sin(2 * np.pi * bg.frequency * yy + p[1])
    )
    if spec.face_box is not None:
        x0, y0, x1, y1 = spec.face_box
        tx = spec.face_texture
        q = _phases(rng, 2)
        patch = tx.amplitude * np.sin(2 * np.pi * tx.frequency * xx + q[0]) * np.sin(2 * np.pi * tx.frequency * yy + q[1])
        img[y0:y1, x0:x1] = patch[y0:y1, x0:x1]
    if spec.hand_box is not None:
        x0, y0, x1, y1 = spec.hand_box
        tx = spec.hand_texture
        q = _phases(rng, 1)
        patch = tx.amplitude * np.sign(np.sin(2 * np.pi * tx.frequency * (xx + yy) + q[0]))
        img[y0:y1, x0:x1] = patch[y0:y1, x0:x1]
    return np.clip(img, -1.0, 1.0)


def to_latent(image: np.ndarray, latent_factor: int) -> np.ndarray:
    """Average-pool an (H, W) image to a (1, H/f, W/f) latent."""
    n = image.shape[0]
    f = latent_factor
    pooled = image.reshape(n // f, f, n // f, f).mean(axis=(1, 3))
    return pooled[None, :, :]


def synth_sample(seed: int, spec: SceneSpec) -> tuple[np.ndarray, RegionMasks]:
    return to_latent(render_image(seed, spec), spec.latent_factor), region_masks(spec)


def random_scene(rng: np.random.Generator, image_size: int, latent_factor: int = 1) -> SceneSpec:
    """Scene with small face and hand boxes jittered around portrait-like anchor points.

    The face sits near the upper centre and the hand near a lower corner (left or
    right at random), mimicking the positional regularity of human photographs.
    """
    n = image_size
    lo, hi = max(2, n // 6), max(3, n // 3)
    jitter = max(1, n // 8)

    def place(w: int, h: int, cx: float, cy: float) -> Box:
        x0 = int(round(cx - w / 2)) + int(rng.integers(-jitter, jitter + 1))
        y0 = int(round(cy - h / 2)) + int(rng.integers(-jitter, jitter + 1))
        x0 = min(max(x0, 0), n - w)
        y0 = min(max(y0, 0), n - h)
        return (x0, y0, x0 + w, y0 + h)

    fs = int(rng.integers(lo, hi + 1))
    face = place(fs, fs, n / 2, n / 4)
    hw, hh = int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1))
    side = n / 4 if rng.integers(0, 2) == 0 else 3 * n / 4
    hand = place(hw, hh, side, 3 * n / 4)
    return SceneSpec(image_size=n, face_box=face, hand_box=hand, latent_factor=latent_factor)


def sample_seed(seed: int, split: int, index: int) -> int:
    """Per-sample seed derived from (run seed, split, sample index)."""
    return int(np.random.SeedSequence([seed, split, index]).generate_state(1, np.uint64)[0])


@dataclass
class SyntheticSet:
    z0: np.ndarray  # (N, 1, h, w)
    face: np.ndarray  # (N, h, w) latent masks
    hand: np.ndarray
    cond: np.ndarray  # (N, 4)
    specs: list[SceneSpec] = field(default_factory=list)

    def __len__(self) -> int:
        return self.z0.shape[0]


def synth_dataset(count: int, seed: int, image_size: int, latent_factor: int = 1, split: int = 0) -> SyntheticSet:
    z0, face, hand, cond, specs = [], [], [], [], []
    for i in range(count):
        s = sample_seed(seed, split, i)
        spec = random_scene(np.random.default_rng([s, 0]), image_size, latent_factor)
        z, masks = synth_sample(s, spec)
        z0.append(z)
        face.append(masks.face_latent)
        hand.append(masks.hand_latent)
        cond.append(spec.condition())
        specs.append(spec)
    h = image_size // latent_factor
    if count == 0:
        return SyntheticSet(np.zeros((0, 1, h, h)), np.zeros((0, h, h)), np.zeros((0, h, h)), np.zeros((0, 4)), [])
    return SyntheticSet(np.stack(z0), np.stack(face), np.stack(hand), np.stack(cond), specs)
