"""Raw video loading and deterministic synthetic test sequences.

Frames are luma-only 8-bit planes. Chroma of 4:2:0 input is read past and
discarded, the codec never looks at it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CTU_SIZE = 64
SYNTHETIC_KINDS = ("flat", "gradient", "moving_block", "noise")


class InvalidDimensions(ValueError):
    pass


class TruncatedInput(ValueError):
    pass


def check_dimensions(width: int, height: int) -> None:
    if width <= 0 or height <= 0 or width % 8 or height % 8:
        raise InvalidDimensions(f"{width}x{height}: width and height must be positive multiples of 8")


@dataclass(frozen=True, eq=False)
class Frame:
    """One 8-bit luma plane, shape ``(height, width)``."""

    luma: np.ndarray

    def __post_init__(self):
        luma = np.ascontiguousarray(self.luma, dtype=np.uint8)
        if luma.ndim != 2:
            raise InvalidDimensions(f"luma must be 2-D, got shape {luma.shape}")
        check_dimensions(luma.shape[1], luma.shape[0])
        luma.setflags(write=False)
        object.__setattr__(self, "luma", luma)

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.luma, other.luma)


@dataclass(frozen=True, eq=False)
class Sequence:
    frames: tuple[Frame, ...]
    name: str = "sequence"

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise ValueError("a sequence needs at least 2 frames")
        shape = frames[0].luma.shape
        if any(f.luma.shape != shape for f in frames):
            raise InvalidDimensions("all frames of a sequence must share dimensions")
        object.__setattr__(self, "frames", frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self):
        return len(self.frames)

    def __eq__(self, other):
        return (
            isinstance(other, Sequence)
            and self.name == other.name
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )

    def head(self, n: int) -> "Sequence":
        return Sequence(self.frames[:n], self.name)


def pad_to_ctu(luma: np.ndarray, ctu: int = CTU_SIZE) -> np.ndarray:
    """Edge-replicate ``luma`` up to the next multiple of ``ctu`` in both axes."""
    h, w = luma.shape
    ph = -h % ctu
    pw = -w % ctu
    if ph == 0 and pw == 0:
        return luma
    return np.pad(luma, ((0, ph), (0, pw)), mode="edge")


def _skip_y4m_header(data: bytes) -> tuple[bytes, bool]:
    if not data.startswith(b"YUV4MPEG2"):
        return data, False
    end = data.index(b"\n") + 1
    return data[end:], True


def load_raw_video(
    path: str | os.PathLike,
    width: int,
    height: int,
    frame_count: int,
    layout: str = "yuv420",
    name: str | None = None,
) -> Sequence:
    """Read the first ``frame_count`` frames of a headerless 8-bit raw file.

    ``layout`` is ``"yuv420"`` (planar, chroma skipped) or ``"luma"``. A Y4M
    stream header and per-frame ``FRAME`` markers are skipped when present.
    """
    check_dimensions(width, height)
    if layout not in ("yuv420", "luma"):
        raise ValueError(f"unknown layout {layout!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    data, is_y4m = _skip_y4m_header(path.read_bytes())
    luma_size = width * height
    frame_size = luma_size * 3 // 2 if layout == "yuv420" else luma_size

    frames = []
    offset = 0
    for i in range(frame_count):
        if is_y4m:
            if not data.startswith(b"FRAME", offset):
                raise TruncatedInput(f"{path}: missing FRAME marker for frame {i}")
            offset = data.index(b"\n", offset) + 1
        if len(data) < offset + frame_size:
            raise TruncatedInput(
                f"{path}: need {frame_count} frames of {frame_size} bytes, file holds {len(data)} bytes"
            )
        plane = np.frombuffer(data, dtype=np.uint8, count=luma_size, offset=offset)
        frames.append(Frame(plane.reshape(height, width)))
        offset += frame_size
    return Sequence(tuple(frames), name or path.stem)


def write_raw_video(seq: Sequence, path: str | os.PathLike, layout: str = "luma") -> None:
    """Write ``seq`` as headerless raw video. 4:2:0 output gets mid-gray chroma."""
    with open(path, "wb") as fh:
        for frame in seq.frames:
            fh.write(frame.luma.tobytes())
            if layout == "yuv420":
                fh.write(bytes([128]) * (frame.width * frame.height // 2))
            elif layout != "luma":
                raise ValueError(f"unknown layout {layout!r}")


def _texture(rng: np.random.Generator, height: int, width: int, cell: int = 8, amplitude: float = 40.0) -> np.ndarray:
    """Smooth random texture: coarse noise upsampled and box-filtered."""
    gh = -(-height // cell) + 2
    gw = -(-width // cell) + 2
    coarse = rng.normal(0.0, 1.0, size=(gh, gw))
    fine = np.kron(coarse, np.ones((cell, cell)))
    k = cell // 2 or 1
    kernel = np.ones(2 * k + 1) / (2 * k + 1)
    fine = np.apply_along_axis(np.convolve, 0, fine, kernel, mode="same")
    fine = np.apply_along_axis(np.convolve, 1, fine, kernel, mode="same")
    fine = fine[cell : cell + height, cell : cell + width]
    return fine * amplitude


def synthesize_sequence(
    kind: str,
    width: int,
    height: int,
    frame_count: int,
    seed: int = 0,
    motion: tuple[int, int] = (2, 0),
    name: str | None = None,
) -> Sequence:
    """Deterministic synthetic sequence.

    For ``moving_block`` a textured rectangle moves over a static textured
    background so that, inside the rectangle, frame ``t+1`` at ``(x, y)``
    equals frame ``t`` at ``(x + dx, y + dy)`` with ``motion = (dx, dy)``.
    ``gradient`` is a ramp panning by ``motion`` per frame.
    """
    check_dimensions(width, height)
    if frame_count < 2:
        raise ValueError("frame_count must be >= 2")
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    rng = np.random.default_rng(seed)
    dx, dy = motion
    frames = []

    if kind == "flat":
        value = int(rng.integers(32, 224))
        frames = [np.full((height, width), value, dtype=np.uint8) for _ in range(frame_count)]

    elif kind == "gradient":
        gx, gy = rng.uniform(0.5, 1.5, size=2)
        yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
        for t in range(frame_count):
            ramp = 16 + gx * (xx + t * dx) + gy * (yy + t * dy)
            frames.append(np.clip(np.round(ramp), 0, 255).astype(np.uint8))

    elif kind == "moving_block":
        background = 128 + _texture(rng, height, width, cell=16, amplitude=25.0)
        bh, bw = max(8, height // 2), max(8, width // 3)
        margin = 8 + max(abs(dx), abs(dy)) * frame_count
        # patch large enough to cover every displacement of the rectangle window
        patch = 128 + _texture(rng, bh + 2 * margin, bw + 2 * margin, cell=8, amplitude=50.0)
        x0 = (width - bw) // 2
        y0 = (height - bh) // 2
        for t in range(frame_count):
            img = background.copy()
            # object moves by -motion per frame, its texture moves with it
            ox, oy = x0 - t * dx, y0 - t * dy
            for yy in range(max(0, oy), min(height, oy + bh)):
                row = patch[margin + yy - oy, margin + max(0, ox) - ox : margin + min(width, ox + bw) - ox]
                img[yy, max(0, ox) : min(width, ox + bw)] = row
            frames.append(np.clip(np.round(img), 0, 255).astype(np.uint8))

    else:  # noise
        for _ in range(frame_count):
            frames.append(rng.integers(0, 256, size=(height, width), dtype=np.uint8))

    return Sequence(tuple(Frame(f) for f in frames), name or f"{kind}_{width}x{height}_s{seed}")
