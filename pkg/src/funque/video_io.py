"""Raw planar YUV ingestion.

Only headerless planar YUV files are supported (decode compressed sources
with an external tool first). Per frame the layout is the full Y plane in
row-major order, followed by U, then V. 10- and 12-bit samples are stored
in little-endian 16-bit containers and are rescaled to the 8-bit range at
read time so every downstream constant can assume a 0..255 value range.
All planes are returned as float64 arrays.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


class SizeMismatchError(ValueError):
    """File size is not an exact multiple of the per-frame byte size."""


class TruncatedReadError(IOError):
    """Fewer bytes than one full plane were available."""


# horizontal / vertical chroma subsampling divisors
_CHROMA_DIVISORS = {
    "yuv420p": (2, 2),
    "yuv422p": (2, 1),
    "yuv444p": (1, 1),
}

_VALID_DEPTHS = (8, 10, 12)


@dataclass(frozen=True)
class VideoSpec:
    """Geometry and sample format of a raw YUV file."""

    width: int
    height: int
    pixel_format: str = "yuv420p"
    bit_depth: int = 8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid dimensions {self.width}x{self.height}")
        if self.pixel_format not in _CHROMA_DIVISORS:
            raise ValueError(
                f"unsupported pixel format {self.pixel_format!r}; "
                f"expected one of {sorted(_CHROMA_DIVISORS)}"
            )
        if self.bit_depth not in _VALID_DEPTHS:
            raise ValueError(f"unsupported bit depth {self.bit_depth}; expected 8, 10 or 12")

    @property
    def bytes_per_sample(self) -> int:
        return 1 if self.bit_depth == 8 else 2

    @property
    def luma_samples(self) -> int:
        return self.width * self.height

    @property
    def chroma_samples(self) -> int:
        dw, dh = _CHROMA_DIVISORS[self.pixel_format]
        return ((self.width + dw - 1) // dw) * ((self.height + dh - 1) // dh)

    @property
    def frame_size_bytes(self) -> int:
        return (self.luma_samples + 2 * self.chroma_samples) * self.bytes_per_sample

    def frame_count(self, file_size: int) -> int:
        if file_size % self.frame_size_bytes != 0:
            raise SizeMismatchError(
                f"file size {file_size} is not a multiple of the "
                f"{self.frame_size_bytes}-byte frame implied by {self}"
            )
        return file_size // self.frame_size_bytes


class FrameSource:
    """Sequential (single-consumer) luma reader over one raw YUV file.

    Multiple independent sources over the same file are fine; a single
    source must not be shared between threads.
    """

    def __init__(self, path, spec: VideoSpec):
        if not os.path.isfile(path):
            raise FileNotFoundError(path)
        self.path = str(path)
        self.spec = spec
        self.frame_count = spec.frame_count(os.path.getsize(path))
        self._fh = open(path, "rb")

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __len__(self):
        return self.frame_count

    def __iter__(self):
        for i in range(self.frame_count):
            yield self.read_luma(i)

    def read_luma(self, index: int) -> np.ndarray:
        """Read frame `index`'s Y plane as a float64 (height, width) array.

        Chroma bytes are skipped entirely. Samples deeper than 8 bits are
        divided by 2**(depth-8), so the result always lies in [0, 255].
        """
        if not 0 <= index < self.frame_count:
            raise IndexError(f"frame {index} out of range [0, {self.frame_count})")
        spec = self.spec
        n_bytes = spec.luma_samples * spec.bytes_per_sample
        self._fh.seek(index * spec.frame_size_bytes)
        raw = self._fh.read(n_bytes)
        if len(raw) != n_bytes:
            raise TruncatedReadError(
                f"short read at frame {index}: wanted {n_bytes} bytes, got {len(raw)}"
            )
        dtype = np.uint8 if spec.bit_depth == 8 else np.dtype("<u2")
        plane = np.frombuffer(raw, dtype=dtype).astype(np.float64)
        plane = plane.reshape(spec.height, spec.width)
        if spec.bit_depth > 8:
            plane = plane / float(2 ** (spec.bit_depth - 8))
        return plane


def open_sequence(path, spec: VideoSpec) -> FrameSource:
    """Open a raw YUV file for frame-by-frame luma access."""
    return FrameSource(path, spec)


def read_luma(source: FrameSource, index: int) -> np.ndarray:
    return source.read_luma(index)


def write_luma_sequence(path, planes, spec: VideoSpec, chroma_value: int | None = None):
    """Write luma planes as a raw YUV file with flat chroma planes.

    Intended for synthesizing test clips. Luma values are rounded to the
    container precision; chroma defaults to mid-gray.
    """
    if chroma_value is None:
        chroma_value = 128 * (2 ** (spec.bit_depth - 8))
    dtype = np.uint8 if spec.bit_depth == 8 else np.dtype("<u2")
    scale = float(2 ** (spec.bit_depth - 8))
    hi = 2**spec.bit_depth - 1
    with open(path, "wb") as fh:
        for plane in planes:
            plane = np.asarray(plane, dtype=np.float64)
            if plane.shape != (spec.height, spec.width):
                raise ValueError(f"plane shape {plane.shape} does not match {spec}")
            samples = np.clip(np.rint(plane * scale), 0, hi).astype(dtype)
            fh.write(samples.tobytes())
            chroma = np.full(spec.chroma_samples, chroma_value, dtype=dtype)
            fh.write(chroma.tobytes())
            fh.write(chroma.tobytes())
