"""Sample sources: CSV point clouds, PGM images and synthetic toy densities."""

from __future__ import annotations

import csv
import io
import os
import re
from dataclasses import dataclass, field

import numpy as np

from collot.core import MarginalSamples
from collot.errors import (BadMagic, EmptyFile, ParseError, RaggedRows, TruncatedData, UnknownFamily,
                           ValidationError, ZeroMassImage)

FAMILIES = ("normal", "uniform", "swiss_roll", "banana", "funnel", "ring")
PLANAR_FAMILIES = ("swiss_roll", "banana", "funnel", "ring")

# ring annulus: radius ~ N(RING_RADIUS, RING_SPREAD) truncated to [RING_MIN, RING_MAX]
RING_RADIUS, RING_SPREAD, RING_MIN, RING_MAX = 1.0, 0.1, 0.5, 1.5
SWISS_ROLL_NOISE = 0.05


def load_csv(path: str | os.PathLike, id: str | None = None) -> MarginalSamples:
    """Read one sample per row, one coordinate per column, no header."""
    with open(path, newline="") as fh:
        text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    n = len(rows[0])
    values = []
    for lineno, row in enumerate(rows, 1):
        if len(row) != n:
            raise RaggedRows(f"{path}: row {lineno} has {len(row)} columns, expected {n}")
        try:
            values.append([float(c) for c in row])
        except ValueError as exc:
            raise ParseError(f"{path}: row {lineno}: {exc}") from None
    return MarginalSamples(np.array(values), id=id or os.path.basename(os.fspath(path)))


def save_csv(path: str | os.PathLike, data) -> None:
    """Write rows with round-trip precision (17 significant digits)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    with open(path, "w", newline="") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


@dataclass
class SyntheticSpec:
    family: str
    num_points: int
    n: int = 2
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownFamily(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.num_points < 1:
            raise ValidationError("num_points must be >= 1")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.family in PLANAR_FAMILIES and self.n != 2:
            raise ValidationError(f"family {self.family!r} is 2-D only, got n={self.n}")


def sample_synthetic(spec: SyntheticSpec) -> MarginalSamples:
    """Draw ``spec.num_points`` i.i.d. samples, deterministic in ``spec.seed``.

    Families:
        normal      standard n-D Gaussian
        uniform     U([0, 1]^n)
        swiss_roll  t ~ U[1.5pi, 4.5pi], (t cos t, t sin t) / 4.5pi + N(0, 0.05^2)
        banana      (z1, z2 + z1^2 / 2 - 1), z standard normal
        funnel      z1 ~ N(0, 1), z2 ~ N(0, s^2) with s = exp(z1 / 2)
        ring        radius ~ N(1, 0.1^2) truncated to [0.5, 1.5], angle ~ U[0, 2pi)
    """
    rng = np.random.default_rng(spec.seed)
    N, n = spec.num_points, spec.n
    prm = spec.params
    if spec.family == "normal":
        x = rng.standard_normal((N, n))
    elif spec.family == "uniform":
        x = rng.random((N, n))
    elif spec.family == "swiss_roll":
        t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, N)
        noise = prm.get("noise", SWISS_ROLL_NOISE)
        x = np.column_stack([t * np.cos(t), t * np.sin(t)]) / (4.5 * np.pi) + noise * rng.standard_normal((N, 2))
    elif spec.family == "banana":
        z = rng.standard_normal((N, 2))
        x = np.column_stack([z[:, 0], z[:, 1] + 0.5 * z[:, 0] ** 2 - 1.0])
    elif spec.family == "funnel":
        z1 = rng.standard_normal(N)
        x = np.column_stack([z1, np.exp(z1 / 2) * rng.standard_normal(N)])
    else:
        x = _ring(rng, N, prm.get("radius", RING_RADIUS), prm.get("spread", RING_SPREAD),
                  prm.get("r_min", RING_MIN), prm.get("r_max", RING_MAX))
    return MarginalSamples(x, id=spec.family)


def _ring(rng, N, radius, spread, r_min, r_max):
    if not r_min < r_max:
        raise ValidationError("ring needs r_min < r_max")
    r = np.empty(0)
    while r.size < N:
        draw = rng.normal(radius, spread, 2 * N)
        r = np.concatenate([r, draw[(draw >= r_min) & (draw <= r_max)]])
    r = r[:N]
    theta = rng.uniform(0.0, 2 * np.pi, N)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64).ravel()
        if px.size != self.width * self.height:
            raise ValidationError(f"{px.size} pixels for a {self.width}x{self.height} image")
        if not np.all(np.isfinite(px)) or px.min(initial=0) < 0 or px.max(initial=0) > 1:
            raise ValidationError("intensities must be finite and within [0, 1]")
        self.pixels = px

    def as_array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)


def image_to_samples(img: GrayImage, num_points: int | None = None, mode: str = "intensity_sampled",
                     seed: int = 0) -> MarginalSamples:
    """Turn an image into equal-weight samples.

    ``grid``: one ``(x, y, intensity)`` sample per pixel. ``intensity_sampled``:
    ``num_points`` pixel centres ``(x, y)`` drawn with probability proportional
    to intensity. Pixel centres sit at ``((col + .5) / width, (row + .5) / height)``.
    """
    rows, cols = np.divmod(np.arange(img.width * img.height), img.width)
    x = (cols + 0.5) / img.width
    y = (rows + 0.5) / img.height
    if mode == "grid":
        if num_points is not None and num_points != img.width * img.height:
            raise ValidationError(f"grid mode yields {img.width * img.height} samples, not {num_points}")
        return MarginalSamples(np.column_stack([x, y, img.pixels]))
    if mode != "intensity_sampled":
        raise ValidationError(f"unknown image mode {mode!r}")
    if num_points is None or num_points < 1:
        raise ValidationError("intensity_sampled mode needs num_points >= 1")
    mass = img.pixels.sum()
    if mass <= 0:
        raise ZeroMassImage("image has no intensity to sample from")
    idx = np.random.default_rng(seed).choice(img.pixels.size, size=num_points, p=img.pixels / mass)
    return MarginalSamples(np.column_stack([x[idx], y[idx]]))


_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pgm_header(buf: bytes):
    """Parse magic, width, height, maxval; returns them with the payload offset."""
    fields, pos = [], 0
    for _ in range(4):
        m = _PGM_TOKEN.match(buf, pos)
        if m is None:
            raise TruncatedData("PGM header ends early")
        fields.append(m.group(1))
        pos = m.end()
    return fields, pos


def load_pgm(path: str | os.PathLike) -> GrayImage:
    with open(path, "rb") as fh:
        buf = fh.read()
    return decode_pgm(buf)


def decode_pgm(buf: bytes) -> GrayImage:
    if buf[:2] not in (b"P2", b"P5"):
        raise BadMagic(f"not a PGM file (magic {buf[:2]!r})")
    (magic, w, h, mx), pos = _pgm_header(buf)
    try:
        width, height, maxval = int(w), int(h), int(mx)
    except ValueError:
        raise ParseError("non-integer PGM header field") from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ParseError(f"bad PGM geometry {width}x{height} maxval {maxval}")
    count = width * height
    if magic == b"P5":
        pos += 1  # exactly one whitespace byte precedes binary data
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        payload = buf[pos:pos + count * dtype.itemsize]
        if len(payload) < count * dtype.itemsize:
            raise TruncatedData(f"expected {count} samples, got {len(payload) // dtype.itemsize}")
        raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        tokens = re.sub(rb"#[^\n]*", b"", buf[pos:]).split()
        if len(tokens) < count:
            raise TruncatedData(f"expected {count} samples, got {len(tokens)}")
        try:
            raw = np.array([int(t) for t in tokens[:count]], dtype=np.float64)
        except ValueError:
            raise ParseError("non-integer PGM sample") from None
    if raw.max(initial=0) > maxval:
        raise ParseError("PGM sample exceeds maxval")
    return GrayImage(width, height, raw / maxval)


def save_pgm(path: str | os.PathLike, img: GrayImage, maxval: int = 255, binary: bool = True) -> None:
    levels = np.rint(img.pixels * maxval).astype(np.int64)
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(levels.astype(">u2" if maxval > 255 else "u1").tobytes())
        else:
            for r in range(img.height):
                fh.write(" ".join(map(str, levels[r * img.width:(r + 1) * img.width])).encode() + b"\n")
