"""Minimal PNG and binary PNM (P5/P6) codecs built on zlib."""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .image import ImageRGB

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_CHANNELS = {0: 1, 2: 3, 3: 1, 4: 2, 6: 4}


class ImageIOError(ValueError):
    def __init__(self, path, reason: str):
        super().__init__(f"{os.fspath(path)}: {reason}")
        self.path = os.fspath(path)
        self.reason = reason


def load_image(path) -> ImageRGB:
    """Read an 8-bit PNG (gray/RGB/palette, alpha dropped) or binary PGM/PPM."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise ImageIOError(path, f"cannot read file ({exc.strerror})") from exc
    if raw.startswith(PNG_SIGNATURE):
        planes = _decode_png(raw, path)
    elif raw[:2] in (b"P5", b"P6"):
        planes = _decode_pnm(raw, path)
    else:
        raise ImageIOError(path, "unsupported or corrupt header (expected PNG, P5 or P6)")
    return ImageRGB.from_bytes(planes)


def save_image(img: ImageRGB | np.ndarray, path) -> None:
    """Write an image; format chosen by extension (.png, .ppm, .pgm).

    ``img`` may be an :class:`ImageRGB` (quantised with round-half-away) or a
    uint8 array shaped (h, w) or (c, h, w) with c in {1, 3}.
    """
    planes = img.to_bytes() if isinstance(img, ImageRGB) else np.asarray(img)
    if planes.dtype != np.uint8:
        raise ImageIOError(path, f"raw planes must be uint8, got {planes.dtype}")
    if planes.ndim == 2:
        planes = planes[None]
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".pgm":
        if planes.shape[0] == 3:
            if not (np.array_equal(planes[0], planes[1]) and np.array_equal(planes[0], planes[2])):
                raise ImageIOError(path, "PGM output needs a grayscale image")
            planes = planes[:1]
        payload = _encode_pnm(planes)
    elif ext == ".ppm":
        if planes.shape[0] == 1:
            planes = np.repeat(planes, 3, axis=0)
        payload = _encode_pnm(planes)
    elif ext == ".png":
        payload = _encode_png(planes)
    else:
        raise ImageIOError(path, f"unsupported output extension {ext!r}")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


# -- PNG ---------------------------------------------------------------------

def _chunks(raw: bytes, path):
    pos = len(PNG_SIGNATURE)
    while pos < len(raw):
        if pos + 8 > len(raw):
            raise ImageIOError(path, "truncated chunk header")
        length, ctype = struct.unpack(">I4s", raw[pos:pos + 8])
        body = raw[pos + 8:pos + 8 + length]
        crc_bytes = raw[pos + 8 + length:pos + 12 + length]
        if len(body) != length or len(crc_bytes) != 4:
            raise ImageIOError(path, f"truncated {ctype!r} chunk")
        if zlib.crc32(body, zlib.crc32(ctype)) != struct.unpack(">I", crc_bytes)[0]:
            raise ImageIOError(path, f"CRC mismatch in {ctype.decode('latin-1')} chunk")
        yield ctype, body
        pos += 12 + length
        if ctype == b"IEND":
            return
    raise ImageIOError(path, "missing IEND chunk")


def _decode_png(raw: bytes, path) -> np.ndarray:
    header = None
    palette = None
    idat = []
    for ctype, body in _chunks(raw, path):
        if ctype == b"IHDR":
            if len(body) != 13:
                raise ImageIOError(path, "bad IHDR length")
            header = struct.unpack(">IIBBBBB", body)
        elif ctype == b"PLTE":
            palette = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3)
        elif ctype == b"IDAT":
            idat.append(body)
    if header is None:
        raise ImageIOError(path, "missing IHDR chunk")
    width, height, depth, ctype, _, _, interlace = header
    if width == 0 or height == 0:
        raise ImageIOError(path, "zero image dimension")
    if ctype not in _CHANNELS:
        raise ImageIOError(path, f"invalid color type {ctype}")
    allowed = (1, 2, 4, 8, 16) if ctype == 0 else (1, 2, 4, 8) if ctype == 3 else (8, 16)
    if depth not in allowed:
        raise ImageIOError(path, f"unsupported bit depth {depth} for color type {ctype}")
    if interlace:
        raise ImageIOError(path, "interlaced PNG is not supported")
    try:
        data = zlib.decompress(b"".join(idat))
    except zlib.error as exc:
        raise ImageIOError(path, f"corrupt image data ({exc})") from exc

    channels = _CHANNELS[ctype]
    bpp = max(1, channels * depth // 8)
    stride = (width * channels * depth + 7) // 8
    if len(data) < height * (stride + 1):
        raise ImageIOError(path, "image data shorter than declared size")
    pixels = _unfilter(data, height, stride, bpp, path)
    if depth == 16:
        wide = pixels.reshape(height, width, channels, 2).astype(np.uint32)
        pixels = ((wide[..., 0] * 256 + wide[..., 1]) * 255 + 32767) // 65535
        arr = pixels.astype(np.uint8)
    elif depth < 8:
        # sub-byte samples are packed big-endian within each row
        bits = np.unpackbits(pixels, axis=1).reshape(height, -1, depth)
        weights = 1 << np.arange(depth - 1, -1, -1, dtype=np.uint8)
        arr = (bits * weights).sum(axis=2, dtype=np.uint8)[:, :width, None]
        if ctype == 0:
            arr = arr * np.uint8(255 // ((1 << depth) - 1))
    else:
        arr = pixels.reshape(height, width, channels)

    if ctype == 3:
        if palette is None:
            raise ImageIOError(path, "palette image without PLTE chunk")
        if arr.max() >= len(palette):
            raise ImageIOError(path, "palette index out of range")
        arr = palette[arr[..., 0]]
    elif ctype == 4:
        arr = arr[..., :1]
    elif ctype == 6:
        arr = arr[..., :3]
    planes = np.ascontiguousarray(arr.transpose(2, 0, 1))
    if planes.shape[0] == 1:
        planes = np.repeat(planes, 3, axis=0)
    return planes


def _unfilter(data: bytes, height: int, stride: int, bpp: int, path) -> np.ndarray:
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    for y in range(height):
        start = y * (stride + 1)
        ftype = data[start]
        line = np.frombuffer(data, dtype=np.uint8, count=stride, offset=start + 1)
        if ftype == 0:
            row = line.copy()
        elif ftype == 1:
            row = np.cumsum(line.reshape(-1, bpp), axis=0, dtype=np.uint64) % 256
            row = row.astype(np.uint8).ravel()
        elif ftype == 2:
            row = line + prev
        elif ftype in (3, 4):
            row = _unfilter_sequential(line, prev, bpp, ftype)
        else:
            raise ImageIOError(path, f"invalid filter type {ftype} on row {y}")
        out[y] = row
        prev = out[y]
    return out


def _unfilter_sequential(line: np.ndarray, prev: np.ndarray, bpp: int, ftype: int) -> np.ndarray:
    cur = bytearray(line.tobytes())
    up = prev.tobytes()
    for i in range(len(cur)):
        a = cur[i - bpp] if i >= bpp else 0
        b = up[i]
        if ftype == 3:
            cur[i] = (cur[i] + ((a + b) >> 1)) & 0xFF
        else:
            c = up[i - bpp] if i >= bpp else 0
            p = a + b - c
            pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
            pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
            cur[i] = (cur[i] + pred) & 0xFF
    return np.frombuffer(bytes(cur), dtype=np.uint8)


def _png_chunk(ctype: bytes, body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + ctype + body + struct.pack(">I", zlib.crc32(body, zlib.crc32(ctype)))


def _encode_png(planes: np.ndarray) -> bytes:
    c, h, w = planes.shape
    color_type = {1: 0, 3: 2}[c]
    rows = planes.transpose(1, 2, 0).reshape(h, w * c)
    # "Up" filter on every row
    filtered = np.empty((h, w * c + 1), dtype=np.uint8)
    filtered[:, 0] = 2
    filtered[:, 1:] = rows
    filtered[1:, 1:] -= rows[:-1]
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    return (PNG_SIGNATURE + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(filtered.tobytes(), 6))
            + _png_chunk(b"IEND", b""))


# -- PNM ---------------------------------------------------------------------

def _decode_pnm(raw: bytes, path) -> np.ndarray:
    magic = raw[:2]
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise ImageIOError(path, f"corrupt PNM header (bad field {token[:16]!r})")
        fields.append(int(token))
    pos += 1  # single whitespace before raster
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageIOError(path, f"corrupt PNM header ({width}x{height}, maxval {maxval})")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height * channels
    if len(raw) - pos < count * dtype.itemsize:
        raise ImageIOError(path, "PNM raster shorter than declared size")
    arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).reshape(height, width, channels)
    if maxval != 255:
        arr = np.floor(arr.astype(np.float64) * 255.0 / maxval + 0.5)
    planes = np.ascontiguousarray(arr.astype(np.uint8).transpose(2, 0, 1))
    return np.repeat(planes, 3, axis=0) if channels == 1 else planes


def _encode_pnm(planes: np.ndarray) -> bytes:
    c, h, w = planes.shape
    magic = b"P6" if c == 3 else b"P5"
    return magic + f"\n{w} {h}\n255\n".encode() + planes.transpose(1, 2, 0).tobytes()
