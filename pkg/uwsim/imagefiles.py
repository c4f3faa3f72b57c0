"""PNG reading and writing.

Colour images go through Pillow as 8-bit RGB and are mapped to ``[0, 1]`` by
``value / 255`` with no gamma handling. Depth maps are 16-bit greyscale PNGs
read and written with pypng, which keeps the full 16-bit range that 8-bit
oriented readers tend to squash.
"""
import os

import numpy as np
import png
from PIL import Image, UnidentifiedImageError

from uwsim.exceptions import ImageFormatError, ImageReadError, ImageWriteError
from uwsim.imaging import as_image


#: Pillow modes that are plain 8-bit samples and can be converted to RGB
EIGHT_BIT_MODES = ("RGB", "RGBA", "L", "LA", "P")


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 255), 0, 255).astype(np.uint8)


def quantize(img: np.ndarray) -> np.ndarray:
    """Round an image to the values an 8-bit PNG round trip gives back."""
    return to_uint8(img).astype(np.float64) / 255


def png_bitdepth(path: str) -> int:
    """Bits per sample from the PNG header."""
    with open(path, "rb") as f:
        reader = png.Reader(file=f)
        reader.preamble()
        return reader.bitdepth


def read_rgb(path: str) -> np.ndarray:
    """Read an 8-bit colour PNG as an ``H x W x 3`` float image.

    Pillow opens 16-bit colour PNGs as 8-bit RGB, so the bit depth of a PNG is
    read from its header with pypng.
    """
    try:
        with Image.open(path) as im:
            if im.mode not in EIGHT_BIT_MODES:
                raise ImageFormatError("{}: unsupported image mode {}, expected 8-bit RGB".format(path, im.mode))
            bitdepth = png_bitdepth(path) if im.format == "PNG" else 8
            if bitdepth > 8:
                raise ImageFormatError("{}: {}-bit samples, expected 8-bit RGB".format(path, bitdepth))
            data = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (FileNotFoundError, IsADirectoryError):
        raise ImageReadError("Image file {} does not exist".format(path))
    except (UnidentifiedImageError, png.Error, OSError, SyntaxError) as e:
        raise ImageReadError("Could not read image {}: {}".format(path, e)) from e
    return data.astype(np.float64) / 255


def write_rgb(path: str, img: np.ndarray):
    img = as_image(img)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    try:
        Image.fromarray(to_uint8(img)).save(path, format="PNG")
    except OSError as e:
        raise ImageWriteError("Could not write image {}: {}".format(path, e)) from e


def read_depth16(path: str) -> np.ndarray:
    """Read a 16-bit greyscale PNG as raw ``uint16`` units."""
    try:
        width, height, rows, info = png.Reader(filename=path).read()
        if info["bitdepth"] != 16 or info["planes"] != 1:
            raise ImageFormatError("{}: depth maps must be 16-bit greyscale, got {} bit with {} planes".format(path, info["bitdepth"], info["planes"]))
        data = np.vstack([np.asarray(row, dtype=np.uint16) for row in rows])
    except (FileNotFoundError, IsADirectoryError):
        raise ImageReadError("Depth file {} does not exist".format(path))
    except (png.Error, OSError) as e:
        raise ImageReadError("Could not read depth map {}: {}".format(path, e)) from e
    return data.reshape(height, width)


def write_depth16(path: str, units: np.ndarray):
    units = np.asarray(units)
    if units.ndim != 2:
        raise ImageFormatError("Depth map must be two dimensional, got shape {}".format(units.shape))
    units = np.clip(np.rint(units), 0, 65535).astype(np.uint16)
    height, width = units.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    writer = png.Writer(width=width, height=height, greyscale=True, bitdepth=16)
    try:
        with open(path, "wb") as f:
            writer.write(f, units.tolist())
    except OSError as e:
        raise ImageWriteError("Could not write depth map {}: {}".format(path, e)) from e
