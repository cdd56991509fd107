#!/usr/bin/env python
#
# mstdp
# Copyright (C) 2022 the mstdp developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>

# System imports
import gzip
import logging
import os
import struct
import zlib
from dataclasses import dataclass

# Pip installed imports
import numpy as np

# Local imports
from .network import DataSample

IMAGE_SIDE = 28
N_PIXELS = IMAGE_SIDE * IMAGE_SIDE
N_LABELS = 10
N_VISIBLE = N_PIXELS + N_LABELS

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

GZIP_MAGIC = b"\x1f\x8b"


class FormatError(RuntimeError):
    pass

class TruncatedError(FormatError):
    pass


@dataclass
class MnistSet:
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise FormatError(
                "image count %s does not match label count %s" % (len(self.images), len(self.labels))
            )

    def __len__(self):
        return len(self.labels)

    def head(self, count):
        return MnistSet(self.images[:count], self.labels[:count])


def _read_bytes(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except (EOFError, zlib.error, gzip.BadGzipFile) as e:
            raise TruncatedError("corrupted gzip stream in %s: %s" % (path, e)) from e
    return raw


def read_idx(path, expected_magic):
    # Data format (big endian):
    # u32 | Magic (0x00000803 images, 0x00000801 labels)
    # u32 | Item count
    # u32 | Row count      (images only)
    # u32 | Column count   (images only)
    # u8[] | Payload, row-wise
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise TruncatedError("%s is too short to hold an IDX header" % path)

    magic, = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise FormatError("bad IDX magic 0x%08x in %s (expected 0x%08x)" % (magic, path, expected_magic))

    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise TruncatedError("%s is too short to hold an IDX header" % path)
    dims = struct.unpack(">" + "I" * ndim, raw[4:header_size])

    count = int(np.prod(dims))
    payload = raw[header_size:]
    if len(payload) < count:
        raise TruncatedError("%s holds %s payload bytes, header announces %s" % (path, len(payload), count))
    if len(payload) > count:
        logging.warning("ignoring %s trailing bytes in %s", len(payload) - count, path)

    return np.frombuffer(payload, dtype=np.uint8, count=count).reshape(dims).copy()


def load_idx(images_path, labels_path):
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise FormatError("expected %sx%s images, got %s" % (IMAGE_SIDE, IMAGE_SIDE, images.shape[1:]))
    if np.any(labels > 9):
        raise FormatError("label file %s holds labels outside 0-9" % labels_path)
    data = MnistSet(images, labels)
    logging.info("loaded %s samples from %s", len(data), images_path)
    return data


def find_idx_pair(directory, kind):
    """
    Locate {kind}-images-idx3-ubyte and {kind}-labels-idx1-ubyte, raw or gzipped.
    """
    paths = []
    for stem in (f"{kind}-images-idx3-ubyte", f"{kind}-labels-idx1-ubyte"):
        for candidate in (stem, stem + ".gz"):
            path = os.path.join(directory, candidate)
            if os.path.exists(path):
                paths.append(path)
                break
        else:
            raise FileNotFoundError("couldn't find %s in %s" % (stem, directory))
    return tuple(paths)


def load_mnist(directory, kind="train"):
    return load_idx(*find_idx_pair(directory, kind))


def _check_digit(digit):
    if not (isinstance(digit, (int, np.integer)) and 0 <= digit <= 9):
        raise ValueError("label must be a digit 0-9, got %r" % (digit,))


def one_hot(digit):
    _check_digit(digit)
    block = np.zeros(N_LABELS)
    block[int(digit)] = 1.0
    return block


def encode_sample(image, label=None):
    """
    Pixels scaled to [0, 1] followed by the one-hot label.  Pixels are always
    clamped, the label block only when a label is given.
    """
    image = np.asarray(image)
    if image.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise ValueError("expected a %sx%s image, got shape %s" % (IMAGE_SIDE, IMAGE_SIDE, image.shape))

    targets = np.zeros(N_VISIBLE)
    targets[:N_PIXELS] = image.reshape(-1) / 255.0
    clamp_mask = np.zeros(N_VISIBLE, dtype=bool)
    clamp_mask[:N_PIXELS] = True
    if label is not None:
        targets[N_PIXELS:] = one_hot(label)
        clamp_mask[N_PIXELS:] = True
    return DataSample(targets, clamp_mask)


def label_sample(digit):
    """
    Only the label block clamped, used for conditional generation.
    """
    targets = np.zeros(N_VISIBLE)
    targets[N_PIXELS:] = one_hot(digit)
    clamp_mask = np.zeros(N_VISIBLE, dtype=bool)
    clamp_mask[N_PIXELS:] = True
    return DataSample(targets, clamp_mask)


def decode_image(values):
    """
    Pixel block (targets or visible states) back to a 28x28 byte image.
    """
    pixels = np.clip(np.asarray(values, dtype=np.float64)[:N_PIXELS], 0.0, 1.0)
    return np.rint(pixels * 255.0).astype(np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE)
