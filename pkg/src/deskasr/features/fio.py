"""Feature, alignment, and waveform file formats.

Feature files: magic "FEAT", u32 T, u32 D, then T*D row-major 32-bit
little-endian floats.

Alignment files: text, one utterance per line: `utt_id T id_1 ... id_T`.

Waveforms: raw 16-bit little-endian PCM next to a one-line text sidecar
`<sample_rate> <side_id>` at the same path with ".meta" appended.
"""

import struct

import numpy as np

from ..errors import ParseError
from .frontend import FeatureMatrix, Waveform

FEAT_MAGIC = b"FEAT"


def write_features(path, features, provenance=None):
    mat = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    t, d = mat.shape
    with open(path, "wb") as fh:
        fh.write(FEAT_MAGIC + struct.pack("<II", t, d))
        fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def read_features(path, provenance="file"):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != FEAT_MAGIC:
        raise ParseError(f"{path}: bad magic {buf[:4]!r}, expected {FEAT_MAGIC!r}")
    if len(buf) < 12:
        raise ParseError(f"{path}: truncated header")
    t, d = struct.unpack_from("<II", buf, 4)
    need = 12 + 4 * t * d
    if len(buf) != need:
        raise ParseError(
            f"{path}: payload is {len(buf) - 12} bytes, header implies {4 * t * d}"
        )
    data = np.frombuffer(buf, dtype="<f4", count=t * d, offset=12)
    return FeatureMatrix(data.reshape(t, d).astype(np.float64), provenance)


def write_alignments(path, alignments):
    """alignments: iterable of (utt_id, state-id sequence)."""
    with open(path, "w") as fh:
        for utt_id, ids in alignments:
            ids = [str(int(i)) for i in ids]
            fh.write(f"{utt_id} {len(ids)} {' '.join(ids)}\n")


def read_alignments(path):
    """Returns a list of (utt_id, int array) in file order."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: expected `utt_id T id...`")
            utt_id = parts[0]
            try:
                t = int(parts[1])
                ids = np.array([int(p) for p in parts[2:]], dtype=np.int64)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-integer field ({exc})")
            if ids.size != t:
                raise ParseError(
                    f"{path}:{lineno}: header says {t} frames, line has {ids.size}"
                )
            out.append((utt_id, ids))
    if not out:
        raise ParseError(f"{path}: no alignments found")
    return out


def write_waveform(path, waveform):
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(waveform.samples, dtype="<i2").tobytes())
    with open(path + ".meta", "w") as fh:
        fh.write(f"{waveform.sample_rate} {waveform.side_id}\n")


def read_waveform(path):
    path = str(path)
    with open(path, "rb") as fh:
        samples = np.frombuffer(fh.read(), dtype="<i2").astype(np.int16)
    try:
        with open(path + ".meta") as fh:
            line = fh.readline().split()
        sample_rate = int(line[0])
        side_id = line[1] if len(line) > 1 else ""
    except (OSError, ValueError, IndexError) as exc:
        raise ParseError(f"{path}.meta: bad or missing sidecar ({exc})")
    return Waveform(samples, sample_rate, side_id)
