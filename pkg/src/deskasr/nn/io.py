"""Binary model container.

Layout (all integers little-endian u32 unless noted):

    magic    4 bytes  b"NNET"
    version  u32      currently 1
    embedding_dim u32
    view record:  kind u32, base_dim u32, context u32,
                  nframes u32, frames i32[nframes],
                  ncomponents u32, components u32[ncomponents]
    nlayers  u32
    layer records: kind u32, input_dim u32, output_dim u32,
                   naux u32, aux u32[naux]
    payload: per layer, row-major float64 little-endian arrays in
             declaration order (W, b, then U for recurrent layers)

Joint models reuse the same records under the "JNET" magic with a branch
table; see deskasr.fusion.
"""

import struct

import numpy as np

from ..errors import ParseError
from .network import InputView, LayerSpec, Network, NetworkSpec

MAGIC = b"NNET"
VERSION = 1

KIND_CODES = {
    "affine": 1,
    "sigmoid": 2,
    "relu": 3,
    "maxout": 4,
    "conv2d": 5,
    "maxpool": 6,
    "recurrent_unfolded": 7,
    "softmax_output": 8,
}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}

VIEW_CODES = {"identity": 0, "select": 1, "conv_block": 2}
CODE_VIEWS = {v: k for k, v in VIEW_CODES.items()}


def _layer_aux(layer):
    if layer.kind == "maxout":
        return [layer.group_size]
    if layer.kind == "conv2d":
        return [layer.num_filters, *layer.window, layer.stride, *layer.in_shape]
    if layer.kind == "maxpool":
        return [*layer.pool, *layer.in_shape]
    if layer.kind == "recurrent_unfolded":
        return [layer.steps]
    return []


def _layer_from_record(kind, input_dim, output_dim, aux):
    extra = {}
    if kind == "maxout":
        extra["group_size"] = aux[0]
    elif kind == "conv2d":
        extra.update(
            num_filters=aux[0],
            window=(aux[1], aux[2]),
            stride=aux[3],
            in_shape=(aux[4], aux[5], aux[6]),
        )
    elif kind == "maxpool":
        extra.update(pool=(aux[0], aux[1]), in_shape=(aux[2], aux[3], aux[4]))
    elif kind == "recurrent_unfolded":
        extra["steps"] = aux[0]
    return LayerSpec(kind, input_dim, output_dim, **extra)


def pack_view(view):
    out = struct.pack(
        "<III", VIEW_CODES[view.kind], view.base_dim, view.context
    )
    out += struct.pack("<I", len(view.frames))
    out += struct.pack(f"<{len(view.frames)}i", *view.frames) if view.frames else b""
    out += struct.pack("<I", len(view.components))
    if view.components:
        out += struct.pack(f"<{len(view.components)}I", *view.components)
    return out


def unpack_view(buf, off):
    code, base_dim, context = struct.unpack_from("<III", buf, off)
    off += 12
    (nframes,) = struct.unpack_from("<I", buf, off)
    off += 4
    frames = struct.unpack_from(f"<{nframes}i", buf, off)
    off += 4 * nframes
    (ncomp,) = struct.unpack_from("<I", buf, off)
    off += 4
    comps = struct.unpack_from(f"<{ncomp}I", buf, off)
    off += 4 * ncomp
    return InputView(CODE_VIEWS[code], base_dim, context, frames, comps), off


def pack_layer_record(layer):
    aux = _layer_aux(layer)
    return struct.pack(
        f"<IIII{len(aux)}I",
        KIND_CODES[layer.kind],
        layer.input_dim,
        layer.output_dim,
        len(aux),
        *aux,
    )


def unpack_layer_record(buf, off):
    code, input_dim, output_dim, naux = struct.unpack_from("<IIII", buf, off)
    off += 16
    aux = struct.unpack_from(f"<{naux}I", buf, off)
    off += 4 * naux
    if code not in CODE_KINDS:
        raise ParseError(f"unknown layer kind code {code}")
    return _layer_from_record(CODE_KINDS[code], input_dim, output_dim, aux), off


def _param_arrays(layer, params):
    if params is None:
        return []
    order = ["W", "b"] + (["U"] if "U" in params else [])
    return [params[k] for k in order]


def pack_params(spec_layers, params):
    payload = b""
    for layer, p in zip(spec_layers, params):
        for arr in _param_arrays(layer, p):
            payload += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return payload


def _param_shapes(layer):
    if layer.kind in ("affine", "softmax_output"):
        return {"W": (layer.output_dim, layer.input_dim), "b": (layer.output_dim,)}
    if layer.kind == "conv2d":
        kh, kw = layer.window
        return {
            "W": (layer.num_filters, kh, kw, layer.in_shape[2]),
            "b": (layer.num_filters,),
        }
    if layer.kind == "recurrent_unfolded":
        h = layer.output_dim
        return {
            "W": (h, layer.input_dim // layer.steps),
            "b": (h,),
            "U": (h, h),
        }
    return None


def unpack_params(spec_layers, buf, off):
    params = []
    for layer in spec_layers:
        shapes = _param_shapes(layer)
        if shapes is None:
            params.append(None)
            continue
        entry = {}
        for key, shape in shapes.items():
            count = int(np.prod(shape))
            if off + 8 * count > len(buf):
                raise ParseError(
                    f"truncated container: {layer.kind} {key} payload missing"
                )
            arr = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
            off += 8 * count
            entry[key] = arr.reshape(shape).astype(np.float64)
        params.append(entry)
    return params, off


def save_network(path, network):
    spec = network.spec
    blob = MAGIC + struct.pack("<II", VERSION, spec.embedding_dim)
    blob += pack_view(spec.view)
    blob += struct.pack("<I", len(spec.layers))
    for layer in spec.layers:
        blob += pack_layer_record(layer)
    blob += pack_params(spec.layers, network.params)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_network(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ParseError(f"{path}: bad magic {buf[:4]!r}, expected {MAGIC!r}")
    try:
        version, embedding_dim = struct.unpack_from("<II", buf, 4)
        if version != VERSION:
            raise ParseError(f"{path}: unsupported container version {version}")
        view, off = unpack_view(buf, 12)
        (nlayers,) = struct.unpack_from("<I", buf, off)
        off += 4
        specs = []
        for _ in range(nlayers):
            layer, off = unpack_layer_record(buf, off)
            specs.append(layer)
        params, off = unpack_params(specs, buf, off)
    except struct.error as exc:
        raise ParseError(f"{path}: truncated container ({exc})") from exc
    if off != len(buf):
        raise ParseError(f"{path}: {len(buf) - off} trailing bytes")
    return Network(NetworkSpec(specs, view, embedding_dim), params)
