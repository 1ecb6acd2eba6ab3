"""
Binary checkpoint format for Citrinet models and their training state.

Layout (all integers little-endian)::

    b"CTRNCKPT"                 magic
    u32 version                 currently 1
    u32 header_bytes            followed by UTF-8 "key=value" lines
    u32 record_count
    record_count x:             parameters first, sorted by name
        u16 name_bytes, name    e.g. "param/prolog.depthwise.weight"
        u8  dtype               1 = float32, 2 = float64
        u8  ndim, ndim x u32 dims
        data                    little-endian, row-major

Parameters are always stored as float32; the header key ``dtype`` names the
precision the model is rebuilt with on load. Buffers and optimizer state keep
their own dtype.

Header keys: ``citrinet.*`` (model config), ``dtype``, ``step``, ``vocab_size``,
``rng_state`` (JSON of the numpy bit generator state) and any ``meta.*`` extras.
Record prefixes: ``param/``, ``buffer/`` (batch-norm running stats),
``optim.m/``, ``optim.v/``, ``optim.step/``.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    from utils.model import Citrinet, CitrinetConfig, KernelLayout
except ImportError:
    from src.utils.model import Citrinet, CitrinetConfig, KernelLayout


MAGIC = b"CTRNCKPT"
VERSION = 1
DTYPE_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}
CODE_DTYPES = {code: dtype.newbyteorder("<") for dtype, code in DTYPE_CODES.items()}
PARAM_DTYPE = np.dtype("<f4")
LAYOUT_FIELDS = ("prolog", "megablock1", "megablock2", "megablock3", "epilog")


class CheckpointFormatError(ValueError):
    """The file is not a readable checkpoint."""


@dataclass
class Checkpoint:
    config: CitrinetConfig
    model: Citrinet
    step: int = 0
    optimizer_state: Optional[dict] = None
    rng_state: Optional[dict] = None
    meta: dict = field(default_factory=dict)


def config_to_header(cfg):
    header = {}
    for name, value in cfg.model_dump().items():
        if name == "layout":
            continue
        header[f"citrinet.{name}"] = "none" if value is None else str(value)
    for name in LAYOUT_FIELDS:
        value = getattr(cfg.layout, name)
        header[f"citrinet.layout.{name}"] = ",".join(str(v) for v in value) if isinstance(value, tuple) else str(value)
    return header


def config_from_header(header):
    values = {}
    layout = {}
    for key, value in header.items():
        if key.startswith("citrinet.layout."):
            name = key.split(".", 2)[2]
            layout[name] = [int(v) for v in value.split(",")] if name.startswith("megablock") else int(value)
        elif key.startswith("citrinet."):
            values[key.split(".", 1)[1]] = None if value == "none" else value
    if layout:
        values["layout"] = KernelLayout(**layout)
    if values.get("se_enabled") is not None:
        values["se_enabled"] = values["se_enabled"] == "True"
    if values.get("se_window") not in (None, "global"):
        values["se_window"] = int(values["se_window"])
    return CitrinetConfig(**values)


def _write_record(stream, name, array):
    array = np.asarray(array)
    if array.dtype not in DTYPE_CODES:
        array = array.astype(np.float64)
    encoded = name.encode("utf-8")
    stream.write(struct.pack("<H", len(encoded)))
    stream.write(encoded)
    stream.write(struct.pack("<BB", DTYPE_CODES[array.dtype], array.ndim))
    stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
    stream.write(np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<")).tobytes())


def save_checkpoint(path, model, optimizer=None, step=0, rng=None, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = config_to_header(model.cfg)
    header["dtype"] = model.parameters[0].tensor.dtype.name
    header["step"] = str(int(step))
    header["vocab_size"] = str(model.cfg.vocab_size)
    if rng is not None:
        header["rng_state"] = json.dumps(rng.bit_generator.state, sort_keys=True)
    for key, value in (meta or {}).items():
        header[f"meta.{key}"] = str(value)

    records = [
        (f"param/{param.name}", param.tensor.data.astype(PARAM_DTYPE))
        for param in sorted(model.parameters, key=lambda param: param.name)
    ]
    records.extend((f"buffer/{name}", buffer) for name, buffer in sorted(model.buffers().items()))
    if optimizer is not None:
        state = optimizer.state_dict()
        header["optim.step"] = str(state["step"])
        header["optim.hyper"] = json.dumps(state["hyper"], sort_keys=True)
        for name, entry in sorted(state["params"].items()):
            records.append((f"optim.m/{name}", entry["m"]))
            records.append((f"optim.v/{name}", np.asarray(entry["v"], dtype=np.float64)))
            records.append((f"optim.step/{name}", np.asarray(entry["step"], dtype=np.float64)))

    header_bytes = "".join(f"{key}={value}\n" for key, value in header.items()).encode("utf-8")
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    with tmp_path.open("wb") as stream:
        stream.write(MAGIC)
        stream.write(struct.pack("<II", VERSION, len(header_bytes)))
        stream.write(header_bytes)
        stream.write(struct.pack("<I", len(records)))
        for name, array in records:
            _write_record(stream, name, array)
    tmp_path.replace(path)
    return path


def _read(stream, size, path):
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointFormatError(f"{path}: truncated checkpoint")
    return data


def read_checkpoint_file(path):
    """Return ``(header dict, {record name: array})`` without building a model."""
    path = Path(path)
    with path.open("rb") as stream:
        if _read(stream, len(MAGIC), path) != MAGIC:
            raise CheckpointFormatError(f"{path}: not a checkpoint file")
        version, header_size = struct.unpack("<II", _read(stream, 8, path))
        if version != VERSION:
            raise CheckpointFormatError(f"{path}: unsupported checkpoint version {version}")
        header = {}
        for line in _read(stream, header_size, path).decode("utf-8").splitlines():
            key, sep, value = line.partition("=")
            if not sep:
                raise CheckpointFormatError(f"{path}: malformed header line {line!r}")
            header[key] = value
        (count,) = struct.unpack("<I", _read(stream, 4, path))
        records = {}
        for _ in range(count):
            (name_size,) = struct.unpack("<H", _read(stream, 2, path))
            name = _read(stream, name_size, path).decode("utf-8")
            code, ndim = struct.unpack("<BB", _read(stream, 2, path))
            if code not in CODE_DTYPES:
                raise CheckpointFormatError(f"{path}: unknown dtype code {code} for {name}")
            shape = struct.unpack(f"<{ndim}I", _read(stream, 4 * ndim, path))
            dtype = CODE_DTYPES[code]
            size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            records[name] = np.frombuffer(_read(stream, size, path), dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
    return header, records


def load_checkpoint(path):
    header, records = read_checkpoint_file(path)
    try:
        cfg = config_from_header(header)
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: invalid model config in header: {exc}") from exc

    params = {name[len("param/"):]: array for name, array in records.items() if name.startswith("param/")}
    if not params:
        raise CheckpointFormatError(f"{path}: checkpoint holds no parameters")
    dtype = header.get("dtype", "float32")
    if dtype not in ("float32", "float64"):
        raise CheckpointFormatError(f"{path}: unsupported model dtype {dtype!r}")
    model = Citrinet(cfg, dtype=np.dtype(dtype))
    for param in model.parameters:
        stored = params.pop(param.name, None)
        if stored is None or stored.shape != param.tensor.shape:
            raise CheckpointFormatError(f"{path}: parameter {param.name} missing or mis-shaped")
        param.tensor.data[...] = stored
    if params:
        raise CheckpointFormatError(f"{path}: unexpected parameters {sorted(params)[:5]}")
    for name, buffer in model.buffers().items():
        stored = records.get(f"buffer/{name}")
        if stored is None:
            raise CheckpointFormatError(f"{path}: buffer {name} missing")
        buffer[...] = stored

    optimizer_state = None
    if "optim.step" in header:
        names = [name[len("optim.m/"):] for name in records if name.startswith("optim.m/")]
        optimizer_state = {
            "step": int(header["optim.step"]),
            "hyper": json.loads(header.get("optim.hyper", "{}")),
            "params": {
                name: {
                    "m": records[f"optim.m/{name}"],
                    "v": float(records[f"optim.v/{name}"]),
                    "step": int(records[f"optim.step/{name}"]),
                }
                for name in names
            },
        }
    rng_state = json.loads(header["rng_state"]) if "rng_state" in header else None
    meta = {key[len("meta."):]: value for key, value in header.items() if key.startswith("meta.")}
    return Checkpoint(
        config=cfg,
        model=model,
        step=int(header.get("step", 0)),
        optimizer_state=optimizer_state,
        rng_state=rng_state,
        meta=meta,
    )


def restore_rng(state):
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng
