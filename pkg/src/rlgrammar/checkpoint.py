"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic  b"RLGRAMCK"
    u32    format version
    u32    section count
    repeated: u16 name length, name (utf-8), u64 payload length, payload

Array payloads are ``u32 count`` followed by named arrays, each stored as
``u16 name length, name, u8 dtype code, u8 ndim, u32 dims..., raw data``.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from .config import RunConfig
from .core import ActionKind
from .frequency import FrequencyEntry
from .replay import Memory
from .trainer import EpochMetrics, Trainer

MAGIC = b"RLGRAMCK"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {v: k for k, v in _DTYPES.items()}
_NO_KIND = 255


class CheckpointError(Exception):
    def __init__(self, section: str, message: str) -> None:
        super().__init__(f"checkpoint section {section!r}: {message}")
        self.section = section


def corpus_digest(sentences) -> str:
    h = hashlib.sha256()
    for s in sentences:
        h.update(s.encode("utf-8", "surrogatepass"))
        h.update(b"\x00")
    return h.hexdigest()


def _pack_arrays(arrays) -> bytes:
    out = io.BytesIO()
    arrays = list(arrays)
    out.write(struct.pack("<I", len(arrays)))
    for name, a in arrays:
        a = np.asarray(a)
        dt = np.dtype(a.dtype).newbyteorder("<")
        if dt not in _CODES:
            raise TypeError(f"unsupported dtype {a.dtype} for {name}")
        nb = name.encode()
        out.write(struct.pack("<H", len(nb)) + nb)
        out.write(struct.pack("<BB", _CODES[dt], a.ndim))
        out.write(struct.pack(f"<{a.ndim}I", *a.shape))
        out.write(np.ascontiguousarray(a, dtype=dt).tobytes())
    return out.getvalue()


def _unpack_arrays(buf: bytes) -> dict[str, np.ndarray]:
    view = memoryview(buf)
    (count,), pos = struct.unpack_from("<I", view, 0), 4
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", view, pos)
        pos += 2
        name = bytes(view[pos:pos + nlen]).decode()
        pos += nlen
        code, ndim = struct.unpack_from("<BB", view, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", view, pos)
        pos += 4 * ndim
        dt = _DTYPES[code]
        size = int(np.prod(shape)) * dt.itemsize
        if pos + size > len(view):
            raise ValueError(f"array {name!r} truncated")
        out[name] = np.frombuffer(bytes(view[pos:pos + size]), dtype=dt).reshape(shape).copy()
        pos += size
    if pos != len(view):
        raise ValueError("trailing bytes after arrays")
    return out


def _net_arrays(net):
    return net.parameters() + net.buffers()


def _pack_types(trainer: Trainer) -> bytes:
    out = io.BytesIO()
    types = list(trainer.table)
    out.write(struct.pack("<I", len(types)))
    for t in types:
        out.write(struct.pack(f"<I{len(t.tokens)}I", len(t.tokens), *t.tokens))
    return out.getvalue()


def _pack_frequency(trainer: Trainer) -> bytes:
    f = trainer.freq
    out = io.BytesIO()
    out.write(struct.pack("<qddI", f.char_clock, f.t_freq, f.n_freq, len(f.entries)))
    for tid in sorted(f.entries):
        e = f.entries[tid]
        out.write(struct.pack("<IddddqB", tid, e.corrected, e.uncorrected, e.high_water,
                              e.snapshot, e.last_clock, int(e.established)))
    return out.getvalue()


def _pack_buffer(trainer: Trainer) -> bytes:
    out = io.BytesIO()
    width = trainer.cfg.input_width
    out.write(struct.pack("<IIq", len(trainer.buffer), width, trainer.buffer._next_tag))
    for m in trainer.buffer:
        bk = _NO_KIND if m.better_kind is None else int(m.better_kind)
        out.write(struct.pack("<BBdq", int(m.chosen_kind), bk, m.realized_value, m.tag))
        out.write(np.asarray(m.chosen_window, dtype="<f4").tobytes())
        if m.better_window is not None:
            out.write(np.asarray(m.better_window, dtype="<f4").tobytes())
    return out.getvalue()


def save_checkpoint(trainer: Trainer, path: str | Path) -> None:
    state = {
        "epoch": trainer.epoch,
        "integer_reward": trainer.reward_cfg.integer_reward,
        "rng": trainer.rng.bit_generator.state,
        "corpus_sha256": corpus_digest(trainer.sentences),
        "history": [vars(m) for m in trainer.history],
        "embedding_seed": trainer.embedder.seed,
        "theta_emb": trainer.embedder.theta,
    }
    sections = [
        ("config", json.dumps(trainer.cfg.to_dict(), sort_keys=True).encode()),
        ("state", json.dumps(state, sort_keys=True).encode()),
        ("critic", _pack_arrays(_net_arrays(trainer.critic))),
        ("actor", _pack_arrays(_net_arrays(trainer.actor))),
        ("critic_opt", _pack_arrays(trainer.critic_opt.state_arrays())),
        ("actor_opt", _pack_arrays(trainer.actor_opt.state_arrays())),
        ("types", _pack_types(trainer)),
        ("frequency", _pack_frequency(trainer)),
        ("buffer", _pack_buffer(trainer)),
    ]
    out = io.BytesIO()
    out.write(MAGIC + struct.pack("<II", VERSION, len(sections)))
    for name, payload in sections:
        nb = name.encode()
        out.write(struct.pack("<H", len(nb)) + nb + struct.pack("<Q", len(payload)) + payload)
    path = Path(path)
    try:
        path.write_bytes(out.getvalue())
    except OSError as e:
        raise OSError(f"cannot write checkpoint {path}: {e.strerror}") from e


def read_sections(path: str | Path) -> dict[str, bytes]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError("header", "bad magic bytes")
    if len(data) < 16:
        raise CheckpointError("header", "truncated header")
    version, count = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise CheckpointError("header", f"unsupported version {version}")
    pos = 16
    sections = {}
    for i in range(count):
        try:
            (nlen,) = struct.unpack_from("<H", data, pos)
            name = data[pos + 2:pos + 2 + nlen].decode()
            pos += 2 + nlen
            (plen,) = struct.unpack_from("<Q", data, pos)
            pos += 8
        except (struct.error, UnicodeDecodeError):
            raise CheckpointError(f"#{i}", "truncated section header") from None
        if pos + plen > len(data):
            raise CheckpointError(name, "payload truncated")
        sections[name] = data[pos:pos + plen]
        pos += plen
    return sections


def _restore_net(net, payload: bytes, section: str) -> None:
    try:
        arrays = _unpack_arrays(payload)
        for name, arr in _net_arrays(net):
            src = arrays[name]
            if src.shape != arr.shape:
                raise ValueError(f"{name} has shape {src.shape}, expected {arr.shape}")
            arr[...] = src
    except (KeyError, ValueError, struct.error) as e:
        raise CheckpointError(section, str(e)) from None


def load_checkpoint(path: str | Path, train_sentences=None) -> Trainer:
    """Rebuild a trainer. Pass the training sentences to resume training."""
    sections = read_sections(path)

    def need(name):
        if name not in sections:
            raise CheckpointError(name, "missing")
        return sections[name]

    try:
        cfg = RunConfig.from_dict(json.loads(need("config")))
    except (ValueError, TypeError) as e:
        raise CheckpointError("config", str(e)) from None
    try:
        state = json.loads(need("state"))
    except ValueError as e:
        raise CheckpointError("state", str(e)) from None
    sentences = list(train_sentences or [])
    if sentences and corpus_digest(sentences) != state["corpus_sha256"]:
        raise CheckpointError("state", "training corpus differs from the checkpointed run")
    tr = Trainer(cfg, sentences, integer_reward=state["integer_reward"])
    tr.epoch = state["epoch"]
    tr.rng.bit_generator.state = state["rng"]
    tr.history = [EpochMetrics(**h) for h in state["history"]]

    _restore_net(tr.critic, need("critic"), "critic")
    _restore_net(tr.actor, need("actor"), "actor")
    for name, opt in (("critic_opt", tr.critic_opt), ("actor_opt", tr.actor_opt)):
        try:
            opt.load_state_arrays(_unpack_arrays(need(name)))
        except (KeyError, ValueError, struct.error) as e:
            raise CheckpointError(name, str(e)) from None

    try:
        buf = need("types")
        (count,) = struct.unpack_from("<I", buf, 0)
        pos = 4
        for tid in range(count):
            (n,) = struct.unpack_from("<I", buf, pos)
            tokens = struct.unpack_from(f"<{n}I", buf, pos + 4)
            pos += 4 + 4 * n
            if tr.table.intern(tokens).type_id != tid:
                raise ValueError("type ids out of order")
    except (struct.error, ValueError) as e:
        raise CheckpointError("types", str(e)) from None

    try:
        buf = need("frequency")
        clock, t_freq, n_freq, count = struct.unpack_from("<qddI", buf, 0)
        f = tr.freq
        f.char_clock, f.t_freq, f.n_freq = clock, t_freq, n_freq
        pos = struct.calcsize("<qddI")
        rec = struct.Struct("<IddddqB")
        for _ in range(count):
            tid, c, u, hw, snap, last, est = rec.unpack_from(buf, pos)
            pos += rec.size
            f.entries[tid] = FrequencyEntry(c, u, hw, snap, last, bool(est))
    except struct.error as e:
        raise CheckpointError("frequency", str(e)) from None

    try:
        buf = need("buffer")
        count, width, next_tag = struct.unpack_from("<IIq", buf, 0)
        if width != cfg.input_width:
            raise ValueError(f"window width {width} does not match config")
        pos = struct.calcsize("<IIq")
        rec = struct.Struct("<BBdq")
        wbytes = 4 * width
        for _ in range(count):
            ck, bk, value, tag = rec.unpack_from(buf, pos)
            pos += rec.size
            chosen = np.frombuffer(buf[pos:pos + wbytes], dtype="<f4").astype(np.float32)
            pos += wbytes
            m = Memory(chosen, ActionKind(ck), realized_value=value)
            if bk != _NO_KIND:
                m.better_window = np.frombuffer(buf[pos:pos + wbytes], dtype="<f4").astype(np.float32)
                m.better_kind = ActionKind(bk)
                pos += wbytes
            if len(m.chosen_window) != width:
                raise ValueError("truncated memory")
            m.tag = tag
            tr.buffer._items.append(m)
        tr.buffer._next_tag = next_tag
    except (struct.error, ValueError) as e:
        raise CheckpointError("buffer", str(e)) from None
    return tr
