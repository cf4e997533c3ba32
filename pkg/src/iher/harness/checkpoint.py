"""Binary checkpoints.

Layout (all integers little-endian)::

    b"IHER1"                      magic + format version
    u32  section count
    per section:
        u16  name length, name (utf-8)
        u8   kind: 0 = ndarray, 1 = json
        ndarray: u8 dtype-str length, dtype str (numpy ``dtype.str``),
                 u8 ndim, ndim x u64 shape, u64 byte count, raw C-order bytes
        json:    u64 byte count, utf-8 JSON text
    32 bytes  SHA-256 of everything above

The file is parsed and verified in full before any state is applied, so a
corrupt or truncated checkpoint never leaves a trainer half-loaded.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .. import diffnet
from ..agent import Policy, RunningNormalizer
from ..dynamics import Normalizer
from .config import TrainConfig

MAGIC = b"IHER1"
_ARRAY, _JSON = 0, 1


class CheckpointError(RuntimeError):
    pass


class CheckpointMismatchError(CheckpointError):
    pass


# --------------------------------------------------------------------------- wire format
def dump_sections(sections: dict) -> bytes:
    out = [MAGIC, struct.pack("<I", len(sections))]
    for name, value in sections.items():
        raw_name = name.encode()
        out.append(struct.pack("<H", len(raw_name)) + raw_name)
        if isinstance(value, np.ndarray):
            arr = np.ascontiguousarray(value)
            dt = arr.dtype.str.encode()
            out.append(struct.pack("<BB", _ARRAY, len(dt)) + dt)
            out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
            data = arr.tobytes()
            out.append(struct.pack("<Q", len(data)) + data)
        else:
            data = json.dumps(value, sort_keys=True).encode()
            out.append(struct.pack("<BQ", _JSON, len(data)) + data)
    body = b"".join(out)
    return body + hashlib.sha256(body).digest()


def load_sections(blob: bytes) -> dict:
    if not blob.startswith(MAGIC):
        if blob[:4] == MAGIC[:4]:
            raise CheckpointError(f"unsupported checkpoint version {blob[:5]!r}; expected {MAGIC!r}")
        raise CheckpointError(f"not a checkpoint: missing magic string {MAGIC!r}")
    if len(blob) < len(MAGIC) + 4 + 32:
        raise CheckpointError("corrupt checkpoint: file truncated")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("corrupt checkpoint: checksum mismatch (file truncated or modified)")
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(body):
            raise CheckpointError("corrupt checkpoint: section runs past end of file")
        chunk = body[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    sections = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (kind,) = struct.unpack("<B", take(1))
        if kind == _ARRAY:
            (dt_len,) = struct.unpack("<B", take(1))
            dtype = np.dtype(take(dt_len).decode())
            (ndim,) = struct.unpack("<B", take(1))
            shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
            (nbytes,) = struct.unpack("<Q", take(8))
            sections[name] = np.frombuffer(take(nbytes), dtype=dtype).reshape(shape).copy()
        elif kind == _JSON:
            (nbytes,) = struct.unpack("<Q", take(8))
            sections[name] = json.loads(take(nbytes).decode())
        else:
            raise CheckpointError(f"corrupt checkpoint: unknown section kind {kind}")
    if pos != len(body):
        raise CheckpointError("corrupt checkpoint: trailing bytes after last section")
    return sections


# --------------------------------------------------------------------------- state <-> sections
def _put_net(sec, prefix, net: diffnet.Mlp):
    sec[f"{prefix}.arch"] = {"layer_sizes": net.layer_sizes, "hidden": net.hidden_activation,
                             "output": net.output_activation}
    for i, p in enumerate(net.params()):
        sec[f"{prefix}.p{i}"] = p


def _get_net(sec, prefix) -> diffnet.Mlp:
    arch = sec[f"{prefix}.arch"]
    n = len(arch["layer_sizes"]) - 1
    params = [sec[f"{prefix}.p{i}"] for i in range(2 * n)]
    return diffnet.Mlp(arch["layer_sizes"], arch["hidden"], arch["output"], params[0::2], params[1::2])


def _put_adam(sec, prefix, st: diffnet.AdamState):
    sec[f"{prefix}.meta"] = {"step_count": st.step_count, "learning_rate": st.learning_rate,
                             "beta1": st.beta1, "beta2": st.beta2, "epsilon": st.epsilon,
                             "n": len(st.first_moment)}
    for i, (m, v) in enumerate(zip(st.first_moment, st.second_moment)):
        sec[f"{prefix}.m{i}"] = m
        sec[f"{prefix}.v{i}"] = v


def _get_adam(sec, prefix) -> diffnet.AdamState:
    meta = sec[f"{prefix}.meta"]
    n = meta["n"]
    return diffnet.AdamState([sec[f"{prefix}.m{i}"] for i in range(n)], [sec[f"{prefix}.v{i}"] for i in range(n)],
                             meta["step_count"], meta["learning_rate"], meta["beta1"], meta["beta2"],
                             meta["epsilon"])


def _put_running(sec, prefix, rn: RunningNormalizer):
    sec[f"{prefix}.meta"] = {"dim": rn.dim, "clip": rn.clip, "eps": rn.eps, "count": rn.count}
    for k in ("sum", "sumsq", "mean", "std"):
        sec[f"{prefix}.{k}"] = getattr(rn, k)


def _get_running(sec, prefix) -> RunningNormalizer:
    meta = sec[f"{prefix}.meta"]
    rn = RunningNormalizer(meta["dim"], meta["clip"], meta["eps"])
    rn.count = meta["count"]
    for k in ("sum", "sumsq", "mean", "std"):
        setattr(rn, k, sec[f"{prefix}.{k}"])
    return rn


def _put_buffer(sec, prefix, buf):
    sec[f"{prefix}.meta"] = {"n_total": buf.n_total, "n_episodes": buf.n_episodes, "head": buf._head,
                             "inserted": buf._inserted}
    for k, arr in buf._data.items():
        sec[f"{prefix}.{k}"] = arr[: buf.n_episodes]


def _get_buffer(sec, prefix, buf):
    meta = sec[f"{prefix}.meta"]
    n = meta["n_episodes"]
    if n > buf.max_episodes:
        raise CheckpointMismatchError(f"{prefix}: checkpoint holds more episodes than buffer capacity")
    buf._alloc(n)
    for k in buf._data:
        arr = sec[f"{prefix}.{k}"]
        if arr.shape[1:] != buf._data[k].shape[1:]:
            raise CheckpointMismatchError(f"{prefix}.{k}: shape {arr.shape} does not fit buffer")
        buf._data[k][:n] = arr
    buf.n_total, buf.n_episodes = meta["n_total"], n
    buf._head, buf._inserted = meta["head"], meta["inserted"]


def trainer_sections(trainer) -> dict:
    from dataclasses import asdict

    sec = {
        "config": trainer.config.to_dict(),
        "progress": {"task": trainer.config.task, "epoch": trainer.epoch, "cycle_count": trainer.cycle_count,
                     "elapsed": trainer.elapsed, "history": [asdict(r) for r in trainer.history],
                     "snapshot_cycles": trainer.snapshots.cycles,
                     "ensemble_generation": trainer.ensemble.generation if trainer.ensemble else None},
        "rng": trainer.rng.bit_generator.state,
    }
    ag = trainer.agent
    for name in ("actor", "critic", "actor_target", "critic_target"):
        _put_net(sec, f"agent.{name}", getattr(ag, name))
    _put_adam(sec, "agent.actor_adam", ag.actor_adam)
    _put_adam(sec, "agent.critic_adam", ag.critic_adam)
    _put_running(sec, "agent.obs_norm", ag.obs_norm)
    _put_running(sec, "agent.goal_norm", ag.goal_norm)
    if trainer.ensemble is not None:
        ens = trainer.ensemble
        for i, (m, st) in enumerate(zip(ens.members, ens.adam_states)):
            _put_net(sec, f"model.{i}", m)
            _put_adam(sec, f"model.{i}.adam", st)
        for name in ("input_normalizer", "delta_normalizer"):
            nz = getattr(ens, name)
            sec[f"model.{name}.mean"], sec[f"model.{name}.std"] = nz.mean, nz.std
    _put_buffer(sec, "buffer.real", trainer.real_buffer)
    _put_buffer(sec, "buffer.imag", trainer.imag_buffer)
    for i, snap in enumerate(trainer.snapshots.snapshots):
        _put_net(sec, f"snapshot.{i}.actor", snap.actor)
        _put_running(sec, f"snapshot.{i}.obs_norm", snap.obs_norm)
        _put_running(sec, f"snapshot.{i}.goal_norm", snap.goal_norm)
        sec[f"snapshot.{i}.id"] = {"policy_id": snap.policy_id}
    return sec


def save_checkpoint(trainer, path):
    blob = dump_sections(trainer_sections(trainer))
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)
    return path


def load_checkpoint(path, config: TrainConfig | None = None):
    """Rebuild a :class:`Trainer` from ``path``.

    With ``config`` given, its task must match the checkpoint's; the rest of
    ``config`` (e.g. a larger epoch budget) replaces the stored one.
    """
    from .trainer import MetricsRow, Trainer

    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}") from e
    sec = load_sections(blob)
    try:
        stored = TrainConfig.from_dict(sec["config"])
        progress = sec["progress"]
        if config is not None and config.task != progress["task"]:
            raise CheckpointMismatchError(
                f"checkpoint was trained on task {progress['task']!r}, config asks for {config.task!r}")
        cfg = config if config is not None else stored
        for key in ("algo", "ensemble_size", "model_hidden", "agent_hidden", "episode_length"):
            if getattr(cfg, key) != getattr(stored, key):
                raise CheckpointMismatchError(f"config {key}={getattr(cfg, key)!r} does not match "
                                              f"checkpoint value {getattr(stored, key)!r}")
        trainer = Trainer(cfg)
        trainer.rng.bit_generator.state = sec["rng"]
        trainer.epoch = progress["epoch"]
        trainer.cycle_count = progress["cycle_count"]
        trainer.elapsed = progress["elapsed"]
        trainer.history = [MetricsRow(**r) for r in progress["history"]]
        ag = trainer.agent
        for name in ("actor", "critic", "actor_target", "critic_target"):
            setattr(ag, name, _get_net(sec, f"agent.{name}"))
        ag.actor_adam = _get_adam(sec, "agent.actor_adam")
        ag.critic_adam = _get_adam(sec, "agent.critic_adam")
        ag.obs_norm = _get_running(sec, "agent.obs_norm")
        ag.goal_norm = _get_running(sec, "agent.goal_norm")
        if trainer.ensemble is not None:
            ens = trainer.ensemble
            ens.members = [_get_net(sec, f"model.{i}") for i in range(ens.k)]
            ens.adam_states = [_get_adam(sec, f"model.{i}.adam") for i in range(ens.k)]
            ens.input_normalizer = Normalizer(sec["model.input_normalizer.mean"], sec["model.input_normalizer.std"])
            ens.delta_normalizer = Normalizer(sec["model.delta_normalizer.mean"], sec["model.delta_normalizer.std"])
            ens.generation = progress["ensemble_generation"]
        _get_buffer(sec, "buffer.real", trainer.real_buffer)
        _get_buffer(sec, "buffer.imag", trainer.imag_buffer)
        snaps = []
        for i in range(len(progress["snapshot_cycles"])):
            snaps.append(Policy(_get_net(sec, f"snapshot.{i}.actor"), _get_running(sec, f"snapshot.{i}.obs_norm"),
                                _get_running(sec, f"snapshot.{i}.goal_norm"), sec[f"snapshot.{i}.id"]["policy_id"]))
        trainer.snapshots.snapshots = snaps
        trainer.snapshots.cycles = list(progress["snapshot_cycles"])
    except KeyError as e:
        raise CheckpointError(f"corrupt checkpoint: missing section {e.args[0]!r}") from None
    return trainer
