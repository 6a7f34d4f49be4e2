"""Training loop: AdamW, linear warmup + cosine decay, binary checkpoints.

The loop is deterministic end to end: epoch shuffles and dropout masks are
derived statelessly from (seed, epoch/step), so two runs with the same
configs produce bit-identical parameters, and a reloaded checkpoint resumes
bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from ..rng import derive_seed
from .model import ModelConfig, forward, init_params, loss_and_dlogits, backward

CKPT_MAGIC = b"PFCK"
CKPT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.95
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 6e-4
    warmup_fraction: float = 0.05
    weight_decay: float = 0.01
    effective_batch_size: int = 128
    micro_batch_size: int = 16
    epochs: int = 20
    seed: int = 0
    model_init_seed: int = 0
    checkpoint_every: int = 0  # optimizer steps; 0 = only the final checkpoint
    precision: str = "single"  # "single" for runs, "double" for tests
    deterministic: bool = True
    log_every: int = 50

    def __post_init__(self):
        if not 0.0 < self.warmup_fraction < 1.0:
            raise TrainingError("warmup_fraction must lie in (0, 1)")
        if self.effective_batch_size < 1:
            raise TrainingError("effective batch size must be >= 1")
        if self.precision not in ("single", "double"):
            raise TrainingError(f"unknown precision {self.precision!r}")

    @property
    def dtype(self):
        return np.float64 if self.precision == "double" else np.float32

    def to_json(self) -> dict:
        return {
            "base_lr": self.base_lr,
            "warmup_fraction": self.warmup_fraction,
            "weight_decay": self.weight_decay,
            "effective_batch_size": self.effective_batch_size,
            "micro_batch_size": self.micro_batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "model_init_seed": self.model_init_seed,
            "checkpoint_every": self.checkpoint_every,
            "precision": self.precision,
            "deterministic": self.deterministic,
            "log_every": self.log_every,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "TrainConfig":
        return cls(**raw)


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup 0 -> base over ceil(warmup_fraction * total) steps,
    then cosine from base to 0 over the remainder."""
    if not 0 <= step <= total_steps:
        raise TrainingError(f"step {step} outside [0, {total_steps}]")
    warmup = max(1, math.ceil(cfg.warmup_fraction * total_steps))
    if step <= warmup:
        return cfg.base_lr * step / warmup
    progress = (step - warmup) / (total_steps - warmup)
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def _decayable(name: str, value: np.ndarray) -> bool:
    # Weight decay applies to matrices only; biases and norm gains are exempt.
    return value.ndim >= 2


@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: dict[str, np.ndarray]) -> "AdamWState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    weight_decay: float,
) -> None:
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1**state.t
    bc2 = 1.0 - ADAM_BETA2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        if weight_decay and _decayable(name, p):
            update = update + weight_decay * p
        p -= lr * update


@dataclass
class Checkpoint:
    step: int
    params: dict[str, np.ndarray]
    opt: AdamWState
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    vocab_hash: str
    total_steps: int

    def config_hash(self) -> str:
        blob = json.dumps(
            {"model": self.model_cfg.to_json(), "train": self.train_cfg.to_json()},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        arrays: list[tuple[str, np.ndarray]] = []
        for name in sorted(self.params):
            arrays.append((f"p:{name}", self.params[name]))
        for name in sorted(self.opt.m):
            arrays.append((f"m:{name}", self.opt.m[name]))
        for name in sorted(self.opt.v):
            arrays.append((f"v:{name}", self.opt.v[name]))
        index = []
        offset = 0
        for name, arr in arrays:
            nbytes = arr.size * arr.dtype.itemsize
            index.append(
                {
                    "name": name,
                    "dtype": str(arr.dtype),
                    "shape": list(arr.shape),
                    "offset": offset,
                    "nbytes": nbytes,
                }
            )
            offset += nbytes
        header = json.dumps(
            {
                "version": CKPT_VERSION,
                "step": self.step,
                "total_steps": self.total_steps,
                "opt_t": self.opt.t,
                "model_cfg": self.model_cfg.to_json(),
                "train_cfg": self.train_cfg.to_json(),
                "vocab_hash": self.vocab_hash,
                "config_hash": self.config_hash(),
                "arrays": index,
            },
            sort_keys=True,
        ).encode("utf-8")
        try:
            with open(path, "wb") as handle:
                handle.write(CKPT_MAGIC)
                handle.write(struct.pack("<Q", len(header)))
                handle.write(header)
                for _, arr in arrays:
                    handle.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())
        except OSError as exc:
            raise TrainingError(f"cannot write checkpoint {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        with open(path, "rb") as handle:
            magic = handle.read(4)
            if magic != CKPT_MAGIC:
                raise TrainingError(f"{path}: not a checkpoint file")
            (header_len,) = struct.unpack("<Q", handle.read(8))
            header = json.loads(handle.read(header_len).decode("utf-8"))
            if header["version"] != CKPT_VERSION:
                raise TrainingError(f"{path}: unsupported version {header['version']}")
            blob = handle.read()
        arrays: dict[str, np.ndarray] = {}
        for meta in header["arrays"]:
            start = meta["offset"]
            raw = blob[start : start + meta["nbytes"]]
            arrays[meta["name"]] = (
                np.frombuffer(raw, dtype=np.dtype(meta["dtype"]).newbyteorder("<"))
                .reshape(meta["shape"])
                .astype(meta["dtype"])
            )
        params = {k[2:]: v for k, v in arrays.items() if k.startswith("p:")}
        opt = AdamWState(
            m={k[2:]: v.copy() for k, v in arrays.items() if k.startswith("m:")},
            v={k[2:]: v.copy() for k, v in arrays.items() if k.startswith("v:")},
            t=header["opt_t"],
        )
        params = {k: v.copy() for k, v in params.items()}
        return cls(
            step=header["step"],
            params=params,
            opt=opt,
            model_cfg=ModelConfig.from_json(header["model_cfg"]),
            train_cfg=TrainConfig.from_json(header["train_cfg"]),
            vocab_hash=header["vocab_hash"],
            total_steps=header["total_steps"],
        )


def _micro_batches(seqs: np.ndarray, order: np.ndarray, micro: int) -> Iterator[np.ndarray]:
    for start in range(0, len(order), micro):
        yield seqs[order[start : start + micro]]


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    gen = np.random.Generator(np.random.PCG64(derive_seed(seed, "epoch", str(epoch))))
    return gen.permutation(n)


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    dataset,
    hooks: Callable[[Checkpoint], None] | None = None,
    resume: Checkpoint | None = None,
    log: Callable[[str], None] | None = None,
) -> list[Checkpoint]:
    """Train on a PackedDataset; returns every checkpoint that fired.

    An epoch is one seeded-shuffled pass over the sequences; gradients
    accumulate across micro-batches (and epoch boundaries) up to the
    effective batch. Hooks fire at ``checkpoint_every`` steps and at the end.
    Aborts on non-finite loss, naming the step.
    """
    seqs = np.asarray(dataset.tokens)
    if seqs.ndim != 2 or seqs.shape[0] == 0:
        raise TrainingError("dataset must hold at least one sequence")
    if seqs.shape[1] != model_cfg.context_length:
        raise TrainingError(
            f"dataset L={seqs.shape[1]} does not match model context length "
            f"{model_cfg.context_length}"
        )
    vocab_hash = getattr(dataset, "vocab_hash", "")
    n_seq = seqs.shape[0]
    batch = train_cfg.effective_batch_size
    micro = max(1, min(train_cfg.micro_batch_size, batch))
    total_steps = (n_seq * train_cfg.epochs) // batch
    if total_steps == 0:
        raise TrainingError(
            f"{n_seq} sequences x {train_cfg.epochs} epochs cannot fill one "
            f"batch of {batch}"
        )

    dtype = train_cfg.dtype
    if resume is not None:
        params = {k: v.astype(dtype) for k, v in resume.params.items()}
        opt = AdamWState(
            m={k: v.astype(dtype) for k, v in resume.opt.m.items()},
            v={k: v.astype(dtype) for k, v in resume.opt.v.items()},
            t=resume.opt.t,
        )
        start_step = resume.step
    else:
        params = init_params(model_cfg, seed=train_cfg.model_init_seed, dtype=dtype)
        opt = AdamWState.fresh(params)
        start_step = 0

    def sequence_stream() -> Iterator[np.ndarray]:
        epoch = 0
        while True:
            order = _epoch_order(train_cfg.seed, epoch, n_seq)
            yield from _micro_batches(seqs, order, micro)
            epoch += 1

    # Fast-forward the stream on resume so continued training is identical.
    stream = sequence_stream()
    consumed = start_step * batch
    skipped = 0
    while skipped < consumed:
        chunk = next(stream)
        skipped += len(chunk)
    if skipped != consumed:
        raise TrainingError("resume point does not align with micro-batch boundaries")

    checkpoints: list[Checkpoint] = []
    emit = log if log is not None else (lambda _msg: None)
    emit(
        f"training: {n_seq} sequences, {train_cfg.epochs} epochs, "
        f"batch {batch} (micro {micro}), {total_steps} optimizer steps, "
        f"precision {train_cfg.precision}"
    )
    started = time.time()

    def fire(step: int) -> None:
        ckpt = Checkpoint(
            step=step,
            params={k: v.copy() for k, v in params.items()},
            opt=AdamWState(
                m={k: v.copy() for k, v in opt.m.items()},
                v={k: v.copy() for k, v in opt.v.items()},
                t=opt.t,
            ),
            model_cfg=model_cfg,
            train_cfg=train_cfg,
            vocab_hash=vocab_hash,
            total_steps=total_steps,
        )
        checkpoints.append(ckpt)
        if hooks is not None:
            hooks(ckpt)

    for step in range(start_step + 1, total_steps + 1):
        grads_acc: dict[str, np.ndarray] | None = None
        loss_sum = 0.0
        positions = 0
        pulled = 0
        while pulled < batch:
            chunk = next(stream)
            pulled += len(chunk)
            inputs = chunk[:, :-1]
            targets = chunk[:, 1:]
            dropout_rng = None
            if model_cfg.dropout > 0.0:
                dropout_rng = np.random.Generator(
                    np.random.PCG64(derive_seed(train_cfg.seed, "dropout", str(step), str(pulled)))
                )
            logits, cache = forward(
                params, model_cfg, inputs, want_cache=True, dropout_rng=dropout_rng
            )
            value, dlogits = loss_and_dlogits(logits, targets)
            n_pos = inputs.size
            grads = backward(params, model_cfg, cache, dlogits)
            if grads_acc is None:
                grads_acc = {k: g * n_pos for k, g in grads.items()}
            else:
                for k, g in grads.items():
                    grads_acc[k] += g * n_pos
            loss_sum += value * n_pos
            positions += n_pos
        for k in grads_acc:
            grads_acc[k] /= positions
        mean_loss = loss_sum / positions
        if not math.isfinite(mean_loss):
            raise TrainingError(f"non-finite loss at step {step}; aborting")
        adamw_step(params, grads_acc, opt, lr_at(step, total_steps, train_cfg),
                   train_cfg.weight_decay)
        if train_cfg.log_every and step % train_cfg.log_every == 0:
            rate = positions * step / max(time.time() - started, 1e-9)
            emit(
                f"step {step}/{total_steps} loss {mean_loss:.4f} "
                f"lr {lr_at(step, total_steps, train_cfg):.2e} ({rate:.0f} tok/s)"
            )
        if train_cfg.checkpoint_every and step % train_cfg.checkpoint_every == 0:
            fire(step)
    if not checkpoints or checkpoints[-1].step != total_steps:
        fire(total_steps)
    emit(f"training done in {time.time() - started:.1f}s")
    return checkpoints
