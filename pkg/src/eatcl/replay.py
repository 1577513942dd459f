"""Fixed-capacity experience-replay memory with reservoir-sampling insertion.

Every streamed item ends up retained with probability capacity / seen_count,
so the buffer's class composition tracks the stream composition — that bias
is the point, not a bug to correct. Entries may carry the model's logits at
insertion time for distillation-style replay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BufferEntry:
    x: np.ndarray
    y: int
    logits: np.ndarray | None = None


class ReplayBuffer:
    """Reservoir buffer. Single-writer; the training loop owns it."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self.seen_count = 0
        self.entries: list[BufferEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def reservoir_insert(self, entry: BufferEntry, rng) -> None:
        """Algorithm-R insertion: fill, then replace a random slot w.p. capacity/seen."""
        self.seen_count += 1
        if self.capacity == 0:
            return
        if len(self.entries) < self.capacity:
            self.entries.append(entry)
        else:
            j = int(rng.integers(0, self.seen_count))
            if j < self.capacity:
                self.entries[j] = entry

    def sample(self, batch_size: int, rng) -> list[BufferEntry]:
        """batch_size entries drawn uniformly with replacement."""
        if not self.entries:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self.entries), size=batch_size)
        return [self.entries[i] for i in idx]

    def sample_arrays(self, batch_size: int, rng):
        """Like sample() but stacked into (x, y, logits-or-None) arrays."""
        batch = self.sample(batch_size, rng)
        x = np.stack([e.x for e in batch])
        y = np.asarray([e.y for e in batch], dtype=np.int64)
        if all(e.logits is not None for e in batch):
            return x, y, np.stack([e.logits for e in batch])
        return x, y, None


def save_buffer_csv(buf: ReplayBuffer, path) -> None:
    """Dump for checkpointing: metadata comment line, then feature/label/logit rows."""
    with open(path, "w") as fh:
        fh.write(f"# capacity={buf.capacity} seen={buf.seen_count}\n")
        dim = buf.entries[0].x.size if buf.entries else 0
        n_logits = 0
        if buf.entries and buf.entries[0].logits is not None:
            n_logits = buf.entries[0].logits.size
        cols = [f"f{i}" for i in range(dim)] + ["label"] + [f"l{i}" for i in range(n_logits)]
        fh.write(",".join(cols) + "\n")
        for e in buf.entries:
            parts = [format(v, ".17g") for v in e.x] + [str(int(e.y))]
            if n_logits:
                parts += [format(v, ".17g") for v in e.logits]
            fh.write(",".join(parts) + "\n")


def load_buffer_csv(path) -> ReplayBuffer:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing buffer metadata line")
    meta = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
    buf = ReplayBuffer(int(meta["capacity"]))
    buf.seen_count = int(meta["seen"])
    if len(lines) < 2:
        raise ValueError(f"{path}: missing header line")
    header = lines[1].split(",")
    dim = sum(1 for h in header if h.startswith("f"))
    n_logits = sum(1 for h in header if h.startswith("l") and h != "label")
    for line in lines[2:]:
        if not line.strip():
            continue
        fields = line.split(",")
        x = np.asarray([float(v) for v in fields[:dim]])
        y = int(fields[dim])
        logits = None
        if n_logits:
            logits = np.asarray([float(v) for v in fields[dim + 1:]])
        buf.entries.append(BufferEntry(x, y, logits))
    if len(buf.entries) > buf.capacity:
        raise ValueError(f"{path}: more entries than capacity")
    return buf
