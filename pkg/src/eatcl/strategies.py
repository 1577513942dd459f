"""Training strategies over a task stream.

Covers joint training, experience replay (ER), dark-replay variants
(DER/DER++), and their adversarial flavours:

* +AT  — on-the-fly adversarial training against the target model; attacks
  every label-supervised batch (current task and replayed samples).
* +CAT — like +AT but attacks are generated from current-task samples only;
  replayed samples train clean.
* +EAT — a fresh external model (same architecture) is adversarially
  trained from scratch on the current task alone, used once to generate an
  adversarial copy of the task, then discarded. The target model trains on
  task-plus-adversarial data with no on-the-fly attack.

Batch composition follows the pure-AT convention for +AT/+CAT (adversarial
examples replace their clean sources; `at_mix="union"` trains both), while
+EAT always unions the generated set with the clean task data.

One run is strictly sequential. All randomness flows through per-purpose
numpy Generators derived from the run seed, so runs are bit-reproducible;
evaluation draws from a separate seed and never disturbs training.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .attacks import AttackConfig, attack
from .datasets import Dataset, Task, TaskStream
from .metrics import MetricsRecord, clean_accuracy, prev_task_rate, robustness
from .nets import (MLPModel, SGDConfig, add_grads, backward, ce_loss_and_grads,
                   forward, init_model, sgd_step, softmax_ce)
from .replay import BufferEntry, ReplayBuffer


class StrategyKind(str, Enum):
    JOINT = "joint"
    JOINT_AT = "joint_at"
    ER = "er"
    ER_AT = "er_at"
    ER_CAT = "er_cat"
    ER_EAT = "er_eat"
    DER = "der"
    DER_AT = "der_at"
    DER_EAT = "der_eat"
    DERPP = "derpp"
    DERPP_AT = "derpp_at"
    DERPP_EAT = "derpp_eat"

    @property
    def is_joint(self) -> bool:
        return self in (StrategyKind.JOINT, StrategyKind.JOINT_AT)

    @property
    def uses_at(self) -> bool:
        return self in (StrategyKind.JOINT_AT, StrategyKind.ER_AT,
                        StrategyKind.DER_AT, StrategyKind.DERPP_AT)

    @property
    def uses_cat(self) -> bool:
        return self is StrategyKind.ER_CAT

    @property
    def uses_eat(self) -> bool:
        return self in (StrategyKind.ER_EAT, StrategyKind.DER_EAT,
                        StrategyKind.DERPP_EAT)

    @property
    def der_family(self) -> bool:
        return self in (StrategyKind.DER, StrategyKind.DER_AT, StrategyKind.DER_EAT,
                        StrategyKind.DERPP, StrategyKind.DERPP_AT,
                        StrategyKind.DERPP_EAT)

    @property
    def derpp_family(self) -> bool:
        return self in (StrategyKind.DERPP, StrategyKind.DERPP_AT,
                        StrategyKind.DERPP_EAT)


@dataclass
class TrainConfig:
    epochs_per_task: int = 50
    batch_size: int = 32
    sgd: SGDConfig = field(default_factory=SGDConfig)
    buffer_capacity: int = 200
    attack: AttackConfig = field(default_factory=AttackConfig)
    eat_external_epochs: int = 10
    der_alpha: float = 0.5
    derpp_beta: float = 0.5
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (32,)
    replay_batch_size: int | None = None  # None -> batch_size
    at_mix: str = "replace"  # "replace" | "union"
    eat_refresh: bool = False  # regenerate the adversarial task copy every epoch

    def __post_init__(self):
        if self.epochs_per_task < 1 or self.batch_size < 1:
            raise ValueError("epochs_per_task and batch_size must be >= 1")
        if self.buffer_capacity < 0:
            raise ValueError("buffer_capacity must be >= 0")
        if self.eat_external_epochs < 1:
            raise ValueError("eat_external_epochs must be >= 1")
        if self.der_alpha < 0 or self.derpp_beta < 0:
            raise ValueError("loss weights must be >= 0")
        if self.at_mix not in ("replace", "union"):
            raise ValueError(f"at_mix must be 'replace' or 'union', got {self.at_mix!r}")
        if not all(h >= 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")


@dataclass
class EvalSpec:
    """Held-out per-task test stream plus the attack used for robustness."""
    stream: TaskStream
    attack: AttackConfig
    seed: int = 0


@dataclass
class AttackRatePoint:
    task: int
    epoch: int
    rate: float


@dataclass
class RunLog:
    records: list[MetricsRecord] = field(default_factory=list)
    attack_rates: list[AttackRatePoint] = field(default_factory=list)
    data_access: dict[int, set[int]] = field(default_factory=dict)
    attack_counts: dict[str, int] = field(
        default_factory=lambda: {"current": 0, "memory": 0, "external": 0})
    train_seconds: float = 0.0


class AttackAudit:
    """Counts attacked rows by source and collects current-task AEs per epoch."""

    def __init__(self, counts: dict):
        self.counts = counts
        self._x: list[np.ndarray] = []
        self._y: list[np.ndarray] = []

    def record(self, source: str, n: int) -> None:
        self.counts[source] += n

    def collect_current(self, adv: np.ndarray, y: np.ndarray) -> None:
        if len(adv):
            self._x.append(adv)
            self._y.append(y)

    def reset_epoch(self) -> None:
        self._x, self._y = [], []

    def epoch_dataset(self, classes) -> Dataset | None:
        if not self._x:
            return None
        return Dataset(np.vstack(self._x), np.concatenate(self._y), classes)


def _sub(seed, *parts) -> list[int]:
    base = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
    return base + [int(p) for p in parts]


@dataclass
class _Rngs:
    batch: np.random.Generator
    buffer: np.random.Generator
    attack: np.random.Generator

    @staticmethod
    def for_seed(seed) -> "_Rngs":
        return _Rngs(np.random.default_rng(_sub(seed, 1)),
                     np.random.default_rng(_sub(seed, 2)),
                     np.random.default_rng(_sub(seed, 3)))


def _concat(x_a, y_a, x_b, y_b):
    if x_b is None or len(x_b) == 0:
        return x_a, np.asarray(y_a)
    return np.vstack([x_a, x_b]), np.concatenate([y_a, y_b])


def at_minibatch_step(model, x_cur, y_cur, x_mem, y_mem, atk: AttackConfig,
                      sgd: SGDConfig, rng, mix: str = "replace",
                      audit: AttackAudit | None = None) -> MLPModel:
    """One AT update: attack the whole (current + memory) batch, then step.

    With mix="replace" the adversarial rows are trained in place of their
    clean sources; with "union" both are trained.
    """
    x_all, y_all = _concat(x_cur, y_cur, x_mem, y_mem)
    adv = attack(model, x_all, y_all, atk, rng)
    n_cur = len(x_cur)
    if audit is not None:
        audit.record("current", n_cur)
        audit.record("memory", len(x_all) - n_cur)
        audit.collect_current(adv[:n_cur], y_all[:n_cur])
    if mix == "replace":
        tx, ty = adv, y_all
    else:
        tx, ty = np.vstack([x_all, adv]), np.concatenate([y_all, y_all])
    _, grads = ce_loss_and_grads(model, tx, ty)
    return sgd_step(model, grads, sgd)


def cat_minibatch_step(model, x_cur, y_cur, x_mem, y_mem, atk: AttackConfig,
                       sgd: SGDConfig, rng, mix: str = "replace",
                       audit: AttackAudit | None = None) -> MLPModel:
    """Like at_minibatch_step, but only current-task rows are attacked."""
    adv = attack(model, x_cur, y_cur, atk, rng)
    if audit is not None:
        audit.record("current", len(x_cur))
        audit.collect_current(adv, np.asarray(y_cur))
    if mix == "replace":
        tx, ty = _concat(adv, y_cur, x_mem, y_mem)
    else:
        both = np.vstack([x_cur, adv])
        tx, ty = _concat(both, np.concatenate([y_cur, y_cur]), x_mem, y_mem)
    _, grads = ce_loss_and_grads(model, tx, ty)
    return sgd_step(model, grads, sgd)


def der_terms(model, buf_x, stored_logits, alpha: float):
    """Distillation term: alpha * MSE(model logits on buffer x, stored logits)."""
    if stored_logits is None:
        raise ValueError("DER replay needs buffer entries with stored logits")
    logits = forward(model, buf_x)
    if logits.shape != stored_logits.shape:
        raise ValueError(
            f"stored logits shape {stored_logits.shape} != model head {logits.shape}")
    diff = logits - stored_logits
    loss = alpha * float(np.mean(diff * diff))
    dlogits = (2.0 * alpha / diff.size) * diff
    return loss, backward(model, buf_x, dlogits)


def derpp_terms(model, buf_x, stored_logits, buf_x2, buf_y2,
                alpha: float, beta: float):
    """DER distillation plus beta-weighted label cross-entropy on a second batch."""
    loss, grads = der_terms(model, buf_x, stored_logits, alpha)
    logits2 = forward(model, buf_x2)
    ce, dlogits2 = softmax_ce(logits2, buf_y2)
    grads = add_grads(grads, backward(model, buf_x2, beta * dlogits2))
    return loss + beta * ce, grads


def eat_generate(task: Task, layer_sizes, cfg: TrainConfig, seed,
                 audit: AttackAudit | None = None) -> Dataset:
    """Adversarial copy of a task via a throwaway external model.

    A fresh model of the given architecture is adversarially trained from
    scratch on the task alone, every task example is attacked against it,
    and the model is dropped — nothing external persists beyond the
    returned examples, which keep their source labels.
    """
    if len(task.data) == 0:
        raise ValueError("cannot generate adversarial examples for an empty task")
    ext = init_model(layer_sizes, _sub(seed, 0))
    batch_rng = np.random.default_rng(_sub(seed, 1))
    atk_rng = np.random.default_rng(_sub(seed, 2))
    x, y = task.data.x, task.data.y
    n = len(x)
    for _ in range(cfg.eat_external_epochs):
        perm = batch_rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            adv = attack(ext, x[idx], y[idx], cfg.attack, atk_rng)
            if audit is not None:
                audit.record("external", len(idx))
            _, grads = ce_loss_and_grads(ext, adv, y[idx])
            ext = sgd_step(ext, grads, cfg.sgd)
    ae_x = attack(ext, x, y, cfg.attack, atk_rng)
    if audit is not None:
        audit.record("external", n)
    return Dataset(ae_x, y.copy(), task.data.classes)


def _der_step(model, kind, xb, yb, buffer, replay_bs, cfg, rngs, audit,
              replay: bool):
    """One DER-family update: CE on the current batch (attacked for +AT) plus
    replay terms. The distillation batch stays clean — stored logits pair
    with clean inputs — while DER++'s label batch is attacked under +AT."""
    if kind.uses_at:
        adv = attack(model, xb, yb, cfg.attack, rngs.attack)
        audit.record("current", len(xb))
        audit.collect_current(adv, yb)
        if cfg.at_mix == "replace":
            tx, ty = adv, yb
        else:
            tx, ty = np.vstack([xb, adv]), np.concatenate([yb, yb])
    else:
        tx, ty = xb, yb
    _, grads = ce_loss_and_grads(model, tx, ty)
    if replay and len(buffer) > 0:
        bx, _, blogits = buffer.sample_arrays(replay_bs, rngs.buffer)
        _, dg = der_terms(model, bx, blogits, cfg.der_alpha)
        grads = add_grads(grads, dg)
        if kind.derpp_family:
            bx2, by2, _ = buffer.sample_arrays(replay_bs, rngs.buffer)
            if kind.uses_at:
                bx2 = attack(model, bx2, by2, cfg.attack, rngs.attack)
                audit.record("memory", len(bx2))
            logits2 = forward(model, bx2)
            _, dlogits2 = softmax_ce(logits2, by2)
            grads = add_grads(grads, backward(model, bx2, cfg.derpp_beta * dlogits2))
    return sgd_step(model, grads, cfg.sgd)


def _touch(log: RunLog | None, step: int, task_index: int) -> None:
    if log is not None:
        log.data_access.setdefault(step, set()).add(task_index)


def _run_task(model, task: Task, kind: StrategyKind, cfg: TrainConfig,
              buffer: ReplayBuffer, rngs: _Rngs, log: RunLog | None,
              ae: Dataset | None, class_sets, seed) -> MLPModel:
    """Train one task for epochs_per_task epochs, replaying when possible."""
    _touch(log, task.index, task.index)
    audit = AttackAudit(log.attack_counts if log is not None else
                        {"current": 0, "memory": 0, "external": 0})
    replay_bs = cfg.replay_batch_size or cfg.batch_size
    store_logits = kind.der_family
    attacking = kind.uses_at or kind.uses_cat

    def task_arrays(ae_now):
        if ae_now is None:
            return task.data.x, task.data.y, np.ones(len(task.data), dtype=bool)
        xs = np.vstack([task.data.x, ae_now.x])
        ys = np.concatenate([task.data.y, ae_now.y])
        clean = np.concatenate([np.ones(len(task.data), dtype=bool),
                                np.zeros(len(ae_now), dtype=bool)])
        return xs, ys, clean

    # Replay engages from the second task on; the buffer still fills during
    # the first so later tasks can draw on it.
    replay_ok = task.index > 0
    xs, ys, clean = task_arrays(ae)
    for epoch in range(cfg.epochs_per_task):
        if kind.uses_eat and cfg.eat_refresh and epoch > 0:
            ae = eat_generate(task, model.layer_sizes, cfg,
                              _sub(seed, 4, task.index, epoch), audit)
            xs, ys, clean = task_arrays(ae)
        audit.reset_epoch()
        perm = rngs.batch.permutation(len(xs))
        for s in range(0, len(xs), cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            xb, yb, cb = xs[idx], ys[idx], clean[idx]
            if replay_ok and not kind.der_family and len(buffer) > 0:
                mx, my, _ = buffer.sample_arrays(replay_bs, rngs.buffer)
            else:
                mx, my = None, None
            pre_step = model
            if kind.der_family:
                model = _der_step(model, kind, xb, yb, buffer, replay_bs,
                                  cfg, rngs, audit, replay_ok)
            elif kind.uses_at:
                model = at_minibatch_step(model, xb, yb, mx, my, cfg.attack,
                                          cfg.sgd, rngs.attack, cfg.at_mix, audit)
            elif kind.uses_cat:
                model = cat_minibatch_step(model, xb, yb, mx, my, cfg.attack,
                                           cfg.sgd, rngs.attack, cfg.at_mix, audit)
            else:
                tx, ty = _concat(xb, yb, mx, my)
                _, grads = ce_loss_and_grads(model, tx, ty)
                model = sgd_step(model, grads, cfg.sgd)
            if cfg.buffer_capacity > 0 and cb.any():
                cx, cy = xb[cb], yb[cb]
                ins_logits = forward(pre_step, cx) if store_logits else None
                for k in range(len(cx)):
                    buffer.reservoir_insert(
                        BufferEntry(cx[k].copy(), int(cy[k]),
                                    None if ins_logits is None else ins_logits[k].copy()),
                        rngs.buffer)
        if log is not None and task.index > 0 and class_sets is not None:
            ae_now = ae if kind.uses_eat else (
                audit.epoch_dataset(task.class_set) if attacking else None)
            if ae_now is not None and len(ae_now):
                log.attack_rates.append(AttackRatePoint(
                    task.index, epoch,
                    prev_task_rate(model, task, ae_now, class_sets)))
    return model


def eat_train_task(model, task: Task, ae: Dataset, buffer: ReplayBuffer,
                   cfg: TrainConfig, log: RunLog | None = None,
                   rngs: _Rngs | None = None, class_sets=None,
                   kind: StrategyKind = StrategyKind.ER_EAT) -> MLPModel:
    """Train the target model on task-union-adversarial data with replay,
    never attacking anything itself. Attack-rate logging needs class_sets
    (the per-task class sets seen so far, in stream order)."""
    if rngs is None:
        rngs = _Rngs.for_seed(cfg.seed)
    return _run_task(model, task, kind, cfg, buffer, rngs, log, ae,
                     class_sets, cfg.seed)


def _snapshot(model, step: int, train_stream: TaskStream,
              eval_spec: EvalSpec | None, cfg: TrainConfig,
              log: RunLog) -> MetricsRecord:
    stream = eval_spec.stream if eval_spec is not None else train_stream
    atk = eval_spec.attack if eval_spec is not None else cfg.attack
    eval_seed = eval_spec.seed if eval_spec is not None else 0
    accs, robs = [], []
    for t in range(step + 1):
        data = stream.tasks[t].data
        accs.append(clean_accuracy(model, data))
        robs.append(robustness(model, data, atk,
                               np.random.default_rng([eval_seed, step, t])))
    rates = [p.rate for p in log.attack_rates if p.task == step]
    rate = float(np.mean(rates)) if rates else (0.0 if step == 0 else None)
    return MetricsRecord(step, accs, robs, float(np.mean(accs)),
                         float(np.mean(robs)), rate)


def _run_joint(model, kind, stream: TaskStream, cfg: TrainConfig,
               rngs: _Rngs, log: RunLog) -> MLPModel:
    data = stream.merged()
    for t in stream.tasks:
        _touch(log, len(stream.tasks) - 1, t.index)
    audit = AttackAudit(log.attack_counts)
    n = len(data)
    for _ in range(cfg.epochs_per_task):
        perm = rngs.batch.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            xb, yb = data.x[idx], data.y[idx]
            if kind.uses_at:
                model = at_minibatch_step(model, xb, yb, None, None, cfg.attack,
                                          cfg.sgd, rngs.attack, cfg.at_mix, audit)
            else:
                _, grads = ce_loss_and_grads(model, xb, yb)
                model = sgd_step(model, grads, cfg.sgd)
    return model


def train_stream(stream: TaskStream, kind, cfg: TrainConfig,
                 eval_spec: EvalSpec | None = None) -> tuple[MLPModel, RunLog]:
    """Run one strategy over the stream; returns the trained target model and
    a log of per-step metrics, per-epoch attack rates, and audit trails.

    The classifier head spans every class in the stream (single-head,
    no task ids). Metrics snapshots are taken after each task over all
    tasks seen so far, on eval_spec's held-out stream when given, else on
    the training data.
    """
    kind = StrategyKind(kind)
    if eval_spec is not None and len(eval_spec.stream.tasks) != len(stream.tasks):
        raise ValueError("eval stream must have the same task structure")
    n_out = max(stream.all_classes) + 1
    layer_sizes = (stream.input_dim, *cfg.hidden_sizes, n_out)
    model = init_model(layer_sizes, _sub(cfg.seed, 0))
    rngs = _Rngs.for_seed(cfg.seed)
    log = RunLog()
    started = time.perf_counter()
    if kind.is_joint:
        model = _run_joint(model, kind, stream, cfg, rngs, log)
        log.records.append(_snapshot(model, len(stream.tasks) - 1, stream,
                                     eval_spec, cfg, log))
    else:
        buffer = ReplayBuffer(cfg.buffer_capacity)
        audit = AttackAudit(log.attack_counts)
        for i, task in enumerate(stream.tasks):
            ae = None
            if kind.uses_eat:
                _touch(log, i, i)
                ae = eat_generate(task, layer_sizes, cfg,
                                  _sub(cfg.seed, 4, i), audit)
            model = _run_task(model, task, kind, cfg, buffer, rngs, log, ae,
                              stream.class_sets, cfg.seed)
            log.records.append(_snapshot(model, i, stream, eval_spec, cfg, log))
    log.train_seconds = time.perf_counter() - started
    return model, log
