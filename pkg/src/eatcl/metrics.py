"""Evaluation metrics: clean accuracy, robustness, cross-task attack rate,
and decision-boundary grids for 2-D models.

Robustness is accuracy on adversarial examples generated white-box against
the evaluated model itself; its rng is kept separate from training rngs so
evaluation never perturbs training reproducibility. Argmax ties break
toward the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import AttackConfig, attack
from .datasets import Dataset, Task
from .nets import MLPModel, forward


@dataclass
class MetricsRecord:
    step: int
    per_task_accuracy: list[float]
    per_task_robustness: list[float]
    mean_accuracy: float
    mean_robustness: float
    prev_task_rate: float | None = None


def predict(model: MLPModel, x) -> np.ndarray:
    """Argmax class per row (np.argmax picks the lowest index on ties)."""
    return np.argmax(forward(model, x), axis=1)


def clean_accuracy(model: MLPModel, test: Dataset) -> float:
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(model, test.x) == test.y) * 100.0)


def robustness(model: MLPModel, test: Dataset, atk: AttackConfig, rng) -> float:
    """Accuracy on attack(model, test): white-box against the evaluated model."""
    if len(test) == 0:
        raise ValueError("empty test set")
    adv = attack(model, test.x, test.y, atk, rng)
    return float(np.mean(predict(model, adv) == test.y) * 100.0)


def prev_task_rate(model: MLPModel, current_task: Task, ae: Dataset,
                   seen_class_sets) -> float:
    """Share of current-task adversarial examples the model sends to an earlier task.

    seen_class_sets lists each task's class set in stream order; sets before
    current_task.index count as "previous". Returns a percentage; 0 at the
    first task by definition.
    """
    if len(ae) == 0:
        raise ValueError("empty adversarial set")
    prev: set[int] = set()
    for s in seen_class_sets[:current_task.index]:
        prev |= set(s)
    if not prev:
        return 0.0
    preds = predict(model, ae.x)
    return float(np.mean(np.isin(preds, sorted(prev))) * 100.0)


def boundary_grid(model: MLPModel, x_range, y_range, resolution: int) -> np.ndarray:
    """(resolution^2, 3) rows of (x, y, predicted class), row-major, inclusive bounds."""
    if model.input_dim != 2:
        raise ValueError(f"boundary grid needs a 2-D model, got input dim {model.input_dim}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    preds = predict(model, pts)
    return np.column_stack([pts, preds.astype(np.float64)])
