"""Adversarial robustness for class-incremental continual learning.

Small dense classifiers trained under a task stream, white-box FGSM/PGD
attacks, reservoir-sampled experience replay, and the training strategies
built on top of them (joint, ER, DER/DER++ and their adversarial variants,
including external adversarial training).
"""

__version__ = "0.1.0"

from .attacks import AttackConfig, attack, fgsm, pgd, project_linf
from .datasets import (Dataset, Task, TaskStream, gen_blob_stream, gen_crescent,
                       imbalance_subsample, single_task_stream, split_by_classes)
from .metrics import (MetricsRecord, boundary_grid, clean_accuracy,
                      prev_task_rate, robustness)
from .nets import MLPModel, SGDConfig, forward, init_model, sgd_step
from .replay import BufferEntry, ReplayBuffer
from .strategies import (EvalSpec, RunLog, StrategyKind, TrainConfig,
                         eat_generate, eat_train_task, train_stream)
