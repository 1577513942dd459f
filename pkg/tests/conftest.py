"""Session fixture that executes each shipped config once.

The end-to-end checks in test_acceptance.py share these runs (and their
wall-clock numbers) instead of re-running configs per test; everything
else in the suite is self-contained and ignores this module.
"""

import json
import time
from pathlib import Path

import pytest

from eatcl.runner import parse_config, run_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
SHIPPED = ("toy_balanced", "toy_imbalanced", "stream_pgd", "stream_fgsm",
           "smoke")


class ConfigRun:
    """One executed config: output directory plus wall-clock seconds."""

    def __init__(self, name: str, out_dir: Path, seconds: float):
        self.name = name
        self.out_dir = out_dir
        self.seconds = seconds

    @property
    def summary(self) -> dict:
        return json.loads((self.out_dir / "summary.json").read_text())

    @property
    def manifest(self) -> dict:
        return json.loads((self.out_dir / "manifest.json").read_text())

    def stat(self, strategy: str, metric: str) -> dict:
        """Per-strategy aggregate: {mean, std, values} for acc or rob."""
        return self.summary["strategies"][strategy][metric]


def run_config(name: str, out_dir: Path) -> ConfigRun:
    cfg = parse_config((CONFIG_DIR / f"{name}.conf").read_text())
    started = time.perf_counter()
    run_experiment(cfg, str(out_dir), quiet=True)
    return ConfigRun(name, out_dir, time.perf_counter() - started)


@pytest.fixture(scope="session")
def shipped_runs(tmp_path_factory) -> dict[str, ConfigRun]:
    root = tmp_path_factory.mktemp("shipped")
    return {name: run_config(name, root / name) for name in SHIPPED}
