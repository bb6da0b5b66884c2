"""Epoch loop shared by the segmentation, image and tabular models."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import Divergence, InvalidConfig
from .nn import ParameterStore


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-5
    batch_size: int = 64
    seed: int = 0
    augment: bool = True
    min_steps: int = 0  # raise the epoch count until at least this many updates happen

    def validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0 or self.min_steps < 0:
            raise InvalidConfig(f"bad training config {self}")

    def effective_epochs(self, n_train: int) -> int:
        per_epoch = max(1, math.ceil(n_train / self.batch_size))
        return max(self.epochs, math.ceil(self.min_steps / per_epoch)) if self.epochs else 0

    def to_dict(self) -> dict:
        return asdict(self)


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


@dataclass
class FitResult:
    store: ParameterStore  # parameters of the best validation epoch
    history: list[dict]
    best_epoch: int
    best_score: float


def fit(
    store: ParameterStore,
    n_train: int,
    config: TrainConfig,
    step: Callable[[np.ndarray, np.random.Generator], float],
    validate: Callable[[], tuple[float, dict]],
    rng: np.random.Generator,
    stop_at: float | None = None,
) -> FitResult:
    """Run ``config`` epochs of ``step`` over shuffled minibatches.

    ``validate`` returns ``(score, metrics)``; the store with the highest score
    is kept (the first epoch wins ties). Epoch 0 is the untrained state, so zero
    epochs returns the input parameters unchanged. Training ends early once the
    score reaches ``stop_at``.
    """
    config.validate()
    score, metrics = validate()
    history = [{"epoch": 0, "train_loss": float("nan"), **metrics}]
    best = FitResult(store.copy(), history, 0, score)
    for epoch in range(1, config.effective_epochs(n_train) + 1):
        total = 0.0
        for idx in minibatches(n_train, config.batch_size, rng):
            loss = step(idx, rng)
            if not math.isfinite(loss):
                raise Divergence(f"loss became {loss} in epoch {epoch}")
            total += loss
        score, metrics = validate()
        history.append({"epoch": epoch, "train_loss": total / max(n_train, 1), **metrics})
        if score > best.best_score:
            best = FitResult(store.copy(), history, epoch, score)
        if stop_at is not None and score >= stop_at:
            break
    best.history = history
    return best


def write_history(path, history: list[dict], fields: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        wr.writeheader()
        for row in history:
            wr.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
