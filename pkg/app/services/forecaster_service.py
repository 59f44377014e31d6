"""
Forecaster training, evaluation and persistence.

Flow: traces → normalized RAN demand → spike labels (threshold from the
training split) → z-scoring (training statistics) → windows → SpikeAwareLSTM.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel

from app.engine import tensor as T
from app.engine.demand import label_spikes, make_windows, normalize_ran_demand, persistence_forecast, spike_threshold, standardize
from app.engine.forecaster import SpikeAwareLSTM, composite_loss
from app.engine.optim import AdamState, adam_step
from app.engine.rng import RngStreams
from app.models.config import ForecasterConfig
from app.models.forecast import ForecastEvaluation, TrainingHistory
from app.models.trace import Scaler, TraceSeries, WindowedDataset
from app.repository.checkpoints import load_checkpoint, save_checkpoint
from app.structured_log import log_event

logger = logging.getLogger("forecaster")

CHECKPOINT_KIND = "forecaster"
EPOCH_LOG_EVERY = 50


class TrainingDivergedError(Exception):
    """Raised when a loss or gradient stops being finite."""

    def __init__(self, message: str, details: dict | None = None):
        self.code = "TRAINING_DIVERGED"
        self.details = details or {}
        super().__init__(message)


class ForecasterData(BaseModel):
    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    train: WindowedDataset
    test: WindowedDataset
    scaler: Scaler
    spike_threshold: float
    train_demand: np.ndarray
    test_demand: np.ndarray


def prepare_data(train_series: TraceSeries, test_series: TraceSeries, config: ForecasterConfig) -> ForecasterData:
    """
    Build the train and held-out windowed datasets.

    Spike labels are taken on normalized (pre-z-score) demand; the threshold and
    the scaler both come from the training split only. The held-out labels use
    the training file's min-max range, so a held-out count is a spike exactly
    when it exceeds the training percentile in raw RNTI counts.
    """
    train_demand = normalize_ran_demand(train_series.rnti_count, config.norm_eps)
    test_demand = normalize_ran_demand(test_series.rnti_count, config.norm_eps)
    test_label_demand = normalize_ran_demand(test_series.rnti_count, config.norm_eps, reference=train_series.rnti_count)
    threshold = spike_threshold(train_demand, config.spike_percentile)
    train_z, scaler = standardize(train_demand, train_demand, eps=config.norm_eps)
    test_z = scaler.transform(test_demand)
    return ForecasterData(
        train=make_windows(train_z, label_spikes(train_demand, threshold=threshold), config.seq_len),
        test=make_windows(test_z, label_spikes(test_label_demand, threshold=threshold), config.seq_len),
        scaler=scaler,
        spike_threshold=threshold,
        train_demand=train_demand,
        test_demand=test_demand,
    )


def dataset_loss(model: SpikeAwareLSTM, dataset: WindowedDataset) -> float:
    """Inference-mode composite loss over the whole dataset."""
    r_hat, spike_prob = model.forward(dataset.inputs, training=False)
    loss = composite_loss(r_hat, dataset.targets, spike_prob, dataset.spike_labels, model.config.lambda_detect)
    return loss.item()


def train_forecaster(
    model: SpikeAwareLSTM,
    dataset: WindowedDataset,
    streams: RngStreams,
    epochs: Optional[int] = None,
    adam: Optional[AdamState] = None,
) -> TrainingHistory:
    """
    Mini-batch Adam training on the composite loss.

    Args:
        model: Model to train in place.
        dataset: Standardized windows.
        streams: Supplies the "batches" (shuffling) and "dropout" streams.
        epochs: Overrides config.epochs (used for fine-tuning).
        adam: Optimizer state to continue from; a fresh one when omitted.

    Returns:
        History whose losses[0] is the loss before training and losses[k] the
        loss after epoch k, both measured in inference mode on the full set.

    Raises:
        ValueError: If the dataset is empty.
        TrainingDivergedError: If a loss or gradient becomes NaN/Inf.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    config = model.config
    epochs = config.epochs if epochs is None else epochs
    adam = adam or AdamState.for_params(model.params)
    batches, dropout_rng = streams.get_stream("batches"), streams.get_stream("dropout")

    history = TrainingHistory(losses=[_checked(dataset_loss, model, dataset, epoch=0)], samples=len(dataset))
    log_event(logger, "training_started", samples=len(dataset), epochs=epochs, initial_loss=history.losses[0])

    for epoch in range(1, epochs + 1):
        order = batches.permutation(len(dataset))
        for start in range(0, len(dataset), config.batch):
            idx = order[start:start + config.batch]
            try:
                with T.Tape() as tape:
                    r_hat, spike_prob = model.forward(dataset.inputs[idx], training=True, rng=dropout_rng)
                    loss = composite_loss(
                        r_hat, dataset.targets[idx], spike_prob, dataset.spike_labels[idx], config.lambda_detect
                    )
                tape.backward(loss)
            except T.TensorError as exc:
                raise TrainingDivergedError(
                    f"non-finite value during epoch {epoch}: {exc}", {"epoch": epoch, "batch_start": start}
                ) from exc
            if not np.isfinite(model.params.grad_norm()):
                raise TrainingDivergedError(
                    f"non-finite gradient during epoch {epoch}", {"epoch": epoch, "batch_start": start}
                )
            adam_step(model.params, adam, config.lr, config.adam_betas, config.adam_eps)

        history.losses.append(_checked(dataset_loss, model, dataset, epoch=epoch))
        history.epochs = epoch
        if epoch % EPOCH_LOG_EVERY == 0 or epoch == epochs:
            log_event(logger, "epoch_completed", epoch=epoch, loss=history.losses[-1])

    log_event(logger, "training_completed", epochs=epochs, final_loss=history.final_loss)
    return history


def _checked(fn, model, dataset, epoch: int) -> float:
    try:
        value = fn(model, dataset)
    except T.TensorError as exc:
        raise TrainingDivergedError(f"non-finite loss after epoch {epoch}: {exc}", {"epoch": epoch}) from exc
    if not np.isfinite(value):
        raise TrainingDivergedError(f"loss became {value} after epoch {epoch}", {"epoch": epoch})
    return value


def evaluate_forecaster(model: SpikeAwareLSTM, dataset: WindowedDataset, workers: int = 1) -> ForecastEvaluation:
    """
    Test-set MSE on de-standardized demand plus spike precision/recall/F1 at ŝ > 0.5.

    Inference is read-only, so the set may be sharded across `workers` threads.
    Zero-division scores are 0, except that with no actual and no predicted
    positives every score is 1.

    Raises:
        ValueError: If the dataset is empty.
    """
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    shards = np.array_split(np.arange(len(dataset)), max(1, min(workers, len(dataset))))
    if len(shards) == 1:
        outputs = [model.predict(dataset.inputs)]
    else:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            outputs = list(pool.map(lambda idx: model.predict(dataset.inputs[idx]), shards))
    r_hat = np.concatenate([o[0] for o in outputs])
    spike_prob = np.concatenate([o[1] for o in outputs])

    truth = model.scaler.inverse(dataset.targets)
    mse = float(np.mean((model.scaler.inverse(r_hat) - truth) ** 2))
    persistence_mse = float(np.mean((model.scaler.inverse(persistence_forecast(dataset.inputs)) - truth) ** 2))

    actual = dataset.spike_labels > 0.5
    predicted = spike_prob > 0.5
    precision, recall, f1 = spike_scores(actual, predicted)
    return ForecastEvaluation(
        samples=len(dataset),
        mse=mse,
        spike_precision=precision,
        spike_recall=recall,
        spike_f1=f1,
        persistence_mse=persistence_mse,
        skill=1.0 - mse / persistence_mse if persistence_mse > 0.0 else 0.0,
        positives=int(actual.sum()),
        predicted_positives=int(predicted.sum()),
    )


def spike_scores(actual: np.ndarray, predicted: np.ndarray) -> tuple[float, float, float]:
    tp = int(np.sum(actual & predicted))
    fp = int(np.sum(~actual & predicted))
    fn = int(np.sum(actual & ~predicted))
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def save_forecaster(model: SpikeAwareLSTM, path: Union[str, Path]) -> Path:
    meta = {
        "config": model.config.model_dump(mode="json"),
        "scaler": model.scaler.model_dump(),
        "spike_threshold": model.spike_threshold,
    }
    return save_checkpoint(path, CHECKPOINT_KIND, model.params.state_dict(), meta)


def load_forecaster(path: Union[str, Path]) -> SpikeAwareLSTM:
    """
    Raises:
        ArtifactNotFoundError: If the file is missing.
        CheckpointFormatError: If it is not a forecaster checkpoint.
    """
    arrays, meta = load_checkpoint(path, CHECKPOINT_KIND)
    model = SpikeAwareLSTM(ForecasterConfig.model_validate(meta["config"]), zero_init=True)
    model.params.load_state_dict(arrays)
    model.scaler = Scaler.model_validate(meta["scaler"])
    model.spike_threshold = meta.get("spike_threshold")
    log_event(logger, "checkpoint_loaded", path=str(path))
    return model
