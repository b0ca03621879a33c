"""Mini-batch Adam training of the fusion head under the central-similarity loss."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import loss as loss_mod
from . import net, retrieval
from .centers import HashCenterSet, semantic_centers_for
from .data import MultiViewDataset
from .errors import DivergenceError, InvalidArgument

LOSS_MODES = ("full", "central", "quant")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_epsilon: float = 1e-8
    lam: float = loss_mod.DEFAULT_LAMBDA
    dropout_p: float = 0.1
    seed: int = 0
    eval_every: int = 0          # 0 disables in-training mAP evaluation
    fusion: str = "gmu"          # gmu | image | text | concat
    loss_mode: str = "full"      # full | central (lam=0) | quant (BCE removed)

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidArgument("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidArgument("learning_rate must be > 0")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidArgument("dropout_p must be in [0, 1)")
        if self.fusion not in net.FUSION_MODES:
            raise InvalidArgument(f"unknown fusion mode {self.fusion!r}")
        if self.loss_mode not in LOSS_MODES:
            raise InvalidArgument(f"unknown loss mode {self.loss_mode!r}")
        if self.lam < 0:
            raise InvalidArgument("lambda must be >= 0")


@dataclass
class TrainReport:
    epoch_losses: list[loss_mod.LossReport] = field(default_factory=list)
    eval_epochs: list[int] = field(default_factory=list)
    eval_maps: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    params: net.ModelParams | None = None

    @property
    def final_map(self) -> float | None:
        return self.eval_maps[-1] if self.eval_maps else None


class AdamState:
    """First/second moment estimates, one pair per parameter block."""

    def __init__(self, params: net.ModelParams):
        self.m = {k: np.zeros_like(v) for k, v in params.blocks().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.blocks().items()}


def adam_step(
    params: net.ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    step_index: int,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam update, in place."""
    if step_index < 1:
        raise InvalidArgument("step_index must be >= 1")
    b1, b2 = config.adam_betas
    lr, eps = config.learning_rate, config.adam_epsilon
    for name, p in params.blocks().items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise DivergenceError(f"non-finite gradient in block {name}")
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1**step_index)
        v_hat = state.v[name] / (1 - b2**step_index)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _batch_loss(he, target_centers, config):
    if config.loss_mode == "full":
        return loss_mod.total_loss(he, target_centers, config.lam)
    if config.loss_mode == "central":
        return loss_mod.total_loss(he, target_centers, 0.0)
    l_q, g_q = loss_mod.quantization_loss(he)
    report = loss_mod.LossReport(
        l_central=0.0, l_quant=l_q, l_total=l_q, lam=config.lam,
        batch_size=he.shape[0],
    )
    return report, g_q


def evaluate_map(params, dataset: MultiViewDataset, fusion="gmu") -> float:
    """Encode query/retrieval splits and compute full-R mAP."""
    ri, rt, rl = dataset.subset(dataset.retrieval_mask)
    qi, qt, ql = dataset.subset(dataset.query_mask)
    r_codes = encode(params, ri, rt, fusion)
    q_codes = encode(params, qi, qt, fusion)
    index = retrieval.RetrievalIndex.from_signs(r_codes, rl)
    return retrieval.mean_average_precision(q_codes, ql, index)


def encode(params, image_feats, text_feats, fusion="gmu") -> np.ndarray:
    """Inference path: forward without dropout, then sign binarization."""
    he, _ = net.forward(params, image_feats, text_feats, fusion=fusion)
    return net.binarize(he)


def encode_dataset(params, dataset: MultiViewDataset, fusion="gmu") -> np.ndarray:
    return encode(params, dataset.image_features, dataset.text_features, fusion)


def train(
    dataset: MultiViewDataset,
    centers: HashCenterSet,
    config: TrainConfig,
    dims_hidden: int = 84,
    log_csv_path=None,
) -> TrainReport:
    """Shuffled mini-batch Adam over the train split for config.epochs epochs."""
    if len(dataset) == 0 or not dataset.train_mask.any():
        raise InvalidArgument("empty training set")
    if dataset.num_classes != centers.num_classes:
        raise InvalidArgument(
            f"dataset has {dataset.num_classes} classes, centers {centers.num_classes}"
        )
    img, txt, labels = dataset.subset(dataset.train_mask)
    n = img.shape[0]
    dims = net.Dims(
        d_img=img.shape[1], d_txt=txt.shape[1],
        d=dims_hidden, code_length=centers.code_length,
    )
    rng = np.random.default_rng(config.seed)
    params = net.init_params(dims, seed=int(rng.integers(2**63)))
    state = AdamState(params)
    # labels are static: resolve every sample's semantic center once
    targets = semantic_centers_for(labels, centers, seed=config.seed)

    report = TrainReport()
    log_rows = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        sums = {"l_central": 0.0, "l_quant": 0.0, "l_total": 0.0}
        seen = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            masks = None
            if config.dropout_p > 0:
                keep = 1.0 - config.dropout_p
                masks = (
                    (rng.random((idx.size, dims.d)) < keep) / keep,
                    (rng.random((idx.size, dims.d)) < keep) / keep,
                )
            he, cache = net.forward(
                params, img[idx], txt[idx], dropout_masks=masks, fusion=config.fusion
            )
            batch_report, grad_he = _batch_loss(he, targets[idx], config)
            if not np.isfinite(batch_report.l_total):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            grads = net.backward(params, cache, grad_he)
            step += 1
            adam_step(params, grads, state, step, config)
            params.check_finite()
            for key in sums:
                sums[key] += getattr(batch_report, key) * idx.size
            seen += idx.size
        epoch_report = loss_mod.LossReport(
            l_central=sums["l_central"] / seen,
            l_quant=sums["l_quant"] / seen,
            l_total=sums["l_total"] / seen,
            lam=config.lam,
            batch_size=seen,
        )
        report.epoch_losses.append(epoch_report)
        report.epoch_seconds.append(time.perf_counter() - t0)

        test_map = ""
        if config.eval_every and (epoch % config.eval_every == 0 or epoch == config.epochs):
            m = evaluate_map(params, dataset, config.fusion)
            report.eval_epochs.append(epoch)
            report.eval_maps.append(m)
            test_map = f"{m:.6f}"
        log_rows.append([epoch, f"{epoch_report.l_central:.6f}",
                         f"{epoch_report.l_quant:.6f}",
                         f"{epoch_report.l_total:.6f}", test_map])

    report.params = params
    if log_csv_path is not None:
        with open(log_csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "l_central", "l_quant", "l_total", "test_map"])
            w.writerows(log_rows)
    return report
