"""The CNN-LSTM classifier: topology, training, cross-validation, prediction.

Architecture (13 conv layers, each conv followed by batch-norm with the same
channel count and ReLU):

    trunk:    conv32 -> 4 x conv64 -> 4 x [conv32 + max-pool 3x3/2]
    branch A: 2 x [conv64 + max-pool 5x5/2]
    branch B: 2 x [conv64 + avg-pool 5x5/2]
    depth concat (A, B) -> dropout 0.4 -> rows-as-sequence -> LSTM(128)
    -> FC 64 -> ReLU -> FC 2 -> softmax

The sequence fed to the LSTM treats each spatial row of the concatenated map
as one timestep with channels*width features, preserving spatial order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError, TrainingError, UntrainedModelError
from .nn.adam import AdamState, adam_step, lr_schedule
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import (
    LSTM,
    BatchNorm,
    Conv3x3,
    Dense,
    DepthConcat,
    Dropout,
    Pool,
    ReLU,
    SoftmaxXent,
    softmax,
)
from .rng import stream

CLASS_NAMES = ("good", "poor")

# (channels, pool) per conv block; pool is (kind, window) applied after ReLU.
TRUNK_BLOCKS = (
    (32, None),
    (64, None),
    (64, None),
    (64, None),
    (64, None),
    (32, ("max", 3)),
    (32, ("max", 3)),
    (32, ("max", 3)),
    (32, ("max", 3)),
)
BRANCH_A_BLOCKS = ((64, ("max", 5)), (64, ("max", 5)))
BRANCH_B_BLOCKS = ((64, ("avg", 5)), (64, ("avg", 5)))
POOL_STRIDE = 2


@dataclass(frozen=True)
class ModelSpec:
    """Input geometry plus the head sizes; the conv stack is fixed."""

    height: int = 224
    width: int = 224
    channels: int = 3
    dropout_rate: float = 0.4
    lstm_hidden: int = 128
    fc_hidden: int = 64
    classes: int = 2

    def feature_geometry(self) -> tuple[int, int, int]:
        """(height, width, channels) of the concatenated feature map.

        Raises ConfigError if any pooling stage would collapse a spatial
        dimension below its window.
        """
        h, w = self.height, self.width
        for _, pool in TRUNK_BLOCKS + BRANCH_A_BLOCKS:
            if pool is None:
                continue
            _, win = pool
            if h < win or w < win:
                raise ConfigError(
                    f"input {self.height}x{self.width} collapses below a "
                    f"{win}x{win} pooling window"
                )
            h = (h - win) // POOL_STRIDE + 1
            w = (w - win) // POOL_STRIDE + 1
        concat_channels = BRANCH_A_BLOCKS[-1][0] + BRANCH_B_BLOCKS[-1][0]
        return h, w, concat_channels

    def sequence_geometry(self) -> tuple[int, int]:
        """(timesteps, features) presented to the LSTM."""
        h, w, c = self.feature_geometry()
        return h, w * c


@dataclass
class TrainConfig:
    epochs: int = 25
    folds: int = 10
    batch: int = 32
    lr: float = 0.001
    lr_drop: float = 0.5
    runs: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1 or self.folds < 1 or self.batch < 1 or self.runs < 1:
            raise ConfigError("epochs, folds, batch and runs must all be positive")
        if self.lr <= 0 or self.lr_drop <= 0:
            raise ConfigError("learning rate and drop factor must be positive")


class Model:
    """Layer graph plus training history."""

    def __init__(self, spec: ModelSpec, seed: int, dtype=np.float32):
        spec.feature_geometry()  # validates geometry before any allocation
        self.spec = spec
        self.seed = seed
        self.dtype = dtype
        self.history: list[dict] = []

        def make_blocks(prefix, blocks, c_in, index0):
            out, idx = [], index0
            for channels, pool in blocks:
                conv = Conv3x3(f"conv{idx}", c_in, channels,
                               stream(seed, "init", idx), dtype=dtype)
                bn = BatchNorm(f"bn{idx}", channels, dtype=dtype)
                entry = {"conv": conv, "bn": bn, "relu": ReLU(), "pool": None}
                if pool is not None:
                    entry["pool"] = Pool(pool[0], pool[1], POOL_STRIDE)
                out.append(entry)
                c_in = channels
                idx += 1
            return out, c_in, idx

        self.trunk, c, idx = make_blocks("trunk", TRUNK_BLOCKS, spec.channels, 1)
        self.branch_a, _, idx = make_blocks("a", BRANCH_A_BLOCKS, c, idx)
        self.branch_b, _, idx = make_blocks("b", BRANCH_B_BLOCKS, c, idx)
        self.concat = DepthConcat()
        self.dropout = Dropout(spec.dropout_rate)
        t, f = spec.sequence_geometry()
        self.lstm = LSTM("lstm", f, spec.lstm_hidden, stream(seed, "init", "lstm"), dtype=dtype)
        self.fc1 = Dense("fc1", spec.lstm_hidden, spec.fc_hidden,
                         stream(seed, "init", "fc1"), dtype=dtype)
        self.fc_relu = ReLU()
        self.fc2 = Dense("fc2", spec.fc_hidden, spec.classes,
                         stream(seed, "init", "fc2"), dtype=dtype)
        self.xent = SoftmaxXent()

    # -- parameter plumbing -------------------------------------------------

    def _blocks(self):
        return self.trunk + self.branch_a + self.branch_b

    def params(self):
        out = []
        for blk in self._blocks():
            out.extend(blk["conv"].params())
            out.extend(blk["bn"].params())
        out.extend(self.lstm.params())
        out.extend(self.fc1.params())
        out.extend(self.fc2.params())
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params())

    def state_tensors(self):
        tensors = [(p.name, p.value) for p in self.params()]
        for blk in self._blocks():
            tensors.extend(blk["bn"].state_tensors())
        return tensors

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        for p in self.params():
            if p.name not in tensors:
                raise DataError(f"checkpoint is missing tensor {p.name!r}")
            arr = tensors[p.name].astype(self.dtype)
            if arr.shape != p.value.shape:
                raise ShapeError(
                    f"checkpoint tensor {p.name!r} has shape {arr.shape}, "
                    f"expected {p.value.shape}"
                )
            p.value = arr
            p.grad = np.zeros_like(arr)
        for blk in self._blocks():
            blk["bn"].load_state(tensors)

    # -- forward / backward -------------------------------------------------

    def _run_blocks(self, blocks, x, train):
        for blk in blocks:
            x = blk["conv"].forward(x, train)
            x = blk["bn"].forward(x, train)
            x = blk["relu"].forward(x, train)
            if blk["pool"] is not None:
                x = blk["pool"].forward(x, train)
        return x

    def _run_blocks_backward(self, blocks, dy):
        for blk in reversed(blocks):
            if blk["pool"] is not None:
                dy = blk["pool"].backward(dy)
            dy = blk["relu"].backward(dy)
            dy = blk["bn"].backward(dy)
            dy = blk["conv"].backward(dy)
        return dy

    def _forward_logits(self, images: np.ndarray, train: bool,
                        rng: np.random.Generator | None = None) -> np.ndarray:
        n, h, w, c = images.shape
        if (h, w, c) != (self.spec.height, self.spec.width, self.spec.channels):
            raise ShapeError(
                f"expected images {self.spec.height}x{self.spec.width}x"
                f"{self.spec.channels}, got {h}x{w}x{c}"
            )
        x = images.astype(self.dtype, copy=False)
        t = self._run_blocks(self.trunk, x, train)
        a = self._run_blocks(self.branch_a, t, train)
        b = self._run_blocks(self.branch_b, t, train)
        m = self.concat.forward(a, b)
        m = self.dropout.forward(m, train, rng)
        n_, fh, fw, fc = m.shape
        self._seq_shape = m.shape
        seq = m.reshape(n_, fh, fw * fc)
        hfinal = self.lstm.forward(seq, train)
        z = self.fc1.forward(hfinal, train)
        z = self.fc_relu.forward(z, train)
        return self.fc2.forward(z, train)

    def _backward_from_xent(self) -> None:
        dz = self.xent.backward()
        dz = self.fc2.backward(dz)
        dz = self.fc_relu.backward(dz)
        dh = self.fc1.backward(dz)
        dseq = self.lstm.backward(dh)
        dm = dseq.reshape(self._seq_shape)
        dm = self.dropout.backward(dm)
        da, db = self.concat.backward(dm)
        dt = self._run_blocks_backward(self.branch_a, da)
        dt = dt + self._run_blocks_backward(self.branch_b, db)
        self._run_blocks_backward(self.trunk, dt)

    def forward_batch(self, images: np.ndarray, train: bool = False,
                      rng: np.random.Generator | None = None) -> np.ndarray:
        """Class probabilities, one row per image; rows sum to 1."""
        return softmax(self._forward_logits(images, train, rng))

    def predict(self, image: np.ndarray):
        """(label, probability pair) for one image; ties break to index 0."""
        probs = self.forward_batch(image[None], train=False)[0]
        idx = 0 if probs[0] >= probs[1] else 1
        return CLASS_NAMES[idx], (float(probs[0]), float(probs[1]))

    def diagnose_nonfinite(self, images: np.ndarray) -> str:
        """Name of the first layer producing a non-finite activation."""

        def scan_blocks(blocks, x):
            for blk in blocks:
                for key in ("conv", "bn", "relu"):
                    x = blk[key].forward(x, train=True)
                    if not np.all(np.isfinite(x)):
                        name = blk[key].name if key != "relu" else blk["conv"].name
                        return name, x
                if blk["pool"] is not None:
                    x = blk["pool"].forward(x, train=True)
            return None, x

        x = images.astype(self.dtype, copy=False)
        bad, t = scan_blocks(self.trunk, x)
        if bad:
            return bad
        bad, a = scan_blocks(self.branch_a, t)
        if bad:
            return bad
        bad, b = scan_blocks(self.branch_b, t)
        if bad:
            return bad
        m = self.concat.forward(a, b)
        seq = m.reshape(m.shape[0], m.shape[1], m.shape[2] * m.shape[3])
        h = self.lstm.forward(seq, train=True)
        if not np.all(np.isfinite(h)):
            return self.lstm.name
        z = self.fc_relu.forward(self.fc1.forward(h, train=True), train=True)
        if not np.all(np.isfinite(z)):
            return self.fc1.name
        if not np.all(np.isfinite(self.fc2.forward(z, train=True))):
            return self.fc2.name
        return "logits"


def build_model(spec: ModelSpec, seed: int, dtype=np.float32) -> Model:
    """Fresh model with He-uniform conv/FC and uniform +-1/sqrt(H) LSTM init."""
    return Model(spec, seed, dtype=dtype)


def one_hot(labels: np.ndarray, classes: int = 2) -> np.ndarray:
    out = np.zeros((len(labels), classes), dtype=np.float32)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def train_model(model: Model, images: np.ndarray, labels: np.ndarray,
                config: TrainConfig, epochs: int | None = None,
                stop_at_train_acc: float | None = None) -> Model:
    """Adam training with the stepped schedule and deterministic shuffling.

    images: (N, H, W, 3) float32 in [0, 1]; labels: (N,) int class indices.
    Appends one history row per epoch: {epoch, lr, loss, train_acc}.
    ``stop_at_train_acc`` ends training early once the epoch's training
    accuracy reaches the threshold (used by capacity checks).
    """
    config.validate()
    n = len(images)
    if n == 0:
        raise DataError("training split is empty")
    if len(set(labels.tolist())) < 2:
        raise DataError("training split must contain both classes")
    if config.batch > n:
        raise ConfigError(f"batch size {config.batch} exceeds training-set size {n}")
    epochs = config.epochs if epochs is None else epochs
    params = model.params()
    state = AdamState(params)
    targets = one_hot(labels, model.spec.classes)
    for epoch in range(1, epochs + 1):
        lr = lr_schedule(config.lr, epoch, config.lr_drop)
        order = stream(config.seed, "shuffle", epoch).permutation(n)
        total_loss = 0.0
        correct = 0
        for bstart in range(0, n, config.batch):
            batch_idx = order[bstart : bstart + config.batch]
            bx = images[batch_idx]
            by = targets[batch_idx]
            rng = stream(config.seed, "dropout", epoch, bstart)
            logits = model._forward_logits(bx, train=True, rng=rng)
            probs, loss = model.xent.forward(logits, by)
            if not np.isfinite(loss):
                layer = model.diagnose_nonfinite(bx)
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {bstart // config.batch}"
                    f", first offending layer: {layer}"
                )
            model._backward_from_xent()
            adam_step(params, state, lr)
            total_loss += loss * len(batch_idx)
            correct += int((probs.argmax(axis=1) == by.argmax(axis=1)).sum())
        model.history.append(
            {
                "epoch": epoch,
                "lr": lr,
                "loss": total_loss / n,
                "train_acc": correct / n,
            }
        )
        if stop_at_train_acc is not None and correct / n >= stop_at_train_acc:
            break
    return model


def evaluate_accuracy(model: Model, images: np.ndarray, labels: np.ndarray,
                      batch: int = 16) -> float:
    correct = 0
    for i in range(0, len(images), batch):
        probs = model.forward_batch(images[i : i + batch], train=False)
        correct += int((probs.argmax(axis=1) == labels[i : i + batch]).sum())
    return correct / len(images)


def predict_scores(model: Model, images: np.ndarray, batch: int = 16) -> np.ndarray:
    """Class-probability rows for a stack of images."""
    out = np.empty((len(images), model.spec.classes), dtype=np.float32)
    for i in range(0, len(images), batch):
        out[i : i + batch] = model.forward_batch(images[i : i + batch], train=False)
    return out


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample; per-class fold sizes differ by at most 1."""
    labels = np.asarray(labels)
    assignment = np.empty(len(labels), dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < folds:
            raise DataError(
                f"class {cls} has {len(idx)} samples, fewer than {folds} folds"
            )
        shuffled = idx[stream(seed, "folds", int(cls)).permutation(len(idx))]
        for pos, sample in enumerate(shuffled):
            assignment[sample] = pos % folds
    return assignment


@dataclass
class CVResult:
    per_fold: list[dict] = field(default_factory=list)
    mean_accuracy: float = 0.0
    std_accuracy: float = 0.0

    def report(self) -> str:
        return f"{self.mean_accuracy * 100:.1f}% ± {self.std_accuracy * 100:.2f}%"


def cross_validate(images: np.ndarray, labels: np.ndarray, config: TrainConfig,
                   spec: ModelSpec, fold_models: dict | None = None) -> CVResult:
    """Stratified k-fold training repeated over independent runs.

    Accuracy is aggregated as mean +- sample standard deviation across all
    folds x runs.  If ``fold_models`` is a dict it receives the trained
    model of every (run 0) fold, keyed by fold index.
    """
    config.validate()
    if config.folds < 2:
        raise ConfigError("cross-validation needs at least 2 folds")
    result = CVResult()
    accs = []
    for run in range(config.runs):
        fold_of = stratified_folds(labels, config.folds, config.seed + 1000003 * run)
        for fold in range(config.folds):
            train_mask = fold_of != fold
            model = build_model(spec, seed=config.seed + 7919 * run + fold)
            run_cfg = TrainConfig(
                epochs=config.epochs,
                folds=config.folds,
                batch=min(config.batch, int(train_mask.sum())),
                lr=config.lr,
                lr_drop=config.lr_drop,
                runs=1,
                seed=config.seed + 104729 * run + 31 * fold,
            )
            train_model(model, images[train_mask], labels[train_mask], run_cfg)
            acc = evaluate_accuracy(model, images[~train_mask], labels[~train_mask])
            accs.append(acc)
            result.per_fold.append({"run": run, "fold": fold, "accuracy": acc})
            if fold_models is not None and run == 0:
                fold_models[fold] = model
    arr = np.asarray(accs)
    result.mean_accuracy = float(arr.mean())
    result.std_accuracy = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return result


# -- checkpoint adapters ----------------------------------------------------

def save_model(model: Model, path, epoch: int = 0, seed: int | None = None,
               config_hash: str = "") -> None:
    metadata = {
        "epoch": epoch,
        "seed": model.seed if seed is None else seed,
        "config_hash": config_hash,
        "spec": {
            "height": model.spec.height,
            "width": model.spec.width,
            "channels": model.spec.channels,
        },
    }
    save_checkpoint(model.state_tensors(), metadata, path)


def load_model(path, dtype=np.float32) -> Model:
    tensors, metadata = load_checkpoint(path)
    spec_meta = metadata.get("spec", {})
    spec = ModelSpec(
        height=int(spec_meta.get("height", 224)),
        width=int(spec_meta.get("width", 224)),
        channels=int(spec_meta.get("channels", 3)),
    )
    model = Model(spec, seed=int(metadata.get("seed", 0)), dtype=dtype)
    model.load_state(tensors)
    return model
