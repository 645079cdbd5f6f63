"""Single-hidden-layer network trained by scaled conjugate gradients.

The architecture is fixed: one tanh hidden layer, softmax outputs trained
on mean cross-entropy. A squared-error mode (linear outputs, optional
identity hidden activation) exists for numerical cross-checks against
closed-form least squares. Training follows Moller's SCG with the usual
Hessian-free curvature estimate and Levenberg-Marquardt style step-size
control, plus early stopping on a held-out validation set.

Weights live in one flat vector ordered W1 (row-major), b1, W2, b2, which
keeps the optimizer generic and makes gradient masking (used by the fused
hybrid network to keep its first layer block-diagonal) a plain elementwise
multiply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergedError

SCG_SIGMA = 5e-5
SCG_LAMBDA_INIT = 5e-7


@dataclass(frozen=True)
class MlpArch:
    """Network dimensions plus activation/loss variant.

    loss "cross_entropy" uses softmax outputs and expects integer labels
    or one-hot rows; "squared_error" uses linear outputs and float target
    rows.
    """

    n_in: int
    n_hidden: int
    n_out: int
    hidden: str = "tanh"
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.n_in < 1 or self.n_hidden < 1 or self.n_out < 1:
            raise ValueError("layer sizes must be >= 1")
        if self.hidden not in ("tanh", "identity"):
            raise ValueError(f"unknown hidden activation {self.hidden!r}")
        if self.loss not in ("cross_entropy", "squared_error"):
            raise ValueError(f"unknown loss {self.loss!r}")

    @property
    def param_count(self) -> int:
        return (self.n_hidden * (self.n_in + 1)
                + self.n_out * (self.n_hidden + 1))

    def init_flat(self, seed: int) -> np.ndarray:
        """Glorot-uniform layer weights, zero biases."""
        rng = np.random.default_rng(seed)
        r1 = np.sqrt(6.0 / (self.n_in + self.n_hidden))
        r2 = np.sqrt(6.0 / (self.n_hidden + self.n_out))
        w1 = rng.uniform(-r1, r1, size=(self.n_hidden, self.n_in))
        w2 = rng.uniform(-r2, r2, size=(self.n_out, self.n_hidden))
        b1 = np.zeros(self.n_hidden)
        b2 = np.zeros(self.n_out)
        return self.pack(w1, b1, w2, b2)

    def pack(self, w1, b1, w2, b2) -> np.ndarray:
        return np.concatenate([np.ravel(w1), np.ravel(b1),
                               np.ravel(w2), np.ravel(b2)])

    def unpack(self, weights: np.ndarray):
        """Split a flat vector into (W1, b1, W2, b2) views."""
        weights = np.asarray(weights)
        if weights.shape != (self.param_count,):
            raise ValueError(
                f"expected {self.param_count} parameters, got {weights.shape}")
        h, i, o = self.n_hidden, self.n_in, self.n_out
        p = 0
        w1 = weights[p:p + h * i].reshape(h, i); p += h * i
        b1 = weights[p:p + h]; p += h
        w2 = weights[p:p + o * h].reshape(o, h); p += o * h
        b2 = weights[p:]
        return w1, b1, w2, b2

    def _hidden_out(self, x, w1, b1):
        a = x @ w1.T + b1
        return np.tanh(a) if self.hidden == "tanh" else a

    def logits(self, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Pre-output activations for rows of x, returned (n_out, m)."""
        x = np.asarray(x, dtype=np.float64)
        w1, b1, w2, b2 = self.unpack(weights)
        return (self._hidden_out(x, w1, b1) @ w2.T + b2).T

    def outputs(self, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Network outputs, one column per sample, shape (n_out, m).

        Softmax probabilities under cross-entropy, raw linear outputs
        under squared error.
        """
        z = self.logits(weights, x)
        if self.loss == "squared_error":
            return z
        z = z - z.max(axis=0, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=0, keepdims=True)

    def loss_and_gradient(self, weights, x, targets, weight_mask=None):
        """Mean loss over the batch and its flat gradient.

        targets: integer labels in [0, n_out), or an (m, n_out) float
        array (one-hot rows or soft targets under cross-entropy, plain
        regression targets under squared error). A weight_mask of the
        same length as weights zeroes gradient entries for frozen
        parameters.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"expected (m, {self.n_in}) inputs, got {x.shape}")
        m = x.shape[0]
        if m < 1:
            raise ValueError("empty batch")
        w1, b1, w2, b2 = self.unpack(weights)
        hidden = self._hidden_out(x, w1, b1)
        out = hidden @ w2.T + b2  # (m, n_out)

        if self.loss == "cross_entropy":
            t = np.asarray(targets)
            shifted = out - out.max(axis=1, keepdims=True)
            log_norm = np.log(np.exp(shifted).sum(axis=1))
            probs = np.exp(shifted - log_norm[:, None])
            if t.ndim == 1:
                labels = _check_labels(t, m, self.n_out)
                loss = float(np.mean(log_norm - shifted[np.arange(m), labels]))
                delta = probs
                delta[np.arange(m), labels] -= 1.0
                delta /= m
            elif t.shape == (m, self.n_out):
                t = t.astype(np.float64)
                loss = float(np.sum(t * (log_norm[:, None] - shifted)) / m)
                delta = (probs - t) / m
            else:
                raise ValueError(
                    f"targets must be (m,) labels or (m, {self.n_out}) rows")
        else:
            t = np.asarray(targets, dtype=np.float64)
            if t.shape != (m, self.n_out):
                raise ValueError(f"targets must be (m, {self.n_out})")
            diff = out - t
            loss = float(np.sum(diff * diff) / (2.0 * m))
            delta = diff / m

        g_w2 = delta.T @ hidden
        g_b2 = delta.sum(axis=0)
        back = delta @ w2
        if self.hidden == "tanh":
            back = back * (1.0 - hidden * hidden)
        g_w1 = back.T @ x
        g_b1 = back.sum(axis=0)
        grad = self.pack(g_w1, g_b1, g_w2, g_b2)
        if weight_mask is not None:
            grad = grad * weight_mask
        return loss, grad


def _check_labels(labels, m: int, n_out: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (m,):
        raise ValueError("labels must be one integer per sample")
    labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_out):
        raise ValueError("label outside [0, n_out)")
    return labels


@dataclass(frozen=True, eq=False)
class MlpModel:
    """A network: architecture plus one flat weight vector.

    seed records which draw initialized it (None for derived models such
    as the fused network's pretrained variant).
    """

    arch: MlpArch
    weights: np.ndarray
    seed: int | None = None

    @property
    def n_in(self) -> int:
        return self.arch.n_in

    @property
    def n_hidden(self) -> int:
        return self.arch.n_hidden

    @property
    def n_out(self) -> int:
        return self.arch.n_out

    @property
    def hidden_activation(self) -> str:
        return self.arch.hidden

    @property
    def param_count(self) -> int:
        return self.arch.param_count

    @property
    def W1(self) -> np.ndarray:
        return self.arch.unpack(self.weights)[0]

    @property
    def b1(self) -> np.ndarray:
        return self.arch.unpack(self.weights)[1]

    @property
    def W2(self) -> np.ndarray:
        return self.arch.unpack(self.weights)[2]

    @property
    def b2(self) -> np.ndarray:
        return self.arch.unpack(self.weights)[3]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.arch.logits(self.weights, x)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Output scores, shape (n_out, m); columns sum to 1 under softmax."""
        return self.arch.outputs(self.weights, x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax labels; ties resolve to the lowest index."""
        return np.argmax(self.predict_proba(x), axis=0)


def init_weights(n_in: int, n_hidden: int, n_out: int, seed: int,
                 hidden: str = "tanh",
                 loss: str = "cross_entropy") -> MlpModel:
    """Fresh network with Glorot-uniform weights and zero biases."""
    arch = MlpArch(n_in, n_hidden, n_out, hidden=hidden, loss=loss)
    return MlpModel(arch=arch, weights=arch.init_flat(seed), seed=seed)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Output matrix for rows of x, shape (n_out, m)."""
    return model.predict_proba(x)


def loss_and_gradient(model: MlpModel, x: np.ndarray, targets):
    """Batch loss and flat gradient at the model's current weights."""
    return model.arch.loss_and_gradient(model.weights, x, targets)


@dataclass(frozen=True, eq=False)
class TrainReport:
    """What happened during one training run.

    Histories include the initial state at index 0, so their length is
    epochs_run + 1. stop_reason is one of "val_rise", "max_epochs",
    "grad_tol". best_epoch indexes the snapshot that was returned (0 means
    the initial weights were never beaten); without a validation set it is
    simply the final epoch. Validation error is the misclassification
    rate for classifier nets and the mean loss in squared-error mode.
    """

    epochs_run: int
    stop_reason: str
    train_loss_history: np.ndarray
    val_error_history: np.ndarray
    best_epoch: int
    best_val_error: float

    def to_text(self) -> str:
        """Tab-separated epoch table with a trailing summary line."""
        lines = ["epoch\ttrain_loss\tval_error"]
        for i, loss in enumerate(self.train_loss_history):
            val = (f"{self.val_error_history[i]!r}"
                   if i < len(self.val_error_history) else "")
            lines.append(f"{i}\t{loss!r}\t{val}")
        lines.append(f"# stop={self.stop_reason} best_epoch={self.best_epoch} "
                     f"best_val_error={self.best_val_error!r}")
        return "\n".join(lines) + "\n"


def _as_batch(name: str, batch) -> tuple[np.ndarray, np.ndarray]:
    try:
        x, targets = batch
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be an (inputs, targets) pair")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"{name} inputs must be a nonempty 2-D array")
    return x, np.asarray(targets)


def _val_error(arch: MlpArch, weights, x, targets) -> float:
    """Misclassification rate for classifiers, mean loss otherwise."""
    if arch.loss == "squared_error":
        loss, _ = arch.loss_and_gradient(weights, x, targets)
        return loss
    t = np.asarray(targets)
    labels = t if t.ndim == 1 else np.argmax(t, axis=1)
    preds = np.argmax(arch.logits(weights, x), axis=0)
    return float(np.mean(preds != labels))


def scg_train(model: MlpModel, learn_set, val_set=None, max_epochs: int = 500,
              patience: int = 5, *, grad_tol: float = 1e-8,
              weight_mask: np.ndarray | None = None) -> tuple[MlpModel, TrainReport]:
    """Scaled-conjugate-gradient training with validation early stopping.

    learn_set and val_set are (inputs, targets) pairs; they must not share
    samples. One epoch is one SCG iteration over the whole learn batch,
    and max_epochs 0 returns the starting weights untouched. Weights with
    a zero mask entry keep their initial value. With a validation set,
    the returned model is the snapshot with the lowest validation error
    seen (the initial weights count), and training stops after `patience`
    consecutive epochs without improvement.
    """
    if max_epochs < 0:
        raise ValueError("max_epochs must be >= 0")
    if patience < 1:
        raise ValueError("patience must be >= 1")
    arch = model.arch
    x_learn, targets_learn = _as_batch("learn_set", learn_set)
    has_val = val_set is not None
    if has_val:
        x_val, targets_val = _as_batch("val_set", val_set)
    w = np.array(model.weights, dtype=np.float64)
    if weight_mask is not None:
        weight_mask = np.asarray(weight_mask, dtype=np.float64)
        if weight_mask.shape != w.shape:
            raise ValueError("weight_mask must match the weight vector")

    def evaluate(weights):
        return arch.loss_and_gradient(weights, x_learn, targets_learn,
                                      weight_mask)

    n_params = arch.param_count
    e_now, grad = evaluate(w)
    for attempt in range(2):
        if np.isfinite(e_now) and np.all(np.isfinite(grad)):
            break
        if attempt == 1:
            raise TrainingDivergedError("non-finite loss at initial weights")
        e_now, grad = evaluate(w)

    r = -grad
    p = r.copy()
    lam = SCG_LAMBDA_INIT
    lam_bar = 0.0
    success = True
    delta_base = 0.0
    norm_p2 = float(p @ p)
    accepted = 0
    resets_left = 1

    train_hist = [e_now]
    val_hist = []
    best_w = w.copy()
    best_epoch = 0
    best_val = np.nan
    fails = 0
    if has_val:
        best_val = _val_error(arch, w, x_val, targets_val)
        val_hist.append(best_val)

    stop_reason = "max_epochs"
    epoch = 0
    while epoch < max_epochs:
        epoch += 1
        if not (np.isfinite(e_now) and np.all(np.isfinite(r))):
            if resets_left > 0:
                resets_left -= 1
                e_now, grad = evaluate(w)
                if np.isfinite(e_now) and np.all(np.isfinite(grad)):
                    r = -grad
                    p = r.copy()
                    lam, lam_bar, success = SCG_LAMBDA_INIT, 0.0, True
                else:
                    raise TrainingDivergedError("training diverged")
            else:
                raise TrainingDivergedError("training diverged")

        if success:
            norm_p2 = float(p @ p)
            if norm_p2 == 0.0:
                stop_reason = "grad_tol"
                epoch -= 1
                break
            sigma = SCG_SIGMA / np.sqrt(norm_p2)
            _, grad_probe = evaluate(w + sigma * p)
            s = (grad_probe + r) / sigma
            delta_base = float(p @ s)

        delta = delta_base + (lam - lam_bar) * norm_p2
        if delta <= 0:  # make the curvature estimate positive definite
            lam_bar = 2.0 * (lam - delta / norm_p2)
            delta = -delta + lam * norm_p2
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta
        w_trial = w + alpha * p
        e_trial, _ = arch.loss_and_gradient(w_trial, x_learn, targets_learn)
        comparison = 2.0 * delta * (e_now - e_trial) / (mu * mu)

        if np.isfinite(e_trial) and comparison >= 0:
            w = w_trial
            e_now = e_trial
            _, grad = evaluate(w)
            r_new = -grad
            lam_bar = 0.0
            success = True
            accepted += 1
            if accepted % n_params == 0:
                p = r_new  # periodic restart along steepest descent
            else:
                beta = float((r_new @ r_new - r_new @ r) / mu)
                p = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam *= 0.5
        else:
            lam_bar = lam
            success = False
        if np.isfinite(comparison) and comparison < 0.25:
            lam += delta * (1.0 - comparison) / norm_p2

        train_hist.append(e_now)
        if has_val:
            v = _val_error(arch, w, x_val, targets_val)
            val_hist.append(v)
            if v < best_val:
                best_val = v
                best_w = w.copy()
                best_epoch = epoch
                fails = 0
            else:
                fails += 1
                if fails >= patience:
                    stop_reason = "val_rise"
                    break
        if np.linalg.norm(r) < grad_tol:
            stop_reason = "grad_tol"
            break

    epochs_run = epoch
    if not has_val:
        best_w = w
        best_epoch = epochs_run
    report = TrainReport(
        epochs_run=epochs_run,
        stop_reason=stop_reason,
        train_loss_history=np.asarray(train_hist),
        val_error_history=np.asarray(val_hist),
        best_epoch=best_epoch,
        best_val_error=float(best_val) if has_val else float("nan"),
    )
    return MlpModel(arch=arch, weights=best_w, seed=model.seed), report
