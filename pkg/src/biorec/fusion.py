"""Decision-level fusion of the per-channel classifiers.

Two strategies. The sum rule adds the channel score matrices and takes the
argmax, no renormalization. The fused hybrid network concatenates the
channels' reduced feature vectors and runs one larger network whose first
layer is constrained block-diagonal (each hidden block sees only its own
channel), so it is the three channel networks sharing a single output
layer. Its weights either start from the trained channel networks ("fpt")
or from a fresh seeded initialization ("fnpt"); either way training uses a
gradient mask so the off-block first-layer entries stay exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mlp import MlpArch, MlpModel, TrainReport, scg_train
from .seeds import derive_seed

FUSED_MODES = ("fpt", "fnpt")


def fuse_sum(outputs: Sequence[np.ndarray]) -> np.ndarray:
    """Sum-rule score matrix: elementwise sum of (n_categories, m) outputs.

    Inputs are normally probability columns, but only relative magnitudes
    matter for the decision, so no normalization is checked or applied.
    """
    if len(outputs) == 0:
        raise ValueError("no channel outputs to fuse")
    first = np.asarray(outputs[0], dtype=np.float64)
    if first.ndim != 2:
        raise ValueError("channel outputs must be 2-D (categories x samples)")
    total = first.copy()
    for out in outputs[1:]:
        out = np.asarray(out, dtype=np.float64)
        if out.shape != first.shape:
            raise ValueError("channel outputs must share one shape")
        total += out
    return total


def decide(scores: np.ndarray) -> np.ndarray:
    """Argmax category per column; ties resolve to the lowest index."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ValueError("scores must be 2-D (categories x samples)")
    return np.argmax(scores, axis=0)


def sum_rule_fuse(outputs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Fused score matrix and its per-column argmax decisions."""
    fused = fuse_sum(outputs)
    return fused, decide(fused)


def stack_features(channel_features: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate per-channel (m, n_k) feature blocks into (m, sum n_k)."""
    if len(channel_features) == 0:
        raise ValueError("no channels to stack")
    return np.hstack([np.asarray(f, dtype=np.float64) for f in channel_features])


def block_diagonal_mask(in_sizes: Sequence[int],
                        hidden_sizes: Sequence[int],
                        n_out: int) -> np.ndarray:
    """Trainable-weight mask for the fused architecture.

    First-layer weights are 1 only where hidden block k meets input block
    k; biases and the whole output layer are fully trainable.
    """
    if len(in_sizes) != len(hidden_sizes) or len(in_sizes) == 0:
        raise ValueError("need matching non-empty size lists")
    n_in = int(np.sum(in_sizes))
    n_hidden = int(np.sum(hidden_sizes))
    w1 = np.zeros((n_hidden, n_in))
    row, col = 0, 0
    for h, n in zip(hidden_sizes, in_sizes):
        w1[row:row + h, col:col + n] = 1.0
        row += h
        col += n
    arch = MlpArch(n_in=n_in, n_hidden=n_hidden, n_out=n_out)
    return arch.pack(w1, np.ones(n_hidden), np.ones((n_out, n_hidden)),
                     np.ones(n_out))


@dataclass(frozen=True, eq=False)
class FusedHybridNetwork:
    """One network over the concatenated channel features.

    net holds the weights; mask marks which of them may move during
    training (the first layer is block-diagonal, everything else dense).
    Inputs are channel feature blocks side by side in channel order, with
    widths in_sizes; hidden blocks have widths hidden_sizes.
    """

    net: MlpModel
    mask: np.ndarray
    in_sizes: tuple[int, ...]
    hidden_sizes: tuple[int, ...]
    mode: str

    @property
    def n_out(self) -> int:
        return self.net.n_out

    @property
    def W1_blocks(self) -> tuple[np.ndarray, ...]:
        """The per-channel diagonal blocks of the first-layer weights."""
        w1 = self.net.W1
        blocks = []
        row, col = 0, 0
        for h, n in zip(self.hidden_sizes, self.in_sizes):
            blocks.append(w1[row:row + h, col:col + n])
            row += h
            col += n
        return tuple(blocks)

    @property
    def b1(self) -> np.ndarray:
        return self.net.b1

    @property
    def W_out(self) -> np.ndarray:
        return self.net.W2

    @property
    def b_out(self) -> np.ndarray:
        return self.net.b2

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.net.logits(x)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.net.predict_proba(x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.net.predict(x)


def build_fhn(members: Sequence[MlpModel], mode: str,
              seed: int | None = None) -> FusedHybridNetwork:
    """Assemble the fused network from the channel networks.

    mode "fpt" copies each trained member into its block (first-layer
    blocks, stacked output weights, summed output biases), which makes the
    fused logits the exact sum of member logits before any training.
    mode "fnpt" draws fresh block weights from seeds derived per block and
    needs `seed`.
    """
    if mode not in FUSED_MODES:
        raise ValueError(f"unknown fused mode {mode!r}")
    if len(members) == 0:
        raise ValueError("no member networks")
    n_out = members[0].arch.n_out
    for m in members:
        if m.arch.n_out != n_out:
            raise ValueError("member networks disagree on category count")
        if m.arch.hidden != "tanh" or m.arch.loss != "cross_entropy":
            raise ValueError("fused members must be tanh/cross-entropy networks")

    in_sizes = tuple(m.arch.n_in for m in members)
    hidden_sizes = tuple(m.arch.n_hidden for m in members)
    arch = MlpArch(n_in=int(np.sum(in_sizes)),
                   n_hidden=int(np.sum(hidden_sizes)), n_out=n_out)
    mask = block_diagonal_mask(in_sizes, hidden_sizes, n_out)

    w1 = np.zeros((arch.n_hidden, arch.n_in))
    b1 = np.zeros(arch.n_hidden)
    w2 = np.zeros((n_out, arch.n_hidden))
    b2 = np.zeros(n_out)
    row, col = 0, 0
    for k, member in enumerate(members):
        if mode == "fpt":
            mw1, mb1, mw2, mb2 = member.arch.unpack(member.weights)
        else:
            if seed is None:
                raise ValueError("fnpt initialization needs a seed")
            fresh = member.arch.init_flat(derive_seed(seed, "fused-block", str(k)))
            mw1, mb1, mw2, mb2 = member.arch.unpack(fresh)
        h, n = member.arch.n_hidden, member.arch.n_in
        w1[row:row + h, col:col + n] = mw1
        b1[row:row + h] = mb1
        w2[:, row:row + h] = mw2
        b2 += mb2
        row += h
        col += n

    net = MlpModel(arch=arch, weights=arch.pack(w1, b1, w2, b2))
    return FusedHybridNetwork(net=net, mask=mask, in_sizes=in_sizes,
                              hidden_sizes=hidden_sizes, mode=mode)


def train_fhn(fhn: FusedHybridNetwork, learn_set, val_set=None,
              max_epochs: int = 500, patience: int = 5, *,
              grad_tol: float = 1e-8) -> tuple[FusedHybridNetwork, TrainReport]:
    """Train the fused network; the block-diagonal constraint is kept by
    masking gradients, so cross-block entries stay exactly zero.

    learn_set and val_set pair concatenated channel features with labels,
    as for scg_train.
    """
    net, report = scg_train(fhn.net, learn_set, val_set,
                            max_epochs=max_epochs, patience=patience,
                            grad_tol=grad_tol, weight_mask=fhn.mask)
    trained = FusedHybridNetwork(net=net, mask=fhn.mask,
                                 in_sizes=fhn.in_sizes,
                                 hidden_sizes=fhn.hidden_sizes, mode=fhn.mode)
    return trained, report
