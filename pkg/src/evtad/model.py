"""One-hidden-layer binary classifier with hand-derived backpropagation.

Architecture: standardized input -> tanh hidden layer -> sigmoid output.
Loss: class-weighted binary cross-entropy averaged over the batch. Trained
with minibatch SGD with momentum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "w2", "b2")


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(params: dict, X: np.ndarray):
    """Returns (logits, hidden activations)."""
    h = np.tanh(X @ params["W1"].T + params["b1"])
    z = h @ params["w2"] + params["b2"][0]
    return z, h


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray, pos_weight: float, neg_weight: float):
    """Weighted BCE and its gradient w.r.t. every parameter array.

    With sample weight ``c_i`` (``pos_weight`` for y=1, ``neg_weight`` for
    y=0) the loss is ``mean_i c_i * [y softplus(-z) + (1-y) softplus(z)]``.
    """
    n = len(y)
    z, h = forward(params, X)
    c = np.where(y > 0.5, pos_weight, neg_weight)
    loss = float(np.sum(c * (y * _softplus(-z) + (1 - y) * _softplus(z))) / n)
    dz = c * (_sigmoid(z) - y) / n
    dh = np.outer(dz, params["w2"]) * (1.0 - h * h)
    grads = {
        "W1": dh.T @ X,
        "b1": dh.sum(axis=0),
        "w2": h.T @ dz,
        "b2": np.array([dz.sum()]),
    }
    return loss, grads


def init_params(n_in: int, n_hidden: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_hidden, n_in)),
        "b1": np.zeros(n_hidden),
        "w2": rng.normal(0.0, 1.0 / np.sqrt(n_hidden), size=n_hidden),
        "b2": np.zeros(1),
    }


@dataclass
class Model:
    """Trained classifier plus the input standardization it was fit with.

    ``meta`` carries feature-extraction settings so a checkpoint can be
    applied to new streams consistently.
    """

    params: dict
    x_mean: np.ndarray
    x_scale: np.ndarray
    pos_weight: float = 1.0
    neg_weight: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n_in(self) -> int:
        return self.params["W1"].shape[1]

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_in:
            raise ValueError(f"model expects {self.n_in} features, got {X.shape[1]}")
        z, _ = forward(self.params, self.standardize(X))
        return _sigmoid(z)

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "n_in": self.n_in,
            "n_hidden": int(self.params["W1"].shape[0]),
            "params": {k: self.params[k].tolist() for k in PARAM_NAMES},
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "class_weights": {"pos": self.pos_weight, "neg": self.neg_weight},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')!r}")
        params = {k: np.asarray(d["params"][k], dtype=float) for k in PARAM_NAMES}
        model = cls(
            params,
            np.asarray(d["x_mean"], dtype=float),
            np.asarray(d["x_scale"], dtype=float),
            float(d["class_weights"]["pos"]),
            float(d["class_weights"]["neg"]),
            dict(d.get("meta", {})),
        )
        if params["W1"].shape != (d["n_hidden"], d["n_in"]):
            raise ValueError("checkpoint dimensions do not match parameter shapes")
        for v in list(params.values()) + [model.x_mean, model.x_scale]:
            if not np.all(np.isfinite(v)):
                raise ValueError("checkpoint contains non-finite values")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings. Defaults follow the reference training recipe
    (momentum 0.9, batch 128, lr 1e-3); ``None`` class weights mean
    inverse-frequency balancing."""

    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 100
    hidden: int = 16
    pos_weight: float | None = None
    neg_weight: float | None = None
    seed: int = 0


def balanced_weights(y: np.ndarray) -> tuple[float, float]:
    n = len(y)
    n_pos = float(np.sum(y > 0.5))
    return n / (2.0 * n_pos), n / (2.0 * (n - n_pos))


def train(
    X,
    y,
    cfg: TrainConfig = TrainConfig(),
    val: tuple | None = None,
    meta: dict | None = None,
) -> Model:
    """Fit the classifier; deterministic for a given ``cfg.seed``.

    Args:
        X: (n, d) features.
        y: (n,) labels in {0, 1}.
        cfg: optimizer and architecture settings.
        val: optional (X_val, y_val); the epoch with the lowest validation
            loss is returned instead of the last one.
        meta: stored verbatim on the returned model.

    Raises:
        ValueError: empty set or only one class present.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or not len(y):
        raise ValueError("need a non-empty (n, d) feature matrix with n labels")
    if len(np.unique(y)) < 2:
        raise ValueError("training set must contain both classes")
    pos_w, neg_w = balanced_weights(y)
    if cfg.pos_weight is not None:
        pos_w = cfg.pos_weight
    if cfg.neg_weight is not None:
        neg_w = cfg.neg_weight

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale < 1e-12] = 1.0
    Xs = (X - x_mean) / x_scale
    rng = np.random.default_rng(cfg.seed)
    params = init_params(X.shape[1], cfg.hidden, rng)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    model = Model(params, x_mean, x_scale, pos_w, neg_w, dict(meta or {}))

    best = None
    if val is not None:
        Xv = model.standardize(val[0])
        yv = np.asarray(val[1], dtype=float)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_and_grad(params, Xs[idx], y[idx], pos_w, neg_w)
            for k in PARAM_NAMES:
                velocity[k] = cfg.momentum * velocity[k] - cfg.lr * grads[k]
                params[k] = params[k] + velocity[k]
        if val is not None:
            vloss, _ = loss_and_grad(params, Xv, yv, pos_w, neg_w)
            if best is None or vloss < best[0]:
                best = (vloss, {k: v.copy() for k, v in params.items()})
    model.params = best[1] if best is not None else params
    return model
