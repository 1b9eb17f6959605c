"""Ensemble surrogate regressor over one-hot encoded sequences.

Each member is a one-hidden-layer MLP trained on its own bootstrap resample
with its own init seed; the ensemble reports predictive mean and population
standard deviation across members. Anything exposing ``predict_batch`` can
stand in for the ensemble elsewhere in the engine (e.g. the noisy-oracle
ensemble used in robustness studies).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, LengthMismatch
from .seqs import ALPHABET_SIZE, encode_one_hot_batch

CHECKPOINT_VERSION = 1


@dataclass
class Dataset:
    """Growing labelled set of (sequence, fitness) pairs with round provenance."""

    sequences: list[str] = field(default_factory=list)
    fitness: list[float] = field(default_factory=list)
    rounds: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.sequences) == len(self.fitness) == len(self.rounds)):
            raise ValueError("parallel dataset columns must have equal length")
        self._seen = set(self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)

    def __contains__(self, seq: str) -> bool:
        return seq in self._seen

    def add(self, seq: str, fitness: float, round_added: int) -> None:
        if self.sequences and len(seq) != len(self.sequences[0]):
            raise LengthMismatch("dataset sequences must share one length")
        self.sequences.append(seq)
        self.fitness.append(float(fitness))
        self.rounds.append(round_added)
        self._seen.add(seq)

    def best(self) -> tuple[str, float]:
        """Highest-fitness record; ties broken by earliest insertion."""
        if not self.sequences:
            raise InsufficientData("dataset is empty")
        i = int(np.argmax(self.fitness))
        return self.sequences[i], self.fitness[i]

    def fitness_array(self) -> np.ndarray:
        return np.asarray(self.fitness, dtype=float)


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-4
    l2_penalty: float = 1e-4
    batch_size: int = 256
    max_updates: int = 3000
    validation_fraction: float = 0.10
    patience: int = 10
    hidden_width: int = 64
    ensemble_size: int = 3
    optimizer: str = "adam"  # "adam" or "sgd"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.patience < 1 or self.ensemble_size < 2:
            raise ValueError("patience >= 1 and ensemble_size >= 2 required")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def mlp_forward(params: dict, X: np.ndarray) -> np.ndarray:
    h = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return h @ params["W2"] + params["b2"]


def mlp_loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray, l2: float):
    """MSE + L2 loss and its analytic gradient (biases excluded from L2)."""
    n = X.shape[0]
    z1 = X @ params["W1"] + params["b1"]
    h = np.maximum(z1, 0.0)
    pred = h @ params["W2"] + params["b2"]
    resid = pred - y
    loss = float(np.mean(resid**2)) + l2 * (
        float(np.sum(params["W1"] ** 2)) + float(np.sum(params["W2"] ** 2))
    )
    d_pred = 2.0 * resid / n
    gW2 = h.T @ d_pred + 2.0 * l2 * params["W2"]
    gb2 = float(np.sum(d_pred))
    d_h = np.outer(d_pred, params["W2"])
    d_z1 = d_h * (z1 > 0.0)
    gW1 = X.T @ d_z1 + 2.0 * l2 * params["W1"]
    gb1 = d_z1.sum(axis=0)
    return loss, {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}


def init_params(n_features: int, hidden_width: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / n_features), size=(n_features, hidden_width)),
        "b1": np.zeros(hidden_width),
        "W2": rng.normal(0.0, np.sqrt(1.0 / hidden_width), size=hidden_width),
        "b2": 0.0,
    }


class _MlpMember:
    """One trained regressor; predicts in standardized target space."""

    def __init__(self, params: dict, y_mean: float, y_std: float):
        self.params = params
        self.y_mean = y_mean
        self.y_std = y_std

    def predict(self, X: np.ndarray) -> np.ndarray:
        return mlp_forward(self.params, X) * self.y_std + self.y_mean

    def to_json(self) -> dict:
        return {
            "kind": "mlp",
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "W1": self.params["W1"].tolist(),
            "b1": self.params["b1"].tolist(),
            "W2": self.params["W2"].tolist(),
            "b2": self.params["b2"],
        }

    @classmethod
    def from_json(cls, d: dict) -> "_MlpMember":
        params = {
            "W1": np.asarray(d["W1"]),
            "b1": np.asarray(d["b1"]),
            "W2": np.asarray(d["W2"]),
            "b2": float(d["b2"]),
        }
        return cls(params, d["y_mean"], d["y_std"])


class _ConstantMember:
    def __init__(self, value: float):
        self.value = value

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.value)

    def to_json(self) -> dict:
        return {"kind": "constant", "value": self.value}

    @classmethod
    def from_json(cls, d: dict) -> "_ConstantMember":
        return cls(float(d["value"]))


class SurrogateEnsemble:
    """Immutable collection of trained members with a (mean, std) interface."""

    def __init__(self, members: list, feature_length: int, config: TrainingConfig):
        if len(members) < 2:
            raise ValueError("ensemble needs at least 2 members")
        self.members = members
        self.feature_length = feature_length
        self.config = config

    @property
    def sequence_length(self) -> int:
        return self.feature_length // ALPHABET_SIZE

    def predict_features(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if X.shape[1] != self.feature_length:
            raise LengthMismatch(
                f"feature length {X.shape[1]} != expected {self.feature_length}"
            )
        preds = np.stack([m.predict(X) for m in self.members])
        return preds.mean(axis=0), preds.std(axis=0)  # population std

    def predict_batch(self, seqs: list[str]) -> tuple[np.ndarray, np.ndarray]:
        if not seqs:
            return np.zeros(0), np.zeros(0)
        return self.predict_features(encode_one_hot_batch(seqs))

    def predict(self, seq: str) -> tuple[float, float]:
        mu, sigma = self.predict_batch([seq])
        return float(mu[0]), float(sigma[0])

    def save(self, path) -> None:
        payload = {
            "version": CHECKPOINT_VERSION,
            "feature_length": self.feature_length,
            "config": vars(self.config),
            "members": [m.to_json() for m in self.members],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "SurrogateEnsemble":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        members = [
            _MlpMember.from_json(m) if m["kind"] == "mlp" else _ConstantMember.from_json(m)
            for m in payload["members"]
        ]
        return cls(members, payload["feature_length"], TrainingConfig(**payload["config"]))


def ucb(mu, sigma, k: float):
    """Upper confidence bound acquisition: mu + k * sigma."""
    return mu + k * sigma


def _train_member(
    X: np.ndarray, y: np.ndarray, Xv: np.ndarray, yv: np.ndarray, cfg: TrainingConfig, seed: int
) -> dict:
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], cfg.hidden_width, rng)
    # bootstrap resample of the training split
    boot = rng.integers(0, X.shape[0], size=X.shape[0])
    Xb, yb = X[boot], y[boot]

    if cfg.optimizer == "adam":
        m = {k: np.zeros_like(v) if isinstance(v, np.ndarray) else 0.0 for k, v in params.items()}
        v = {k: np.zeros_like(val) if isinstance(val, np.ndarray) else 0.0 for k, val in params.items()}
        beta1, beta2, eps = 0.9, 0.999, 1e-8

    best = {k: np.copy(p) if isinstance(p, np.ndarray) else p for k, p in params.items()}
    best_val = np.inf
    bad_checks = 0
    updates = 0
    order = np.arange(Xb.shape[0])

    while updates < cfg.max_updates:
        rng.shuffle(order)
        for start in range(0, Xb.shape[0], cfg.batch_size):
            if updates >= cfg.max_updates:
                break
            sel = order[start : start + cfg.batch_size]
            _, grad = mlp_loss_and_grad(params, Xb[sel], yb[sel], cfg.l2_penalty)
            updates += 1
            if cfg.optimizer == "adam":
                for k in params:
                    m[k] = beta1 * m[k] + (1 - beta1) * grad[k]
                    v[k] = beta2 * v[k] + (1 - beta2) * np.square(grad[k])
                    m_hat = m[k] / (1 - beta1**updates)
                    v_hat = v[k] / (1 - beta2**updates)
                    params[k] = params[k] - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            else:
                for k in params:
                    params[k] = params[k] - cfg.learning_rate * grad[k]
        # one validation check per epoch
        val_loss = float(np.mean((mlp_forward(params, Xv) - yv) ** 2))
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best = {k: np.copy(p) if isinstance(p, np.ndarray) else p for k, p in params.items()}
            bad_checks = 0
        else:
            bad_checks += 1
            if bad_checks >= cfg.patience:
                break
    return best


def fit(data: Dataset, cfg: TrainingConfig) -> SurrogateEnsemble:
    """Train the ensemble on the current dataset.

    Deterministic given (data, cfg): the validation split is the last
    ``validation_fraction`` of a seed-shuffled copy, shared by all members;
    each member trains on its own bootstrap resample of the remainder with
    init seed ``cfg.seed + i``.
    """
    if len(data) < 10:
        raise InsufficientData(f"need at least 10 records, got {len(data)}")
    y = data.fitness_array()
    feature_length = ALPHABET_SIZE * len(data.sequences[0])
    if np.ptp(y) == 0.0:
        warnings.warn("all fitness values equal; returning constant predictor", stacklevel=2)
        members = [_ConstantMember(float(y[0])) for _ in range(cfg.ensemble_size)]
        return SurrogateEnsemble(members, feature_length, cfg)

    X = encode_one_hot_batch(data.sequences)
    y_mean, y_std = float(y.mean()), float(y.std())
    y_n = (y - y_mean) / y_std

    shuffle_rng = np.random.default_rng(cfg.seed)
    perm = shuffle_rng.permutation(len(y_n))
    n_val = max(1, int(round(cfg.validation_fraction * len(y_n))))
    train_idx, val_idx = perm[:-n_val], perm[-n_val:]
    Xt, yt = X[train_idx], y_n[train_idx]
    Xv, yv = X[val_idx], y_n[val_idx]

    members = []
    for i in range(cfg.ensemble_size):
        params = _train_member(Xt, yt, Xv, yv, cfg, seed=cfg.seed + i)
        members.append(_MlpMember(params, y_mean, y_std))
    return SurrogateEnsemble(members, feature_length, cfg)
