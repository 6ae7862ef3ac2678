"""Bagged feedforward networks trained with RPROP, plus the mean-regression baseline.

Inputs and targets are linearly rescaled to [-1, 1] per training fold; each of
the 20 bag members trains on its own bootstrap resample for at most 100 epochs
or until the batch MSE drops below 0.001.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

HIDDEN_UNITS = 20
BAG_MEMBERS = 20
MAX_ITERS = 100
TARGET_MSE = 1e-3

# step adaptation constants of the resilient-backprop scheme
ETA_PLUS = 1.2
ETA_MINUS = 0.5
STEP_INIT = 0.1
STEP_MIN = 1e-6
STEP_MAX = 50.0

Seed = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class ScalerParams:
    in_min: np.ndarray
    in_max: np.ndarray
    t_min: float
    t_max: float


def fit_scaler(X: np.ndarray, y: np.ndarray) -> ScalerParams:
    """Per-dimension input min/max and target min/max from training data only."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("empty training set")
    return ScalerParams(X.min(axis=0), X.max(axis=0), float(y.min()), float(y.max()))


def scale_inputs(scaler: ScalerParams, X: np.ndarray) -> np.ndarray:
    """Map training min/max to [-1, 1]; constant dimensions to 0; clamp the rest."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    span = scaler.in_max - scaler.in_min
    safe = np.where(span == 0, 1.0, span)
    out = np.clip(-1.0 + 2.0 * (X - scaler.in_min) / safe, -1.0, 1.0)
    out[:, span == 0] = 0.0
    return out


def scale_targets(scaler: ScalerParams, y: np.ndarray) -> np.ndarray:
    span = scaler.t_max - scaler.t_min
    if span == 0:
        return np.zeros_like(np.asarray(y, dtype=float))
    return np.clip(-1.0 + 2.0 * (np.asarray(y, dtype=float) - scaler.t_min) / span, -1.0, 1.0)


def inverse_targets(scaler: ScalerParams, s: np.ndarray) -> np.ndarray:
    span = scaler.t_max - scaler.t_min
    return scaler.t_min + (np.asarray(s, dtype=float) + 1.0) * span / 2.0


def input_clamp_fraction(scaler: ScalerParams, X: np.ndarray) -> float:
    """Fraction of input components outside the training range (will be clamped)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    outside = (X < scaler.in_min) | (X > scaler.in_max)
    return float(outside.mean())


@dataclass
class NetworkParams:
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float


def _init_params(n_inputs: int, rng: np.random.Generator) -> NetworkParams:
    return NetworkParams(
        w1=rng.uniform(-0.5, 0.5, size=(HIDDEN_UNITS, n_inputs)),
        b1=rng.uniform(-0.5, 0.5, size=HIDDEN_UNITS),
        w2=rng.uniform(-0.5, 0.5, size=HIDDEN_UNITS),
        b2=float(rng.uniform(-0.5, 0.5)),
    )


def forward(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Batch forward pass; symmetric sigmoid at hidden and output layers."""
    H = np.tanh(np.atleast_2d(X) @ params.w1.T + params.b1)
    return np.tanh(H @ params.w2 + params.b2)


def gradients(params: NetworkParams, X: np.ndarray, y: np.ndarray):
    """Analytic batch gradient of the MSE loss for every parameter array."""
    X = np.atleast_2d(X)
    H = np.tanh(X @ params.w1.T + params.b1)
    out = np.tanh(H @ params.w2 + params.b2)
    g_out = 2.0 * (out - y) / len(y)
    g_pre2 = g_out * (1.0 - out * out)
    g_w2 = H.T @ g_pre2
    g_b2 = float(g_pre2.sum())
    g_pre1 = np.outer(g_pre2, params.w2) * (1.0 - H * H)
    g_w1 = g_pre1.T @ X
    g_b1 = g_pre1.sum(axis=0)
    return g_w1, g_b1, g_w2, g_b2


def _mse(params: NetworkParams, X: np.ndarray, y: np.ndarray) -> float:
    diff = forward(params, X) - y
    return float(diff @ diff) / len(y)


def _rprop_step(w, grad, prev, step):
    sign = grad * prev
    np.multiply(step, ETA_PLUS, where=sign > 0, out=step)
    np.multiply(step, ETA_MINUS, where=sign < 0, out=step)
    np.clip(step, STEP_MIN, STEP_MAX, out=step)
    grad = np.where(sign < 0, 0.0, grad)
    w -= np.sign(grad) * step
    return grad


def train_network(
    X: np.ndarray,
    y: np.ndarray,
    seed: Seed,
    max_iters: int = MAX_ITERS,
    target_mse: float = TARGET_MSE,
) -> NetworkParams:
    """Full-batch resilient backprop; deterministic for a given seed and data."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    rng = np.random.default_rng(seed)
    params = _init_params(X.shape[1], rng)
    weights = [params.w1, params.b1, np.asarray(params.w2)]
    steps = [np.full_like(w, STEP_INIT) for w in weights] + [STEP_INIT]
    prev = [np.zeros_like(w) for w in weights] + [0.0]
    for _ in range(max_iters):
        if _mse(params, X, y) < target_mse:
            break
        g_w1, g_b1, g_w2, g_b2 = gradients(params, X, y)
        prev[0] = _rprop_step(params.w1, g_w1, prev[0], steps[0])
        prev[1] = _rprop_step(params.b1, g_b1, prev[1], steps[1])
        prev[2] = _rprop_step(params.w2, g_w2, prev[2], steps[2])
        # scalar bias follows the same rule
        sign = g_b2 * prev[3]
        if sign > 0:
            steps[3] = min(steps[3] * ETA_PLUS, STEP_MAX)
        elif sign < 0:
            steps[3] = max(steps[3] * ETA_MINUS, STEP_MIN)
            g_b2 = 0.0
        params.b2 -= float(np.sign(g_b2)) * steps[3]
        prev[3] = g_b2
    return params


@dataclass
class BaggedModel:
    members: tuple[NetworkParams, ...]
    scaler: ScalerParams
    input_dim: int


def train_bagged(
    X: np.ndarray,
    y: np.ndarray,
    seed: Seed,
    members: int = BAG_MEMBERS,
    max_iters: int = MAX_ITERS,
    target_mse: float = TARGET_MSE,
) -> BaggedModel:
    """Fit the scaler, then train each member on its own bootstrap resample."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ValueError("empty training set")
    scaler = fit_scaler(X, y)
    Xs = scale_inputs(scaler, X)
    ys = scale_targets(scaler, y)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    nets = []
    for member_seq in root.spawn(members):
        boot_seq, init_seq = member_seq.spawn(2)
        idx = np.random.default_rng(boot_seq).integers(0, len(Xs), size=len(Xs))
        nets.append(train_network(Xs[idx], ys[idx], init_seq, max_iters, target_mse))
    return BaggedModel(tuple(nets), scaler, X.shape[1])


def predict_batch(model: BaggedModel, X: np.ndarray) -> np.ndarray:
    """Average the members' outputs in scaled space, then map back to targets."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.input_dim:
        raise ValueError(f"input dimension {X.shape[1]} != model dimension {model.input_dim}")
    Xs = scale_inputs(model.scaler, X)
    outs = np.mean([forward(m, Xs) for m in model.members], axis=0)
    return inverse_targets(model.scaler, outs)


def predict(model: BaggedModel, x: np.ndarray) -> float:
    return float(predict_batch(model, np.atleast_2d(x))[0])


@dataclass(frozen=True)
class MeanRegressor:
    mean: float


def train_mean(y: np.ndarray) -> MeanRegressor:
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("empty training set")
    return MeanRegressor(float(y.mean()))


def predict_mean(model: MeanRegressor, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.full(len(X), model.mean)


# ---------------------------------------------------------------------------
# model persistence: versioned flat text files

def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(v).ravel())


def _parse_vec(line: str) -> np.ndarray:
    return np.array([float(x) for x in line.split()]) if line else np.array([])


def format_model_bundle(
    models: dict[str, Union[BaggedModel, MeanRegressor]],
    preset: str = "custom",
    segments: Sequence[tuple[str, int, int]] = (),
) -> str:
    """One text blob holding one trained model per target attribute."""
    lines = ["goeval-model v1", f"preset {preset}"]
    if segments:
        lines.append("segments " + ",".join(f"{n}:{o}:{l}" for n, o, l in segments))
    for name, model in models.items():
        if isinstance(model, MeanRegressor):
            lines.append(f"target {name} mean")
            lines.append(repr(model.mean))
            continue
        lines.append(f"target {name} bagged {model.input_dim} {len(model.members)}")
        lines.append(_fmt_vec(model.scaler.in_min))
        lines.append(_fmt_vec(model.scaler.in_max))
        lines.append(f"{model.scaler.t_min!r} {model.scaler.t_max!r}")
        for net in model.members:
            for row in net.w1:
                lines.append(_fmt_vec(row))
            lines.append(_fmt_vec(net.b1))
            lines.append(_fmt_vec(net.w2))
            lines.append(repr(net.b2))
    return "\n".join(lines) + "\n"


def save_model_bundle(
    path: Path,
    models: dict[str, Union[BaggedModel, MeanRegressor]],
    preset: str = "custom",
    segments: Sequence[tuple[str, int, int]] = (),
) -> None:
    Path(path).write_text(format_model_bundle(models, preset, segments))


class ModelBundle:
    def __init__(self, models, preset, segments):
        self.models: dict[str, Union[BaggedModel, MeanRegressor]] = models
        self.preset = preset
        self.segments = segments


def load_model_bundle(path: Path) -> ModelBundle:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "goeval-model v1":
        raise ValueError(f"not a goeval model file: {path}")
    preset = "custom"
    segments: tuple = ()
    models: dict[str, Union[BaggedModel, MeanRegressor]] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip():
            continue
        if line.startswith("preset "):
            preset = line.split(" ", 1)[1]
        elif line.startswith("segments "):
            segs = []
            for part in line.split(" ", 1)[1].split(","):
                name, off, length = part.split(":")
                segs.append((name, int(off), int(length)))
            segments = tuple(segs)
        elif line.startswith("target "):
            parts = line.split()
            name, kind = parts[1], parts[2]
            if kind == "mean":
                models[name] = MeanRegressor(float(lines[i]))
                i += 1
            else:
                dim, members = int(parts[3]), int(parts[4])
                in_min = _parse_vec(lines[i]); i += 1
                in_max = _parse_vec(lines[i]); i += 1
                t_min, t_max = (float(v) for v in lines[i].split()); i += 1
                scaler = ScalerParams(in_min, in_max, t_min, t_max)
                nets = []
                for _ in range(members):
                    w1 = np.vstack([_parse_vec(lines[i + r]) for r in range(HIDDEN_UNITS)])
                    i += HIDDEN_UNITS
                    b1 = _parse_vec(lines[i]); i += 1
                    w2 = _parse_vec(lines[i]); i += 1
                    b2 = float(lines[i]); i += 1
                    nets.append(NetworkParams(w1, b1, w2, b2))
                models[name] = BaggedModel(tuple(nets), scaler, dim)
        else:
            raise ValueError(f"unexpected model-file line: {line!r}")
    return ModelBundle(models, preset, segments)
