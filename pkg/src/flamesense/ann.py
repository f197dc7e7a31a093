"""Single-hidden-layer tanh regression network and its two trainers.

The network is 6 tanh hidden units with a linear output.  Training cost
is the half-mean-squared error J = 1/(2C) Σ e², distinct from the
reported evaluation MSE (1/C Σ e²).  Both trainers share the early
stopping contract: patience of 6 consecutive epochs without validation
improvement, with the best-validation parameters restored on return.

The optimizer cores (`lm_minimize`, `scg_minimize`) work on flat
parameter vectors through callables, so they are testable against
closed-form least-squares and quadratic oracles independent of the MLP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ConfigInvalid,
    CorruptModel,
    DampingExhausted,
    DimensionMismatch,
    EmptyInput,
    GradientVanished,
)
from ._textfmt import fmt_float, fmt_floats

__all__ = [
    "HIDDEN_UNITS",
    "GRAD_EPS",
    "TrainerId",
    "StopReason",
    "MlpModel",
    "TrainConfig",
    "TrainReport",
    "init_weights",
    "forward",
    "predict_batch",
    "cost",
    "gradient",
    "residual_jacobian",
    "pack_params",
    "unpack_params",
    "param_count",
    "lm_minimize",
    "scg_minimize",
    "train_lm",
    "train_scg",
    "mlp_lines",
    "mlp_from_lines",
]

#: Hidden layer width of the regression network.
HIDDEN_UNITS = 6

#: Gradient norms below this are treated as vanished.
GRAD_EPS = 1e-12


class TrainerId:
    LM = "LM"
    SCG = "SCG"
    ALL = (LM, SCG)


class StopReason:
    MAX_EPOCHS = "MaxEpochs"
    VALIDATION_PATIENCE = "ValidationPatience"
    GRADIENT_VANISHED = "GradientVanished"
    DAMPING_EXHAUSTED = "DampingExhausted"


@dataclass(frozen=True)
class MlpModel:
    """tanh-hidden, linear-output network parameters."""

    w1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (1, H)
    b2: float

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b2 = float(self.b2)
        if w1.ndim != 2 or b1.shape != (w1.shape[0],) or w2.shape != (1, w1.shape[0]):
            raise DimensionMismatch(
                f"inconsistent parameter shapes: w1 {w1.shape}, b1 {b1.shape}, "
                f"w2 {w2.shape}"
            )
        for arr in (w1, b1, w2):
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch("model parameters must be finite")
            arr.flags.writeable = False
        if not np.isfinite(b2):
            raise DimensionMismatch("model parameters must be finite")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_units(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Trainer selection plus the fixed optimization constants."""

    method: str = TrainerId.LM
    max_epochs: int = 1000
    patience: int = 6
    seed: int = 0
    mu0: float = 1e-3
    mu_factor: float = 10.0
    mu_max: float = 1e10
    scg_sigma: float = 5e-5
    scg_lambda0: float = 5e-7

    def __post_init__(self):
        if self.method not in TrainerId.ALL:
            raise ConfigInvalid(f"unknown trainer {self.method!r}")
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigInvalid("max_epochs and patience must be at least 1")
        for name in ("mu0", "mu_factor", "mu_max", "scg_sigma", "scg_lambda0"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive")


@dataclass(frozen=True)
class TrainReport:
    """Cost trajectory of one training run.

    ``train_costs[0]``/``val_costs[0]`` are the initial-parameter costs;
    entry k is the cost after epoch k.  ``best_epoch`` indexes these
    arrays (0 means the initial parameters were never improved upon).
    """

    trainer: str
    stop_reason: str
    best_epoch: int
    accepted_steps: int
    train_costs: tuple[float, ...]
    val_costs: tuple[float, ...]

    @property
    def epochs_run(self) -> int:
        return len(self.train_costs) - 1


def init_weights(dim: int, seed: int, hidden: int = HIDDEN_UNITS) -> MlpModel:
    """Seeded uniform weights in [-1/√D, 1/√D], zero biases."""
    if dim < 1:
        raise DimensionMismatch(f"input dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim)
    w1 = rng.uniform(-bound, bound, size=(hidden, dim))
    w2 = rng.uniform(-bound, bound, size=(1, hidden))
    return MlpModel(w1=w1, b1=np.zeros(hidden), w2=w2, b2=0.0)


# ---------------------------------------------------------------------------
# forward / cost / derivatives


def _check_batch(model: MlpModel, x: np.ndarray, y: np.ndarray | None = None):
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"expected samples of dimension {model.input_dim}, got shape {x.shape}"
        )
    if y is not None and y.shape != (x.shape[0],):
        raise DimensionMismatch(
            f"expected {x.shape[0]} targets, got shape {y.shape}"
        )


def forward(model: MlpModel, x) -> float:
    """Network output W₂·tanh(W₁x + b₁) + b₂ for a single sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DimensionMismatch(
            f"expected a length-{model.input_dim} sample, got shape {x.shape}"
        )
    hidden = np.tanh(model.w1 @ x + model.b1)
    return float(model.w2[0] @ hidden + model.b2)


def predict_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Network outputs for a (C, D) batch."""
    x = np.asarray(x, dtype=np.float64)
    _check_batch(model, x)
    hidden = np.tanh(x @ model.w1.T + model.b1)
    return (hidden @ model.w2.T).ravel() + model.b2


def cost(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    """Training cost 1/(2C) Σ (h(x)−y)² — note the half factor."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyInput("cost needs at least one sample")
    _check_batch(model, x, y)
    e = predict_batch(model, x) - y
    return float(e @ e) / (2 * x.shape[0])


def gradient(model: MlpModel, x: np.ndarray, y: np.ndarray) -> MlpModel:
    """Analytic gradient of the training cost, parameter-shaped."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyInput("gradient needs at least one sample")
    _check_batch(model, x, y)
    c = x.shape[0]
    a1 = np.tanh(x @ model.w1.T + model.b1)  # (C, H)
    e = (a1 @ model.w2.T).ravel() + model.b2 - y
    dy = e / c
    dw2 = dy @ a1  # (H,)
    db2 = float(np.sum(dy))
    dz1 = np.outer(dy, model.w2.ravel()) * (1.0 - a1 * a1)  # (C, H)
    dw1 = dz1.T @ x  # (H, D)
    db1 = dz1.sum(axis=0)
    return MlpModel(w1=dw1, b1=db1, w2=dw2[np.newaxis, :], b2=db2)


def residual_jacobian(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """(C, P) matrix of residual derivatives ∂(h(x^(i))−y^(i))/∂θ.

    Columns follow the packing order [W₁ row-major, b₁, W₂, b₂] and
    satisfy ∇J = (1/C)·Jᵀe for the residual e.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_batch(model, x)
    c, d = x.shape
    h = model.hidden_units
    a1 = np.tanh(x @ model.w1.T + model.b1)  # (C, H)
    dz1 = (1.0 - a1 * a1) * model.w2.ravel()  # (C, H)
    jw1 = np.einsum("ch,cd->chd", dz1, x).reshape(c, h * d)
    return np.hstack([jw1, dz1, a1, np.ones((c, 1))])


def param_count(dim: int, hidden: int = HIDDEN_UNITS) -> int:
    return hidden * dim + 2 * hidden + 1


def pack_params(model: MlpModel) -> np.ndarray:
    return np.concatenate(
        [model.w1.ravel(), model.b1, model.w2.ravel(), [model.b2]]
    )


def unpack_params(theta: np.ndarray, dim: int, hidden: int = HIDDEN_UNITS) -> MlpModel:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (param_count(dim, hidden),):
        raise DimensionMismatch(
            f"expected {param_count(dim, hidden)} parameters, got {theta.size}"
        )
    hd = hidden * dim
    return MlpModel(
        w1=theta[:hd].reshape(hidden, dim),
        b1=theta[hd : hd + hidden],
        w2=theta[hd + hidden : hd + 2 * hidden][np.newaxis, :],
        b2=float(theta[-1]),
    )


# ---------------------------------------------------------------------------
# early-stopping bookkeeping shared by both optimizer cores


class _Stopper:
    def __init__(self, theta0: np.ndarray, val_cost0: float, patience: int):
        self.best_theta = theta0.copy()
        self.best_val = val_cost0
        self.best_epoch = 0
        self.bad_checks = 0
        self.patience = patience

    def update(self, epoch: int, theta: np.ndarray, val_cost: float) -> bool:
        """Record an epoch; return True when patience is exhausted."""
        if val_cost < self.best_val:
            self.best_val = val_cost
            self.best_theta = theta.copy()
            self.best_epoch = epoch
            self.bad_checks = 0
            return False
        self.bad_checks += 1
        return self.bad_checks >= self.patience


def lm_minimize(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], np.ndarray],
    theta0: np.ndarray,
    cfg: TrainConfig,
    val_cost_fn: Callable[[np.ndarray], float] | None = None,
) -> tuple[np.ndarray, TrainReport]:
    """Levenberg–Marquardt on a residual/Jacobian pair.

    Per epoch: solve (JᵀJ + μI)Δ = −Jᵀe, accept on strict training-cost
    decrease (μ/10), reject and retry with μ·10 otherwise.  Damping
    exhaustion with zero accepted steps overall is an error; after any
    progress it is a recorded stop reason.
    """
    theta = np.asarray(theta0, dtype=np.float64).copy()
    n = None

    def train_cost(th):
        e = residual_fn(th)
        nonlocal n
        n = e.size
        return float(e @ e) / (2 * n)

    val_fn = val_cost_fn if val_cost_fn is not None else train_cost

    cur_cost = train_cost(theta)
    train_costs = [cur_cost]
    val_costs = [float(val_fn(theta))]
    stopper = _Stopper(theta, val_costs[0], cfg.patience)
    mu = cfg.mu0
    accepted = 0
    stop_reason = StopReason.MAX_EPOCHS

    for epoch in range(1, cfg.max_epochs + 1):
        e = residual_fn(theta)
        jac = jacobian_fn(theta)
        g = jac.T @ e
        if np.linalg.norm(g / e.size) < GRAD_EPS:
            stop_reason = StopReason.GRADIENT_VANISHED
            break
        jtj = jac.T @ jac
        eye = np.eye(theta.size)
        stepped = False
        while True:
            try:
                delta = np.linalg.solve(jtj + mu * eye, -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                candidate = theta + delta
                new_cost = train_cost(candidate)
                if np.isfinite(new_cost) and new_cost < cur_cost:
                    theta = candidate
                    cur_cost = new_cost
                    # Floor keeps μ from underflowing to an unsolvable zero.
                    mu = max(mu / cfg.mu_factor, 1e-300)
                    accepted += 1
                    stepped = True
                    break
            mu *= cfg.mu_factor
            if mu > cfg.mu_max:
                break
        if not stepped:
            if accepted == 0:
                raise DampingExhausted(
                    f"no acceptable LM step before mu exceeded {cfg.mu_max:g}"
                )
            stop_reason = StopReason.DAMPING_EXHAUSTED
            break
        train_costs.append(cur_cost)
        val_costs.append(float(val_fn(theta)))
        if stopper.update(epoch, theta, val_costs[-1]):
            stop_reason = StopReason.VALIDATION_PATIENCE
            break

    report = TrainReport(
        trainer=TrainerId.LM,
        stop_reason=stop_reason,
        best_epoch=stopper.best_epoch,
        accepted_steps=accepted,
        train_costs=tuple(train_costs),
        val_costs=tuple(val_costs),
    )
    return stopper.best_theta, report


def scg_minimize(
    cost_fn: Callable[[np.ndarray], float],
    grad_fn: Callable[[np.ndarray], np.ndarray],
    theta0: np.ndarray,
    cfg: TrainConfig,
    val_cost_fn: Callable[[np.ndarray], float] | None = None,
) -> tuple[np.ndarray, TrainReport]:
    """Møller's scaled conjugate gradient, one iteration per epoch.

    Uses cfg.scg_sigma for the finite Hessian-vector step and
    cfg.scg_lambda0 as the initial scale.  A vanished gradient at the
    start is an error; vanishing mid-run stops gracefully.
    """
    theta = np.asarray(theta0, dtype=np.float64).copy()
    val_fn = val_cost_fn if val_cost_fn is not None else cost_fn

    cur_cost = float(cost_fn(theta))
    r = -np.asarray(grad_fn(theta), dtype=np.float64)
    if np.linalg.norm(r) < GRAD_EPS:
        raise GradientVanished("gradient vanished at the starting parameters")

    train_costs = [cur_cost]
    val_costs = [float(val_fn(theta))]
    stopper = _Stopper(theta, val_costs[0], cfg.patience)
    p = r.copy()
    lam = cfg.scg_lambda0
    lam_bar = 0.0
    success = True
    delta = 0.0
    accepted = 0
    n = theta.size
    stop_reason = StopReason.MAX_EPOCHS

    for epoch in range(1, cfg.max_epochs + 1):
        p_norm2 = float(p @ p)
        if p_norm2 == 0.0 or float(p @ r) == 0.0:
            # Degenerate direction: restart along steepest descent.
            p = r.copy()
            p_norm2 = float(p @ p)
            success = True
        if success:
            sigma_k = cfg.scg_sigma / np.sqrt(p_norm2)
            s = (np.asarray(grad_fn(theta + sigma_k * p)) - (-r)) / sigma_k
            delta = float(p @ s)
        delta += (lam - lam_bar) * p_norm2
        if delta <= 0:  # make the Hessian estimate positive definite
            lam_bar = 2.0 * (lam - delta / p_norm2)
            delta = -delta + lam * p_norm2
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta
        candidate = theta + alpha * p
        new_cost = float(cost_fn(candidate))
        if np.isfinite(new_cost):
            comparison = 2.0 * delta * (cur_cost - new_cost) / (mu * mu)
        else:
            comparison = -1.0
        if comparison >= 0:
            theta = candidate
            cur_cost = new_cost
            r_new = -np.asarray(grad_fn(theta), dtype=np.float64)
            lam_bar = 0.0
            success = True
            accepted += 1
            if epoch % n == 0:
                p = r_new.copy()  # periodic restart along steepest descent
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam = 0.25 * lam
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam = lam + delta * (1.0 - comparison) / p_norm2
        train_costs.append(cur_cost)
        val_costs.append(float(val_fn(theta)))
        if stopper.update(epoch, theta, val_costs[-1]):
            stop_reason = StopReason.VALIDATION_PATIENCE
            break
        if np.linalg.norm(r) < GRAD_EPS:
            stop_reason = StopReason.GRADIENT_VANISHED
            break
        if not np.isfinite(lam) or lam > 1e100:
            stop_reason = StopReason.DAMPING_EXHAUSTED
            break

    report = TrainReport(
        trainer=TrainerId.SCG,
        stop_reason=stop_reason,
        best_epoch=stopper.best_epoch,
        accepted_steps=accepted,
        train_costs=tuple(train_costs),
        val_costs=tuple(val_costs),
    )
    return stopper.best_theta, report


# ---------------------------------------------------------------------------
# MLP-facing trainers


def _check_training_data(model, x_train, y_train, x_val, y_val):
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise EmptyInput("training and validation splits must be non-empty")
    _check_batch(model, x_train, y_train)
    _check_batch(model, x_val, y_val)
    return x_train, y_train, x_val, y_val


def train_lm(
    model: MlpModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
) -> tuple[MlpModel, TrainReport]:
    """Levenberg–Marquardt training with validation early stopping."""
    x_train, y_train, x_val, y_val = _check_training_data(
        model, x_train, y_train, x_val, y_val
    )
    dim, hidden = model.input_dim, model.hidden_units

    def residual_fn(theta):
        return predict_batch(unpack_params(theta, dim, hidden), x_train) - y_train

    def jacobian_fn(theta):
        return residual_jacobian(unpack_params(theta, dim, hidden), x_train)

    def val_cost_fn(theta):
        return cost(unpack_params(theta, dim, hidden), x_val, y_val)

    theta, report = lm_minimize(
        residual_fn, jacobian_fn, pack_params(model), cfg, val_cost_fn
    )
    return unpack_params(theta, dim, hidden), report


def train_scg(
    model: MlpModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
) -> tuple[MlpModel, TrainReport]:
    """Scaled-conjugate-gradient training with validation early stopping."""
    x_train, y_train, x_val, y_val = _check_training_data(
        model, x_train, y_train, x_val, y_val
    )
    dim, hidden = model.input_dim, model.hidden_units

    def cost_fn(theta):
        return cost(unpack_params(theta, dim, hidden), x_train, y_train)

    def grad_fn(theta):
        return pack_params(gradient(unpack_params(theta, dim, hidden), x_train, y_train))

    def val_cost_fn(theta):
        return cost(unpack_params(theta, dim, hidden), x_val, y_val)

    theta, report = scg_minimize(
        cost_fn, grad_fn, pack_params(model), cfg, val_cost_fn
    )
    return unpack_params(theta, dim, hidden), report


# ---------------------------------------------------------------------------
# serialization (parameter block used inside the predictor bundle)


def mlp_lines(model: MlpModel) -> list[str]:
    lines = [f"dims {model.input_dim} {model.hidden_units}"]
    for h in range(model.hidden_units):
        lines.append(f"w1 {h} " + fmt_floats(model.w1[h]))
    lines.append("b1 " + fmt_floats(model.b1))
    lines.append("w2 " + fmt_floats(model.w2.ravel()))
    lines.append("b2 " + fmt_float(model.b2))
    return lines


def mlp_from_lines(lines: list[str]) -> MlpModel:
    if not lines or not lines[0].startswith("dims "):
        raise CorruptModel("malformed network block: missing dims line")
    try:
        dim, hidden = (int(t) for t in lines[0].split()[1:])
        if len(lines) != hidden + 4:
            raise CorruptModel("malformed network block: wrong line count")
        w1 = np.empty((hidden, dim))
        for h in range(hidden):
            parts = lines[1 + h].split()
            if parts[:2] != ["w1", str(h)] or len(parts) != 2 + dim:
                raise CorruptModel(f"malformed network block: w1 row {h}")
            w1[h] = [float(t) for t in parts[2:]]
        b1 = np.array([float(t) for t in lines[hidden + 1].split()[1:]])
        w2 = np.array([float(t) for t in lines[hidden + 2].split()[1:]])
        b2 = float(lines[hidden + 3].split()[1])
    except (ValueError, IndexError) as exc:
        raise CorruptModel(f"malformed network block: {exc}") from None
    if b1.size != hidden or w2.size != hidden:
        raise CorruptModel("malformed network block: bias/output size mismatch")
    return MlpModel(w1=w1, b1=b1, w2=w2[np.newaxis, :], b2=b2)
