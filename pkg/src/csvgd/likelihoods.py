"""Log-likelihoods and scores for the two experiment targets.

Both target classes expose the same small surface the engine consumes:
``score_and_mse`` returning (flat score vector, scalar fit error), plus the
individual pieces.  MvnTarget works on raw parameter vectors; RegressionTarget
works on a LayeredNet rebuilt from the particle by the engine.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import network
from .errors import ShapeError

__all__ = [
    "MvnTarget",
    "Dataset",
    "RegressionTarget",
    "DirectNetModel",
    "mvn_score",
    "save_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class MvnTarget:
    """Multivariate normal log-likelihood with mean and precision matrix."""

    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        p = np.asarray(self.precision, dtype=float)
        if p.shape != (m.size, m.size):
            raise ShapeError(f"precision shape {p.shape} does not match mean size {m.size}")
        if not np.allclose(p, p.T, atol=1e-12):
            raise ShapeError("precision matrix must be symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "precision", p)

    def score(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self.mean.shape:
            raise ShapeError(f"theta shape {theta.shape} does not match mean {self.mean.shape}")
        return -self.precision @ (theta - self.mean)

    def log_likelihood(self, theta) -> float:
        d = np.asarray(theta, dtype=float) - self.mean
        return float(-0.5 * d @ self.precision @ d)

    def mse(self, theta) -> float:
        """Quadratic form (theta-mu)' P (theta-mu); the fit error the engine tracks."""
        return float(-2.0 * self.log_likelihood(theta))

    def score_and_mse(self, theta) -> tuple[np.ndarray, float]:
        return self.score(theta), self.mse(theta)

    def score_and_mse_batch(self, particles) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized scores/fit errors for particle rows."""
        D = np.atleast_2d(np.asarray(particles, dtype=float)) - self.mean
        return -D @ self.precision, np.einsum("ni,ij,nj->n", D, self.precision, D)


def mvn_score(target: MvnTarget, theta) -> np.ndarray:
    """-precision @ (theta - mean); vanishes at the mode."""
    return target.score(theta)


@dataclass(frozen=True)
class Dataset:
    """Input-output sample pairs plus noise metadata."""

    inputs: np.ndarray          # (n, d_in)
    outputs: np.ndarray         # (n, d_out)
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()
    noise_level: float = 0.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        Y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if len(X) != len(Y):
            raise ShapeError(f"{len(X)} inputs vs {len(Y)} outputs")
        if len(X) == 0:
            raise ShapeError("dataset must be non-empty")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", Y)
        if not self.input_names:
            object.__setattr__(self, "input_names",
                               tuple(f"x{i}" for i in range(X.shape[1])))
        if not self.output_names:
            object.__setattr__(self, "output_names",
                               tuple(f"y{i}" for i in range(Y.shape[1])))

    def __len__(self):
        return len(self.inputs)


def save_dataset(data: Dataset, path) -> None:
    """Delimited text, one row per sample: input columns then output columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.input_names) + list(data.output_names))
        for x, y in zip(data.inputs, data.outputs):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def load_dataset(path, n_inputs: int) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    vals = np.array([[float(v) for v in row] for row in body])
    return Dataset(
        inputs=vals[:, :n_inputs],
        outputs=vals[:, n_inputs:],
        input_names=tuple(header[:n_inputs]),
        output_names=tuple(header[n_inputs:]),
    )


class DirectNetModel:
    """Pushforward map that is just the network output itself."""

    def predict(self, net, X) -> np.ndarray:
        return network.forward_batch(net, X)

    def param_score(self, net, X, residuals) -> np.ndarray:
        """Flat gradient of sum_b residuals[b] . net(X[b]) w.r.t. parameters."""
        return network.grad_params_batch(net, X, residuals)


@dataclass(frozen=True)
class RegressionTarget:
    """Gaussian-noise regression of a model pushforward against a dataset.

    log-likelihood (up to theta-independent constants):
        -(1/(2 sigma^2)) * sum_i |y_i - yhat(x_i; theta)|^2
    """

    dataset: Dataset
    noise_var: float
    model: object = field(default_factory=DirectNetModel)

    def __post_init__(self):
        if self.noise_var <= 0.0:
            raise ShapeError(f"noise_var must be > 0, got {self.noise_var}")

    def residuals(self, net) -> np.ndarray:
        pred = self.model.predict(net, self.dataset.inputs)
        if pred.shape != self.dataset.outputs.shape:
            raise ShapeError(f"model output shape {pred.shape} does not match "
                             f"data {self.dataset.outputs.shape}")
        return self.dataset.outputs - pred

    def log_likelihood(self, net) -> float:
        r = self.residuals(net)
        return float(-np.sum(r * r) / (2.0 * self.noise_var))

    def mse(self, net) -> float:
        r = self.residuals(net)
        return float(np.mean(r * r))

    def score(self, net) -> np.ndarray:
        r = self.residuals(net)
        return self.model.param_score(net, self.dataset.inputs, r) / self.noise_var

    def score_and_mse(self, net) -> tuple[np.ndarray, float]:
        r = self.residuals(net)
        score = self.model.param_score(net, self.dataset.inputs, r) / self.noise_var
        return score, float(np.mean(r * r))
