"""Finite-sum objectives with analytic stochastic gradients.

An objective is the average of per-sample losses; gradients over an index
batch are averages of per-sample gradients, so the expectation over a
uniformly sampled index equals the full gradient. Parameters live in one
flat float64 vector, optionally partitioned into per-layer groups.

The MLP is piecewise linear (ReLU hidden units, linear output) with a
least-squares loss, and backpropagation is written out explicitly so the
gradient path stays independent of any autodiff framework. The finite
difference oracle below is the cross-check for it.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from .rng import SeededRng


class FiniteSumObjective(Protocol):
    """Average-of-samples loss with analytic minibatch gradients."""

    n: int
    d: int
    layer_partition: list[tuple[int, int]]

    def value(self, x: np.ndarray, batch: Sequence[int]) -> float: ...

    def grad(self, x: np.ndarray, batch: Sequence[int]) -> np.ndarray: ...

    def value_and_grad(
        self, x: np.ndarray, batch: Sequence[int]
    ) -> tuple[float, np.ndarray]: ...

    def full_value(self, x: np.ndarray) -> float: ...


def _check_batch(batch: Sequence[int], n: int) -> np.ndarray:
    idx = np.asarray(batch, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty index batch")
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"batch indices must lie in [0, {n})")
    return idx


class QuadraticProblem:
    """Per-sample loss 0.5 * (x - c_i)^T diag(D) (x - c_i).

    The full gradient vanishes at the mean of the centers, and the exact
    Lipschitz constant of the full gradient is max(D). Used as the test
    problem with analytically known smoothness.
    """

    def __init__(self, diag: np.ndarray, centers: np.ndarray):
        diag = np.asarray(diag, dtype=np.float64)
        centers = np.asarray(centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[1] != diag.shape[0]:
            raise ValueError("centers must be (n, d) matching diag length")
        if np.any(diag <= 0.0):
            raise ValueError("curvatures must be positive")
        self.diag = diag
        self.centers = centers
        self.n = centers.shape[0]
        self.d = diag.shape[0]
        self.layer_partition = [(0, self.d)]
        self.x_star = centers.mean(axis=0)

    @classmethod
    def isotropic(cls, curvature: float, dim: int, centers: np.ndarray) -> "QuadraticProblem":
        return cls(np.full(dim, float(curvature)), centers)

    @classmethod
    def random(
        cls,
        dim: int,
        n_samples: int,
        curvature: float | Sequence[float],
        center_scale: float,
        rng: SeededRng,
    ) -> "QuadraticProblem":
        diag = (
            np.full(dim, float(curvature))
            if np.isscalar(curvature)
            else np.asarray(curvature, dtype=np.float64)
        )
        centers = rng.uniform_array(n_samples * dim, -center_scale, center_scale)
        return cls(diag, centers.reshape(n_samples, dim))

    def value(self, x, batch) -> float:
        idx = _check_batch(batch, self.n)
        diff = x[None, :] - self.centers[idx]
        return float(0.5 * np.mean(np.sum(diff * diff * self.diag[None, :], axis=1)))

    def grad(self, x, batch) -> np.ndarray:
        idx = _check_batch(batch, self.n)
        return self.diag * (x - self.centers[idx].mean(axis=0))

    def value_and_grad(self, x, batch):
        return self.value(x, batch), self.grad(x, batch)

    def full_value(self, x) -> float:
        return self.value(x, np.arange(self.n))

    def full_grad(self, x) -> np.ndarray:
        return self.diag * (x - self.centers.mean(axis=0))


def exact_smoothness(problem: QuadraticProblem) -> float:
    """Lipschitz constant of the quadratic's full gradient: max curvature."""
    return float(problem.diag.max())


def layer_layout(layer_sizes: Sequence[int]) -> tuple[list[tuple[int, int, int, int]], int]:
    """Flat-vector offsets for (weights, biases) of each layer.

    Returns ([(w_start, w_end, b_start, b_end), ...], total_dim). Weights
    of layer l are stored row-major with shape (n_in, n_out), followed by
    the n_out biases.
    """
    spans = []
    pos = 0
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w_start = pos
        pos += n_in * n_out
        b_start = pos
        pos += n_out
        spans.append((w_start, b_start, b_start, pos))
    return spans, pos


class MlpLsrProblem:
    """Fully connected ReLU network with a least-squares loss.

    Per-sample loss: 0.5 * ||net(u_i) - t_i||^2 + 0.5 * l2 * sum ||W_l||^2.
    The regularizer touches weights only, never biases. The ReLU
    subgradient at exactly zero is taken as zero, which matters when
    consecutive gradients are differenced across a kink.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        inputs: np.ndarray,
        targets: np.ndarray,
        l2: float = 0.0,
    ):
        inputs = np.asarray(inputs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if inputs.shape[1] != layer_sizes[0]:
            raise ValueError("input width does not match first layer size")
        if targets.shape != (inputs.shape[0], layer_sizes[-1]):
            raise ValueError("targets must be (n, output size)")
        if l2 < 0.0:
            raise ValueError("l2 coefficient must be non-negative")
        self.layer_sizes = list(layer_sizes)
        self.inputs = inputs
        self.targets = targets
        self.l2 = float(l2)
        self.n = inputs.shape[0]
        self._spans, self.d = layer_layout(layer_sizes)
        # one parameter group per layer: its weights plus its biases
        self.layer_partition = [(w0, b1) for (w0, _, _, b1) in self._spans]

    def unpack(self, x: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of the flat vector as per-layer (W, b); no copies."""
        out = []
        for (w0, w1, b0, b1), n_in, n_out in zip(
            self._spans, self.layer_sizes[:-1], self.layer_sizes[1:]
        ):
            out.append((x[w0:w1].reshape(n_in, n_out), x[b0:b1]))
        return out

    def _forward(self, x: np.ndarray, idx: np.ndarray):
        layers = self.unpack(x)
        a = self.inputs[idx]
        activations = [a]
        last = len(layers) - 1
        for l, (w, b) in enumerate(layers):
            z = a @ w + b
            a = np.maximum(z, 0.0) if l < last else z
            activations.append(a)
        return activations

    def _reg_value(self, x: np.ndarray) -> float:
        if self.l2 == 0.0:
            return 0.0
        return 0.5 * self.l2 * sum(float(np.sum(w * w)) for w, _ in self.unpack(x))

    def data_value(self, x, batch) -> float:
        """Mean squared-error term alone, without the regularizer."""
        idx = _check_batch(batch, self.n)
        err = self._forward(x, idx)[-1] - self.targets[idx]
        return float(0.5 * np.sum(err * err) / idx.size)

    def value(self, x, batch) -> float:
        return self.data_value(x, batch) + self._reg_value(x)

    def value_and_grad(self, x, batch):
        idx = _check_batch(batch, self.n)
        activations = self._forward(x, idx)
        err = activations[-1] - self.targets[idx]
        loss = float(0.5 * np.sum(err * err) / idx.size) + self._reg_value(x)

        layers = self.unpack(x)
        g = np.empty_like(x)
        g_layers = self.unpack(g)
        delta = err / idx.size
        for l in range(len(layers) - 1, -1, -1):
            w, _ = layers[l]
            gw, gb = g_layers[l]
            np.matmul(activations[l].T, delta, out=gw)
            if self.l2 != 0.0:
                gw += self.l2 * w
            np.sum(delta, axis=0, out=gb)
            if l > 0:
                # hidden activation a = max(z, 0); mask by a > 0 (zero at kink)
                delta = (delta @ w.T) * (activations[l] > 0.0)
        return loss, g

    def grad(self, x, batch) -> np.ndarray:
        return self.value_and_grad(x, batch)[1]

    def full_value(self, x) -> float:
        return self.value(x, np.arange(self.n))


def minibatch_grad(obj: FiniteSumObjective, x: np.ndarray, batch: Sequence[int]) -> np.ndarray:
    """Average of per-sample gradients over the batch."""
    return obj.grad(x, batch)


def glorot_init(layer_sizes: Sequence[int], rng: SeededRng) -> np.ndarray:
    """Flat parameter vector with per-layer uniform fan-balanced weights.

    Weights of a layer with fan (n_in, n_out) are drawn uniformly from
    [-sqrt(6/(n_in+n_out)), +sqrt(6/(n_in+n_out))]; biases start at zero.
    """
    spans, dim = layer_layout(layer_sizes)
    x = np.zeros(dim)
    for (w0, w1, _, _), n_in, n_out in zip(spans, layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        x[w0:w1] = rng.uniform_array(n_in * n_out, -bound, bound)
    return x


def finite_diff_grad(
    obj: FiniteSumObjective,
    x: np.ndarray,
    batch: Sequence[int],
    h: float = 1e-6,
    coords: Sequence[int] | None = None,
) -> np.ndarray:
    """Central-difference gradient oracle, independent of any backprop path.

    The step for coordinate i is ``h * max(1, |x_i|)``. ``coords`` limits
    the check to a subset of coordinates (essential for large parameter
    vectors); the result then has one entry per requested coordinate.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    idx = np.arange(x.size) if coords is None else np.asarray(coords, dtype=np.int64)
    out = np.empty(idx.size)
    xp = x.copy()
    for k, i in enumerate(idx):
        hi = h * max(1.0, abs(x[i]))
        xp[i] = x[i] + hi
        f_plus = obj.value(xp, batch)
        xp[i] = x[i] - hi
        f_minus = obj.value(xp, batch)
        xp[i] = x[i]
        out[k] = (f_plus - f_minus) / (2.0 * hi)
    return out


def one_sided_diffs(
    obj: FiniteSumObjective,
    x: np.ndarray,
    batch: Sequence[int],
    coord: int,
    h: float = 1e-6,
) -> tuple[float, float]:
    """Forward and backward difference quotients for one coordinate.

    At a ReLU kink the two disagree; returning both lets callers report
    the discrepancy instead of failing a central-difference check.
    """
    hi = h * max(1.0, abs(x[coord]))
    xp = x.copy()
    f0 = obj.value(x, batch)
    xp[coord] = x[coord] + hi
    fwd = (obj.value(xp, batch) - f0) / hi
    xp[coord] = x[coord] - hi
    bwd = (f0 - obj.value(xp, batch)) / hi
    return fwd, bwd
