"""Five-layer autoencoder with hand-written backprop and Adam."""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import NonFiniteLoss
from .base import BaseDetector

LEAKY_SLOPE = 0.01


def hidden_size(d: int, latent: int) -> int:
    return min(d - 1, math.ceil(2 * latent))


def layer_sizes(d: int, latent: int) -> list[int]:
    h = hidden_size(d, latent)
    return [d, h, latent, h, d]


class MLP:
    """Fully connected net whose parameters live in one flat buffer.

    LeakyReLU follows every layer except the last, which is linear.
    """

    def __init__(self, sizes: list[int]):
        self.sizes = sizes
        shapes = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        self.shapes = shapes
        self.flat = np.zeros(sum(int(np.prod(s)) for s in shapes))
        self.params = self._views(self.flat)

    def _views(self, buf):
        out, pos = [], 0
        for s in self.shapes:
            size = int(np.prod(s))
            out.append(buf[pos:pos + size].reshape(s))
            pos += size
        return out

    def init_he_uniform(self, rng: np.random.Generator) -> None:
        for i in range(0, len(self.params), 2):
            W, b = self.params[i], self.params[i + 1]
            limit = math.sqrt(6.0 / W.shape[0])
            W[...] = rng.uniform(-limit, limit, size=W.shape)
            b[...] = 0.0

    def forward(self, X, keep=False):
        acts, pre = [X], []
        h = X
        n_layers = len(self.params) // 2
        for li in range(n_layers):
            z = h @ self.params[2 * li] + self.params[2 * li + 1]
            pre.append(z)
            h = z if li == n_layers - 1 else np.where(z > 0, z, LEAKY_SLOPE * z)
            acts.append(h)
        return (h, acts, pre) if keep else h

    def loss_and_grad(self, X):
        """Mean squared reconstruction error over all entries and its
        gradient as a flat vector aligned with :attr:`flat`."""
        out, acts, pre = self.forward(X, keep=True)
        diff = out - X
        loss = float((diff * diff).mean())
        grad = np.empty_like(self.flat)
        gviews = self._views(grad)
        delta = 2.0 * diff / diff.size
        n_layers = len(self.params) // 2
        for li in range(n_layers - 1, -1, -1):
            if li != n_layers - 1:
                delta = delta * np.where(pre[li] > 0, 1.0, LEAKY_SLOPE)
            gviews[2 * li][...] = acts[li].T @ delta
            gviews[2 * li + 1][...] = delta.sum(axis=0)
            if li:
                delta = delta @ self.params[2 * li].T
        return loss, grad

    def loss(self, X) -> float:
        diff = self.forward(X) - X
        return float((diff * diff).mean())


class Adam:
    def __init__(self, size, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr, (self.b1, self.b2), self.eps = lr, betas, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.b1
        self.m += (1 - self.b1) * grad
        self.v *= self.b2
        self.v += (1 - self.b2) * grad * grad
        m_hat = self.m / (1 - self.b1 ** self.t)
        v_hat = self.v / (1 - self.b2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Autoencoder(BaseDetector):
    """Reconstruction-error scoring with a ``d-h-latent-h-d`` network.

    Parameters
    ----------
    latent_dim : int, optional
        Bottleneck width; defaults to ``ceil(d / 2)``. The hidden layers
        have ``min(d - 1, ceil(2 * latent_dim))`` units.
    epochs : int, default=100
    batch_size : int, default=32
    lr : float, default=1e-3
        Adam step size (betas 0.9, 0.999).
    random_state : int, default=0
        Seeds the He-uniform initialization and the per-epoch shuffling.
    """

    family = "AE"

    def __init__(self, latent_dim=None, epochs=100, batch_size=32, lr=1e-3, random_state=0):
        self.latent_dim = latent_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        n, d = X.shape
        if d < 2:
            raise ValueError("the autoencoder needs at least two features")
        latent = self.latent_dim if self.latent_dim is not None else math.ceil(d / 2)
        if not 1 <= latent <= d - 1:
            raise ValueError(f"latent_dim must lie in [1, {d - 1}], got {latent}")
        latent = int(latent)
        rng = np.random.default_rng(self.random_state)
        net = MLP(layer_sizes(d, latent))
        net.init_he_uniform(rng)
        opt = Adam(net.flat.size, lr=self.lr)
        losses = [net.loss(X)]
        # divergence surfaces as NonFiniteLoss below, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.epochs):
                perm = rng.permutation(n)
                for start in range(0, n, self.batch_size):
                    _, grad = net.loss_and_grad(X[perm[start:start + self.batch_size]])
                    opt.step(net.flat, grad)
                loss = net.loss(X)
                if not math.isfinite(loss):
                    raise NonFiniteLoss(f"autoencoder loss became {loss} at epoch {epoch + 1}")
                losses.append(loss)
        self.net_ = net
        self.latent_dim_ = latent
        self.loss_history_ = losses
        return self

    @property
    def hyper_(self):
        return self.latent_dim_

    def reconstruct(self, X) -> np.ndarray:
        X = self._validate_score(X)
        return self.net_.forward(X)

    def score_samples(self, X) -> np.ndarray:
        X = self._validate_score(X)
        diff = X - self.net_.forward(X)
        return -(diff * diff).sum(axis=1)

    def _get_state(self):
        return {"sizes": self.net_.sizes, "flat": self.net_.flat}

    def _set_state(self, state):
        net = MLP([int(s) for s in state["sizes"]])
        net.flat[...] = np.asarray(state["flat"], dtype=float)
        self.net_ = net
        self.latent_dim_ = net.sizes[2]
        self.n_features_in_ = net.sizes[0]
