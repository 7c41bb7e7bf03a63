"""Tensor-product Gauss-Legendre rules on boxes under the normalized measure."""

import dataclasses

import numpy as np

from .errors import ConstructionError


@dataclasses.dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Quadrature rule for the probability measure dx / |box|.

    Attributes
    ----------
    nodes : ndarray, shape (P, d)
    weights : ndarray, shape (P,)
        Positive, summing to 1; the measure normalizer is already folded in.
    order : tuple of int
        Gauss-Legendre points per dimension.
    box : tuple of (lo, hi)
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: tuple
    box: tuple

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def dimension(self):
        return len(self.box)

    def integrate(self, values):
        """Integrate sampled values; the last axis runs over the nodes."""
        return np.asarray(values) @ self.weights

    def doubled(self):
        """The rule with twice as many points per dimension."""
        return gauss_legendre_box(self.box, tuple(2 * n for n in self.order))


def gauss_legendre_box(box, order):
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if np.isscalar(order):
        order = (int(order),) * len(box)
    order = tuple(int(n) for n in order)
    if len(order) != len(box):
        raise ConstructionError("order must give one entry per dimension")
    if any(n < 2 for n in order):
        raise ConstructionError(f"order_per_dim must be >= 2, got {order}")
    axes = []
    wts = []
    for (lo, hi), n in zip(box, order):
        t, w = np.polynomial.legendre.leggauss(n)
        # weights of dx/(hi-lo) on [lo, hi]
        axes.append(lo + 0.5 * (hi - lo) * (t + 1.0))
        wts.append(0.5 * w)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*wts, indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=0), axis=0)
    return QuadratureRule(nodes=nodes, weights=weights, order=order, box=box)
