"""Matrix-free linear operators on weighted Euclidean spaces.

Every operator declares the spaces it maps between.  A space carries an
inner product ``<u, v> = cell * sum(G u * v)`` where ``G`` is either a
pointwise positive weight or a symmetric positive semi-definite operator
(used for the filtered data norm).  ``adjoint`` is always taken with
respect to these inner products, which is what the reconstruction
algorithms rely on.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ShapeError

__all__ = [
    "VectorSpace",
    "ProductSpace",
    "LinearOperator",
    "DotTestReport",
    "identity",
    "matrix_operator",
    "diagonal",
    "compose",
    "stack",
    "dot_test",
    "power_iter_norm",
    "make_rng",
]

_TINY = np.finfo(float).tiny


def make_rng(seed):
    """Counter-based generator used for every stochastic utility."""
    return np.random.Generator(np.random.Philox(int(seed)))


class VectorSpace:
    """Real arrays of a fixed shape with a weighted inner product.

    Parameters
    ----------
    shape : tuple of int
    weight : ndarray, optional
        Strictly positive pointwise weight of the same shape.
    gram : callable, optional
        Symmetric positive semi-definite operator used instead of a
        pointwise weight.  Such spaces have no ``gram_inv``.
    cell : float
        Cell measure multiplying every inner product.
    """

    def __init__(self, shape, weight=None, gram=None, cell=1.0, name=""):
        self.shape = tuple(int(s) for s in np.atleast_1d(shape))
        if weight is not None and gram is not None:
            raise ValueError("give either a pointwise weight or a gram operator")
        if weight is not None:
            weight = np.asarray(weight, dtype=float)
            if weight.shape != self.shape:
                raise ShapeError(f"weight shape {weight.shape} != space shape {self.shape}")
            if not np.all(weight > 0):
                raise ValueError("weights must be strictly positive")
            weight = weight.copy()
            weight.setflags(write=False)
        if not cell > 0:
            raise ValueError("cell measure must be positive")
        self.weight = weight
        self._gram = gram
        self.cell = float(cell)
        self.name = name

    def __repr__(self):
        kind = "uniform"
        if self.weight is not None:
            kind = "weighted"
        elif self._gram is not None:
            kind = "gram"
        return f"VectorSpace({self.shape}, {kind}{', ' + self.name if self.name else ''})"

    @property
    def size(self):
        return int(np.prod(self.shape))

    def check(self, x, what="vector"):
        if np.shape(x) != self.shape:
            raise ShapeError(f"{what} has shape {np.shape(x)}, expected {self.shape}")

    def compatible(self, other):
        if not isinstance(other, VectorSpace) or self.shape != other.shape:
            return False
        if self._gram is not other._gram:
            return False
        if (self.weight is None) != (other.weight is None):
            return False
        if self.weight is not None and not (
            self.weight is other.weight or np.array_equal(self.weight, other.weight)
        ):
            return False
        return self.cell == other.cell

    def gram(self, u):
        if self.weight is not None:
            return self.weight * u
        if self._gram is not None:
            return self._gram(u)
        return u

    def gram_inv(self, u):
        if self.weight is not None:
            return u / self.weight
        if self._gram is not None:
            raise NotImplementedError("gram operator spaces have no inverse gram")
        return u

    def inner(self, u, v):
        return self.cell * float(np.vdot(self.gram(u), v))

    def norm(self, u):
        return np.sqrt(max(self.inner(u, u), 0.0))

    def zeros(self):
        return np.zeros(self.shape)

    def random(self, rng):
        return rng.standard_normal(self.shape)


class ProductSpace:
    """Cartesian product of spaces; elements are tuples of arrays."""

    def __init__(self, *spaces):
        self.spaces = tuple(spaces)
        self.shape = tuple(s.shape for s in self.spaces)

    def check(self, x, what="vector"):
        if len(x) != len(self.spaces):
            raise ShapeError(f"{what} has {len(x)} components, expected {len(self.spaces)}")
        for xi, s in zip(x, self.spaces):
            s.check(xi, what)

    def compatible(self, other):
        return isinstance(other, ProductSpace) and len(other.spaces) == len(self.spaces) and all(
            a.compatible(b) for a, b in zip(self.spaces, other.spaces)
        )

    def gram(self, u):
        return tuple(s.gram(x) for s, x in zip(self.spaces, u))

    def gram_inv(self, u):
        return tuple(s.gram_inv(x) for s, x in zip(self.spaces, u))

    def inner(self, u, v):
        return sum(s.inner(a, b) for s, a, b in zip(self.spaces, u, v))

    def norm(self, u):
        return np.sqrt(max(self.inner(u, u), 0.0))

    def zeros(self):
        return tuple(s.zeros() for s in self.spaces)

    def random(self, rng):
        return tuple(s.random(rng) for s in self.spaces)


class LinearOperator:
    """A linear map given by a forward and an adjoint callable.

    ``adjoint`` must be the adjoint with respect to the inner products of
    ``domain`` and ``range``.  Inputs and outputs are shape checked on
    every call.
    """

    def __init__(self, domain, range, apply, adjoint, name=""):
        self.domain = domain
        self.range = range
        self._apply = apply
        self._adjoint = adjoint
        self.name = name or "A"

    def __repr__(self):
        return f"LinearOperator({self.name}: {self.domain!r} -> {self.range!r})"

    def apply(self, x):
        self.domain.check(x, f"input of {self.name}")
        y = self._apply(x)
        self.range.check(y, f"output of {self.name}")
        return y

    __call__ = apply

    def adjoint(self, y):
        if self._adjoint is None:
            raise NotImplementedError(f"{self.name} has no adjoint")
        self.range.check(y, f"input of {self.name}*")
        x = self._adjoint(y)
        self.domain.check(x, f"output of {self.name}*")
        return x

    @property
    def H(self):
        return LinearOperator(self.range, self.domain, self._adjoint, self._apply, self.name + "*")

    def __matmul__(self, other):
        return compose(self, other)

    def reweighted(self, domain=None, range=None):
        """Same map, adjoint recomputed for new inner products on the same shapes."""
        new_dom = self.domain if domain is None else domain
        new_rng = self.range if range is None else range
        if new_dom.shape != self.domain.shape or new_rng.shape != self.range.shape:
            raise ShapeError("reweighting cannot change shapes")
        old_dom, old_rng, adj = self.domain, self.range, self._adjoint

        def adjoint(y):
            z = old_rng.gram_inv(new_rng.gram(y)) if new_rng is not old_rng else y
            x = adj(z)
            if new_dom is not old_dom:
                x = new_dom.gram_inv(old_dom.gram(x))
            return x

        return LinearOperator(new_dom, new_rng, self._apply, adjoint, self.name)


def identity(space):
    return LinearOperator(space, space, lambda x: x.copy(), lambda y: y.copy(), "I")


def matrix_operator(matrix, name="M"):
    """Dense matrix acting on vectors, uniform inner products."""
    m = np.asarray(matrix, dtype=float)
    return LinearOperator(
        VectorSpace(m.shape[1]), VectorSpace(m.shape[0]), lambda x: m @ x, lambda y: m.T @ y, name
    )


def diagonal(values, space=None, name="diag"):
    d = np.asarray(values, dtype=float)
    space = space or VectorSpace(d.shape)
    if space._gram is not None:
        raise ValueError("diagonal operators need a pointwise-weighted space")
    # pointwise weights commute with a diagonal map, so it is self-adjoint
    return LinearOperator(space, space, lambda x: d * x, lambda y: d * y, name)


def compose(outer, *inners):
    """``outer ∘ inner_1 ∘ ... ∘ inner_k``; spaces must match at every junction."""
    ops = (outer,) + inners
    for left, right in zip(ops[:-1], ops[1:]):
        if left.domain.shape != right.range.shape:
            raise ShapeError(
                f"cannot compose {left.name} (domain {left.domain.shape}) with "
                f"{right.name} (range {right.range.shape})"
            )
        if not left.domain.compatible(right.range):
            raise ShapeError(f"inner products differ between {right.name} and {left.name}")

    def apply(x):
        for op in reversed(ops):
            x = op.apply(x)
        return x

    def adjoint(y):
        for op in ops:
            y = op.adjoint(y)
        return y

    name = "∘".join(op.name for op in ops)
    return LinearOperator(ops[-1].domain, ops[0].range, apply, adjoint, name)


def stack(*ops):
    """Vertical stack ``x -> (A_1 x, ..., A_k x)`` into a product space."""
    dom = ops[0].domain
    for op in ops[1:]:
        if not op.domain.compatible(dom):
            raise ShapeError("stacked operators need a common domain")
    rng = ProductSpace(*(op.range for op in ops))

    def apply(x):
        return tuple(op.apply(x) for op in ops)

    def adjoint(y):
        out = ops[0].adjoint(y[0])
        for op, yi in zip(ops[1:], y[1:]):
            out = out + op.adjoint(yi)
        return out

    return LinearOperator(dom, rng, apply, adjoint, "(" + ";".join(op.name for op in ops) + ")")


@dataclass
class DotTestReport:
    max_discrepancy: float
    discrepancies: list = field(default_factory=list)

    def passed(self, tol):
        return self.max_discrepancy <= tol


def dot_test(op, trials=10, seed=0):
    """Check ``<A u, v> = <u, A* v>`` on seeded standard normal vectors.

    Returns the maximum over trials of
    ``|<Au, v> - <u, A*v>| / (|Au| |v| + tiny)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = make_rng(seed)
    out = []
    for _ in range(trials):
        u = op.domain.random(rng)
        v = op.range.random(rng)
        au = op.apply(u)
        lhs = op.range.inner(au, v)
        rhs = op.domain.inner(u, op.adjoint(v))
        scale = op.range.norm(au) * op.range.norm(v)
        out.append(abs(lhs - rhs) / (scale + _TINY))
    return DotTestReport(max(out), out)


def power_iter_norm(op, iters=50, seed=0, return_history=False):
    """Estimate the operator norm by power iteration on ``A* A``."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = make_rng(seed)
    x = op.domain.random(rng)
    nx = op.domain.norm(x)
    x = _scale(x, 1.0 / nx)
    history = []
    est = 0.0
    for _ in range(iters):
        ax = op.apply(x)
        est = op.range.norm(ax)
        history.append(est)
        z = op.adjoint(ax)
        nz = op.domain.norm(z)
        if nz == 0.0:
            break
        x = _scale(z, 1.0 / nz)
    return (est, history) if return_history else est


def _scale(x, a):
    if isinstance(x, tuple):
        return tuple(a * xi for xi in x)
    return a * x
