"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps a float64 ndarray and remembers the operation that
produced it. Calling :func:`backward` on a scalar result walks the graph in
reverse topological order and accumulates gradients into every tensor
created with ``requires_grad=True``. Only the handful of operations the
model needs are provided; each backward rule is exact, so the whole graph
differentiates to machine precision (verified against central finite
differences in the test suite).
"""

import numpy as np
from scipy.special import expit


class Tensor:
    """Node in the computation graph.

    ``parents`` and ``backward_fn`` are set by the op that created the
    node; leaves have neither. ``backward_fn(grad)`` receives the gradient
    of the final scalar with respect to this node's output and must return
    one gradient array per parent (or None for parents without grad).
    """

    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _unbroadcast(grad, shape):
    """Reduce ``grad`` back to ``shape`` by summing broadcast dimensions."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor(a.data + b.data, (a, b), backward)


def sub(a, b):
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor(a.data - b.data, (a, b), backward)


def mul(a, b):
    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor(a.data * b.data, (a, b), backward)


def scale(a, c):
    """Multiply by a python float (no gradient for the scalar)."""

    def backward(g):
        return (g * c,)

    return Tensor(a.data * c, (a,), backward)


def _owned_reshape(arr, shape):
    # in-place shape change: same object, so the result still owns its data
    arr.shape = shape
    return arr


def matmul(a, b):
    # stacked @ 2-D parameter collapses to one large gemm instead of a
    # gemm per batch slice; that case dominates the model's runtime
    if b.data.ndim == 2 and a.data.ndim >= 2:
        m, k = b.data.shape
        out = _owned_reshape(a.data.reshape(-1, m) @ b.data, a.shape[:-1] + (k,))

        def backward(g):
            g2 = g.reshape(-1, k)
            ga = gb = None
            if a.requires_grad:
                ga = _owned_reshape(g2 @ b.data.T, a.shape)
            if b.requires_grad:
                gb = a.data.reshape(-1, m).T @ g2
            return ga, gb

        return Tensor(out, (a, b), backward)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return Tensor(np.matmul(a.data, b.data), (a, b), backward)


def relu(x):
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return Tensor(np.where(mask, x.data, 0.0), (x,), backward)


def sigmoid(x):
    s = expit(x.data)

    def backward(g):
        return (g * s * (1.0 - s),)

    return Tensor(s, (x,), backward)


def softmax(x):
    """Row-stochastic softmax over the last axis, max-shifted for stability."""
    s = x.data - x.data.max(axis=-1, keepdims=True)
    np.exp(s, out=s)
    s /= s.sum(axis=-1, keepdims=True)

    def backward(g):
        out = g - (g * s).sum(axis=-1, keepdims=True)
        out *= s
        return (out,)

    return Tensor(s, (x,), backward)


def layer_norm(x, gain, bias, eps=1e-6):
    """Normalize over the last axis to mean 0 / variance 1, then apply
    elementwise gain and bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    normed = centered * inv

    def backward(g):
        gn = g * gain.data
        gx = inv * (
            gn
            - gn.mean(axis=-1, keepdims=True)
            - normed * (gn * normed).mean(axis=-1, keepdims=True)
        )
        width = gain.data.shape[-1]
        ggain = (g * normed).reshape(-1, width).sum(axis=0)
        gbias = g.reshape(-1, width).sum(axis=0)
        return gx, ggain, gbias

    return Tensor(normed * gain.data + bias.data, (x, gain, bias), backward)


def normalized(x, eps=1e-6):
    """Layer norm without gain/bias; exposes the pre-affine statistics."""
    one = Tensor(np.ones(x.shape[-1]))
    zero = Tensor(np.zeros(x.shape[-1]))
    return layer_norm(x, one, zero, eps)


def reshape(x, shape):
    def backward(g):
        return (g.reshape(x.shape),)

    return Tensor(x.data.reshape(shape), (x,), backward)


def transpose(x, axes):
    inverse = np.argsort(axes)

    def backward(g):
        return (g.transpose(inverse),)

    return Tensor(x.data.transpose(axes), (x,), backward)


def split_heads(x, num_heads):
    """(B, L, H*dh) -> contiguous (B, H, L, dh); one copy each direction."""
    b, length, d = x.shape
    dh = d // num_heads
    out = np.ascontiguousarray(
        x.data.reshape(b, length, num_heads, dh).transpose(0, 2, 1, 3)
    )

    def backward(g):
        flat = np.ascontiguousarray(g.transpose(0, 2, 1, 3))
        return (_owned_reshape(flat, (b, length, d)),)

    return Tensor(out, (x,), backward)


def merge_heads(x):
    """(B, H, L, dh) -> contiguous (B, L, H*dh); inverse of split_heads."""
    b, num_heads, length, dh = x.shape
    out = _owned_reshape(
        np.ascontiguousarray(x.data.transpose(0, 2, 1, 3)),
        (b, length, num_heads * dh),
    )

    def backward(g):
        return (
            np.ascontiguousarray(
                g.reshape(b, length, num_heads, dh).transpose(0, 2, 1, 3)
            ),
        )

    return Tensor(out, (x,), backward)


def reduce_sum(x, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def backward(out, seed=None):
    """Accumulate gradients of ``out`` into every requires-grad leaf.

    ``out`` must be scalar unless an explicit seed gradient is given.
    """
    if seed is None:
        if out.data.ndim != 0:
            raise ValueError("backward() without a seed needs a scalar output")
        seed = np.ones_like(out.data)

    order = []
    visited = set()
    stack = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            stack.append((parent, False))

    out.grad = np.asarray(seed, dtype=np.float64)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        grads = node.backward_fn(node.grad)
        for parent, g in zip(node.parents, grads):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is not None:
                parent.grad += g
            elif g.base is None and g is not node.grad:
                # fresh array from the op: take ownership, no copy
                parent.grad = g
            else:
                # a view or the output grad itself may be aliased elsewhere
                parent.grad = np.array(g)


def numerical_gradient(f, array, step=1e-4):
    """Central-difference gradient of scalar ``f`` with respect to ``array``.

    Perturbs every entry in place, so it is exhaustive and O(2 * size)
    evaluations; intended for small test configurations.
    """
    grad = np.zeros_like(array)
    flat = array.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f()
        flat[i] = orig - step
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    """Max elementwise relative discrepancy with a small-magnitude floor."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
