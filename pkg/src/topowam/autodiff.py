"""A minimal reverse-mode automatic differentiation kernel over numpy arrays.

Each :class:`Tensor` records its parents and a closure that pushes the output
gradient back to them; :meth:`Tensor.backward` walks the graph in reverse
topological order.  Only the operations needed by the actor-critic network
and the PPO loss are provided.

Arithmetic follows the dtype of the inputs, so a graph built from
``np.longdouble`` parameters is evaluated in extended precision.
"""
import numpy as np


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        data = np.asarray(data)
        # keep any floating dtype (reductions return numpy scalars of the input dtype)
        self.data = data if data.dtype.kind == "f" else data.astype(float)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None
        self.name = name

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"

    @property
    def shape(self):
        return self.data.shape

    def numpy(self):
        return self.data

    # --- graph traversal -------------------------------------------------

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # --- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.data.shape, other.data.shape
        return Tensor(self.data + other.data, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, _parents=(self,), _backward=lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data

        def back(g):
            return _unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)

        return Tensor(x * y, _parents=(self, other), _backward=back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        out = x / y

        def back(g):
            return _unbroadcast(g / y, x.shape), _unbroadcast(-g * out / y, y.shape)

        return Tensor(out, _parents=(self, other), _backward=back)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __matmul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x @ y, _parents=(self, other), _backward=lambda g: (g @ y.T, x.T @ g))

    def __getitem__(self, idx):
        shape, dtype = self.data.shape, self.data.dtype

        def back(g):
            full = np.zeros(shape, dtype=np.result_type(dtype, g.dtype))
            np.add.at(full, idx, g)
            return (full,)

        return Tensor(self.data[idx], _parents=(self,), _backward=back)

    # --- reductions and reshaping --------------------------------------------

    def sum(self, axis=None, keepdims=False):
        shape = self.data.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _backward=back)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def reshape(self, *shape):
        old = self.data.shape
        return Tensor(self.data.reshape(*shape), _parents=(self,), _backward=lambda g: (g.reshape(old),))

    # --- elementwise functions ---------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * out,))

    def log(self):
        x = self.data
        return Tensor(np.log(x), _parents=(self,), _backward=lambda g: (g / x,))

    def square(self):
        x = self.data
        return Tensor(x * x, _parents=(self,), _backward=lambda g: (2.0 * g * x,))

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        out = _sigmoid(self.data)
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * out * (1.0 - out),))

    def relu(self):
        mask = self.data > 0
        return Tensor(np.where(mask, self.data, 0.0).astype(self.data.dtype), _parents=(self,),
                      _backward=lambda g: (g * mask,))

    def softplus(self):
        x = self.data
        out = np.logaddexp(0.0, x).astype(x.dtype)
        return Tensor(out, _parents=(self,), _backward=lambda g: (g * _sigmoid(x),))

    def clip(self, lo, hi):
        x = self.data
        mask = (x >= lo) & (x <= hi)
        return Tensor(np.clip(x, lo, hi), _parents=(self,), _backward=lambda g: (g * mask,))


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(x.dtype)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def parameter(data, name=None):
    return Tensor(np.array(data, copy=True), requires_grad=True, name=name)


def minimum(a, b):
    """Elementwise minimum; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data

    def back(g):
        return _unbroadcast(g * take_a, a.data.shape), _unbroadcast(g * ~take_a, b.data.shape)

    return Tensor(np.where(take_a, a.data, b.data), _parents=(a, b), _backward=back)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors), _backward=back)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor(np.stack([t.data for t in tensors], axis=axis), _parents=tuple(tensors), _backward=back)
