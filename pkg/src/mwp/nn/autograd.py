"""Dense float64 tensors with a computation tape for reverse-mode gradients.

Operations executed while a :class:`Tape` is active (and touching at least one
tensor that requires a gradient) are appended to it in execution order;
``Tape.backward`` walks that list in exact reverse.
"""
from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NonFiniteGradient(FloatingPointError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"non-finite gradient in parameter {name!r}")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_derived")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._derived = False

    @property
    def shape(self):
        return self.data.shape

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}{', grad' if self.requires_grad else ''})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __getitem__(self, index):
        from . import ops
        return ops.index(self, index)


class Parameter(Tensor):
    __slots__ = ()

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    @property
    def gradient(self):
        return self.grad


_active: list["Tape"] = []


def active_tape():
    return _active[-1] if _active else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Records differentiable operations; use as a context manager."""

    def __init__(self):
        self.records = []

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def __len__(self):
        return len(self.records)

    def record(self, out, inputs, backward):
        self.records.append((out, inputs, backward))

    def backward(self, loss: Tensor, scale: float = 1.0):
        """Accumulate d(scale * loss)/d(leaf) into every leaf's ``grad``."""
        if loss.data.size != 1:
            raise ShapeMismatch("backward needs a scalar loss")
        grads = {id(loss): np.full(loss.shape, scale)}
        for out, inputs, fn in reversed(self.records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for inp, ig in zip(inputs, fn(g)):
                if ig is None or not inp.requires_grad:
                    continue
                if inp._derived:
                    prev = grads.get(id(inp))
                    grads[id(inp)] = ig if prev is None else prev + ig
                elif inp.grad is None:
                    inp.grad = np.array(ig, dtype=np.float64)
                else:
                    inp.grad = inp.grad + ig
        self.records.clear()


def make_result(data, inputs, backward) -> Tensor:
    """Wrap an op's output, recording it when a tape is active and any input needs grad."""
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._derived = True
        tape.record(out, inputs, backward)
    return out
