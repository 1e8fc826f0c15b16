"""Parameter containers."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, get_default_dtype


class Parameter(Tensor):
    """A Tensor that belongs to a module's state. Trainable unless ``requires_grad=False``."""

    __slots__ = ()

    def __init__(self, data, requires_grad=True, dtype=None):
        super().__init__(np.array(data, dtype=dtype or get_default_dtype()),
                         requires_grad=requires_grad)


class Module:
    """Minimal module: parameters and submodules are discovered from attributes."""

    training = False

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self):
        for name, val in vars(self).items():
            if isinstance(val, (Parameter, Module)):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, val in self._children():
            if isinstance(val, Parameter):
                yield prefix + name, val
            else:
                yield from val.named_parameters(f"{prefix}{name}.")

    def parameters(self, trainable_only=True):
        return [p for _, p in self.named_parameters() if p.requires_grad or not trainable_only]

    def modules(self):
        yield self
        for _, val in self._children():
            if isinstance(val, Module):
                yield from val.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters(trainable_only=False):
            p.grad = None

    @property
    def dtype(self):
        for _, p in self.named_parameters():
            return p.dtype
        return get_default_dtype()

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        own = dict(self.named_parameters())
        if strict:
            missing = own.keys() - state.keys()
            extra = state.keys() - own.keys()
            if missing or extra:
                raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, arr in state.items():
            if name not in own:
                continue
            p = own[name]
            arr = np.asarray(arr)
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)
        return self


def uniform(rng, shape, bound):
    return rng.uniform(-bound, bound, size=shape)
