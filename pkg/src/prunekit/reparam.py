"""Attach pruning to named parameters through an ``orig * mask`` reparametrization.

Pruning parameter ``p`` of a :class:`ParameterStore` moves the unpruned
values to parameter ``p_orig``, stores the mask as buffer ``p_mask`` and
registers a hook for ``p``. Reading ``store["p"]`` afterwards runs the hook,
which recomputes ``p_orig * p_mask`` on every access.
"""

from __future__ import annotations

import copy
from typing import Dict, Iterator, List, Optional

import numpy as np

from .methods import (
    GLOBAL,
    STRUCTURED,
    UNSTRUCTURED,
    BasePruningMethod,
    PruningError,
)
from .tensor import as_tensor, channel_alive, check_mask, hadamard, normalize_dim, ones_like

ORIG_SUFFIX = "_orig"
MASK_SUFFIX = "_mask"


class ParameterStore:
    """Named parameters and buffers plus the pruning hooks attached to them.

    Stands in for a framework module: ``params`` and ``buffers`` map names
    to tensors, ``hooks`` maps each pruned parameter name to the method (or
    container) governing it, and ``attrs`` holds the most recently computed
    effective tensor of each pruned parameter.
    """

    def __init__(self, params=None, buffers=None):
        self.params: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        self.hooks: Dict[str, BasePruningMethod] = {}
        self.attrs: Dict[str, np.ndarray] = {}
        # per pruned parameter: descriptors of the methods applied so far
        self.history: Dict[str, List[dict]] = {}
        self.metadata: Dict[str, str] = {}
        for name, value in (params or {}).items():
            self.register_parameter(name, value)
        for name, value in (buffers or {}).items():
            self.register_buffer(name, value)

    def register_parameter(self, name: str, value, dtype=None) -> None:
        if name in self.params or name in self.buffers or name in self.hooks:
            raise KeyError(f"name {name!r} already in use")
        self.params[name] = as_tensor(value, dtype)

    def register_buffer(self, name: str, value, dtype=None) -> None:
        if name in self.params or name in self.buffers or name in self.hooks:
            raise KeyError(f"name {name!r} already in use")
        self.buffers[name] = as_tensor(value, dtype)

    def names(self) -> List[str]:
        """Logical parameter names, with ``p_orig`` reported as ``p``."""
        out = []
        for key in self.params:
            if key.endswith(ORIG_SUFFIX) and key[: -len(ORIG_SUFFIX)] in self.hooks:
                out.append(key[: -len(ORIG_SUFFIX)])
            else:
                out.append(key)
        return out

    def is_pruned(self, name: Optional[str] = None) -> bool:
        if name is None:
            return bool(self.hooks)
        return name in self.hooks

    def run_hook(self, name: str) -> np.ndarray:
        value = hadamard(self.params[name + ORIG_SUFFIX], self.buffers[name + MASK_SUFFIX])
        self.attrs[name] = value
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        if name in self.hooks:
            return self.run_hook(name)
        if name in self.params:
            return self.params[name]
        if name in self.buffers:
            return self.buffers[name]
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return name in self.hooks or name in self.params or name in self.buffers

    def __iter__(self) -> Iterator[str]:
        return iter(self.names())

    def __repr__(self):
        pruned = ", ".join(self.hooks) or "none"
        return f"ParameterStore(params={list(self.names())}, pruned={pruned})"


class PruningContainer(BasePruningMethod):
    """Ordered history of the methods applied to one parameter.

    Only methods acting on the same parameter may be added. The mask for a
    new step is the previous mask combined with the newest method according
    to that method's ``PRUNING_TYPE``.
    """

    NAME = "container"

    def __init__(self, tensor_name: str, methods=()):
        self.tensor_name = tensor_name
        self._pruning_methods: tuple = ()
        for m in methods:
            self.add_pruning_method(m)

    @property
    def methods(self) -> tuple:
        return self._pruning_methods

    @property
    def PRUNING_TYPE(self):
        if not self._pruning_methods:
            raise PruningError("empty container has no pruning type")
        return self._pruning_methods[-1].PRUNING_TYPE

    def add_pruning_method(self, method: BasePruningMethod) -> None:
        if not isinstance(method, BasePruningMethod):
            raise TypeError(f"{type(method).__name__} is not a pruning method")
        if method.tensor_name is None:
            method.tensor_name = self.tensor_name
        elif method.tensor_name != self.tensor_name:
            raise PruningError(
                f"can only add pruning methods acting on parameter {self.tensor_name!r}; "
                f"got one acting on {method.tensor_name!r}"
            )
        self._pruning_methods += (method,)

    add = add_pruning_method

    def __len__(self):
        return len(self._pruning_methods)

    def __iter__(self):
        return iter(self._pruning_methods)

    def __getitem__(self, i):
        return self._pruning_methods[i]

    def compute_mask(self, t, default_mask):
        if not self._pruning_methods:
            raise PruningError("empty container")
        return combine_masks(self._pruning_methods[-1], t, default_mask)

    def describe(self):
        return {"method": self.NAME, "methods": [m.describe() for m in self]}

    def __repr__(self):
        return f"PruningContainer({self.tensor_name!r}, {list(self._pruning_methods)!r})"


def combine_masks(method: BasePruningMethod, t: np.ndarray, default_mask: np.ndarray) -> np.ndarray:
    """Prune ``t`` further with ``method`` on top of ``default_mask``.

    unstructured: the method only sees entries not pruned yet, flattened
    in row-major order. structured: it only sees channels along its
    ``dim`` that still have a nonzero entry. global: it sees everything.
    """
    if default_mask.shape != t.shape:
        raise PruningError(f"mask shape {default_mask.shape} does not match tensor shape {t.shape}")
    kind = method.PRUNING_TYPE
    new_mask = default_mask.copy()
    if kind == UNSTRUCTURED:
        keep = default_mask.reshape(-1) == 1
        sub = t.reshape(-1)[keep]
        partial = method.compute_mask(sub, np.ones(sub.shape, dtype=default_mask.dtype))
        new_mask.reshape(-1)[keep] = partial
    elif kind == STRUCTURED:
        if not hasattr(method, "dim"):
            raise PruningError(f"structured method {method!r} must define 'dim'")
        dim = normalize_dim(method.dim, t.ndim)
        alive = np.flatnonzero(channel_alive(default_mask, dim))
        idx = [slice(None)] * t.ndim
        idx[dim] = alive
        idx = tuple(idx)
        partial = method.compute_mask(t[idx], default_mask[idx])
        new_mask[idx] = partial
    elif kind == GLOBAL:
        new_mask = method.compute_mask(t, default_mask)
    else:
        raise PruningError(f"unrecognized PRUNING_TYPE {kind!r}")
    # pruning never resurrects entries
    return new_mask * default_mask


def apply(store: ParameterStore, name: str, method: BasePruningMethod) -> BasePruningMethod:
    """Prune parameter ``name`` of ``store`` with ``method``.

    The first call reparametrizes the parameter; later calls promote the
    hook to a :class:`PruningContainer` and tighten the mask. All changes
    are staged and committed together, so if anything fails the store is
    left exactly as it was. Returns the hook now governing ``name``.
    """
    if not isinstance(method, BasePruningMethod):
        raise TypeError(f"{type(method).__name__} is not a pruning method")
    method = copy.copy(method)
    if method.tensor_name is None:
        method.tensor_name = name
    elif method.tensor_name != name:
        raise PruningError(f"method targets {method.tensor_name!r}, not {name!r}")
    orig_name, mask_name = name + ORIG_SUFFIX, name + MASK_SUFFIX

    if name in store.hooks:
        orig = store.params[orig_name]
        old = store.hooks[name]
        if isinstance(old, PruningContainer):
            hook = PruningContainer(name, old.methods)
        else:
            hook = PruningContainer(name, (old,))
        hook.add_pruning_method(method)
        mask = hook.compute_mask(orig, store.buffers[mask_name])
        check_mask(mask, orig)
        history = store.history.get(name, []) + [method.describe()]

        store.hooks[name] = hook
        store.buffers[mask_name] = mask
        store.history[name] = history
        store.run_hook(name)
        return hook

    if name not in store.params:
        raise KeyError(f"parameter {name!r} not found in store")
    for taken in (orig_name, mask_name):
        if taken in store.params or taken in store.buffers:
            raise PruningError(f"cannot reparametrize {name!r}: {taken!r} already exists")
    orig = store.params[name]
    mask = method.compute_mask(orig, ones_like(orig))
    check_mask(mask, orig)

    # rename in place so parameter order is preserved
    store.params = {(orig_name if k == name else k): v for k, v in store.params.items()}
    store.buffers[mask_name] = mask
    store.hooks[name] = method
    store.history[name] = [method.describe()]
    store.run_hook(name)
    return method


def effective(store: ParameterStore, name: str) -> np.ndarray:
    """Current value of a pruned parameter, ``orig * mask`` computed fresh."""
    if name not in store.hooks:
        raise KeyError(f"parameter {name!r} is not pruned")
    return store.run_hook(name)


def is_pruned(store: ParameterStore) -> bool:
    return bool(store.hooks)


def remove(store: ParameterStore, name: str) -> ParameterStore:
    """Make the pruning of ``name`` permanent and drop the reparametrization.

    The parameter keeps its pruned values; only the bookkeeping goes away.
    """
    if name not in store.hooks:
        raise KeyError(f"parameter {name!r} of this store has to be pruned before it can be removed")
    orig_name = name + ORIG_SUFFIX
    value = hadamard(store.params[orig_name], store.buffers[name + MASK_SUFFIX])
    store.params = {(name if k == orig_name else k): (value if k == orig_name else v)
                    for k, v in store.params.items()}
    del store.buffers[name + MASK_SUFFIX]
    del store.hooks[name]
    store.attrs.pop(name, None)
    store.history.pop(name, None)
    return store


def prune_tensor(method: BasePruningMethod, t) -> np.ndarray:
    """Prune a tensor that belongs to no store; ``t`` is left untouched."""
    return method.prune(t)
