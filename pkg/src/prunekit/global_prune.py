"""Magnitude pruning with one ranking pooled across several parameters."""

from __future__ import annotations

from typing import Iterable, Sequence, Tuple

import numpy as np

from .methods import CustomFromMask, PruningError, resolve_amount, validate_amount
from .reparam import MASK_SUFFIX, ORIG_SUFFIX, ParameterStore, apply

PruneTarget = Tuple[ParameterStore, str]


def _current(store: ParameterStore, name: str):
    if name in store.hooks:
        return store.params[name + ORIG_SUFFIX], store.buffers[name + MASK_SUFFIX]
    if name not in store.params:
        raise KeyError(f"parameter {name!r} not found in store")
    t = store.params[name]
    return t, np.ones(t.shape, dtype=t.dtype)


def global_masks(targets: Sequence[PruneTarget], amount) -> list:
    """Per-target user masks for pruning the pooled smallest magnitudes.

    The pool holds every entry whose current mask is 1. Ties are broken by
    target position, then flat index.
    """
    if not targets:
        raise PruningError("global pruning needs at least one target")
    current = [_current(store, name) for store, name in targets]
    scores, owners, flat = [], [], []
    for i, (t, mask) in enumerate(current):
        cand = np.flatnonzero(mask)
        scores.append(np.abs(t.reshape(-1)[cand]).astype(np.float64))
        owners.append(np.full(cand.size, i, dtype=np.intp))
        flat.append(cand)
    scores = np.concatenate(scores)
    owners = np.concatenate(owners)
    flat = np.concatenate(flat)
    k = resolve_amount(amount, scores.size)
    # pool is already ordered by (target, flat index); a stable sort keeps that for ties
    chosen = np.argsort(scores, kind="stable")[:k]
    masks = [np.ones(t.shape, dtype=t.dtype) for t, _ in current]
    for i, j in zip(owners[chosen], flat[chosen]):
        masks[i].reshape(-1)[j] = 0
    return masks


def global_unstructured(targets: Iterable[PruneTarget], amount) -> None:
    """Prune the ``amount`` smallest-magnitude entries pooled over ``targets``.

    ``targets`` is a list of ``(store, name)`` pairs. Each target receives
    its share as a :class:`CustomFromMask` step through :func:`apply`, so
    it composes with earlier pruning like any other method.
    """
    targets = list(targets)
    seen = set()
    for store, name in targets:
        if (id(store), name) in seen:
            raise PruningError(f"parameter {name!r} listed twice")
        seen.add((id(store), name))
    amount = validate_amount(amount)
    masks = global_masks(targets, amount)
    origin = {"origin": "global_unstructured", "amount": amount}
    for (store, name), mask in zip(targets, masks):
        apply(store, name, CustomFromMask(mask, origin=origin))
