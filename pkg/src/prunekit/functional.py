"""Function-call interface: prune a named parameter of a store in one line."""

from __future__ import annotations

from .methods import (
    CustomFromMask,
    Identity,
    L1Unstructured,
    LnStructured,
    RandomStructured,
    RandomUnstructured,
)
from .reparam import ParameterStore, apply


def identity(store: ParameterStore, name: str) -> ParameterStore:
    apply(store, name, Identity())
    return store


def random_unstructured(store: ParameterStore, name: str, amount, seed: int = 0) -> ParameterStore:
    apply(store, name, RandomUnstructured(amount, seed=seed))
    return store


def l1_unstructured(store: ParameterStore, name: str, amount) -> ParameterStore:
    apply(store, name, L1Unstructured(amount))
    return store


def random_structured(store: ParameterStore, name: str, amount, dim: int, seed: int = 0) -> ParameterStore:
    apply(store, name, RandomStructured(amount, dim=dim, seed=seed))
    return store


def ln_structured(store: ParameterStore, name: str, amount, n, dim: int) -> ParameterStore:
    apply(store, name, LnStructured(amount, n=n, dim=dim))
    return store


def custom_from_mask(store: ParameterStore, name: str, mask) -> ParameterStore:
    apply(store, name, CustomFromMask(mask))
    return store
