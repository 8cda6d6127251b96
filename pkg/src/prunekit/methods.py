"""Mask generators.

Every pruning technique subclasses :class:`BasePruningMethod`, declares a
``PRUNING_TYPE`` and implements ``compute_mask(t, default_mask)``. The
``default_mask`` carries earlier pruning: entries (or whole channels) that
are already zero are never candidates again, and the returned mask is
always elementwise <= ``default_mask``.

Amounts follow the usual convention: an ``int`` is an absolute count of
candidates to prune, a ``float`` in [0, 1] a fraction of the candidates,
rounded half up.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from numbers import Integral, Real
from typing import Optional

import numpy as np

from .tensor import (
    Norm,
    TensorError,
    as_tensor,
    channel_alive,
    channel_norms,
    check_norm,
    is_binary,
    normalize_dim,
    ones_like,
)

UNSTRUCTURED = "unstructured"
STRUCTURED = "structured"
GLOBAL = "global"
PRUNING_TYPES = (UNSTRUCTURED, STRUCTURED, GLOBAL)


class PruningError(ValueError):
    """Raised when a pruning method cannot produce a mask."""


def validate_amount(amount):
    """Check an amount and return it as a plain ``int`` or ``float``."""
    if isinstance(amount, (bool, np.bool_)) or not isinstance(amount, Real):
        raise PruningError(f"amount must be an int or a float, got {amount!r}")
    if isinstance(amount, Integral):
        if amount < 0:
            raise PruningError(f"amount={amount} must be a nonnegative integer")
        return int(amount)
    if not 0.0 <= float(amount) <= 1.0:
        raise PruningError(f"amount={amount} must be a fraction in [0, 1]")
    return float(amount)


def resolve_amount(amount, n_candidates: int) -> int:
    """Number of candidates to prune.

    >>> resolve_amount(3, 27)
    3
    >>> resolve_amount(0.2, 7)
    1
    """
    amount = validate_amount(amount)
    if isinstance(amount, int):
        k = int(amount)
        if k > n_candidates:
            raise PruningError(
                f"amount={k} should be smaller than the number of candidates ({n_candidates})"
            )
        return k
    return int(math.floor(float(amount) * n_candidates + 0.5))


def _check_default(t: np.ndarray, default_mask: Optional[np.ndarray]) -> np.ndarray:
    if default_mask is None:
        return ones_like(t)
    if default_mask.shape != t.shape:
        raise PruningError(
            f"default mask shape {default_mask.shape} does not match tensor shape {t.shape}"
        )
    return default_mask


def _zero_channels(mask: np.ndarray, channels, dim: int) -> None:
    idx = [slice(None)] * mask.ndim
    idx[dim] = np.asarray(channels, dtype=np.intp)
    mask[tuple(idx)] = 0


class BasePruningMethod(ABC):
    """Skeleton shared by all pruning techniques.

    Subclasses set ``PRUNING_TYPE`` and ``NAME`` and implement
    :meth:`compute_mask`. Structured methods also expose a ``dim``
    attribute. ``tensor_name`` is filled in when the method is attached
    to a parameter.
    """

    PRUNING_TYPE: str = UNSTRUCTURED
    NAME: str = ""

    tensor_name: Optional[str] = None

    @abstractmethod
    def compute_mask(self, t: np.ndarray, default_mask: np.ndarray) -> np.ndarray:
        ...

    def prune(self, t) -> np.ndarray:
        """Return a pruned copy of a standalone tensor."""
        t = as_tensor(t)
        return t * self.compute_mask(t, ones_like(t))

    def config(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"method": self.NAME or type(self).__name__, **self.config()}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items())
        return f"{type(self).__name__}({args})"


class Identity(BasePruningMethod):
    """Attaches the reparametrization without pruning anything."""

    PRUNING_TYPE = UNSTRUCTURED
    NAME = "identity"

    def compute_mask(self, t, default_mask):
        return _check_default(t, default_mask).copy()


class RandomUnstructured(BasePruningMethod):
    """Prune currently unpruned entries chosen uniformly at random.

    Selection is ``candidates[rng.choice(n, k, replace=False)]`` with
    ``rng = numpy.random.default_rng(seed)`` and candidates in flat order.
    """

    PRUNING_TYPE = UNSTRUCTURED
    NAME = "random_unstructured"

    def __init__(self, amount, seed: int = 0):
        self.amount = validate_amount(amount)
        self.seed = int(seed)

    def config(self):
        return {"amount": self.amount, "seed": self.seed}

    def compute_mask(self, t, default_mask):
        default_mask = _check_default(t, default_mask)
        candidates = np.flatnonzero(default_mask)
        k = resolve_amount(self.amount, candidates.size)
        mask = default_mask.copy()
        if k:
            rng = np.random.default_rng(self.seed)
            mask.reshape(-1)[candidates[rng.choice(candidates.size, k, replace=False)]] = 0
        return mask


class L1Unstructured(BasePruningMethod):
    """Prune the currently unpruned entries of smallest absolute value.

    Ties go to the smaller flat index.
    """

    PRUNING_TYPE = UNSTRUCTURED
    NAME = "l1_unstructured"

    def __init__(self, amount):
        self.amount = validate_amount(amount)

    def config(self):
        return {"amount": self.amount}

    def compute_mask(self, t, default_mask):
        default_mask = _check_default(t, default_mask)
        candidates = np.flatnonzero(default_mask)
        k = resolve_amount(self.amount, candidates.size)
        mask = default_mask.copy()
        if k:
            scores = np.abs(t.reshape(-1)[candidates])
            order = np.argsort(scores, kind="stable")
            mask.reshape(-1)[candidates[order[:k]]] = 0
        return mask


class RandomStructured(BasePruningMethod):
    """Prune whole channels along ``dim``, chosen uniformly at random.

    A channel is a candidate unless its slice of ``default_mask`` is
    entirely zero.
    """

    PRUNING_TYPE = STRUCTURED
    NAME = "random_structured"

    def __init__(self, amount, dim: int = -1, seed: int = 0):
        self.amount = validate_amount(amount)
        self.dim = int(dim)
        self.seed = int(seed)

    def config(self):
        return {"amount": self.amount, "dim": self.dim, "seed": self.seed}

    def compute_mask(self, t, default_mask):
        default_mask = _check_default(t, default_mask)
        try:
            dim = normalize_dim(self.dim, t.ndim)
        except TensorError as e:
            raise PruningError(str(e)) from None
        candidates = np.flatnonzero(channel_alive(default_mask, dim))
        k = resolve_amount(self.amount, candidates.size)
        mask = default_mask.copy()
        if k:
            rng = np.random.default_rng(self.seed)
            _zero_channels(mask, candidates[rng.choice(candidates.size, k, replace=False)], dim)
        return mask


class LnStructured(BasePruningMethod):
    """Prune whole channels along ``dim`` with the smallest L_n norm.

    Channels are scored on ``t * default_mask``, so entries pruned earlier
    count as zero. Ties go to the smaller channel index.
    """

    PRUNING_TYPE = STRUCTURED
    NAME = "ln_structured"

    def __init__(self, amount, n: Norm, dim: int = -1):
        amount = validate_amount(amount)
        try:
            check_norm(n)
        except TensorError as e:
            raise PruningError(str(e)) from None
        self.amount = amount
        self.n = n
        self.dim = int(dim)

    def config(self):
        n = self.n if not math.isinf(float(self.n)) else "inf"
        return {"amount": self.amount, "n": n, "dim": self.dim}

    def compute_mask(self, t, default_mask):
        default_mask = _check_default(t, default_mask)
        try:
            dim = normalize_dim(self.dim, t.ndim)
        except TensorError as e:
            raise PruningError(str(e)) from None
        candidates = np.flatnonzero(channel_alive(default_mask, dim))
        k = resolve_amount(self.amount, candidates.size)
        mask = default_mask.copy()
        if k:
            norms = channel_norms(t * default_mask, self.n, dim)[candidates]
            order = np.argsort(norms, kind="stable")
            _zero_channels(mask, candidates[order[:k]], dim)
        return mask


class CustomFromMask(BasePruningMethod):
    """Prune with a caller-supplied binary mask.

    Applies to every entry regardless of earlier pruning; the result is
    the product of ``default_mask`` and the user mask.
    """

    PRUNING_TYPE = GLOBAL
    NAME = "custom_from_mask"

    def __init__(self, mask, origin: Optional[dict] = None):
        mask = np.asarray(mask)
        if not is_binary(mask):
            raise PruningError("user mask must contain only 0 and 1")
        self.mask = mask
        # extra fields recorded in the pruning history, e.g. by global pruning
        self.origin = dict(origin or {})

    def config(self):
        return dict(self.origin)

    def compute_mask(self, t, default_mask):
        default_mask = _check_default(t, default_mask)
        if self.mask.shape != t.shape:
            raise PruningError(
                f"user mask shape {self.mask.shape} does not match tensor shape {t.shape}"
            )
        return default_mask * self.mask.astype(default_mask.dtype)


METHODS = {
    cls.NAME: cls
    for cls in (Identity, RandomUnstructured, L1Unstructured, RandomStructured, LnStructured, CustomFromMask)
}
