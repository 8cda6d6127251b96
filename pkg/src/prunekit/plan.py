"""Declarative pruning plans.

A plan is a JSON document ``{"steps": [...]}`` (a bare list also works).
Each step either prunes the parameters matched by one selector::

    {"select": "features.0.weight", "method": "l1_unstructured", "amount": 3}
    {"select": "conv*.weight", "method": "ln_structured", "amount": 0.5, "n": 2, "dim": 0}

or prunes globally over every parameter matching any of several patterns::

    {"global": ["*.weight"], "amount": 0.2}

Selectors are exact names or glob patterns over full parameter names.
As everywhere else, an integer amount is a count and a float a fraction.
Steps run in order, so later steps see the masks left by earlier ones.
"""

from __future__ import annotations

import json
import math
from fnmatch import fnmatchcase
from pathlib import Path
from typing import List

import numpy as np

from .global_prune import global_unstructured
from .methods import (
    CustomFromMask,
    Identity,
    L1Unstructured,
    LnStructured,
    RandomStructured,
    RandomUnstructured,
)
from .reparam import ParameterStore, apply

STEP_KEYS = {
    "identity": set(),
    "random_unstructured": {"amount", "seed"},
    "l1_unstructured": {"amount"},
    "random_structured": {"amount", "dim", "seed"},
    "ln_structured": {"amount", "n", "dim"},
    "custom_from_mask": {"mask"},
}
REQUIRED_KEYS = {
    "random_unstructured": {"amount"},
    "l1_unstructured": {"amount"},
    "random_structured": {"amount", "dim"},
    "ln_structured": {"amount", "n", "dim"},
    "custom_from_mask": {"mask"},
}


class PlanError(ValueError):
    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message if step is None else f"step {step}: {message}")


def parse_norm(n):
    if isinstance(n, str):
        return math.inf if n.lower() in ("inf", "infinity") else float(n)
    return n


def build_method(spec: dict):
    """Construct a pruning method from a step dict (minus its selector)."""
    name = spec.get("method")
    if name not in STEP_KEYS:
        raise ValueError(f"unknown method {name!r}; expected one of {', '.join(STEP_KEYS)}")
    given = set(spec) - {"method"}
    extra = given - STEP_KEYS[name]
    if extra:
        raise ValueError(f"unexpected keys for {name}: {', '.join(sorted(extra))}")
    missing = REQUIRED_KEYS.get(name, set()) - given
    if missing:
        raise ValueError(f"{name} requires {', '.join(sorted(missing))}")
    seed = int(spec.get("seed", 0))
    if name == "identity":
        return Identity()
    if name == "random_unstructured":
        return RandomUnstructured(spec["amount"], seed=seed)
    if name == "l1_unstructured":
        return L1Unstructured(spec["amount"])
    if name == "random_structured":
        return RandomStructured(spec["amount"], dim=spec["dim"], seed=seed)
    if name == "ln_structured":
        return LnStructured(spec["amount"], n=parse_norm(spec["n"]), dim=spec["dim"])
    return CustomFromMask(np.asarray(spec["mask"], dtype=np.float64))


def select(store: ParameterStore, pattern: str) -> List[str]:
    names = store.names()
    if pattern in names:
        return [pattern]
    matched = [n for n in names if fnmatchcase(n, pattern)]
    if not matched:
        raise LookupError(f"{pattern!r} matches no parameter; available: {', '.join(names)}")
    return matched


def load_plan(path) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise PlanError(f"plan is not valid JSON: {e}") from None
    return parse_plan(doc)


def parse_plan(doc) -> list:
    steps = doc.get("steps") if isinstance(doc, dict) else doc
    if not isinstance(steps, list):
        raise PlanError("plan must be a list of steps or an object with a 'steps' list")
    for i, step in enumerate(steps):
        if not isinstance(step, dict):
            raise PlanError("each step must be an object", i)
        if ("global" in step) == ("select" in step):
            raise PlanError("a step needs exactly one of 'select' or 'global'", i)
    return steps


def execute_plan(steps: list, store: ParameterStore) -> ParameterStore:
    """Run ``steps`` against ``store`` in order; raises :class:`PlanError`."""
    for i, step in enumerate(parse_plan(steps)):
        try:
            if "global" in step:
                extra = set(step) - {"global", "amount", "seed"}
                if extra:
                    raise ValueError(f"unexpected keys for global: {', '.join(sorted(extra))}")
                if "amount" not in step:
                    raise ValueError("global requires amount")
                patterns = step["global"]
                if isinstance(patterns, str):
                    patterns = [patterns]
                names: List[str] = []
                for p in patterns:
                    names += [n for n in select(store, p) if n not in names]
                # keep store order so tie-breaking does not depend on pattern order
                order = store.names()
                names.sort(key=order.index)
                global_unstructured([(store, n) for n in names], step["amount"])
            else:
                spec = {k: v for k, v in step.items() if k != "select"}
                for name in select(store, step["select"]):
                    apply(store, name, build_method(spec))
        except (ValueError, KeyError, LookupError, TypeError) as e:
            msg = e.args[0] if isinstance(e, KeyError) and e.args else str(e)
            raise PlanError(str(msg), i) from e
    return store
