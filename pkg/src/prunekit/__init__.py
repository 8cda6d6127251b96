"""Mask-based pruning of named tensors, independent of any training framework."""

from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .functional import (
    custom_from_mask,
    identity,
    l1_unstructured,
    ln_structured,
    random_structured,
    random_unstructured,
)
from .global_prune import global_unstructured
from .methods import (
    GLOBAL,
    STRUCTURED,
    UNSTRUCTURED,
    BasePruningMethod,
    CustomFromMask,
    Identity,
    L1Unstructured,
    LnStructured,
    PruningError,
    RandomStructured,
    RandomUnstructured,
    resolve_amount,
)
from .reparam import (
    ParameterStore,
    PruningContainer,
    apply,
    combine_masks,
    effective,
    is_pruned,
    prune_tensor,
    remove,
)
from .report import sparsity_report
from .tensor import hadamard, ln_norm_over_channel, sparsity

__version__ = "0.1.0"
