"""Patch-based baseline: block selection, K-SVD dictionaries, per-block lasso."""

from .blocks import (
    BlockSelectionConfig,
    PatchConfig,
    block_positions,
    extract_blocks,
    merge_blocks,
    select_training_blocks,
    unvectorize_block,
    vectorize_block,
)
from .ksvd import omp_codes, train_ksvd
from .reconstruct import kkt_violation, lasso_solve, local_operator, reconstruct_patch
