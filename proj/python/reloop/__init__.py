# Copyright (c) 2026, ReLoop Lab contributors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the ReLoop training core."""

from ._reloop import (
    CheckpointError,
    DataError,
    ReLoopError,
    UsageError,
    auc,
    ce_loss,
    combined_loss,
    evaluate,
    fnv1a64,
    generate_synthetic,
    hash_feature,
    kd_loss,
    logloss,
    loss_curves,
    loss_grad_z,
    run_cli,
    sc_loss,
    transform_numerical,
)

__version__ = "0.1.0"
