"""Frozen tolerances from a one-off oracle sweep.

The sweep ran the default 4-class, 3x3-grid mixture on the T=25 cosine
schedule over the 50-item ``any`` corpus (seed 0) with sampled inputs and
default edit parameters. Each bound is the observed maximum mean-absolute
error rounded up with a margin of roughly 1.4x. Run manifests copy this
table.
"""

CALIBRATED_BOUNDS = {
    # encode_ddim + decode_ddim under the item's own condition; observed max 0.0218.
    "round_trip_l1": 0.03,
    # lambda = 0 edit against its guidance image; observed max 0.0246.
    "lambda0_vs_guidance_l1": 0.035,
    # lambda = 1 edit against the hard-blend baseline; observed max 0.0181.
    "lambda1_vs_baseline_l1": 0.025,
    # Background L1 of a default edit; observed max 0.0259 (0.0277 on the demo edit).
    "edit_background_l1": 0.04,
    # Corpus thresholds for the trade-off check.
    "edit_success_min": 0.9,
    "retention_max": 0.1,
    "background_ratio_max": 1.5,
    "mask_iou_min": 0.5,
}
