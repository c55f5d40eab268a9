"""Mask-based uncertainty calibration for image-to-image predictors."""

from maskcal._core import (  # noqa: F401
    DomainError,
    FormatError,
    ShapeError,
    __version__,
    binary_mask,
    calibrated_mask,
    closed_form_mask,
    conformal_lambda,
    coverage,
    distortion,
    expected_abs_moment,
    extract_features,
    find_lambda,
    hadamard,
    mask_size,
    masked_distortion,
    masked_distortion_grad,
    optimize_mask,
    pearson,
    pinball_loss,
    pnorm_distortion,
    read_pnm,
    read_tensor,
    scaled_mask,
    scan_lambda,
    ssim_distortion,
    threshold_from_quantile,
    uncertainty_from_mask,
    uni_scalar,
    write_pnm,
    write_tensor,
)
