"""Differentiable point-cloud <-> grid operators, completion metrics and a toy completion net."""

from .cubic_sampling import (
    cubic_feature_sampling_backward,
    cubic_feature_sampling_forward,
    random_subsample,
)
from .grid_core import ContractError, DomainError, enclosing_cell, neighboring_points, scale_to_grid
from .gridding import GriddingRecord, gridding_backward, gridding_forward, voxelize
from .gridding_reverse import ReverseRecord, gridding_reverse_backward, gridding_reverse_forward
from .losses import LossValue, chamfer_l1, chamfer_l2, gridding_loss
from .metrics import consistency, farthest_point_sampling, f_score, fidelity, mmd, uniformity

__version__ = "0.1.0"
