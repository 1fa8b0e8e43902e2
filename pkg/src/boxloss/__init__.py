"""IoU-family bounding-box regression losses with the SIoU loss, a simulation
benchmark for comparing them, and a genetic tuner for the SIoU shape exponent."""

__version__ = "0.1.0"

from .geometry import Box2D, Enclosure, enclosing, intersection_area, iou
from .losses import (
    Grad4,
    LossBreakdown,
    LossKind,
    SiouParams,
    angle_cost,
    baseline_loss,
    distance_cost,
    grad,
    grad_fd,
    loss,
    loss_and_grad,
    shape_cost,
    siou_loss,
)
from .regression import AdamConfig, AdamState, Trajectory, adam_step, fit, fit_batch, l1_error, lr_at
from .sim_bench import ErrorSeries, ErrorSurface, SimConfig, generate_cases, generate_points, run, surface
from .tuner import GaConfig, GaResult, fitness, tune_theta
