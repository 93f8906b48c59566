"""Photon-counting binary optical channel: statistics, soft metrics, capacity and LDPC simulation."""

__version__ = "0.1.0"

from .channel import (
    ChannelParams,
    DifferencePmf,
    PhotonOutcome,
    arm_means,
    difference_pmf,
    joint_pmf,
    nc_for_qber,
    q_param,
    qber,
    sample_outcome,
    skellam_pmf,
)
from .errors import ConstructionFailed, DegenerateChannel, LengthMismatch, TargetUnreachable

__all__ = [
    "ChannelParams",
    "ConstructionFailed",
    "DegenerateChannel",
    "DifferencePmf",
    "LengthMismatch",
    "PhotonOutcome",
    "TargetUnreachable",
    "arm_means",
    "difference_pmf",
    "joint_pmf",
    "nc_for_qber",
    "q_param",
    "qber",
    "sample_outcome",
    "skellam_pmf",
]
