# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

#!/usr/bin/env python3

# pyre-strict

import math
import os
from enum import Enum, unique

import gin

import torch

DTYPE: torch.dtype = torch.float64

# Stochasticity checks and 0*log(0) cutoffs.
PROB_TOL: float = 1e-12
# Inputs off by at most this much are renormalized instead of rejected.
RENORM_TOL: float = 1e-9
# Adjacent PICs closer than this form a tie cluster.
TIE_TOL: float = 1e-9
# Warn when max(p) / min(p) of a marginal exceeds this.
CONDITION_LIMIT: float = 1e8


@gin.constants_from_enum
@unique
class PicKernel(Enum):
    PYTORCH = "PYTORCH"
    JACOBI = "JACOBI"
    BUTTERFLY = "BUTTERFLY"


class PicLabError(Exception):
    pass


class ValidationError(PicLabError, ValueError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ZeroMassRow(ValidationError):
    pass


class SupportMismatch(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class UnsortedInput(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class NotPowerOfTwo(ValidationError):
    pass


class InvalidPmf(ValidationError):
    pass


class UniformityRequired(ValidationError):
    pass


class NotConforming(ValidationError):
    pass


class TOutOfRange(ValidationError):
    pass


class InfeasibleMass(ValidationError):
    pass


class DegenerateFunction(ValidationError):
    pass


class NumericalFailure(PicLabError, ArithmeticError):
    pass


class InconsistentDecomposition(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    pass


def num_workers() -> int:
    """
    Worker count for thread pools, capped by the PICLAB_THREADS env var.
    """
    cpus = os.cpu_count() or 1
    cap = os.environ.get("PICLAB_THREADS")
    if cap is None or cap == "":
        return cpus
    try:
        return max(1, min(cpus, int(cap)))
    except ValueError:
        return cpus


def log_fn(base: float) -> float:
    """
    Natural log of the information base; divide nats by it to get `base` units.
    """
    if base <= 0.0 or base == 1.0:
        raise DomainError(f"Unsupported log base {base}")
    return math.log(base)


def derive_seed(seed: int, index: int) -> int:
    """
    Counter-derived seed of the index-th restart; independent of thread count.
    """
    return (seed * 0x9E3779B1 + index * 0x85EBCA6B + 0x5EED) % (2**63 - 1)
