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

from typing import Tuple

import gin
import torch

from piclab.common import PicKernel
from piclab.ops.jacobi.jacobi_svd import complete_basis, jacobi_svd  # noqa: F401
from piclab.ops.pytorch.pt_svd import pytorch_svd


@gin.configurable
def svd(
    a: torch.Tensor,
    full_matrices: bool = False,
    kernel: PicKernel = PicKernel.JACOBI,
    tol: float = 1e-12,
    max_sweeps: int = 100,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    if kernel == PicKernel.JACOBI:
        return jacobi_svd(a, full_matrices=full_matrices, tol=tol, max_sweeps=max_sweeps)
    elif kernel == PicKernel.PYTORCH:
        return pytorch_svd(a, full_matrices=full_matrices)
    else:
        raise ValueError(f"Unsupported svd kernel {kernel}")
