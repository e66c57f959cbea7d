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

import torch

from piclab.common import NotPowerOfTwo, PicKernel
from piclab.ops.pytorch.pt_hadamard import pytorch_hadamard


def butterfly_hadamard(v: torch.Tensor) -> torch.Tensor:
    """
    Normalized Walsh-Hadamard transform over the last dim in natural
    (Sylvester) order, n stages of sum/difference butterflies.
    """
    size = v.shape[-1]
    batch = v.shape[:-1]
    x = v.reshape(-1, size)
    h = 1
    while h < size:
        x = x.view(x.shape[0], size // (2 * h), 2, h)
        x = torch.stack([x[:, :, 0] + x[:, :, 1], x[:, :, 0] - x[:, :, 1]], dim=2)
        x = x.reshape(-1, size)
        h *= 2
    return (x / size**0.5).reshape(*batch, size)


def hadamard_transform(
    v: torch.Tensor,
    kernel: PicKernel = PicKernel.BUTTERFLY,
) -> torch.Tensor:
    size = v.shape[-1]
    if size < 1 or size & (size - 1) != 0:
        raise NotPowerOfTwo(f"Hadamard transform needs a power-of-two length, got {size}")
    if kernel == PicKernel.BUTTERFLY:
        return butterfly_hadamard(v)
    elif kernel == PicKernel.PYTORCH:
        return pytorch_hadamard(v)
    else:
        raise ValueError(f"Unsupported hadamard kernel {kernel}")
