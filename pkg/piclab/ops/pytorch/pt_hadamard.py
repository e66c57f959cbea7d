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

# pyre-strict


import torch


def sylvester_matrix(n: int, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """
    Normalized Sylvester-Hadamard matrix of size 2**n, H[i, j] = (-1)**popcount(i & j).
    """
    idx = torch.arange(2**n)
    both = idx.unsqueeze(1) & idx.unsqueeze(0)
    parity = torch.zeros_like(both)
    for bit in range(n):
        parity = parity ^ ((both >> bit) & 1)
    return (1.0 - 2.0 * parity.to(dtype)) / (2.0 ** (n / 2.0))


def pytorch_hadamard(v: torch.Tensor) -> torch.Tensor:
    n = v.shape[-1].bit_length() - 1
    return v @ sylvester_matrix(n, dtype=v.dtype)
