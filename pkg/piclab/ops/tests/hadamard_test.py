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
import unittest

import torch
from hypothesis import given, settings, strategies as st, Verbosity
from piclab.common import NotPowerOfTwo, PicKernel
from piclab.ops.hadamard import hadamard_transform


class HadamardTest(unittest.TestCase):
    # pyre-ignore[56]
    @given(
        n=st.integers(min_value=0, max_value=8),
        batch=st.integers(min_value=1, max_value=4),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(
        deadline=None,
        verbosity=Verbosity.verbose,
        max_examples=30,
    )
    # pyre-ignore[2]
    def test_hadamard(self, *args, **kwargs) -> None:
        self._test_hadamard(
            *args,
            **kwargs,
            ref_kernel=PicKernel.PYTORCH,
            real_kernel=PicKernel.BUTTERFLY,
        )

    def _test_hadamard(
        self,
        n: int,
        batch: int,
        seed: int,
        ref_kernel: PicKernel,
        real_kernel: PicKernel,
    ) -> None:
        gen = torch.Generator().manual_seed(seed)
        v = torch.randn(batch, 2**n, generator=gen, dtype=torch.float64)
        ref_out = hadamard_transform(v, kernel=ref_kernel)
        real_out = hadamard_transform(v, kernel=real_kernel)
        torch.testing.assert_close(real_out, ref_out, atol=1e-12, rtol=0.0)
        torch.testing.assert_close(
            hadamard_transform(real_out, kernel=real_kernel), v, atol=1e-12, rtol=0.0
        )

    def test_known_values(self) -> None:
        out = hadamard_transform(torch.tensor([1.0, 0.0], dtype=torch.float64))
        torch.testing.assert_close(
            out, torch.full((2,), 1.0 / math.sqrt(2.0), dtype=torch.float64)
        )
        out = hadamard_transform(torch.full((4,), 0.25, dtype=torch.float64))
        torch.testing.assert_close(
            out, torch.tensor([0.5, 0.0, 0.0, 0.0], dtype=torch.float64)
        )

    def test_not_power_of_two(self) -> None:
        with self.assertRaises(NotPowerOfTwo):
            hadamard_transform(torch.ones(3, dtype=torch.float64))


if __name__ == "__main__":
    unittest.main()
