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
import tempfile
import unittest

import torch
from hypothesis import given, settings, strategies as st, Verbosity
from piclab.common import (
    DimensionMismatch,
    DomainError,
    EmptyInput,
    InvalidPmf,
    SupportMismatch,
    ZeroMassRow,
)
from piclab.modules.dist import (
    binary_entropy,
    bsc_channel,
    Channel,
    chi_squared,
    conditional,
    dump_distribution,
    empirical_joint,
    entropy,
    erasure_channel,
    f_information,
    FGenerator,
    joint_from_channel,
    JointPmf,
    kl_divergence,
    load_distribution,
    load_samples_csv,
    mutual_information,
    product,
    random_joint,
    random_pmf,
    renyi_entropy,
    symmetric_channel,
    transpose,
)

_FIXTURES: str = os.path.join(os.path.dirname(__file__), "..", "..", "..", "fixtures")


def _bsc_joint(delta: float) -> JointPmf:
    return joint_from_channel([0.5, 0.5], bsc_channel(delta))


class DistTest(unittest.TestCase):
    def test_joint_from_channel(self) -> None:
        j = _bsc_joint(0.1)
        torch.testing.assert_close(
            j.p, torch.tensor([[0.45, 0.05], [0.05, 0.45]], dtype=torch.float64)
        )
        single = joint_from_channel([1.0], Channel.from_table([[0.2, 0.3, 0.5]]))
        self.assertEqual((single.rows, single.cols), (1, 3))
        torch.testing.assert_close(
            single.p_y, torch.tensor([0.2, 0.3, 0.5], dtype=torch.float64)
        )
        erasure = joint_from_channel([0.25, 0.25, 0.5], erasure_channel(3, 0.5))
        self.assertAlmostEqual(float(erasure.p_x[2]), 0.5, places=12)
        with self.assertRaises(DimensionMismatch):
            joint_from_channel([0.5, 0.5], erasure_channel(3, 0.5))
        with self.assertRaises(ZeroMassRow):
            joint_from_channel([1.0, 0.0], bsc_channel(0.1))

    def test_validation(self) -> None:
        with self.assertRaises(ZeroMassRow):
            JointPmf.from_table([[0.5, 0.0], [0.5, 0.0]])
        with self.assertRaises(ZeroMassRow):
            JointPmf.from_table([[0.5, 0.5], [0.0, 0.0]])
        with self.assertRaises(InvalidPmf):
            JointPmf.from_table([[0.5, 0.6], [0.1, 0.1]])
        with self.assertRaises(InvalidPmf):
            JointPmf.from_table([[1.1, -0.1], [0.0, 0.0]])
        with self.assertRaises(EmptyInput):
            JointPmf.from_table(torch.zeros(0, 2))
        # Float noise below the renormalization threshold is absorbed.
        j = JointPmf.from_table([[0.25 + 1e-10, 0.25], [0.25, 0.25]])
        self.assertAlmostEqual(float(j.p.sum()), 1.0, places=14)
        with self.assertRaises(InvalidPmf):
            Channel.from_table([[0.5, 0.4], [0.5, 0.5]])

    def test_entropy(self) -> None:
        self.assertAlmostEqual(entropy([0.5, 0.5]), 1.0, places=12)
        self.assertEqual(entropy([1.0]), 0.0)
        self.assertAlmostEqual(entropy([0.25] * 4), 2.0, places=12)
        self.assertAlmostEqual(
            entropy([0.5, 0.5], base=math.e), math.log(2.0), places=12
        )
        self.assertAlmostEqual(binary_entropy(0.5), 1.0, places=12)
        self.assertEqual(binary_entropy(0.0), 0.0)
        with self.assertRaises(DomainError):
            binary_entropy(1.5)

    def test_renyi_entropy(self) -> None:
        p = [0.5, 0.25, 0.25]
        self.assertAlmostEqual(renyi_entropy(p, 1.0), entropy(p), places=12)
        self.assertAlmostEqual(renyi_entropy(p, math.inf), 1.0, places=12)
        self.assertAlmostEqual(renyi_entropy(p, 2.0), -math.log2(0.375), places=12)
        self.assertAlmostEqual(renyi_entropy([0.25] * 4, 0.5), 2.0, places=12)

    def test_mutual_information(self) -> None:
        independent = JointPmf.from_table(torch.outer(
            torch.tensor([0.2, 0.3, 0.5], dtype=torch.float64),
            torch.tensor([0.1, 0.2, 0.3, 0.4], dtype=torch.float64),
        ))
        self.assertAlmostEqual(mutual_information(independent), 0.0, places=12)
        expected = 1.0 - binary_entropy(0.1)
        self.assertAlmostEqual(mutual_information(_bsc_joint(0.1)), expected, places=12)
        self.assertAlmostEqual(expected, 0.531004, places=6)
        identity = JointPmf.from_table(torch.eye(4, dtype=torch.float64) / 4.0)
        self.assertAlmostEqual(mutual_information(identity), 2.0, places=12)

    def test_chi_squared(self) -> None:
        self.assertAlmostEqual(chi_squared(_bsc_joint(0.1)), 0.64, places=12)
        identity = JointPmf.from_table(torch.eye(3, dtype=torch.float64) / 3.0)
        self.assertAlmostEqual(chi_squared(identity), 2.0, places=12)

    def test_f_information(self) -> None:
        j = _bsc_joint(0.1)
        independent = JointPmf.from_table([[0.06, 0.14], [0.24, 0.56]])
        for f in [
            FGenerator.kl(),
            FGenerator.chi_sq(),
            FGenerator.total_variation(),
            FGenerator.custom(lambda x: (x.sqrt() - 1.0) ** 2),
        ]:
            self.assertAlmostEqual(f_information(independent, f), 0.0, places=12)
        self.assertAlmostEqual(
            f_information(j, FGenerator.kl(base=2.0)), mutual_information(j), places=12
        )
        # Total variation of the BSC(0.1) table: sum |p - p_x p_y| / 2.
        self.assertAlmostEqual(
            f_information(j, FGenerator.total_variation()), 0.4, places=12
        )
        with self.assertRaises(DomainError):
            FGenerator.custom(lambda x: x)

    # pyre-ignore[56]
    @given(
        m=st.integers(min_value=1, max_value=6),
        n=st.integers(min_value=1, max_value=6),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(
        deadline=None,
        verbosity=Verbosity.verbose,
        max_examples=100,
    )
    def test_functional_identities(self, m: int, n: int, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        j = random_joint(m, n, gen)
        torch.testing.assert_close(j.p.sum(dim=1), j.p_x, atol=1e-12, rtol=0.0)
        torch.testing.assert_close(j.p.sum(dim=0), j.p_y, atol=1e-12, rtol=0.0)
        self.assertAlmostEqual(
            f_information(j, FGenerator.kl()),
            mutual_information(j, base=math.e),
            delta=1e-10,
        )
        self.assertAlmostEqual(
            f_information(j, FGenerator.chi_sq()), chi_squared(j), delta=1e-10
        )
        mi = mutual_information(j)
        self.assertGreaterEqual(mi, 0.0)
        gap = float((j.p - torch.outer(j.p_x, j.p_y)).abs().max())
        if gap >= 1e-4:
            self.assertGreater(mi, 0.0)
        independent = JointPmf.from_table(torch.outer(j.p_x, j.p_y))
        self.assertLess(mutual_information(independent), 1e-12)

    def test_kl_divergence(self) -> None:
        self.assertEqual(kl_divergence([0.3, 0.7], [0.3, 0.7]), 0.0)
        self.assertAlmostEqual(kl_divergence([1.0, 0.0], [0.5, 0.5]), 1.0, places=12)
        self.assertAlmostEqual(
            kl_divergence([0.9, 0.1], [0.5, 0.5]), 1.0 - binary_entropy(0.1), places=12
        )
        with self.assertRaises(SupportMismatch):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_empirical_joint(self) -> None:
        j, xs, ys = empirical_joint([("a", 0), ("a", 0), ("b", 1), ("b", 1)])
        torch.testing.assert_close(
            j.p, torch.tensor([[0.5, 0.0], [0.0, 0.5]], dtype=torch.float64)
        )
        self.assertEqual((xs, ys), (["a", "b"], [0, 1]))
        j, _, _ = empirical_joint([("a", 0)] * 5)
        torch.testing.assert_close(j.p, torch.ones(1, 1, dtype=torch.float64))
        j, _, _ = empirical_joint([("a", 0), ("a", 1)])
        torch.testing.assert_close(j.p, torch.tensor([[0.5, 0.5]], dtype=torch.float64))
        with self.assertRaises(EmptyInput):
            empirical_joint([])

    def test_file_formats(self) -> None:
        j, xs, ys = load_distribution(os.path.join(_FIXTURES, "bsc01.json"))
        self.assertEqual(xs, ["0", "1"])
        self.assertEqual(dump_distribution(j, xs, ys)["p"], j.tolist())
        samples = load_samples_csv(os.path.join(_FIXTURES, "samples.csv"), header=True)
        self.assertEqual(len(samples), 8)
        self.assertEqual(samples[0], ("a", "0"))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "raw.csv")
            with open(path, "w") as f:
                f.write("u,1\nv,2\n")
            self.assertEqual(
                load_samples_csv(path, header=False), [("u", "1"), ("v", "2")]
            )
            with open(path, "w") as f:
                f.write("u,1,3\n")
            with self.assertRaises(DimensionMismatch):
                load_samples_csv(path, header=False)

    def test_constructors(self) -> None:
        sc = symmetric_channel(4, 0.3)
        torch.testing.assert_close(sc.w.sum(dim=1), torch.ones(4, dtype=torch.float64))
        self.assertAlmostEqual(float(sc.w[0, 1]), 0.1, places=12)
        j = _bsc_joint(0.2)
        torch.testing.assert_close(conditional(j).w, bsc_channel(0.2).w)
        t = transpose(JointPmf.from_table([[0.1, 0.2, 0.3], [0.1, 0.2, 0.1]]))
        self.assertEqual((t.rows, t.cols), (3, 2))
        k = product(j, j)
        self.assertEqual((k.rows, k.cols), (4, 4))
        torch.testing.assert_close(k.p_x, torch.full((4,), 0.25, dtype=torch.float64))
        p = random_pmf(5, torch.Generator().manual_seed(3))
        self.assertTrue(bool((p > 0.0).all()))
        self.assertAlmostEqual(float(p.sum()), 1.0, places=12)
        torch.testing.assert_close(p, random_pmf(5, torch.Generator().manual_seed(3)))
        peaky = random_pmf(5, torch.Generator().manual_seed(3), concentration=0.05)
        self.assertAlmostEqual(float(peaky.sum()), 1.0, places=12)
        with self.assertRaises(DomainError):
            random_pmf(5, torch.Generator().manual_seed(3), concentration=0.0)


if __name__ == "__main__":
    unittest.main()
