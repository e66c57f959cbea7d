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

import os
import tempfile
import unittest

import torch
from hypothesis import given, settings, strategies as st, Verbosity
from piclab.common import DomainError, TOutOfRange
from piclab.modules.dist import (
    bsc_channel,
    entropy,
    joint_from_channel,
    JointPmf,
    mutual_information,
    product,
    random_joint,
)
from piclab.modules.privacy import (
    analyze,
    delta_coefficient,
    delta_tensor,
    funnel_estimate,
    funnel_region_bounds,
    null_functions,
    perfect_privacy_map,
    ratio_monotonicity,
    t_star_lower,
    vstar_estimate,
)


def _bsc_joint(delta: float) -> JointPmf:
    return joint_from_channel([0.5, 0.5], bsc_channel(delta))


def _erasure_joint() -> JointPmf:
    # S a fair bit, X = S or erased with probability 1/2.
    return JointPmf.from_table([[0.25, 0.0, 0.25], [0.0, 0.25, 0.25]])


def _parity_joint() -> JointPmf:
    # X = S mod 2 for S uniform on four symbols.
    return JointPmf.from_table(
        [[0.25, 0.0], [0.0, 0.25], [0.25, 0.0], [0.0, 0.25]]
    )


def _leakage(j_sx: JointPmf, w: torch.Tensor) -> float:
    p_sy = j_sx.p @ w
    return mutual_information(JointPmf.from_table(p_sy[:, p_sy.sum(dim=0) > 0.0]))


class PrivacyTest(unittest.TestCase):
    def test_delta_coefficient(self) -> None:
        self.assertEqual(delta_coefficient(_erasure_joint()), 0.0)
        identity = JointPmf.from_table(torch.eye(2, dtype=torch.float64) / 2.0)
        self.assertAlmostEqual(delta_coefficient(identity), 1.0, places=10)
        self.assertAlmostEqual(delta_coefficient(_bsc_joint(0.1)), 0.64, places=10)
        j = _bsc_joint(0.1)
        self.assertAlmostEqual(
            delta_coefficient(product(j, j)), delta_tensor(0.64, 2), places=9
        )
        self.assertAlmostEqual(
            delta_coefficient(product(product(j, j), j)),
            delta_tensor(0.64, 3),
            places=9,
        )

    def test_delta_tensor(self) -> None:
        self.assertAlmostEqual(delta_tensor(0.64, 2), 0.4096, places=12)
        self.assertEqual(delta_tensor(1.0, 5), 1.0)
        self.assertEqual(delta_tensor(0.0, 3), 0.0)
        with self.assertRaises(DomainError):
            delta_tensor(1.5, 2)
        with self.assertRaises(DomainError):
            delta_tensor(0.5, 0)

    # pyre-ignore[56]
    @given(
        m=st.integers(min_value=2, max_value=5),
        n=st.integers(min_value=2, max_value=5),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(
        deadline=None,
        verbosity=Verbosity.verbose,
        max_examples=50,
    )
    def test_delta_is_variational_minimum(self, m: int, n: int, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        j = random_joint(m, n, gen)
        delta = delta_coefficient(j)
        if n > m:
            self.assertEqual(delta, 0.0)
            return
        p_x = j.p_y
        for _ in range(50):
            f = torch.randn(n, generator=gen, dtype=torch.float64)
            f = f - float(p_x @ f)
            f = f / float((p_x @ (f * f)).sqrt())
            ce = (j.p @ f) / j.p_x
            self.assertGreaterEqual(float(j.p_x @ (ce * ce)), delta - 1e-8)

    def test_region_bounds(self) -> None:
        t = torch.linspace(0.0, 1.0, 11, dtype=torch.float64)
        curves = funnel_region_bounds(_parity_joint(), t)
        torch.testing.assert_close(curves.lower, t)
        torch.testing.assert_close(curves.upper, t)

        # X = (S, W) with W an independent fair bit: H(X|S) = 1.
        j = JointPmf.from_table([[0.25, 0.25, 0.0, 0.0], [0.0, 0.0, 0.25, 0.25]])
        t = torch.linspace(0.0, 2.0, 9, dtype=torch.float64)
        curves = funnel_region_bounds(j, t)
        torch.testing.assert_close(
            curves.lower[:5], torch.zeros(5, dtype=torch.float64)
        )
        torch.testing.assert_close(curves.upper, t / 2.0)
        self.assertTrue(bool((curves.lower <= curves.upper).all()))
        self.assertTrue(ratio_monotonicity(curves.t, curves.lower))
        self.assertTrue(ratio_monotonicity(curves.t, curves.upper))

        independent = JointPmf.from_table([[0.06, 0.14], [0.24, 0.56]])
        curves = funnel_region_bounds(independent, [0.0, 0.5])
        self.assertLess(float(curves.upper.abs().max()), 1e-12)
        with self.assertRaises(TOutOfRange):
            funnel_region_bounds(j, [0.0, 2.5])
        self.assertFalse(ratio_monotonicity([1.0, 2.0], [1.0, 1.0]))

    def test_perfect_privacy_map(self) -> None:
        j = _erasure_joint()
        pp = perfect_privacy_map(j)
        assert pp is not None
        torch.testing.assert_close(
            pp.f, torch.tensor([1.0, 1.0, -1.0], dtype=torch.float64)
        )
        self.assertAlmostEqual(pp.epsilon, 0.5, places=12)
        self.assertAlmostEqual(pp.t0, 1.0, places=12)
        self.assertFalse(pp.borderline)
        self.assertLess(_leakage(j, pp.channel.w), 1e-9)
        self.assertEqual(
            sorted(pp.to_json().keys()), ["borderline", "channel", "epsilon", "f", "t0"]
        )
        self.assertAlmostEqual(t_star_lower(j), 1.0, places=12)

        self.assertIsNone(perfect_privacy_map(_bsc_joint(0.1)))
        self.assertEqual(t_star_lower(_bsc_joint(0.1)), 0.0)
        self.assertEqual(null_functions(_bsc_joint(0.1)).shape, (2, 0))

    # pyre-ignore[56]
    @given(
        m=st.integers(min_value=1, max_value=3),
        extra=st.integers(min_value=1, max_value=2),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(
        deadline=None,
        verbosity=Verbosity.verbose,
        max_examples=30,
    )
    def test_wide_joint_admits_perfect_privacy(
        self, m: int, extra: int, seed: int
    ) -> None:
        gen = torch.Generator().manual_seed(seed)
        j = random_joint(m, m + extra, gen)
        pp = perfect_privacy_map(j)
        assert pp is not None
        self.assertLess(_leakage(j, pp.channel.w), 1e-9)
        p_xy = j.p_y.unsqueeze(1) * pp.channel.w
        self.assertAlmostEqual(
            mutual_information(JointPmf.from_table(p_xy)), pp.t0, delta=1e-9
        )
        self.assertGreater(pp.t0, 0.0)
        f = null_functions(j)
        self.assertEqual(f.shape, (m + extra, extra))
        torch.testing.assert_close(
            f.t() @ (j.p_y.unsqueeze(1) * f),
            torch.eye(extra, dtype=torch.float64),
            atol=1e-9,
            rtol=0.0,
        )
        self.assertGreaterEqual(
            t_star_lower(j, restarts=2, steps=20, seed=seed), pp.t0 - 1e-12
        )

    def test_vstar_estimate(self) -> None:
        identity = JointPmf.from_table(torch.eye(3, dtype=torch.float64) / 3.0)
        self.assertAlmostEqual(
            vstar_estimate(identity, iters=20, random_starts=2), 1.0, places=9
        )
        independent = JointPmf.from_table([[0.06, 0.14], [0.24, 0.56]])
        self.assertAlmostEqual(
            vstar_estimate(independent, iters=20, random_starts=2), 0.0, places=9
        )
        self.assertLess(
            vstar_estimate(_erasure_joint(), iters=20, random_starts=2), 1e-6
        )
        j = _bsc_joint(0.2)
        self.assertEqual(
            vstar_estimate(j, iters=20, seed=7), vstar_estimate(j, iters=20, seed=7)
        )
        self.assertGreaterEqual(vstar_estimate(j, iters=20), 0.0)

    def test_funnel_estimate(self) -> None:
        budget = {"restarts": 2, "rounds": 2, "steps": 20}
        estimate = funnel_estimate(_parity_joint(), 0.6, **budget)
        self.assertAlmostEqual(estimate.value, 0.6, delta=1e-6)
        self.assertGreaterEqual(estimate.i_xy, 0.6 - 1e-9)
        self.assertEqual(funnel_estimate(_parity_joint(), 0.0, **budget).value, 0.0)

        estimate = funnel_estimate(_erasure_joint(), 0.5, **budget)
        self.assertLessEqual(estimate.value, 1e-6)
        self.assertEqual(estimate.channel.w.shape, (3, 4))
        with self.assertRaises(TOutOfRange):
            funnel_estimate(_erasure_joint(), 2.0, **budget)

        j = random_joint(3, 3, torch.Generator().manual_seed(11))
        t = entropy(j.p_y) * torch.tensor([0.2, 0.5], dtype=torch.float64)
        curves = funnel_region_bounds(j, t)
        for k in range(t.numel()):
            value = funnel_estimate(j, float(t[k]), **budget).value
            self.assertGreaterEqual(value, float(curves.lower[k]) - 1e-9)
            self.assertLessEqual(value, float(curves.upper[k]) + 1e-9)

        with tempfile.TemporaryDirectory() as tmp:
            estimate = funnel_estimate(
                _erasure_joint(), 0.5, tensorboard_log_path=tmp, **budget
            )
            self.assertGreater(len(estimate.history), 0)
            self.assertGreater(len(os.listdir(tmp)), 0)

    def test_analyze(self) -> None:
        analysis = analyze(_erasure_joint(), points=5)
        self.assertEqual(analysis.delta, 0.0)
        self.assertTrue(analysis.perfect_privacy_feasible)
        self.assertAlmostEqual(analysis.t_star_lower, 1.0, places=12)
        self.assertLess(analysis.vstar_upper, 1e-6)
        self.assertEqual(analysis.region_lower.numel(), 5)
        report = analysis.to_json()
        self.assertIsNotNone(report["constructed_map"])
        self.assertIsNone(report["estimate"])
        frame = analysis.curves_frame()
        self.assertEqual(list(frame.columns), ["t", "lower", "upper", "estimate"])

        analysis = analyze(
            _bsc_joint(0.1), t_grid=[0.0, 0.5], estimate_curve=True, restarts=2
        )
        self.assertAlmostEqual(analysis.delta, 0.64, places=10)
        self.assertFalse(analysis.perfect_privacy_feasible)
        self.assertEqual(analysis.t_star_lower, 0.0)
        self.assertIsNone(analysis.constructed_map)
        assert analysis.estimate is not None
        self.assertEqual(analysis.estimate.numel(), 2)
        self.assertGreaterEqual(
            float(analysis.estimate[1]), float(analysis.region_lower[1]) - 1e-9
        )

    def test_borderline_map_is_not_feasible(self) -> None:
        rho = 1e-7
        j = JointPmf.from_table(
            [
                [0.25 * (1.0 + rho), 0.25 * (1.0 - rho)],
                [0.25 * (1.0 - rho), 0.25 * (1.0 + rho)],
            ]
        )
        pp = perfect_privacy_map(j)
        assert pp is not None
        self.assertTrue(pp.borderline)
        analysis = analyze(j, points=3)
        self.assertAlmostEqual(analysis.delta, rho * rho, delta=1e-18)
        self.assertGreater(analysis.delta, 0.0)
        self.assertFalse(analysis.perfect_privacy_feasible)
        self.assertEqual(analysis.t_star_lower, 0.0)
        assert analysis.constructed_map is not None
        self.assertTrue(analysis.constructed_map.borderline)


if __name__ == "__main__":
    unittest.main()
