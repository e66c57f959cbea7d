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

"""
Binary additive-noise channels on {-1, 1}^n and one-bit estimation bounds.

Bit strings are indexed by integers: coordinate i is bit i, +1 maps to bit 0
and -1 to bit 1, so the all-ones string is index 0. A subset S of [n] is the
bitmask with bit i set when coordinate i + 1 is in S, and the channel
y = x * z (coordinatewise) becomes y = x XOR z on indices.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import gin
import torch

from piclab.common import (
    DimensionMismatch,
    DomainError,
    DTYPE,
    NotPowerOfTwo,
    TooLarge,
    UniformityRequired,
)
from piclab.modules.dist import (
    ArrayLike,
    as_tensor,
    binary_entropy,
    Channel,
    f_divergence,
    FGenerator,
    validate_pmf,
)
from piclab.ops.hadamard import hadamard_transform as _hadamard

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseSpectrum:
    n: int
    c: torch.Tensor
    p_z: torch.Tensor


@dataclass(frozen=True)
class OneBitInstance:
    a: float
    b: float
    z: float

    @classmethod
    def create(cls, a: float, b: float, z: float, tol: float = 1e-12) -> "OneBitInstance":
        if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
            raise DomainError(f"a={a}, b={b} must lie in [0, 1]")
        if z < -tol or z > min(a, b) + tol or z < a + b - 1.0 - tol:
            raise DomainError(f"z={z} gives a negative cell in the 2x2 table")
        return cls(a=a, b=b, z=z)

    def table(self) -> torch.Tensor:
        a, b, z = self.a, self.b, self.z
        return torch.tensor(
            [[z, a - z], [b - z, 1.0 - a - b + z]], dtype=DTYPE
        ).clamp(min=0.0)


@dataclass(frozen=True)
class MembershipReport:
    is_member: bool
    max_deviation: float
    p_z: Optional[torch.Tensor] = None
    c: Optional[torch.Tensor] = None


@dataclass(frozen=True)
class Violation:
    mask: int
    i_y: float
    i_flat: float
    kind: str


@dataclass(frozen=True)
class ConjectureReport:
    n: int
    delta: float
    max_I_bY: float
    argmax_mask: int
    bound_1_minus_hb: float
    functions: int
    violations: List[Violation] = field(default_factory=list)
    # Exploratory: largest I(B;Y) - I(B;Y~) over sampled randomized B.
    randomized_max_gap: Optional[float] = None


def _log2_size(size: int) -> int:
    if size < 1 or size & (size - 1) != 0:
        raise NotPowerOfTwo(f"length {size} is not a power of two")
    return size.bit_length() - 1


def hadamard_transform(v: ArrayLike) -> torch.Tensor:
    return _hadamard(as_tensor(v))


def noise_spectrum(p_z: ArrayLike) -> NoiseSpectrum:
    pz = validate_pmf(p_z, "noise pmf")
    n = _log2_size(pz.numel())
    c = 2.0 ** (n / 2.0) * hadamard_transform(pz)
    assert abs(float(c[0]) - 1.0) <= 1e-12, f"c_empty = {float(c[0])}"
    return NoiseSpectrum(n=n, c=c, p_z=pz)


def noise_from_spectrum(c: ArrayLike) -> torch.Tensor:
    ct = as_tensor(c)
    n = _log2_size(ct.numel())
    return hadamard_transform(ct) / 2.0 ** (n / 2.0)


def bsc_noise(n: int, delta: float) -> torch.Tensor:
    """
    i.i.d. flips with probability delta on each of n coordinates.
    """
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"crossover probability {delta} outside [0, 1]")
    idx = torch.arange(2**n)
    flips = torch.zeros(2**n, dtype=DTYPE)
    for i in range(n):
        flips += ((idx >> i) & 1).to(DTYPE)
    return delta**flips * (1.0 - delta) ** (n - flips)


def additive_channel(p_z: ArrayLike) -> Channel:
    pz = validate_pmf(p_z, "noise pmf")
    size = pz.numel()
    _log2_size(size)
    idx = torch.arange(size)
    return Channel(w=pz[idx.unsqueeze(1) ^ idx.unsqueeze(0)])


def additive_channel_pics(p_z: ArrayLike, p_x_uniform: bool) -> torch.Tensor:
    if not p_x_uniform:
        raise UniformityRequired(
            "parity spectra give the PICs only for uniform inputs; use pic.decompose"
        )
    c = noise_spectrum(p_z).c
    return torch.sort(c[1:] * c[1:], descending=True).values


def parity_membership_check(ch: Channel, tol: float = 1e-9) -> MembershipReport:
    """
    A channel is additive iff w[x, y] depends only on x XOR y; the noise pmf is
    then the row of the all-ones input.
    """
    if ch.rows != ch.cols:
        raise DimensionMismatch(f"channel is {ch.rows}x{ch.cols}, expected square")
    _log2_size(ch.rows)
    idx = torch.arange(ch.rows)
    shifted = ch.w[0][idx.unsqueeze(1) ^ idx.unsqueeze(0)]
    deviation = float((ch.w - shifted).abs().max())
    if deviation > tol:
        return MembershipReport(is_member=False, max_deviation=deviation)
    spectrum = noise_spectrum(ch.w[0])
    return MembershipReport(
        is_member=True, max_deviation=deviation, p_z=spectrum.p_z, c=spectrum.c
    )


def filter_posterior(spectrum: NoiseSpectrum, x: ArrayLike) -> torch.Tensor:
    """
    p(B=0 | Y=y) from p(B=0 | X=x) for uniform X: transform, scale by c, invert.
    """
    xt = as_tensor(x)
    if xt.numel() != spectrum.c.numel():
        raise DimensionMismatch(
            f"conditional has {xt.numel()} entries, spectrum has {spectrum.c.numel()}"
        )
    return hadamard_transform(spectrum.c * hadamard_transform(xt))


def one_bit_f_information(a: float, b: float, z: float, f: FGenerator) -> float:
    inst = OneBitInstance.create(a, b, z)
    table = inst.table()
    ref = torch.outer(table.sum(dim=1), table.sum(dim=0))
    return f_divergence(table, ref, f)


def _check_a_sigma(a: float, sigma1: float) -> None:
    if not 0.0 < a < 1.0:
        raise DomainError(f"a must lie strictly inside (0, 1), got {a}")
    if not 0.0 <= sigma1 <= 1.0:
        raise DomainError(f"sigma1 must lie in [0, 1], got {sigma1}")


def qary_f_information(
    a: float,
    sigma1: float,
    f: FGenerator,
    q: Optional[int] = None,
    strict: bool = False,
) -> float:
    """
    With q given, a*q must be an integer for the closed form to describe an
    (eps, q)-symmetric channel. Otherwise the value is an extrapolation: it is
    logged, or raised as DomainError under `strict`.
    """
    _check_a_sigma(a, sigma1)
    if q is not None and abs(a * q - round(a * q)) > 1e-9:
        if strict:
            raise DomainError(f"a*q = {a * q} is not an integer")
        logger.warning(
            f"a*q = {a * q} is not an integer; the closed form is an extrapolation"
        )
    c = (1.0 - a) / a
    args = torch.tensor([1.0 + sigma1 * c, 1.0 - sigma1, 1.0 + sigma1 / c], dtype=DTYPE)
    weights = torch.tensor([a * a, 2.0 * a * (1.0 - a), (1.0 - a) ** 2], dtype=DTYPE)
    return float((weights * f(args)).sum())


def qary_mutual_information(a: float, delta: float) -> float:
    """
    Bits; the KL case of `qary_f_information` with sigma1 = 1 - 2 delta.
    """
    _check_a_sigma(a, 1.0 - 2.0 * delta)
    return (
        binary_entropy(a)
        - a * binary_entropy(2.0 * delta * (1.0 - a))
        - (1.0 - a) * binary_entropy(2.0 * delta * a)
    )


def unbiased_estimator_info_bound(a: float, sigma1: float, f: FGenerator) -> float:
    return qary_f_information(a, sigma1, f)


def _check_abr(a: float, b: float, rho: float) -> None:
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0 and 0.0 <= rho <= 1.0):
        raise DomainError(f"a={a}, b={b}, rho={rho} must lie in [0, 1]")


def z_upper(a: float, b: float, rho: float) -> float:
    _check_abr(a, b, rho)
    return min(a * b + rho * math.sqrt(a * (1.0 - a) * b * (1.0 - b)), min(a, b))


def witsenhausen_bound(a: float, b: float, rho: float) -> float:
    """
    Pr{B != B^} >= a + b - 2ab - 2 rho sqrt(a(1-a)b(1-b)), without the cap of z_upper.
    """
    _check_abr(a, b, rho)
    raw = a + b - 2.0 * a * b - 2.0 * rho * math.sqrt(a * (1.0 - a) * b * (1.0 - b))
    return max(raw, 0.0)


def witsenhausen_bound_minb(a: float, rho: float) -> float:
    _check_abr(a, 0.0, rho)
    disc = 1.0 - 4.0 * a * (1.0 - a) * (1.0 - rho * rho)
    return (1.0 - math.sqrt(max(disc, 0.0))) / 2.0


def _binary_mi_bits(q0: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
    """
    I(B; Y) in bits for uniform X, rows of q0 = p(B=0 | x), channel w.
    """
    size = w.shape[0]
    joint0 = q0 @ w / size
    joint1 = (1.0 - q0) @ w / size
    p_y = w.sum(dim=0) / size
    pb0 = q0.sum(dim=1, keepdim=True) / size
    pb1 = 1.0 - pb0

    def term(joint: torch.Tensor, pb: torch.Tensor) -> torch.Tensor:
        ref = pb * p_y.unsqueeze(0)
        ratio = torch.where(
            joint > 0.0, joint / ref.clamp(min=1e-300), torch.ones_like(joint)
        )
        return (torch.xlogy(joint, ratio)).sum(dim=1)

    return ((term(joint0, pb0) + term(joint1, pb1)) / math.log(2.0)).clamp(min=0.0)


@gin.configurable
def conjecture_search(
    n: int,
    delta: float,
    randomized: int = 0,
    seed: int = 0,
    max_n: int = 4,
) -> ConjectureReport:
    """
    Exhaustive check, over deterministic non-constant b up to complement, that
    I(b(X); Y) <= I(b(X); Y~) <= 1 - h_b(delta) for the product BSC(delta) and
    its flattened symmetric channel. Violations are evidence, not proof.
    """
    if n < 1 or n > max_n:
        raise TooLarge(f"conjecture search enumerates 2^(2^n) functions; n={n} > {max_n}")
    if not 0.0 <= delta <= 0.5:
        raise DomainError(f"delta must lie in [0, 1/2], got {delta}")
    size = 2**n
    w = additive_channel(bsc_noise(n, delta)).w
    sigma1 = 1.0 - 2.0 * delta
    w_flat = sigma1 * torch.eye(size, dtype=DTYPE) + (1.0 - sigma1) / size

    # b(index 0) = 0 fixes the complement; mask 0 is the constant function.
    masks = torch.arange(2, 2**size - 1, 2)
    bits = ((masks.unsqueeze(1) >> torch.arange(size).unsqueeze(0)) & 1).to(DTYPE)
    q0 = 1.0 - bits
    i_y = _binary_mi_bits(q0, w)
    i_flat = _binary_mi_bits(q0, w_flat)
    bound = 1.0 - float(binary_entropy(delta))

    violations = []
    bad_flat = torch.nonzero(i_y > i_flat + 1e-10).flatten().tolist()
    bad_hb = torch.nonzero(i_y > bound + 1e-10).flatten().tolist()
    for k in sorted(set(bad_flat) | set(bad_hb)):
        kind = "flattened" if k in bad_flat else "one_minus_hb"
        violations.append(
            Violation(
                mask=int(masks[k]), i_y=float(i_y[k]), i_flat=float(i_flat[k]), kind=kind
            )
        )
    best = int(torch.argmax(i_y))

    randomized_gap = None
    if randomized > 0:
        gen = torch.Generator().manual_seed(seed)
        soft = torch.rand(randomized, size, generator=gen, dtype=DTYPE)
        gap = _binary_mi_bits(soft, w) - _binary_mi_bits(soft, w_flat)
        randomized_gap = float(gap.max())
        if randomized_gap > 1e-10:
            logger.info(
                f"randomized B exceeds the flattened channel by {randomized_gap:.3e}"
            )

    logger.info(
        f"conjecture search n={n}, delta={delta}: {masks.numel()} functions, "
        f"{len(violations)} violations"
    )
    return ConjectureReport(
        n=n,
        delta=delta,
        max_I_bY=float(i_y[best]),
        argmax_mask=int(masks[best]),
        bound_1_minus_hb=bound,
        functions=masks.numel(),
        violations=violations,
        randomized_max_gap=randomized_gap,
    )
