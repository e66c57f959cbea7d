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
Finite joint distributions, channels and the information functionals built on
them. Every tensor is float64; every value object is frozen after validation.
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum, unique
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
import torch
from torch.distributions import Dirichlet

from piclab.common import (
    DimensionMismatch,
    DomainError,
    DTYPE,
    EmptyInput,
    InvalidPmf,
    log_fn,
    PROB_TOL,
    RENORM_TOL,
    SupportMismatch,
    ZeroMassRow,
)

logger: logging.Logger = logging.getLogger(__name__)

ArrayLike = Union[torch.Tensor, Sequence[float], Sequence[Sequence[float]]]
Label = Union[str, int]


def as_tensor(x: ArrayLike) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.detach().to(DTYPE).clone()
    return torch.tensor(x, dtype=DTYPE)


def _normalized(t: torch.Tensor, what: str) -> torch.Tensor:
    """
    Checks non-negativity and unit mass of t along its last dim. Deviations up
    to RENORM_TOL are treated as float noise and renormalized.
    """
    if not bool(torch.isfinite(t).all()):
        raise InvalidPmf(f"{what} has non-finite entries")
    if bool((t < -PROB_TOL).any()):
        raise InvalidPmf(f"{what} has negative entries (min {float(t.min()):.3e})")
    t = t.clamp(min=0.0)
    dev = float((t.sum(dim=-1) - 1.0).abs().max())
    if dev > RENORM_TOL:
        raise InvalidPmf(f"{what} does not sum to 1 (deviation {dev:.3e})")
    if dev > PROB_TOL:
        t = t / t.sum(dim=-1, keepdim=True)
    return t


def validate_pmf(p: ArrayLike, what: str = "pmf") -> torch.Tensor:
    t = as_tensor(p)
    if t.dim() != 1:
        raise DimensionMismatch(f"{what} must be a vector, got shape {tuple(t.shape)}")
    if t.numel() == 0:
        raise EmptyInput(f"{what} is empty")
    return _normalized(t, what)


@dataclass(frozen=True)
class JointPmf:
    """
    Joint pmf of (X, Y) as an m x n table with X on rows. Construct through
    `JointPmf.from_table`, which enforces full support of both marginals.
    """

    p: torch.Tensor
    p_x: torch.Tensor
    p_y: torch.Tensor

    @property
    def rows(self) -> int:
        return self.p.shape[0]

    @property
    def cols(self) -> int:
        return self.p.shape[1]

    @classmethod
    def from_table(cls, table: ArrayLike) -> "JointPmf":
        t = as_tensor(table)
        if t.dim() != 2:
            raise DimensionMismatch(
                f"joint table must be 2-dimensional, got shape {tuple(t.shape)}"
            )
        if t.numel() == 0:
            raise EmptyInput("joint table is empty")
        t = _normalized(t.reshape(-1), "joint table").reshape(t.shape)
        p_x = t.sum(dim=1)
        p_y = t.sum(dim=0)
        zero_rows = torch.nonzero(p_x <= 0.0).flatten().tolist()
        if zero_rows:
            raise ZeroMassRow(f"rows {zero_rows} of the joint table have zero mass")
        zero_cols = torch.nonzero(p_y <= 0.0).flatten().tolist()
        if zero_cols:
            raise ZeroMassRow(f"columns {zero_cols} of the joint table have zero mass")
        return cls(p=t, p_x=p_x, p_y=p_y)

    def tolist(self) -> List[List[float]]:
        return self.p.tolist()


@dataclass(frozen=True)
class Channel:
    """
    Row-stochastic table w[i, j] = p(y=j | x=i).
    """

    w: torch.Tensor

    @property
    def rows(self) -> int:
        return self.w.shape[0]

    @property
    def cols(self) -> int:
        return self.w.shape[1]

    @classmethod
    def from_table(cls, table: ArrayLike) -> "Channel":
        t = as_tensor(table)
        if t.dim() != 2 or t.numel() == 0:
            raise DimensionMismatch(
                f"channel must be a non-empty matrix, got shape {tuple(t.shape)}"
            )
        return cls(w=_normalized(t, "channel row"))


@unique
class FTag(Enum):
    KL = "KL"
    CHI_SQ = "ChiSq"
    TOTAL_VARIATION = "TotalVariation"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class FGenerator:
    """
    Convex generator f with f(1) = 0. `base` only affects KL, f(x) = x log_base x.
    """

    tag: FTag
    fn: Optional[Callable[[torch.Tensor], torch.Tensor]] = None
    base: float = math.e

    @classmethod
    def kl(cls, base: float = math.e) -> "FGenerator":
        return cls(tag=FTag.KL, base=base)

    @classmethod
    def chi_sq(cls) -> "FGenerator":
        return cls(tag=FTag.CHI_SQ)

    @classmethod
    def total_variation(cls) -> "FGenerator":
        return cls(tag=FTag.TOTAL_VARIATION)

    @classmethod
    def custom(cls, fn: Callable[[torch.Tensor], torch.Tensor]) -> "FGenerator":
        one = fn(torch.ones(1, dtype=DTYPE))
        if abs(float(one)) > 1e-12:
            raise DomainError(f"custom generator must satisfy f(1) = 0, got {float(one)}")
        return cls(tag=FTag.CUSTOM, fn=fn)

    def __call__(self, t: Union[torch.Tensor, float]) -> torch.Tensor:
        x = t if isinstance(t, torch.Tensor) else torch.tensor(t, dtype=DTYPE)
        if self.tag == FTag.KL:
            if bool((x < 0.0).any()):
                raise DomainError("x log x is undefined for negative arguments")
            return torch.xlogy(x, x) / log_fn(self.base)
        elif self.tag == FTag.CHI_SQ:
            return x * x - 1.0
        elif self.tag == FTag.TOTAL_VARIATION:
            return (x - 1.0).abs() / 2.0
        else:
            assert self.fn is not None, "custom generator without a function"
            out = self.fn(x)
            if not bool(torch.isfinite(out).all()):
                raise DomainError("custom generator evaluated outside its domain")
            return out


def f_divergence(p: torch.Tensor, q: torch.Tensor, f: FGenerator) -> float:
    """
    D_f(p || q) = sum q f(p / q). Cells with q = p = 0 contribute nothing.
    """
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes {tuple(p.shape)} and {tuple(q.shape)} differ")
    if bool(((q <= 0.0) & (p > 0.0)).any()):
        raise DomainError("f-divergence needs support(p) within support(q)")
    mask = q > 0.0
    qm, pm = q[mask], p[mask]
    return float((qm * f(pm / qm)).sum())


def joint_from_channel(p_x: ArrayLike, ch: Channel) -> JointPmf:
    px = validate_pmf(p_x, "p_x")
    if px.numel() != ch.rows:
        raise DimensionMismatch(
            f"p_x has {px.numel()} entries but the channel has {ch.rows} rows"
        )
    zero = torch.nonzero(px <= 0.0).flatten().tolist()
    if zero:
        raise ZeroMassRow(f"p_x has zero mass at {zero}; restrict the support first")
    return JointPmf.from_table(px.unsqueeze(1) * ch.w)


def entropy(p: ArrayLike, base: float = 2.0) -> float:
    t = validate_pmf(p)
    return float(-torch.xlogy(t, t).sum()) / log_fn(base)


def binary_entropy(
    x: Union[float, torch.Tensor], base: float = 2.0
) -> Union[float, torch.Tensor]:
    """
    h_b(x) elementwise; floats in, float out.
    """
    t = x if isinstance(x, torch.Tensor) else torch.tensor(x, dtype=DTYPE)
    if bool(((t < -PROB_TOL) | (t > 1.0 + PROB_TOL)).any()):
        raise DomainError(f"binary entropy argument outside [0, 1]: {x}")
    t = t.clamp(0.0, 1.0)
    h = -(torch.xlogy(t, t) + torch.xlogy(1.0 - t, 1.0 - t)) / log_fn(base)
    return h if isinstance(x, torch.Tensor) else float(h)


def renyi_entropy(p: ArrayLike, alpha: float, base: float = 2.0) -> float:
    t = validate_pmf(p)
    if alpha < 0.0:
        raise DomainError(f"Renyi order must be non-negative, got {alpha}")
    if alpha == 1.0:
        return entropy(t, base)
    if math.isinf(alpha):
        return -math.log(float(t.max())) / log_fn(base)
    support = t[t > 0.0]
    return math.log(float((support**alpha).sum())) / (1.0 - alpha) / log_fn(base)


def mutual_information(j: JointPmf, base: float = 2.0) -> float:
    ref = j.p_x.unsqueeze(1) * j.p_y.unsqueeze(0)
    mask = j.p > 0.0
    value = float((j.p[mask] * torch.log(j.p[mask] / ref[mask])).sum()) / log_fn(base)
    assert value >= -1e-10, f"negative mutual information {value}"
    return max(value, 0.0)


def chi_squared(j: JointPmf) -> float:
    ref = j.p_x.unsqueeze(1) * j.p_y.unsqueeze(0)
    return max(float((j.p * j.p / ref).sum()) - 1.0, 0.0)


def f_information(j: JointPmf, f: FGenerator) -> float:
    ref = j.p_x.unsqueeze(1) * j.p_y.unsqueeze(0)
    return f_divergence(j.p, ref, f)


def kl_divergence(p: ArrayLike, q: ArrayLike, base: float = 2.0) -> float:
    pt = validate_pmf(p, "p")
    qt = validate_pmf(q, "q")
    if pt.shape != qt.shape:
        raise DimensionMismatch(f"p has {pt.numel()} entries, q has {qt.numel()}")
    bad = torch.nonzero((pt > 0.0) & (qt <= 0.0)).flatten().tolist()
    if bad:
        raise SupportMismatch(f"p has mass where q vanishes at {bad}")
    mask = pt > 0.0
    value = float((pt[mask] * torch.log(pt[mask] / qt[mask])).sum()) / log_fn(base)
    return max(value, 0.0)


def conditional(j: JointPmf) -> Channel:
    return Channel(w=j.p / j.p_x.unsqueeze(1))


def transpose(j: JointPmf) -> JointPmf:
    return JointPmf(p=j.p.t().contiguous(), p_x=j.p_y.clone(), p_y=j.p_x.clone())


def product(j_a: JointPmf, j_b: JointPmf) -> JointPmf:
    """
    Joint of ((X1, X2), (Y1, Y2)) for independent pairs; row index i1 * m2 + i2.
    """
    return JointPmf.from_table(torch.kron(j_a.p, j_b.p))


def empirical_joint(
    samples: Sequence[Tuple[Label, Label]],
) -> Tuple[JointPmf, List[Label], List[Label]]:
    """
    Plug-in pmf of (x, y) pairs. Labels keep their order of first appearance.
    """
    if len(samples) == 0:
        raise EmptyInput("no samples")
    xs, ys = zip(*samples)
    x_codes, x_labels = pd.factorize(pd.Series(xs, dtype=object))
    y_codes, y_labels = pd.factorize(pd.Series(ys, dtype=object))
    counts = torch.zeros(len(x_labels), len(y_labels), dtype=DTYPE)
    counts.index_put_(
        (torch.from_numpy(x_codes), torch.from_numpy(y_codes)),
        torch.ones(len(samples), dtype=DTYPE),
        accumulate=True,
    )
    logger.info(
        f"Empirical joint from {len(samples)} samples: "
        f"{len(x_labels)} x-labels, {len(y_labels)} y-labels"
    )
    return (
        JointPmf.from_table(counts / len(samples)),
        list(x_labels),
        list(y_labels),
    )


def load_samples_csv(path: str, header: bool = True) -> List[Tuple[Label, Label]]:
    try:
        df = pd.read_csv(path, header=0 if header else None, dtype=str)
    except pd.errors.EmptyDataError:
        raise EmptyInput(f"{path} has no samples")
    if df.shape[1] != 2:
        raise DimensionMismatch(f"{path} must have exactly two columns, got {df.shape[1]}")
    if df.isnull().values.any():
        raise EmptyInput(f"{path} has missing values")
    return list(zip(df.iloc[:, 0].tolist(), df.iloc[:, 1].tolist()))


def dump_distribution(
    j: JointPmf,
    x_labels: Optional[Sequence[Label]] = None,
    y_labels: Optional[Sequence[Label]] = None,
) -> Dict[str, Any]:
    return {
        "p": j.tolist(),
        "x_labels": list(x_labels) if x_labels is not None else list(range(j.rows)),
        "y_labels": list(y_labels) if y_labels is not None else list(range(j.cols)),
    }


def parse_distribution(
    record: Dict[str, Any],
) -> Tuple[JointPmf, List[Label], List[Label]]:
    if "p" not in record:
        raise EmptyInput("distribution record has no 'p' table")
    j = JointPmf.from_table(record["p"])
    x_labels = list(record.get("x_labels", range(j.rows)))
    y_labels = list(record.get("y_labels", range(j.cols)))
    if len(x_labels) != j.rows or len(y_labels) != j.cols:
        raise DimensionMismatch(
            f"{len(x_labels)}x{len(y_labels)} labels for a {j.rows}x{j.cols} table"
        )
    return j, x_labels, y_labels


def load_distribution(path: str) -> Tuple[JointPmf, List[Label], List[Label]]:
    with open(path) as f:
        record = json.load(f)
    return parse_distribution(record)


def random_pmf(
    m: int, generator: torch.Generator, concentration: float = 1.0
) -> torch.Tensor:
    """
    Symmetric Dirichlet draw seeded from `generator`, floored away from zero.
    Smaller `concentration` gives peakier pmfs.
    """
    if concentration <= 0.0:
        raise DomainError(f"concentration must be positive, got {concentration}")
    seed = int(torch.randint(0, 2**62, (1,), generator=generator))
    alpha = torch.full((m,), concentration, dtype=DTYPE)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        e = Dirichlet(alpha).sample()
    e = e + 1e-6
    return e / e.sum()


def random_joint(m: int, n: int, generator: torch.Generator) -> JointPmf:
    return JointPmf.from_table(random_pmf(m * n, generator).reshape(m, n))


def random_channel(m: int, n: int, generator: torch.Generator) -> Channel:
    rows = torch.stack([random_pmf(n, generator) for _ in range(m)])
    return Channel(w=rows)


def bsc_channel(delta: float) -> Channel:
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"crossover probability {delta} outside [0, 1]")
    return Channel(
        w=torch.tensor([[1.0 - delta, delta], [delta, 1.0 - delta]], dtype=DTYPE)
    )


def symmetric_channel(q: int, eps: float) -> Channel:
    """
    (eps, q)-symmetric channel: stays with prob 1 - eps, else uniform on the rest.
    """
    if q < 2 or not 0.0 <= eps <= 1.0:
        raise DomainError(f"invalid symmetric channel q={q}, eps={eps}")
    w = torch.full((q, q), eps / (q - 1), dtype=DTYPE)
    w.fill_diagonal_(1.0 - eps)
    return Channel(w=w)


def erasure_channel(m: int, erasure: float) -> Channel:
    """
    m inputs, m + 1 outputs; the last output is the erasure symbol.
    """
    if m < 1 or not 0.0 <= erasure <= 1.0:
        raise DomainError(f"invalid erasure channel m={m}, erasure={erasure}")
    w = torch.zeros(m, m + 1, dtype=DTYPE)
    w[:, :m] = torch.eye(m, dtype=DTYPE) * (1.0 - erasure)
    w[:, m] = erasure
    return Channel(w=w)
