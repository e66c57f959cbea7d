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
Principal inertia components: the singular spectrum of
Q = D_X^{-1/2} P D_Y^{-1/2} with the trivial singular value 1 removed, the
principal functions attached to it and the quantities that follow from it
(k-correlation, maximal correlation, MMSE decomposition, tensorization,
data-processing comparisons).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import gin
import torch

from piclab.common import (
    CONDITION_LIMIT,
    DegenerateFunction,
    DimensionMismatch,
    IndexOutOfRange,
    InconsistentDecomposition,
    NotConforming,
    PicKernel,
    TIE_TOL,
)
from piclab.modules.dist import ArrayLike, as_tensor, Channel, JointPmf
from piclab.ops.svd import complete_basis, svd

logger: logging.Logger = logging.getLogger(__name__)

# Singular values this close to 1 are snapped to 1.
_SNAP_TOL: float = 1e-10
# Entries below this magnitude are skipped when fixing the sign of f_k.
_SIGN_TOL: float = 1e-12


@dataclass(frozen=True)
class PicDecomposition:
    lambdas: torch.Tensor
    f_funcs: torch.Tensor
    g_funcs: torch.Tensor
    sigma_full: torch.Tensor
    p_x: torch.Tensor
    p_y: torch.Tensor
    # 1-based inclusive index ranges of tied PICs.
    ties: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.lambdas.numel()


@dataclass(frozen=True)
class MmseReport:
    variance: float
    coeffs: torch.Tensor
    mmse: float


@dataclass(frozen=True)
class DpiReport:
    lhs: torch.Tensor
    rhs: torch.Tensor
    lambda1_yz: float
    passed: bool


def q_matrix(j: JointPmf) -> torch.Tensor:
    return j.p / j.p_x.sqrt().unsqueeze(1) / j.p_y.sqrt().unsqueeze(0)


def _tie_clusters(lambdas: torch.Tensor) -> List[Tuple[int, int]]:
    ties = []
    start = 0
    values = lambdas.tolist()
    for i in range(1, len(values) + 1):
        if i < len(values) and abs(values[i - 1] - values[i]) < TIE_TOL:
            continue
        if i - start > 1:
            ties.append((start + 1, i))
        start = i
    return ties


def _check_conditioning(p: torch.Tensor, name: str) -> None:
    ratio = float(p.max() / p.min())
    if ratio > CONDITION_LIMIT:
        logger.warning(
            f"{name} spans {ratio:.3e} in magnitude; principal functions on its "
            "smallest atoms are numerically unreliable"
        )


@gin.configurable
def decompose(
    j: JointPmf,
    tol: float = 1e-6,
    kernel: PicKernel = PicKernel.JACOBI,
) -> PicDecomposition:
    m, n = j.rows, j.cols
    _check_conditioning(j.p_x, "p_X")
    _check_conditioning(j.p_y, "p_Y")
    sx, sy = j.p_x.sqrt(), j.p_y.sqrt()
    q = q_matrix(j)

    _, s_q, _ = svd(q, kernel=kernel)
    top = float(s_q[0])
    if abs(top - 1.0) > tol:
        raise InconsistentDecomposition(
            f"largest singular value of Q is {top:.12f}, expected 1 within {tol}"
        )

    d = min(m, n) - 1
    if d == 0:
        one = torch.ones(1, dtype=q.dtype)
        return PicDecomposition(
            lambdas=torch.zeros(0, dtype=q.dtype),
            f_funcs=torch.ones(m, 1, dtype=q.dtype),
            g_funcs=torch.ones(n, 1, dtype=q.dtype),
            sigma_full=one,
            p_x=j.p_x.clone(),
            p_y=j.p_y.clone(),
        )

    # Q = sx sy^T + B_X C B_Y^T with B_X, B_Y orthonormal complements of sx, sy.
    b_x = complete_basis(sx.unsqueeze(1))[:, 1:]
    b_y = complete_basis(sy.unsqueeze(1))[:, 1:]
    u_c, s_c, vh_c = svd(b_x.t() @ q @ b_y, kernel=kernel)
    u = b_x @ u_c[:, :d]
    v = b_y @ vh_c[:d, :].t()
    sigma = s_c[:d].clone()
    if float(sigma.max()) > 1.0 + _SNAP_TOL:
        logger.warning(f"non-trivial singular value {float(sigma.max())} above 1")
    sigma = torch.where((sigma - 1.0).abs() <= _SNAP_TOL, torch.ones_like(sigma), sigma)
    sigma = sigma.clamp(0.0, 1.0)

    f = u / sx.unsqueeze(1)
    g = v / sy.unsqueeze(1)
    for k in range(d):
        nonzero = torch.nonzero(f[:, k].abs() > _SIGN_TOL).flatten()
        if nonzero.numel() > 0 and float(f[nonzero[0], k]) < 0.0:
            f[:, k] = -f[:, k]
            g[:, k] = -g[:, k]

    lambdas = (sigma * sigma).clamp(0.0, 1.0)
    ties = _tie_clusters(lambdas)
    if ties:
        logger.info(f"tied PICs at {ties}; principal functions there are not unique")
    return PicDecomposition(
        lambdas=lambdas,
        f_funcs=torch.cat([torch.ones(m, 1, dtype=q.dtype), f], dim=1),
        g_funcs=torch.cat([torch.ones(n, 1, dtype=q.dtype), g], dim=1),
        sigma_full=torch.cat([torch.ones(1, dtype=q.dtype), sigma]),
        p_x=j.p_x.clone(),
        p_y=j.p_y.clone(),
        ties=ties,
    )


def k_correlation(dec: PicDecomposition, k: int) -> float:
    if not 1 <= k <= dec.d:
        raise IndexOutOfRange(f"k-correlation needs 1 <= k <= {dec.d}, got {k}")
    return float(dec.lambdas[:k].sum())


def maximal_correlation(dec: PicDecomposition) -> float:
    if dec.d == 0:
        return 0.0
    return float(dec.lambdas[0].sqrt())


def conditional_expectation(j: JointPmf, f: ArrayLike) -> torch.Tensor:
    """
    E[f(X) | Y = y] for every y.
    """
    ft = as_tensor(f)
    if ft.numel() != j.rows:
        raise DimensionMismatch(f"f has {ft.numel()} entries, X has {j.rows} symbols")
    return (j.p.t() @ ft) / j.p_y


def direct_mmse(j: JointPmf, f: ArrayLike) -> float:
    ft = as_tensor(f)
    ce = conditional_expectation(j, ft)
    return max(float(j.p_x @ (ft * ft)) - float(j.p_y @ (ce * ce)), 0.0)


def mmse_of_function(j: JointPmf, dec: PicDecomposition, f: ArrayLike) -> MmseReport:
    ft = as_tensor(f)
    if ft.numel() != j.rows:
        raise DimensionMismatch(f"f has {ft.numel()} entries, X has {j.rows} symbols")
    centered = ft - float(j.p_x @ ft)
    norm = float((j.p_x @ (centered * centered)).sqrt())
    if norm < 1e-12:
        raise DegenerateFunction("f is constant under p_X")
    coeffs = (j.p_x * centered) @ dec.f_funcs[:, 1:] / norm
    explained = float((coeffs * coeffs * dec.lambdas).sum())
    variance = norm * norm
    mmse = min(max(variance * (1.0 - explained), 0.0), variance)
    return MmseReport(variance=variance, coeffs=coeffs, mmse=mmse)


def tensorize(dec_a: PicDecomposition, dec_b: PicDecomposition) -> torch.Tensor:
    la = torch.cat([torch.ones(1, dtype=dec_a.lambdas.dtype), dec_a.lambdas])
    lb = torch.cat([torch.ones(1, dtype=dec_b.lambdas.dtype), dec_b.lambdas])
    products = torch.outer(la, lb).flatten()[1:]
    return torch.sort(products, descending=True).values


def is_conforming(j: JointPmf, tol: float = 1e-9) -> bool:
    if j.rows != j.cols:
        return False
    if float((j.p - j.p.t()).abs().max()) > tol:
        return False
    sym = (j.p + j.p.t()) / 2.0
    return float(torch.linalg.eigvalsh(sym).min()) >= -tol


def flatten_to_max(j: JointPmf, dec: PicDecomposition) -> Channel:
    """
    sigma_1 I + (1 - sigma_1) 1 p_X^T: the channel whose PICs all equal lambda_1.
    """
    if not is_conforming(j):
        raise NotConforming("flattening needs a square, symmetric, PSD joint")
    sigma1 = maximal_correlation(dec)
    m = j.rows
    w = sigma1 * torch.eye(m, dtype=j.p.dtype) + (1.0 - sigma1) * j.p_x.unsqueeze(0)
    return Channel.from_table(w)


def principal_projector(dec: PicDecomposition, cluster: Tuple[int, int]) -> torch.Tensor:
    """
    Projector onto span(D_X^{1/2} f_i, ..., D_X^{1/2} f_j) for the 1-based
    inclusive range (i, j); invariant under rotations inside a tie cluster.
    """
    lo, hi = cluster
    if not 1 <= lo <= hi <= dec.d:
        raise IndexOutOfRange(f"cluster {cluster} outside 1..{dec.d}")
    u = dec.f_funcs[:, lo : hi + 1] * dec.p_x.sqrt().unsqueeze(1)
    return u @ u.t()


def _drop_zero_columns(p: torch.Tensor) -> torch.Tensor:
    return p[:, p.sum(dim=0) > 0.0]


def dpi_check(j_xy: JointPmf, ch_yz: Channel) -> DpiReport:
    if ch_yz.rows != j_xy.cols:
        raise DimensionMismatch(
            f"channel has {ch_yz.rows} inputs but Y has {j_xy.cols} symbols"
        )
    j_xz = JointPmf.from_table(_drop_zero_columns(j_xy.p @ ch_yz.w))
    j_yz = JointPmf.from_table(_drop_zero_columns(j_xy.p_y.unsqueeze(1) * ch_yz.w))
    dec_yz = decompose(j_yz)
    lambda1 = float(dec_yz.lambdas[0]) if dec_yz.d > 0 else 0.0
    lhs = decompose(j_xz).lambdas
    rhs = lambda1 * decompose(j_xy).lambdas
    k = max(lhs.numel(), rhs.numel())
    lhs_p = torch.cat([lhs, lhs.new_zeros(k - lhs.numel())])
    rhs_p = torch.cat([rhs, rhs.new_zeros(k - rhs.numel())])
    passed = bool((lhs_p <= rhs_p + 1e-8).all())
    if not passed:
        logger.warning(f"data-processing inequality violated: {lhs_p} > {rhs_p}")
    return DpiReport(lhs=lhs, rhs=rhs, lambda1_yz=lambda1, passed=passed)


def to_json(dec: PicDecomposition) -> Dict[str, Any]:
    return {
        "lambdas": dec.lambdas.tolist(),
        "f": dec.f_funcs.tolist(),
        "g": dec.g_funcs.tolist(),
        "ties": [list(t) for t in dec.ties],
    }
