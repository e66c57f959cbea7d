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

import logging
from typing import Tuple

import torch

from piclab.common import NonConvergence

logger: logging.Logger = logging.getLogger(__name__)


def complete_basis(q: torch.Tensor) -> torch.Tensor:
    """
    Extends the orthonormal columns of q (m x k) to an m x m orthonormal
    matrix whose leading k columns are exactly q.
    """
    m, k = q.shape
    if k == m:
        return q.clone()
    if k == 0:
        return torch.eye(m, dtype=q.dtype)
    full, _ = torch.linalg.qr(q, mode="complete")
    return torch.cat([q, full[:, k:]], dim=1)


def _orthonormalize(u: torch.Tensor) -> torch.Tensor:
    """
    QR-cleans nearly orthonormal columns, keeping each column's direction.
    """
    if u.shape[1] == 0:
        return u
    q, r = torch.linalg.qr(u)
    diag = torch.diagonal(r)
    signs = torch.where(diag < 0.0, -torch.ones_like(diag), torch.ones_like(diag))
    return q * signs.unsqueeze(0)


def _hestenes(
    a: torch.Tensor,
    tol: float,
    max_sweeps: int,
) -> Tuple[torch.Tensor, torch.Tensor, int]:
    """
    One-sided Jacobi on a tall matrix. Returns the rotated columns (A V),
    the accumulated rotations V and the number of sweeps used.
    """
    n = a.shape[1]
    w = a.clone()
    v = torch.eye(n, dtype=a.dtype)
    # Columns below this squared norm are numerically zero and left alone.
    floor = (a.numel() * torch.finfo(a.dtype).eps * float(torch.linalg.norm(a))) ** 2
    off = float("inf")
    for sweep in range(1, max_sweeps + 1):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = float(w[:, i] @ w[:, i])
                beta = float(w[:, j] @ w[:, j])
                if min(alpha, beta) <= floor:
                    continue
                gamma = float(w[:, i] @ w[:, j])
                cos_ij = abs(gamma) / (alpha * beta) ** 0.5
                off = max(off, cos_ij)
                if cos_ij <= tol:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                sign = 1.0 if zeta >= 0.0 else -1.0
                t = sign / (abs(zeta) + (1.0 + zeta * zeta) ** 0.5)
                c = 1.0 / (1.0 + t * t) ** 0.5
                s = c * t
                wi, wj = w[:, i].clone(), w[:, j].clone()
                w[:, i] = c * wi - s * wj
                w[:, j] = s * wi + c * wj
                vi, vj = v[:, i].clone(), v[:, j].clone()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if off <= tol:
            return w, v, sweep
    raise NonConvergence(
        f"Jacobi SVD did not converge in {max_sweeps} sweeps (off={off:.3e})"
    )


def jacobi_svd(
    a: torch.Tensor,
    full_matrices: bool = False,
    tol: float = 1e-12,
    max_sweeps: int = 100,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Singular value decomposition a = U diag(S) Vh by one-sided (Hestenes)
    Jacobi rotations. Singular values are sorted in descending order.
    """
    assert a.dim() == 2, f"expected a matrix, got shape {tuple(a.shape)}"
    m, n = a.shape
    if m < n:
        u, s, vh = jacobi_svd(a.t(), full_matrices, tol, max_sweeps)
        return vh.t(), s, u.t()

    w, v, sweeps = _hestenes(a, tol, max_sweeps)
    logger.debug(f"Jacobi SVD of {m}x{n} converged in {sweeps} sweeps")
    s = torch.linalg.norm(w, dim=0)
    order = torch.argsort(s, descending=True)
    s, w, v = s[order], w[:, order], v[:, order]

    # Columns below the sweep tolerance are rounding noise; their left vectors
    # come from the orthogonal complement of the resolved ones.
    rel = max(tol, torch.finfo(a.dtype).eps * max(m, n))
    cutoff = rel * float(s[0]) if n > 0 else 0.0
    rank = int((s > cutoff).sum()) if cutoff > 0.0 else 0
    u = _orthonormalize(w[:, :rank] / s[:rank])
    if full_matrices:
        u = complete_basis(u)
    else:
        u = complete_basis(u)[:, :n]
    return u, s, v.t()
