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
Brute-force verifiers. They work on plain numpy copies of the distribution
tables and share no numerical code with the modules they check.
"""

import logging
from dataclasses import dataclass
from enum import Enum, unique
from typing import Callable, List, Tuple

import gin
import numpy as np
import torch
from scipy import optimize

from piclab.common import (
    IndexOutOfRange,
    InfeasibleMass,
    NonConvergence,
    TooLarge,
)
from piclab.modules.dist import JointPmf

logger: logging.Logger = logging.getLogger(__name__)

MASTER_SEED: int = 0x5EED


@unique
class OracleMethod(Enum):
    EXHAUSTIVE_GRID = "ExhaustiveGrid"
    VARIATIONAL = "Variational"
    ALTERNATING_CE = "AlternatingCE"
    ALTERNATING_LP = "AlternatingLP"
    EXHAUSTIVE_FUNCTIONS = "ExhaustiveFunctions"
    BISECTION = "Bisection"


@unique
class OneBitMetric(Enum):
    MI = "MI"
    PE = "Pe"


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: OracleMethod
    evaluations: int

    def __post_init__(self) -> None:
        assert self.evaluations > 0, f"oracle made {self.evaluations} evaluations"
        object.__setattr__(self, "value", float(self.value))

    def to_json(self) -> dict:  # pyre-ignore[24]
        return {
            "value": self.value,
            "method": self.method.value,
            "evaluations": self.evaluations,
        }


def _table(j: JointPmf) -> np.ndarray:
    return j.p.detach().cpu().numpy().astype(np.float64).copy()


def _ce_operator(p: np.ndarray) -> np.ndarray:
    """
    K f = E[E[f(X) | Y] | X] as an m x m matrix, with constants projected out.
    """
    px, py = p.sum(axis=1), p.sum(axis=0)
    k = (p / px[:, None]) @ (p / py[None, :]).T
    return k - np.outer(np.ones_like(px), px)


def _p_norm(f: np.ndarray, px: np.ndarray) -> float:
    return float(np.sqrt(np.sum(px * f * f)))


def _project(f: np.ndarray, px: np.ndarray, basis: List[np.ndarray]) -> np.ndarray:
    f = f - np.sum(px * f)
    for b in basis:
        f = f - np.sum(px * f * b) * b
    return f


def _dominant(
    k: np.ndarray,
    px: np.ndarray,
    basis: List[np.ndarray],
    rng: np.random.Generator,
    starts: int,
    squarings: int,
    polish: int,
) -> tuple:  # pyre-ignore[24]
    """
    Largest Rayleigh quotient of K over centered f orthogonal to `basis`:
    repeated squaring of the projected operator, then alternating
    conditional-expectation steps. Returns (value, f, evaluations, converged).
    """
    m = k.shape[0]
    proj = np.eye(m) - np.outer(np.ones(m), px)
    for b in basis:
        proj = proj - np.outer(b, px * b)
    op = proj @ k @ proj
    power = op.copy()
    evaluations = 0
    for _ in range(squarings):
        scale = np.abs(power).max()
        if scale == 0.0:
            break
        power = (power / scale) @ (power / scale)
        evaluations += 1

    best_value, best_f, converged = 0.0, np.zeros(m), False
    for _ in range(starts):
        f = _project(rng.standard_normal(m), px, basis)
        f = power @ f
        norm = _p_norm(f, px)
        if norm < 1e-300 or not np.isfinite(norm):
            converged = True
            continue
        f = f / norm
        previous = np.inf
        for _ in range(polish):
            g = op @ f
            evaluations += 1
            value = float(np.sum(px * f * g))
            norm = _p_norm(g, px)
            if norm < 1e-300:
                value, converged = 0.0, True
                break
            f = _project(g / norm, px, basis)
            f = f / _p_norm(f, px)
            if abs(value - previous) <= 1e-14:
                converged = True
                break
            previous = value
        if value > best_value:
            best_value, best_f = value, f
    return best_value, best_f, max(evaluations, 1), converged


@gin.configurable
def maxcorr_by_ace(
    j: JointPmf,
    iters: int = 500,
    seed: int = 0,
    starts: int = 4,
    squarings: int = 60,
) -> OracleResult:
    p = _table(j)
    px = p.sum(axis=1)
    rng = np.random.default_rng(seed)
    value, _, evaluations, converged = _dominant(
        _ce_operator(p), px, [], rng, starts, squarings, iters
    )
    if not converged:
        raise NonConvergence(
            f"alternating conditional expectation unsettled after {iters} steps"
        )
    return OracleResult(
        value=float(np.sqrt(max(value, 0.0))),
        method=OracleMethod.ALTERNATING_CE,
        evaluations=evaluations,
    )


def _constraint_basis(weights: np.ndarray, constraints: List[np.ndarray]) -> np.ndarray:
    """
    Columns spanning {f : sum(w * f * c) = 0 for every c}, orthonormal in L2(w).
    """
    root = np.sqrt(weights)
    cons = np.stack([root * c for c in constraints], axis=1)
    q, _ = np.linalg.qr(cons, mode="complete")
    return q[:, cons.shape[1] :] / root[:, None]


def _neg_correlation(
    p: np.ndarray, basis_f: np.ndarray, basis_g: np.ndarray
) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """
    -E[f(X) g(Y)] / (|f| |g|) for f = basis_f a, g = basis_g b, with its
    gradient in z = (a, b).
    """
    pt = torch.from_numpy(p)
    px, py = pt.sum(dim=1), pt.sum(dim=0)
    bf, bg = torch.from_numpy(basis_f), torch.from_numpy(basis_g)
    split = basis_f.shape[1]

    def fun(z: np.ndarray) -> Tuple[float, np.ndarray]:
        zt = torch.tensor(z, dtype=torch.float64, requires_grad=True)
        f, g = bf @ zt[:split], bg @ zt[split:]
        corr = (f @ pt @ g) / torch.sqrt((px * f * f).sum() * (py * g * g).sum())
        (-corr).backward()
        return -corr.item(), zt.grad.detach().numpy().copy()

    return fun


@gin.configurable
def variational_pic(
    j: JointPmf,
    k: int = 1,
    samples: int = 8,
    seed: int = 0,
    iters: int = 500,
    gtol: float = 1e-11,
) -> OracleResult:
    """
    k-th largest value of max E[f(X) g(Y)]^2 over unit-variance centered pairs,
    each f constrained orthogonal to the maximisers already found. Every level
    is a BFGS ascent from `samples` random starts on the constraint set.
    """
    p = _table(j)
    m, n = p.shape
    if not 1 <= k <= m - 1:
        raise IndexOutOfRange(f"variational search needs 1 <= k <= {m - 1}, got {k}")
    px, py = p.sum(axis=1), p.sum(axis=0)
    rng = np.random.default_rng(seed)
    basis_g = _constraint_basis(py, [np.ones(n)])
    found: List[np.ndarray] = []
    total, corr = 0, 0.0
    for level in range(1, k + 1):
        basis_f = _constraint_basis(px, [np.ones(m)] + found)
        if basis_f.shape[1] == 0 or basis_g.shape[1] == 0:
            corr = 0.0
            break
        fun = _neg_correlation(p, basis_f, basis_g)
        best = None
        for _ in range(samples):
            z0 = rng.standard_normal(basis_f.shape[1] + basis_g.shape[1])
            res = optimize.minimize(
                fun,
                z0,
                jac=True,
                method="BFGS",
                options={"maxiter": iters, "gtol": gtol},
            )
            total += int(res.nfev)
            if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
                best = res
        if best is None:
            raise NonConvergence(
                f"variational search found no finite point at level {level}"
            )
        logger.debug(f"level {level}: {best.message} after {best.nit} iterations")
        corr = max(-float(best.fun), 0.0)
        f = basis_f @ best.x[: basis_f.shape[1]]
        found.append(f / _p_norm(f, px))
    return OracleResult(
        value=corr * corr, method=OracleMethod.VARIATIONAL, evaluations=max(total, 1)
    )


def pe_exhaustive(j: JointPmf, limit: int = 10**6) -> OracleResult:
    p = _table(j)
    m, n = p.shape
    if m * n > limit:
        raise TooLarge(f"{m}x{n} table exceeds the exhaustive limit {limit}")
    correct = 0.0
    for y in range(n):
        best = 0.0
        for x in range(m):
            if p[x, y] > best:
                best = p[x, y]
        correct += best
    return OracleResult(
        value=max(1.0 - float(correct), 0.0),
        method=OracleMethod.EXHAUSTIVE_FUNCTIONS,
        evaluations=m * n,
    )


def _knapsack(gain: np.ndarray, weight: np.ndarray, mass: float) -> np.ndarray:
    """
    argmax gain . x over x in [0, 1]^m with weight . x = mass.
    """
    x = np.zeros_like(gain)
    remaining = mass
    for i in np.argsort(-gain / weight, kind="stable"):
        if remaining <= 0.0:
            break
        take = min(1.0, remaining / weight[i])
        x[i] = take
        remaining -= take * weight[i]
    return x


@gin.configurable
def z_bilinear_max(
    j: JointPmf,
    a: float,
    b: float,
    iters: int = 100,
    seed: int = 0,
    starts: int = 16,
) -> OracleResult:
    """
    Lower witness for max x^T P y over x in [0,1]^m, y in [0,1]^n with
    p_X . x = a and p_Y . y = b, by alternating exact LP steps.
    """
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise InfeasibleMass(f"masses a={a}, b={b} must lie in [0, 1]")
    p = _table(j)
    px, py = p.sum(axis=1), p.sum(axis=0)
    rng = np.random.default_rng(seed)
    best, evaluations = -np.inf, 0
    for _ in range(starts):
        y = _knapsack(rng.random(py.size) * py, py, b)
        value = -np.inf
        for _ in range(iters):
            x = _knapsack(p @ y, px, a)
            y = _knapsack(p.T @ x, py, b)
            evaluations += 1
            new_value = float(x @ p @ y)
            if new_value <= value + 1e-15:
                value = max(value, new_value)
                break
            value = new_value
        best = max(best, value)
    return OracleResult(
        value=float(best),
        method=OracleMethod.ALTERNATING_LP,
        evaluations=max(evaluations, 1),
    )


def _mi_bits(joint: np.ndarray) -> np.ndarray:
    """
    Mutual information in bits of a batch of 2 x n tables (F x 2 x n).
    """
    pb = joint.sum(axis=2, keepdims=True)
    py = joint.sum(axis=1, keepdims=True)
    ref = pb * py
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0.0, joint * np.log2(joint / ref), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


def one_bit_exhaustive(
    j: JointPmf,
    metric: OneBitMetric = OneBitMetric.MI,
    max_inputs: int = 20,
    chunk: int = 1 << 14,
) -> OracleResult:
    """
    Extremum over non-constant b: X -> {0, 1}: max I(b(X); Y) or min P_e(b(X) | Y).
    """
    p = _table(j)
    m = p.shape[0]
    if m > max_inputs:
        raise TooLarge(f"2^{m} functions exceed the exhaustive limit 2^{max_inputs}")
    if m < 2:
        raise TooLarge("a single input symbol admits no non-constant function")
    best = -np.inf if metric == OneBitMetric.MI else np.inf
    total = 2**m - 2
    for start in range(1, 2**m - 1, chunk):
        masks = np.arange(start, min(start + chunk, 2**m - 1))
        bits = ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(np.float64)
        joint = np.stack([(1.0 - bits) @ p, bits @ p], axis=1)
        if metric == OneBitMetric.MI:
            best = max(best, float(_mi_bits(joint).max()))
        else:
            pe = 1.0 - joint.max(axis=1).sum(axis=1)
            best = min(best, float(pe.min()))
    return OracleResult(
        value=max(float(best), 0.0),
        method=OracleMethod.EXHAUSTIVE_FUNCTIONS,
        evaluations=total,
    )


def corpus(
    count: int = 200, seed: int = MASTER_SEED, max_size: int = 4
) -> List[JointPmf]:
    """
    Shared random instances: alphabets 2..max_size, Dirichlet tables; every
    tenth instance is an independent product.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        m, n = rng.integers(2, max_size + 1, size=2)
        if i % 10 == 9:
            table = np.outer(rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n)))
        else:
            table = rng.dirichlet(np.ones(m * n)).reshape(m, n)
        table = table + 1e-6
        table = table / table.sum()
        out.append(JointPmf.from_table(torch.from_numpy(table)))
    return out


def fano_rate_bisection(
    p_x: np.ndarray, theta: float, iters: int = 200
) -> OracleResult:
    """
    Plain bisection for h_b(d) + d log2(m - 1) = H(X) - theta on [0, (m-1)/m].
    """
    p = np.asarray(p_x, dtype=np.float64)
    m = p.size
    nz = p[p > 0.0]
    rhs = float(-(nz * np.log2(nz)).sum()) - theta

    def lhs(d: float) -> float:
        h = 0.0
        for v in (d, 1.0 - d):
            if v > 0.0:
                h -= v * np.log2(v)
        return h + (d * np.log2(m - 1) if m > 2 else 0.0)

    if m < 2 or rhs <= 0.0:
        return OracleResult(value=0.0, method=OracleMethod.BISECTION, evaluations=1)
    lo, hi = 0.0, (m - 1) / m
    if lhs(hi) <= rhs:
        return OracleResult(value=hi, method=OracleMethod.BISECTION, evaluations=1)
    for _ in range(iters):
        mid = (lo + hi) / 2.0
        if lhs(mid) < rhs:
            lo = mid
        else:
            hi = mid
    return OracleResult(
        value=(lo + hi) / 2.0, method=OracleMethod.BISECTION, evaluations=iters
    )
