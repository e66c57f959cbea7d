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
Lower bounds on estimation error from PICs, mutual information and maximal
correlation, together with the exact MAP quantities they bound.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum, unique
from typing import Any, Dict, List, Tuple

import gin
import torch
from scipy import optimize

from piclab.common import (
    DimensionMismatch,
    DomainError,
    DTYPE,
    IndexOutOfRange,
    num_workers,
    TooLarge,
    UnsortedInput,
)
from piclab.modules.dist import (
    ArrayLike,
    as_tensor,
    binary_entropy,
    entropy,
    JointPmf,
    validate_pmf,
)

logger: logging.Logger = logging.getLogger(__name__)

_SORT_TOL: float = 1e-15


@unique
class BoundKind(Enum):
    PIC_FANO = "PicFano"
    CHI_SQ_UNIFORM = "ChiSqUniform"
    MAX_CORR = "MaxCorr"
    FANO_MI = "FanoMI"
    WITSENHAUSEN = "Witsenhausen"


@dataclass(frozen=True)
class ErrorBound:
    value: float
    kind: BoundKind
    params: Dict[str, Any] = field(default_factory=dict)
    vacuous: bool = False

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "params": self.params,
            "vacuous": self.vacuous,
        }


def make_bound(raw: float, kind: BoundKind, params: Dict[str, Any]) -> ErrorBound:
    """
    Clamps raw into [0, 1]; a non-positive raw value is flagged vacuous.
    """
    vacuous = raw <= 0.0
    if vacuous:
        logger.debug(f"{kind.value} bound is vacuous (raw {raw:.6g})")
    return ErrorBound(
        value=min(max(raw, 0.0), 1.0), kind=kind, params=params, vacuous=vacuous
    )


@dataclass(frozen=True)
class AggregatedPmf:
    p_u: torch.Tensor
    m: int
    M: int


def map_error(j: JointPmf) -> float:
    return min(max(1.0 - float(j.p.max(dim=0).values.sum()), 0.0), 1.0)


def advantage(j: JointPmf) -> float:
    return max(1.0 - map_error(j) - float(j.p_x.max()), 0.0)


def _check_sorted(p: torch.Tensor, what: str) -> None:
    if p.numel() > 1 and bool((p[1:] > p[:-1] + _SORT_TOL).any()):
        raise UnsortedInput(f"{what} must be sorted in descending order")


def _sorted_desc(p: torch.Tensor) -> Tuple[torch.Tensor, List[int]]:
    values, perm = torch.sort(p, descending=True, stable=True)
    return values, perm.tolist()


def pad_lambdas(lambdas: ArrayLike, m: int) -> torch.Tensor:
    """
    Pads the PIC vector with zeros to length m - 1.
    """
    lam = as_tensor(lambdas).reshape(-1)
    if lam.numel() > max(m - 1, 0):
        raise DimensionMismatch(f"{lam.numel()} PICs for an alphabet of size {m}")
    if lam.numel() > 0 and bool(((lam < -1e-12) | (lam > 1.0 + 1e-12)).any()):
        raise DomainError(f"PICs must lie in [0, 1], got {lam.tolist()}")
    _check_sorted(lam, "PIC vector")
    return torch.cat([lam.clamp(0.0, 1.0), lam.new_zeros(max(m - 1, 0) - lam.numel())])


def f0(alpha: float, p_x: ArrayLike, lambdas: ArrayLike) -> float:
    p = validate_pmf(p_x, "p_x")
    _check_sorted(p, "p_x")
    lam = pad_lambdas(lambdas, p.numel())
    c = torch.cat([(lam - alpha).clamp(min=0.0), lam.new_zeros(1)])
    c_prev = torch.cat([c.new_zeros(1), c[:-1]])
    # Terms i = 2..m use lambda_{i-1}, c_i and c_{i-1}.
    tail = float((p[1:] * (lam + c[1:] - c_prev[1:])).sum())
    return tail + float(p[0]) * (float(c[0]) + alpha) - alpha * float(p @ p)


def f0_star(p_x: ArrayLike, lambdas: ArrayLike) -> Tuple[float, int]:
    """
    Closed-form minimum over alpha of f0 and the pivot index k* (1-based).
    """
    p = validate_pmf(p_x, "p_x")
    _check_sorted(p, "p_x")
    m = p.numel()
    lam = torch.cat([pad_lambdas(lambdas, m), p.new_zeros(1)])
    norm2 = float(p @ p)
    k_star = int(torch.nonzero(p >= norm2 - _SORT_TOL).flatten().max()) + 1
    head = float((lam[:k_star] * p[:k_star]).sum())
    tail = float((lam[k_star - 1 : m - 1] * p[k_star:]).sum())
    return head + tail - float(lam[k_star - 1]) * norm2, k_star


def _u_objective(beta: float, p: torch.Tensor, f0s: float) -> float:
    excess = (p - beta).clamp(min=0.0)
    return beta + math.sqrt(max(f0s + float(excess @ excess), 0.0))


@gin.configurable
def pic_fano_bound(
    p_x: ArrayLike,
    lambdas: ArrayLike,
    xatol: float = 1e-10,
) -> ErrorBound:
    raw_p = validate_pmf(p_x, "p_x")
    p, perm = _sorted_desc(raw_p)
    m = p.numel()
    lam = pad_lambdas(lambdas, m)
    if m == 1:
        return make_bound(0.0, BoundKind.PIC_FANO, {"permutation": perm})
    f0s, k_star = f0_star(p, lam)
    upper = float(p[1])

    # Convex in beta; the only kinks are at the atoms p_X(i).
    candidates = [0.0, upper] + [float(x) for x in p if 0.0 < float(x) < upper]
    res = optimize.minimize_scalar(
        _u_objective,
        bounds=(0.0, upper),
        args=(p, f0s),
        method="bounded",
        options={"xatol": xatol},
    )
    candidates.append(float(res.x))
    beta_star = min(candidates, key=lambda b: _u_objective(b, p, f0s))
    u = _u_objective(beta_star, p, f0s)
    return make_bound(
        1.0 - u,
        BoundKind.PIC_FANO,
        {
            "beta_star": beta_star,
            "f0_star": f0s,
            "k_star": k_star,
            "lambdas": lam.tolist(),
            "permutation": perm,
        },
    )


def chi2_uniform_bound(m: int, chi2: float) -> ErrorBound:
    if m < 1 or chi2 < 0.0:
        raise DomainError(f"invalid chi-square bound inputs m={m}, chi2={chi2}")
    raw = 1.0 - 1.0 / m - math.sqrt((m - 1) * chi2) / m
    return make_bound(raw, BoundKind.CHI_SQ_UNIFORM, {"m": m, "chi2": chi2})


def _check_rho(rho: float) -> None:
    if not -1e-12 <= rho <= 1.0 + 1e-12:
        raise DomainError(f"maximal correlation must lie in [0, 1], got {rho}")


def uniform_maxcorr_bound(m: int, rho: float) -> ErrorBound:
    """
    Uniform X on m symbols with every PIC raised to rho^2.
    """
    _check_rho(rho)
    if m < 1:
        raise DomainError(f"alphabet size must be positive, got {m}")
    raw = (1.0 - 1.0 / m) * (1.0 - rho)
    return make_bound(raw, BoundKind.MAX_CORR, {"m": m, "rho": rho})


def maxcorr_bound(p_x: ArrayLike, rho: float) -> ErrorBound:
    _check_rho(rho)
    p, _ = _sorted_desc(validate_pmf(p_x, "p_x"))
    spread = math.sqrt(max(1.0 - float(p @ p), 0.0))
    return make_bound(
        1.0 - float(p[0]) - rho * spread,
        BoundKind.MAX_CORR,
        {"rho": rho, "advantage_upper": rho * spread},
    )


def maxcorr_beta_bound(p_x: ArrayLike, rho: float, beta: float) -> ErrorBound:
    """
    1 - beta - sqrt(rho^2 (1 - |p|^2) + sum([p_i - beta]^+)^2), valid for any
    beta >= 0. Relaxing it at beta = p_X(2) gives `maxcorr_bound`.
    """
    _check_rho(rho)
    if beta < 0.0:
        raise DomainError(f"beta must be non-negative, got {beta}")
    p, _ = _sorted_desc(validate_pmf(p_x, "p_x"))
    excess = (p - beta).clamp(min=0.0)
    inner = rho * rho * max(1.0 - float(p @ p), 0.0) + float(excess @ excess)
    return make_bound(
        1.0 - beta - math.sqrt(inner), BoundKind.MAX_CORR, {"rho": rho, "beta": beta}
    )


def fano_mi_error_rate(p_x: ArrayLike, theta: float, base: float = 2.0) -> float:
    """
    Smallest d with h_b(d) + d log(m - 1) = H(X) - theta, the right side
    clamped to [0, log m].
    """
    p = validate_pmf(p_x, "p_x")
    m = p.numel()
    rhs = entropy(p, base) - theta
    if m < 2 or rhs <= 0.0:
        return 0.0
    d_max = (m - 1) / m
    log_tail = math.log(m - 1) / math.log(base)

    def residual(d: float) -> float:
        return float(binary_entropy(d, base)) + d * log_tail - rhs

    if residual(d_max) <= 0.0:
        return d_max
    return optimize.root_scalar(
        residual, bracket=[0.0, d_max], method="bisect", xtol=1e-12
    ).root


def fano_mi_bound(p_x: ArrayLike, theta: float, base: float = 2.0) -> ErrorBound:
    value = fano_mi_error_rate(p_x, theta, base)
    return make_bound(value, BoundKind.FANO_MI, {"theta": theta, "base": base})


def majorizes(p: ArrayLike, q: ArrayLike, tol: float = 1e-12) -> bool:
    """
    True when the sorted partial sums of p dominate those of q.
    """
    pt, qt = validate_pmf(p, "p"), validate_pmf(q, "q")
    size = max(pt.numel(), qt.numel())
    pt = torch.cat([pt, pt.new_zeros(size - pt.numel())])
    qt = torch.cat([qt, qt.new_zeros(size - qt.numel())])
    cp = torch.cumsum(torch.sort(pt, descending=True).values, 0)
    cq = torch.cumsum(torch.sort(qt, descending=True).values, 0)
    return bool((cp >= cq - tol).all())


def aggregate_gM(p_x: ArrayLike, M: int) -> AggregatedPmf:
    p, _ = _sorted_desc(validate_pmf(p_x, "p_x"))
    m = p.numel()
    if not 2 <= M <= m:
        raise IndexOutOfRange(f"M must satisfy 2 <= M <= {m}, got {M}")
    head = p[: m - M + 1].sum().reshape(1)
    p_u = torch.sort(torch.cat([head, p[m - M + 1 :]]), descending=True).values
    return AggregatedPmf(p_u=p_u, m=m, M=M)


def pem_bound_mi(
    p_x: ArrayLike,
    M: int,
    theta: float,
    base: float = 2.0,
    literal_min: bool = False,
) -> ErrorBound:
    """
    With literal_min the right side is min{H(U) - theta, 0}, which always
    yields 0; the default clamps with max{H(U) - theta, 0}.
    """
    agg = aggregate_gM(p_x, M)
    h_u = entropy(agg.p_u, base)
    if literal_min:
        value = 0.0
    else:
        value = fano_mi_error_rate(agg.p_u, theta, base)
    return make_bound(
        value,
        BoundKind.FANO_MI,
        {
            "M": M,
            "theta": theta,
            "H_U": h_u,
            "p_u": agg.p_u.tolist(),
            "clamp": "min" if literal_min else "max",
        },
    )


def pem_bound_rho(p_x: ArrayLike, M: int, rho: float) -> ErrorBound:
    _check_rho(rho)
    agg = aggregate_gM(p_x, M)
    spread = math.sqrt(max(1.0 - float(agg.p_u @ agg.p_u), 0.0))
    return make_bound(
        1.0 - float(agg.p_u[0]) - rho * spread,
        BoundKind.MAX_CORR,
        {"M": M, "rho": rho, "p_u": agg.p_u.tolist()},
    )


def adv_m_bound(rho: float, M: int) -> float:
    _check_rho(rho)
    if M < 2:
        raise IndexOutOfRange(f"M must be at least 2, got {M}")
    return rho * math.sqrt(1.0 - 1.0 / M)


def secret_error_bound_rho(
    p_x: ArrayLike, p_s: ArrayLike, M: int, rho: float
) -> ErrorBound:
    """
    Error bound for a secret S = g(X) with M values whose pmf is majorized by
    p_U. The bound evaluated at p_S dominates the one at p_U.
    """
    ps = validate_pmf(p_s, "p_s")
    if ps.numel() != M:
        raise DimensionMismatch(f"p_s has {ps.numel()} entries, expected M={M}")
    agg = aggregate_gM(p_x, M)
    if not majorizes(agg.p_u, ps):
        raise DomainError("p_U does not majorize p_S")
    at_s = maxcorr_bound(ps, rho)
    at_u = pem_bound_rho(p_x, M, rho)
    return make_bound(
        at_s.value,
        BoundKind.MAX_CORR,
        {"M": M, "rho": rho, "p_s": ps.tolist(), "bound_at_p_u": at_u.value},
    )


def _chunk_scores(
    p: torch.Tensor, p_x: torch.Tensor, M: int, start: int, stop: int
) -> Tuple[float, float]:
    m = p.shape[0]
    codes = torch.arange(start, stop)
    powers = M ** torch.arange(m)
    digits = (codes.unsqueeze(1) // powers.unsqueeze(0)) % M
    onehot = torch.nn.functional.one_hot(digits, M).to(DTYPE)
    surjective = (onehot.sum(dim=1) > 0).all(dim=1)
    if not bool(surjective.any()):
        return math.inf, -math.inf
    onehot = onehot[surjective]
    p_uy = torch.einsum("bim,in->bmn", onehot, p)
    pe = 1.0 - p_uy.max(dim=1).values.sum(dim=1)
    p_u_max = torch.einsum("bim,i->bm", onehot, p_x).max(dim=1).values
    adv = 1.0 - pe - p_u_max
    return float(pe.min()), float(adv.max())


@gin.configurable
def enumerate_surjections(
    j: JointPmf,
    M: int,
    max_maps: int = 10**7,
    chunk_size: int = 1 << 15,
) -> Tuple[float, float]:
    """
    Exhaustive (min P_e(f(X)|Y), max Adv(f(X)|Y)) over surjective f: [m] -> [M].
    """
    m = j.rows
    if not 2 <= M <= m:
        raise IndexOutOfRange(f"M must satisfy 2 <= M <= {m}, got {M}")
    total = M**m
    if total > max_maps:
        raise TooLarge(
            f"{M}^{m} = {total} maps exceeds the enumeration limit {max_maps}; "
            "use the bound operations instead"
        )
    starts = list(range(0, total, chunk_size))
    with ThreadPoolExecutor(max_workers=num_workers()) as pool:
        results = list(
            pool.map(
                lambda s: _chunk_scores(j.p, j.p_x, M, s, min(s + chunk_size, total)),
                starts,
            )
        )
    pe = min(r[0] for r in results)
    adv = max(r[1] for r in results)
    logger.info(f"enumerated {total} maps [{m}] -> [{M}]: P_e,M={pe:.6g}, Adv_M={adv:.6g}")
    return max(pe, 0.0), max(adv, 0.0)


def pem_exact(j: JointPmf, M: int) -> float:
    return enumerate_surjections(j, M)[0]


def adv_m_exact(j: JointPmf, M: int) -> float:
    return enumerate_surjections(j, M)[1]
