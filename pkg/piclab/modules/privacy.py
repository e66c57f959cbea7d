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
Privacy-funnel analysis of a secret S and data X. Joints are oriented with S
on rows and X on columns. Information is measured in units of `base` (bits by
default).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import gin
import pandas as pd
import torch
from torch.utils.tensorboard import SummaryWriter

from piclab.common import (
    derive_seed,
    DomainError,
    DTYPE,
    NumericalFailure,
    num_workers,
    TOutOfRange,
)
from piclab.modules.dist import (
    ArrayLike,
    as_tensor,
    binary_entropy,
    Channel,
    entropy,
    JointPmf,
    mutual_information,
    random_pmf,
)
from piclab.modules.pic import decompose, q_matrix
from piclab.ops.svd import svd

logger: logging.Logger = logging.getLogger(__name__)

# A singular value of Q below this certifies perfect privacy.
CERTIFY_TOL: float = 1e-9
# Up to this singular value the construction is still attempted, flagged borderline.
BORDERLINE_TOL: float = 1e-6
# Feasibility slack on I(X;Y) >= t.
_FEAS_TOL: float = 1e-12
_T_TOL: float = 1e-12


@dataclass(frozen=True)
class PerfectPrivacyMap:
    channel: Channel
    f: torch.Tensor
    epsilon: float
    t0: float
    borderline: bool = False

    def to_json(self) -> Dict[str, Any]:
        return {
            "channel": self.channel.w.tolist(),
            "f": self.f.tolist(),
            "epsilon": self.epsilon,
            "t0": self.t0,
            "borderline": self.borderline,
        }


@dataclass(frozen=True)
class RegionCurves:
    t: torch.Tensor
    lower: torch.Tensor
    upper: torch.Tensor


@dataclass(frozen=True)
class FunnelEstimate:
    value: float
    i_xy: float
    channel: Channel
    # (restart, round, penalised objective) triples.
    history: List[Tuple[int, int, float]] = field(default_factory=list)


@dataclass(frozen=True)
class PrivacyAnalysis:
    delta: float
    vstar_upper: float
    curves: RegionCurves
    perfect_privacy_feasible: bool
    t_star_lower: float
    constructed_map: Optional[PerfectPrivacyMap] = None
    estimate: Optional[torch.Tensor] = None

    @property
    def region_lower(self) -> torch.Tensor:
        return self.curves.lower

    @property
    def region_upper(self) -> torch.Tensor:
        return self.curves.upper

    def to_json(self) -> Dict[str, Any]:
        return {
            "delta": self.delta,
            "vstar_upper": self.vstar_upper,
            "perfect_privacy_feasible": self.perfect_privacy_feasible,
            "t_star_lower": self.t_star_lower,
            "constructed_map": (
                self.constructed_map.to_json() if self.constructed_map else None
            ),
            "t": self.curves.t.tolist(),
            "region_lower": self.curves.lower.tolist(),
            "region_upper": self.curves.upper.tolist(),
            "estimate": self.estimate.tolist() if self.estimate is not None else None,
        }

    def curves_frame(self) -> pd.DataFrame:
        estimate = (
            self.estimate.tolist()
            if self.estimate is not None
            else [float("nan")] * self.curves.t.numel()
        )
        return pd.DataFrame(
            {
                "t": self.curves.t.tolist(),
                "lower": self.curves.lower.tolist(),
                "upper": self.curves.upper.tolist(),
                "estimate": estimate,
            }
        )


def _mi_table(p: torch.Tensor, base: float) -> torch.Tensor:
    """
    Mutual information of a joint table that may have empty rows or columns.
    Differentiable; log arguments are floored so zero cells have finite slope.
    """
    ref = p.sum(dim=1, keepdim=True) * p.sum(dim=0, keepdim=True)
    log_ratio = torch.log(p.clamp(min=1e-300)) - torch.log(ref.clamp(min=1e-300))
    value = (p * log_ratio).sum()
    return value / math.log(base)


def delta_coefficient(j_sx: JointPmf) -> float:
    """
    Smallest PIC of (S, X) when |X| <= |S|, else 0. A constant X has no
    non-trivial function, and is reported as 1.
    """
    if j_sx.cols > j_sx.rows:
        return 0.0
    if j_sx.cols == 1:
        return 1.0
    return float(decompose(j_sx).lambdas[-1])


def _smallest_singular(j_sx: JointPmf) -> float:
    if j_sx.cols > j_sx.rows:
        return 0.0
    if j_sx.cols == 1:
        return 1.0
    return math.sqrt(max(delta_coefficient(j_sx), 0.0))


def null_functions(j_sx: JointPmf, tol: float = CERTIFY_TOL) -> torch.Tensor:
    """
    Columns are zero-mean, unit-norm functions f of X with |E[f(X)|S]| <= tol,
    orthonormal under p_X. Empty (|X| x 0) when there is none.
    """
    p_x = j_sx.p_y
    sx = p_x.sqrt()
    _, s, vh = svd(q_matrix(j_sx), full_matrices=True)
    n = j_sx.cols
    sing = torch.cat([s, s.new_zeros(max(n - s.numel(), 0))])[:n]
    keep = [k for k in range(1, n) if float(sing[k]) <= tol]
    if not keep:
        return torch.zeros(n, 0, dtype=DTYPE)
    v = vh[keep, :].t()
    v = v - sx.unsqueeze(1) * (sx @ v).unsqueeze(0)
    v, _ = torch.linalg.qr(v)
    f = v / sx.unsqueeze(1)
    for k in range(f.shape[1]):
        nonzero = torch.nonzero(f[:, k].abs() > 1e-12).flatten()
        if nonzero.numel() > 0 and float(f[nonzero[0], k]) < 0.0:
            f[:, k] = -f[:, k]
    return f


def _conditional_norm(j_sx: JointPmf, f: torch.Tensor) -> float:
    """
    |E[f(X) | S]| under p_S.
    """
    ce = (j_sx.p @ f) / j_sx.p_x
    return float((j_sx.p_x @ (ce * ce)).sqrt())


def _utility_of(p_x: torch.Tensor, f: torch.Tensor, base: float) -> float:
    """
    log_base(2) - E[h_b(1/2 + f(X) / (2 max|f|))], evaluated exactly.
    """
    scale = float(f.abs().max())
    if scale <= 0.0:
        return 0.0
    args = (0.5 + f / (2.0 * scale)).clamp(0.0, 1.0)
    # Arguments within float noise of 0 or 1 carry no entropy.
    args = torch.where(args < 1e-12, torch.zeros_like(args), args)
    args = torch.where(args > 1.0 - 1e-12, torch.ones_like(args), args)
    h = binary_entropy(args, base)
    return math.log(2.0) / math.log(base) - float(p_x @ h)


@gin.configurable
def perfect_privacy_map(
    j_sx: JointPmf,
    tol: float = CERTIFY_TOL,
    borderline_tol: float = BORDERLINE_TOL,
    base: float = 2.0,
) -> Optional[PerfectPrivacyMap]:
    sigma_min = _smallest_singular(j_sx)
    if sigma_min > max(tol, borderline_tol):
        return None
    borderline = sigma_min > tol
    if borderline:
        logger.warning(
            f"smallest singular value {sigma_min:.3e} is borderline; "
            "constructing with recheck"
        )
    basis = null_functions(j_sx, max(tol, sigma_min * (1.0 + 1e-6)))
    if basis.shape[1] == 0:
        return None

    p_x = j_sx.p_y
    best = max(
        range(basis.shape[1]), key=lambda k: _utility_of(p_x, basis[:, k], base)
    )
    f = basis[:, best]
    leak = _conditional_norm(j_sx, f)
    if leak > 10.0 * max(tol, sigma_min):
        raise NumericalFailure(f"null function leaks |E[f|S]| = {leak:.3e}")

    epsilon = 1.0 / (2.0 * float(f.abs().max()))
    up = (0.5 + epsilon * f).clamp(0.0, 1.0)
    channel = Channel(w=torch.stack([up, 1.0 - up], dim=1))
    t0 = _utility_of(p_x, f, base)
    logger.info(f"perfect-privacy map with t0 = {t0:.6g} (borderline={borderline})")
    return PerfectPrivacyMap(
        channel=channel, f=f.clone(), epsilon=epsilon, t0=t0, borderline=borderline
    )


def _check_t(t: torch.Tensor, h_x: float) -> None:
    if t.numel() > 0 and (float(t.min()) < -_T_TOL or float(t.max()) > h_x + _T_TOL):
        raise TOutOfRange(f"t values must lie in [0, H(X)] = [0, {h_x:.6g}]")


def default_t_grid(j_sx: JointPmf, points: int = 64, base: float = 2.0) -> torch.Tensor:
    return torch.linspace(0.0, entropy(j_sx.p_y, base), points, dtype=DTYPE)


def funnel_region_bounds(
    j_sx: JointPmf, t_grid: ArrayLike, base: float = 2.0
) -> RegionCurves:
    t = as_tensor(t_grid).reshape(-1)
    h_x = entropy(j_sx.p_y, base)
    _check_t(t, h_x)
    t = t.clamp(0.0, h_x)
    i_sx = mutual_information(j_sx, base)
    h_x_given_s = max(h_x - i_sx, 0.0)
    lower = (t - h_x_given_s).clamp(min=0.0)
    upper = t * (i_sx / h_x) if h_x > 0.0 else torch.zeros_like(t)
    return RegionCurves(t=t, lower=torch.minimum(lower, upper), upper=upper)


def ratio_monotonicity(t: ArrayLike, values: ArrayLike, tol: float = 1e-12) -> bool:
    """
    Whether values / t is non-decreasing over the positive t samples.
    """
    tt, vv = as_tensor(t).reshape(-1), as_tensor(values).reshape(-1)
    mask = tt > 0.0
    ratio = vv[mask] / tt[mask]
    order = torch.argsort(tt[mask])
    ratio = ratio[order]
    return bool((ratio[1:] >= ratio[:-1] - tol).all())


def delta_tensor(delta1: float, n: int) -> float:
    if not 0.0 <= delta1 <= 1.0 or n < 1:
        raise DomainError(
            f"delta_tensor needs delta in [0, 1] and n >= 1, got {delta1}, {n}"
        )
    return delta1**n


@gin.configurable
def t_star_lower(
    j_sx: JointPmf,
    restarts: int = 16,
    steps: int = 300,
    lr: float = 0.05,
    seed: int = 0,
    base: float = 2.0,
) -> float:
    """
    Best value of log(2) - E[h_b(1/2 + f/(2|f|_inf))] over the null space of
    E[. | S]; 0 when that space is trivial.
    """
    basis = null_functions(j_sx, CERTIFY_TOL)
    k = basis.shape[1]
    if k == 0:
        return 0.0
    p_x = j_sx.p_y
    best = max(_utility_of(p_x, basis[:, i], base) for i in range(k))
    if k == 1:
        return max(best, 0.0)

    log2 = math.log(2.0)
    for r in range(restarts):
        gen = torch.Generator().manual_seed(derive_seed(seed, r))
        a = torch.randn(k, generator=gen, dtype=DTYPE).requires_grad_()
        opt = torch.optim.Adam([a], lr=lr)
        for _ in range(steps):
            f = basis @ a
            args = (0.5 + f / (2.0 * f.abs().max())).clamp(1e-12, 1.0 - 1e-12)
            h = -(args * args.log() + (1.0 - args) * (1.0 - args).log()) / log2
            loss = p_x @ h
            opt.zero_grad()
            loss.backward()
            opt.step()
        best = max(best, _utility_of(p_x, (basis @ a).detach(), base))
    return max(best, 0.0)


def _ratio(
    q_x: torch.Tensor, p_x: torch.Tensor, p_s: torch.Tensor, s_given_x: torch.Tensor
) -> torch.Tensor:
    q_s = s_given_x @ q_x
    num = (q_s * (q_s.clamp(min=1e-300).log() - p_s.log())).sum()
    den = (q_x * (q_x.clamp(min=1e-300).log() - p_x.log())).sum()
    return num / den


def _vstar_restart(
    start: torch.Tensor,
    p_x: torch.Tensor,
    p_s: torch.Tensor,
    s_given_x: torch.Tensor,
    iters: int,
    lr: float,
    floor: float,
) -> float:
    best = math.inf
    logits = start.clamp(min=1e-300).log().clone().requires_grad_()
    opt = torch.optim.Adam([logits], lr=lr)
    for _ in range(iters + 1):
        q = torch.softmax(logits, dim=0)
        if float((q.detach() - p_x).abs().sum()) >= floor:
            value = _ratio(q, p_x, p_s, s_given_x)
            best = min(best, value.detach().item())
            opt.zero_grad()
            value.backward()
            opt.step()
        else:
            break
    return best


@gin.configurable
def vstar_estimate(
    j_sx: JointPmf,
    iters: int = 200,
    seed: int = 0,
    random_starts: int = 8,
    eta: float = 0.5,
    lr: float = 0.05,
    trust_floor: float = 1e-6,
) -> float:
    """
    Upper estimate of inf_{q_X != p_X} D(q_S || p_S) / D(q_X || p_X), from
    starts along the principal and null directions plus random simplex points.
    """
    p_s, p_x = j_sx.p_x, j_sx.p_y
    s_given_x = j_sx.p / p_x.unsqueeze(0)
    g_funcs = decompose(j_sx).g_funcs
    directions = [g_funcs[:, k] for k in range(1, g_funcs.shape[1])]
    null = null_functions(j_sx, CERTIFY_TOL)
    directions += [null[:, k] for k in range(null.shape[1])]
    starts = []
    for f in directions:
        scale = float(f.abs().max())
        if scale > 0.0:
            starts.append(p_x * (1.0 + eta * f / scale))
    for r in range(random_starts):
        gen = torch.Generator().manual_seed(derive_seed(seed, r))
        starts.append(random_pmf(j_sx.cols, gen))
    starts = [q / q.sum() for q in starts]
    starts = [q for q in starts if float((q - p_x).abs().sum()) >= trust_floor]
    if not starts:
        logger.warning("no admissible start for the v* estimate")
        return 1.0

    with ThreadPoolExecutor(max_workers=num_workers()) as pool:
        values = list(
            pool.map(
                lambda q: _vstar_restart(
                    q, p_x, p_s, s_given_x, iters, lr, trust_floor
                ),
                starts,
            )
        )
    estimate = max(min(values), 0.0)
    logger.info(f"v* estimate {estimate:.6g} from {len(starts)} starts")
    return estimate


def _exact_info(j_sx: JointPmf, w: torch.Tensor, base: float) -> Tuple[float, float]:
    """
    (I(S;Y), I(X;Y)) for the channel w from X.
    """
    p_sy = j_sx.p @ w
    p_xy = j_sx.p_y.unsqueeze(1) * w
    return float(_mi_table(p_sy, base).clamp(min=0.0)), float(
        _mi_table(p_xy, base).clamp(min=0.0)
    )


def _funnel_restart(
    j_sx: JointPmf,
    t: float,
    start: torch.Tensor,
    rounds: int,
    steps: int,
    step_size: float,
    mu0: float,
    mu_growth: float,
    base: float,
) -> Tuple[float, torch.Tensor, List[Tuple[int, float]]]:
    """
    Exponentiated-gradient descent on the rows of p(y|x) for the penalised
    objective I(S;Y) + mu ([t - I(X;Y)]^+)^2, mu growing each round.
    Returns the best feasible I(S;Y), its channel and per-round objectives.
    """
    p_x = j_sx.p_y.unsqueeze(1)
    w = start.clone()
    best, best_w = math.inf, start.clone()
    history = []
    mu = mu0
    for rnd in range(rounds):
        objective = math.inf
        for _ in range(steps):
            wv = w.clone().requires_grad_()
            i_sy = _mi_table(j_sx.p @ wv, base)
            i_xy = _mi_table(p_x * wv, base)
            gap = (t - i_xy).clamp(min=0.0)
            loss = i_sy + mu * gap * gap
            loss.backward()
            objective = loss.detach().item()
            i_sy_v, i_xy_v = i_sy.detach().item(), i_xy.detach().item()
            if i_xy_v >= t - _FEAS_TOL and i_sy_v < best:
                best, best_w = i_sy_v, w.clone()
            grad = wv.grad
            assert grad is not None
            step = (-step_size * grad).clamp(-50.0, 50.0)
            step = step - step.max(dim=1, keepdim=True).values
            w = w * step.exp()
            w = w / w.sum(dim=1, keepdim=True)
        history.append((rnd, objective))
        mu *= mu_growth
    i_sy, i_xy = _exact_info(j_sx, w, base)
    if i_xy >= t - _FEAS_TOL and i_sy < best:
        best, best_w = i_sy, w.clone()
    return best, best_w, history


@gin.configurable
def funnel_estimate(
    j_sx: JointPmf,
    t: float,
    restarts: int = 16,
    seed: int = 0,
    rounds: int = 5,
    steps: int = 200,
    step_size: float = 0.5,
    mu0: float = 1.0,
    mu_growth: float = 10.0,
    base: float = 2.0,
    tensorboard_log_path: Optional[str] = None,
) -> FunnelEstimate:
    """
    Heuristic upper estimate of the privacy funnel G(t) over channels with
    |Y| = |X| + 1. The erasure mixture of X, whose leakage is the region's upper
    bound, and the perfect-privacy map are always among the candidates.
    """
    n = j_sx.cols
    h_x = entropy(j_sx.p_y, base)
    if t < -_T_TOL or t > h_x + _T_TOL:
        raise TOutOfRange(f"t = {t} outside [0, H(X)] = [0, {h_x:.6g}]")
    t = min(max(t, 0.0), h_x)
    if t <= _T_TOL:
        constant = torch.zeros(n, n + 1, dtype=DTYPE)
        constant[:, n] = 1.0
        return FunnelEstimate(value=0.0, i_xy=0.0, channel=Channel(w=constant))

    candidates: List[torch.Tensor] = []
    theta = t / h_x
    erasure = torch.zeros(n, n + 1, dtype=DTYPE)
    erasure[:, :n] = theta * torch.eye(n, dtype=DTYPE)
    erasure[:, n] = 1.0 - theta
    candidates.append(erasure)
    pp = perfect_privacy_map(j_sx, base=base)
    if pp is not None:
        padded = torch.zeros(n, n + 1, dtype=DTYPE)
        padded[:, :2] = pp.channel.w
        candidates.append(padded)

    identity = torch.cat(
        [torch.eye(n, dtype=DTYPE), torch.zeros(n, 1, dtype=DTYPE)], dim=1
    )
    starts = [0.9 * identity + 0.1 / (n + 1)]
    starts += [0.98 * c + 0.02 / (n + 1) for c in candidates]
    for r in range(max(restarts - len(starts), 0)):
        gen = torch.Generator().manual_seed(derive_seed(seed, r))
        starts.append(torch.stack([random_pmf(n + 1, gen) for _ in range(n)]))

    with ThreadPoolExecutor(max_workers=num_workers()) as pool:
        results = list(
            pool.map(
                lambda s: _funnel_restart(
                    j_sx, t, s, rounds, steps, step_size, mu0, mu_growth, base
                ),
                starts,
            )
        )

    best, best_w, best_i_xy = math.inf, candidates[0], h_x
    for w in candidates:
        i_sy, i_xy = _exact_info(j_sx, w, base)
        if i_xy >= t - _FEAS_TOL and i_sy < best:
            best, best_w, best_i_xy = i_sy, w, i_xy
    for value, w, _ in results:
        if value < best:
            best, best_w = value, w
            best_i_xy = _exact_info(j_sx, w, base)[1]

    history = [(k, rnd, obj) for k, (_, _, h) in enumerate(results) for rnd, obj in h]
    if tensorboard_log_path is not None:
        writer = SummaryWriter(log_dir=tensorboard_log_path)
        for k, rnd, obj in history:
            writer.add_scalar(f"funnel/t_{t:.4f}/restart_{k}", obj, rnd)
        writer.add_scalar("funnel/estimate", best, 0)
        writer.close()
    logger.info(f"funnel estimate at t={t:.6g}: {best:.6g} ({len(starts)} restarts)")
    return FunnelEstimate(
        value=max(best, 0.0),
        i_xy=best_i_xy,
        channel=Channel(w=best_w),
        history=history,
    )


@gin.configurable
def analyze(
    j_sx: JointPmf,
    t_grid: Optional[ArrayLike] = None,
    points: int = 64,
    base: float = 2.0,
    seed: int = 0,
    estimate_curve: bool = False,
    restarts: int = 16,
) -> PrivacyAnalysis:
    grid = default_t_grid(j_sx, points, base) if t_grid is None else as_tensor(t_grid)
    curves = funnel_region_bounds(j_sx, grid, base)
    delta = delta_coefficient(j_sx)
    constructed = perfect_privacy_map(j_sx, base=base)
    # Only a certified null direction counts; a borderline map leaks.
    feasible = constructed is not None and not constructed.borderline
    if feasible:
        delta = 0.0
    t_star = t_star_lower(j_sx, seed=seed, base=base) if feasible else 0.0
    estimate = None
    if estimate_curve:
        estimate = torch.tensor(
            [
                funnel_estimate(
                    j_sx, float(t), restarts=restarts, seed=seed, base=base
                ).value
                for t in curves.t
            ],
            dtype=DTYPE,
        )
        if not ratio_monotonicity(curves.t, estimate):
            logger.info("estimated G(t)/t is not monotone on this grid (local optima)")
    return PrivacyAnalysis(
        delta=delta,
        vstar_upper=vstar_estimate(j_sx, seed=seed),
        curves=curves,
        perfect_privacy_feasible=feasible,
        t_star_lower=t_star,
        constructed_map=constructed,
        estimate=estimate,
    )
