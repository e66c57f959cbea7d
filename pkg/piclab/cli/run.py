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
Subcommand handlers behind `main.py`. Every run writes one JSON report and
returns the process exit status: 0 on success, 1 on invalid input, 2 on a
numerical failure.
"""

import json
import logging
import math
import sys
from dataclasses import dataclass
from enum import Enum, unique
from typing import Any, Callable, Dict, List, Optional, Tuple

import torch

from piclab.common import DomainError, NumericalFailure, TooLarge, ValidationError
from piclab.modules import bounds, boolean, oracle, pic, privacy
from piclab.modules.dist import (
    chi_squared,
    dump_distribution,
    empirical_joint,
    JointPmf,
    Label,
    load_samples_csv,
    mutual_information,
    parse_distribution,
    transpose,
)

logger: logging.Logger = logging.getLogger(__name__)

_BASES: Dict[str, float] = {"2": 2.0, "e": math.e, "10": 10.0}


@unique
class Subcommand(Enum):
    DECOMPOSE = "decompose"
    BOUND = "bound"
    BOOLEAN = "boolean"
    PRIVACY = "privacy"
    VERIFY = "verify"


@dataclass
class RunConfig:
    subcommand: Subcommand
    input: Optional[str] = None
    output: Optional[str] = None
    base: str = "2"
    tol: float = 1e-6
    seed: int = 0
    all: bool = False
    M: Optional[int] = None
    t: Optional[float] = None
    n: Optional[int] = None
    delta: Optional[float] = None
    csv_curves: Optional[str] = None
    transpose: bool = False
    csv_header: bool = True

    def __post_init__(self) -> None:
        if self.base not in _BASES:
            raise DomainError(f"--base must be one of {sorted(_BASES)}, got {self.base}")
        if not 0.0 < self.tol <= 1e-3:
            raise DomainError(f"--tol must lie in (0, 1e-3], got {self.tol}")

    @property
    def log_base(self) -> float:
        return _BASES[self.base]


def _load_joint(config: RunConfig) -> Tuple[JointPmf, List[Label], List[Label]]:
    if config.input is None:
        raise ValidationError(f"{config.subcommand.value} needs --input")
    if config.input.endswith(".csv"):
        return empirical_joint(load_samples_csv(config.input, config.csv_header))
    with open(config.input) as f:
        record = json.load(f)
    if isinstance(record, dict) and "distribution" in record:
        # A decompose report carries its source distribution.
        record = record["distribution"]
    return parse_distribution(record)


def _decompose(config: RunConfig) -> Dict[str, Any]:
    j, x_labels, y_labels = _load_joint(config)
    dec = pic.decompose(j, tol=config.tol)
    return {
        "distribution": dump_distribution(j, x_labels, y_labels),
        "pic": pic.to_json(dec),
        "maximal_correlation": pic.maximal_correlation(dec),
        "k_correlation": [pic.k_correlation(dec, k) for k in range(1, dec.d + 1)],
        "chi_squared": chi_squared(j),
        "mutual_information": mutual_information(j, config.log_base),
        "conforming": pic.is_conforming(j),
    }


def _function_bounds(
    j: JointPmf, M: int, rho: float, theta: float, base: float
) -> Dict[str, Any]:
    report: Dict[str, Any] = {
        "M": M,
        "pem_bound_rho": bounds.pem_bound_rho(j.p_x, M, rho).to_json(),
        "pem_bound_mi": bounds.pem_bound_mi(j.p_x, M, theta, base).to_json(),
        "adv_m_bound": bounds.adv_m_bound(rho, M),
    }
    try:
        pe, adv = bounds.enumerate_surjections(j, M)
        report["pem_exact"] = pe
        report["adv_m_exact"] = adv
    except TooLarge as e:
        logger.warning(f"skipping exhaustive P_e,M: {e}")
        report["pem_exact"] = None
    return report


def _bound(config: RunConfig) -> Dict[str, Any]:
    j, _, _ = _load_joint(config)
    dec = pic.decompose(j, tol=config.tol)
    rho = pic.maximal_correlation(dec)
    theta = mutual_information(j, config.log_base)
    results = [bounds.pic_fano_bound(j.p_x, dec.lambdas)]
    if config.all:
        results.append(bounds.maxcorr_bound(j.p_x, rho))
        results.append(bounds.fano_mi_bound(j.p_x, theta, config.log_base))
        uniform = bool(torch.allclose(j.p_x, torch.full_like(j.p_x, 1.0 / j.rows)))
        if uniform:
            results.append(bounds.chi2_uniform_bound(j.rows, chi_squared(j)))
    report: Dict[str, Any] = {
        "bounds": [b.to_json() for b in results],
        "exact": {"map_error": bounds.map_error(j), "advantage": bounds.advantage(j)},
        "lambdas": dec.lambdas.tolist(),
    }
    if config.M is not None:
        report["function_bounds"] = _function_bounds(
            j, config.M, rho, theta, config.log_base
        )
    return report


def _noise_pmf(config: RunConfig) -> torch.Tensor:
    if config.input is not None:
        with open(config.input) as f:
            record = json.load(f)
        values = record["p_z"] if isinstance(record, dict) else record
        return torch.tensor(values, dtype=torch.float64)
    if config.n is None or config.delta is None:
        raise ValidationError("boolean needs --input or both --n and --delta")
    return boolean.bsc_noise(config.n, config.delta)


def _boolean(config: RunConfig) -> Dict[str, Any]:
    p_z = _noise_pmf(config)
    spectrum = boolean.noise_spectrum(p_z)
    pics = boolean.additive_channel_pics(p_z, p_x_uniform=True)
    rho = math.sqrt(float(pics[0])) if pics.numel() > 0 else 0.0
    report: Dict[str, Any] = {
        "n": spectrum.n,
        "p_z": spectrum.p_z.tolist(),
        "c": {str(mask): value for mask, value in enumerate(spectrum.c.tolist())},
        "pics": pics.tolist(),
        "witsenhausen_half": boolean.witsenhausen_bound(0.5, 0.5, min(rho, 1.0)),
    }
    if config.n is not None and config.delta is not None:
        search = boolean.conjecture_search(config.n, config.delta, seed=config.seed)
        report["conjecture"] = {
            "max_I_bY": search.max_I_bY,
            "argmax_mask": search.argmax_mask,
            "bound_1_minus_hb": search.bound_1_minus_hb,
            "functions": search.functions,
            "violations": [
                {"mask": v.mask, "i_y": v.i_y, "i_flat": v.i_flat, "kind": v.kind}
                for v in search.violations
            ],
        }
    return report


def _privacy(config: RunConfig) -> Dict[str, Any]:
    j, _, _ = _load_joint(config)
    if config.transpose:
        j = transpose(j)
    analysis = privacy.analyze(j, base=config.log_base, seed=config.seed)
    report = analysis.to_json()
    if config.t is not None:
        estimate = privacy.funnel_estimate(
            j, config.t, seed=config.seed, base=config.log_base
        )
        report["funnel"] = {
            "t": config.t,
            "estimate": estimate.value,
            "i_xy": estimate.i_xy,
            "channel": estimate.channel.w.tolist(),
        }
    if config.csv_curves is not None:
        analysis.curves_frame().to_csv(config.csv_curves, index=False)
        logger.info(f"wrote region curves to {config.csv_curves}")
    return report


def _verify(config: RunConfig) -> Dict[str, Any]:
    j, _, _ = _load_joint(config)
    dec = pic.decompose(j, tol=config.tol)
    rho = pic.maximal_correlation(dec)
    ace = oracle.maxcorr_by_ace(j, seed=config.seed)
    pe = oracle.pe_exhaustive(j)
    checks = {
        "maxcorr": bool(abs(ace.value - rho) <= 1e-6),
        "map_error": bool(abs(pe.value - bounds.map_error(j)) <= 1e-12),
    }
    oracles = {"maxcorr_by_ace": ace.to_json(), "pe_exhaustive": pe.to_json()}
    if dec.d >= 1:
        var = oracle.variational_pic(j, k=1, seed=config.seed)
        oracles["variational_pic"] = var.to_json()
        checks["variational_pic"] = bool(
            abs(var.value - float(dec.lambdas[0])) <= 1e-6
        )
    passed = all(checks.values())
    if not passed:
        logger.warning(f"oracle disagreement: {checks}")
    return {
        "lambdas": dec.lambdas.tolist(),
        "oracles": oracles,
        "checks": checks,
        "passed": passed,
    }


_HANDLERS: Dict[Subcommand, Callable[[RunConfig], Dict[str, Any]]] = {
    Subcommand.DECOMPOSE: _decompose,
    Subcommand.BOUND: _bound,
    Subcommand.BOOLEAN: _boolean,
    Subcommand.PRIVACY: _privacy,
    Subcommand.VERIFY: _verify,
}


def _write(report: Dict[str, Any], output: Optional[str]) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if output is None:
        print(text)
    else:
        with open(output, "w") as f:
            f.write(text + "\n")


def run(config: RunConfig) -> int:
    torch.manual_seed(config.seed)
    logger.info(f"running {config.subcommand.value} on {config.input}")
    try:
        report = _HANDLERS[config.subcommand](config)
        report["subcommand"] = config.subcommand.value
        _write(report, config.output)
    # JSON and CSV parse errors are ValueErrors.
    except (ValidationError, ValueError, KeyError, OSError) as e:
        print(f"piclab: invalid input: {e}", file=sys.stderr)
        return 1
    except NumericalFailure as e:
        print(f"piclab: numerical failure: {e}", file=sys.stderr)
        return 2
    return 0
