#
# ipflab
#
# A numerical laboratory for the intersection of past and future of multivariate stationary processes.
#
# Copyright (c) 2025-2026 Thomas Kuhlmann
#
# Licensed under the MIT License. See LICENSE file in the project root for license information.
#

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from ipflab.common import FloatArray, IntegrityCheckFailedError
from ipflab.models import AnalyticCertificate, DensityModel
from ipflab.quadrature import Integrability, ProbeResult, integrability_probe, make_grid


MR_GRID_EXPONENT: int = 14
# eigenvalue floors relative to the largest eigenvalue on the grid
MR_EIG_FLOOR: float = 1e-10
MR_ZERO_EIG: float = 1e-12
# a zero set this large is not a grid-bracketed isolated zero
MR_ZERO_FRACTION: float = 0.01
PROBE_EXPONENTS: tuple[int, ...] = tuple(range(8, 17))


class Verdict(Enum):
    HOLDS = "HOLDS"
    FAILS = "FAILS"
    INCONCLUSIVE = "INCONCLUSIVE"


class Implication(Enum):
    EXPECTED_TRUE = "EXPECTED_TRUE"
    EXPECTED_FALSE = "EXPECTED_FALSE"
    UNDETERMINED = "UNDETERMINED"

    @classmethod
    def from_fact(cls, fact: bool) -> "Implication":
        return cls.EXPECTED_TRUE if fact else cls.EXPECTED_FALSE


@dataclass(frozen=True)
class ConditionResult:
    verdict: Verdict
    evidence: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict.value, **self.evidence}


@dataclass(frozen=True)
class MinimalityResult:
    outcome: Integrability
    probe: Optional[ProbeResult] = None
    reason: Optional[str] = None

    @property
    def value(self) -> Optional[float]:
        return self.probe.value if self.probe is not None else None

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {"outcome": self.outcome.value, "value": self.value}
        if self.reason is not None:
            result["reason"] = self.reason
        if self.probe is not None:
            result["probe"] = self.probe.to_dict()
        return result


@dataclass(frozen=True)
class ImpliedVerdict:
    verdict: Implication
    rule: str

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict.value, "rule": self.rule}


@dataclass(frozen=True)
class ConditionReport:
    mr: ConditionResult
    condition_a: ConditionResult
    minimality: MinimalityResult
    certificate: Optional[AnalyticCertificate]
    implied_cnd: ImpliedVerdict
    implied_ipf: ImpliedVerdict

    def to_dict(self) -> dict[str, Any]:
        return {
            "mr": self.mr.to_dict(),
            "condition_a": self.condition_a.to_dict(),
            "minimality": self.minimality.to_dict(),
            "certificate": None if self.certificate is None else {"ipf": self.certificate.ipf, "cnd": self.certificate.cnd, "source": self.certificate.source},
            "implied_cnd": self.implied_cnd.to_dict(),
            "implied_ipf": self.implied_ipf.to_dict(),
            "constants": {"mr_grid_exponent": MR_GRID_EXPONENT, "mr_eig_floor": MR_EIG_FLOOR, "mr_zero_eig": MR_ZERO_EIG, "mr_zero_fraction": MR_ZERO_FRACTION, "probe_exponents": list(PROBE_EXPONENTS)},
        }


def _eigenvalues(model: DensityModel, nodes: FloatArray) -> FloatArray:
    return np.linalg.eigvalsh(model.evaluate_many(nodes))


def check_mr(model: DensityModel) -> ConditionResult:
    if model.degenerate:
        return ConditionResult(Verdict.FAILS, {"reason": f"{model.variant} density is rank-deficient at every angle", "min_det": 0.0})
    grid = make_grid(model, MR_GRID_EXPONENT)
    eig = np.linalg.eigvalsh(grid.values)
    scale = float(eig[:, -1].max())
    if scale <= 0.0:
        return ConditionResult(Verdict.FAILS, {"reason": "density vanishes on the grid", "min_det": 0.0})
    ratios = eig[:, 0] / scale
    min_ratio = float(ratios.min())
    zero_fraction = float(np.count_nonzero(ratios <= MR_ZERO_EIG)) / ratios.size
    evidence = {
        "min_det": float(np.prod(eig, axis=1).min()),
        "min_eig_ratio": min_ratio,
        "argmin_theta": float(grid.nodes[int(np.argmin(ratios))]),
        "zero_fraction": zero_fraction,
    }
    if min_ratio > MR_EIG_FLOOR:
        return ConditionResult(Verdict.HOLDS, evidence)
    if zero_fraction > MR_ZERO_FRACTION:
        return ConditionResult(Verdict.FAILS, evidence)
    return ConditionResult(Verdict.INCONCLUSIVE, evidence)


def _log_det(model: DensityModel, nodes: FloatArray) -> FloatArray:
    eig = _eigenvalues(model, nodes)
    with np.errstate(divide="ignore"):
        return np.sum(np.log(np.where(eig > 0, eig, 0.0)), axis=1)


def check_condition_a(model: DensityModel) -> ConditionResult:
    # ∫ log det w dσ, split into positive and negative parts so each probe sees a nonnegative integrand
    if model.degenerate:
        return ConditionResult(Verdict.FAILS, {"reason": f"{model.variant} density is rank-deficient at every angle, log det w = -inf", "szego_integral": float("-inf")})
    positive = integrability_probe(lambda t: np.maximum(_log_det(model, t), 0.0), PROBE_EXPONENTS)
    negative = integrability_probe(lambda t: np.maximum(-_log_det(model, t), 0.0), PROBE_EXPONENTS)
    evidence: dict[str, Any] = {"positive_part": positive.to_dict(), "negative_part": negative.to_dict()}
    if positive.outcome is Integrability.FINITE and negative.outcome is Integrability.FINITE:
        assert positive.value is not None and negative.value is not None  # noqa: S101
        return ConditionResult(Verdict.HOLDS, {"szego_integral": positive.value - negative.value, **evidence})
    if Integrability.DIVERGENT in (positive.outcome, negative.outcome):
        return ConditionResult(Verdict.FAILS, {"szego_integral": None, **evidence})
    return ConditionResult(Verdict.INCONCLUSIVE, {"szego_integral": None, **evidence})


def check_minimality(model: DensityModel) -> MinimalityResult:
    if model.degenerate:
        return MinimalityResult(Integrability.FAILS, reason=f"{model.variant} density is rank-deficient at every angle, w⁻¹ does not exist")

    def trace_inverse(nodes: FloatArray) -> FloatArray:
        eig = _eigenvalues(model, nodes)
        with np.errstate(divide="ignore"):
            return np.sum(np.where(eig > 0, 1.0 / np.where(eig > 0, eig, 1.0), np.inf), axis=1)

    probe = integrability_probe(trace_inverse, PROBE_EXPONENTS)
    return MinimalityResult(probe.outcome, probe)


def infer_implications(mr: ConditionResult, condition_a: ConditionResult, minimality: MinimalityResult, certificate: Optional[AnalyticCertificate]) -> tuple[ImpliedVerdict, ImpliedVerdict]:
    # returns (implied CND, implied IPF)
    def from_certificate(cert: AnalyticCertificate, note: str) -> tuple[ImpliedVerdict, ImpliedVerdict]:
        rule = f"analytic certificate ({note}): {cert.source}"
        return ImpliedVerdict(Implication.from_fact(cert.cnd), rule), ImpliedVerdict(Implication.from_fact(cert.ipf), rule)

    def undetermined(rule: str) -> tuple[ImpliedVerdict, ImpliedVerdict]:
        return ImpliedVerdict(Implication.UNDETERMINED, rule), ImpliedVerdict(Implication.UNDETERMINED, rule)

    if mr.verdict is Verdict.FAILS:
        if certificate is not None:
            return from_certificate(certificate, "maximal rank fails, so the CND/IPF equivalence does not apply")
        return undetermined("maximal rank fails: the CND/IPF equivalence does not apply and no analytic certificate is known")

    if condition_a.verdict is Verdict.HOLDS:
        if minimality.outcome is Integrability.FINITE:
            rule = "integrable inverse density gives IPF; under condition (A) CND and IPF are equivalent"
            return ImpliedVerdict(Implication.EXPECTED_TRUE, rule), ImpliedVerdict(Implication.EXPECTED_TRUE, rule)
        if certificate is not None:
            return from_certificate(certificate, f"minimality {minimality.outcome.value}")
        return undetermined(f"condition (A) holds but minimality is {minimality.outcome.value}; no spectral sufficient condition applies")

    if certificate is not None:
        return from_certificate(certificate, f"condition (A) {condition_a.verdict.value}")
    return undetermined(f"condition (A) is {condition_a.verdict.value}; the CND/IPF equivalence is not established")


def _check_implications(condition_a: ConditionResult, implied_cnd: ImpliedVerdict, implied_ipf: ImpliedVerdict) -> None:
    # CND implies IPF for every process
    if implied_cnd.verdict is Implication.EXPECTED_TRUE and implied_ipf.verdict is Implication.EXPECTED_FALSE:
        raise IntegrityCheckFailedError(f"Implication engine produced CND true with IPF false ({implied_cnd.rule})")
    if condition_a.verdict is Verdict.HOLDS and implied_cnd.verdict is not implied_ipf.verdict:
        raise IntegrityCheckFailedError(f"Under condition (A) CND and IPF must agree, got {implied_cnd.verdict.value} and {implied_ipf.verdict.value}")


def classify(model: DensityModel) -> ConditionReport:
    mr = check_mr(model)
    condition_a = check_condition_a(model)
    minimality = check_minimality(model)
    certificate = model.certificate
    implied_cnd, implied_ipf = infer_implications(mr, condition_a, minimality, certificate)
    _check_implications(condition_a, implied_cnd, implied_ipf)
    return ConditionReport(mr, condition_a, minimality, certificate, implied_cnd, implied_ipf)
