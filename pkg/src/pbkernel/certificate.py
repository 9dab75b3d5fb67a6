"""The Certificate record returned by every bound evaluator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

RECOMBINE_TOL = 1e-12


@dataclass(frozen=True)
class Certificate:
    """A numerically evaluated bound.

    ``value`` is an upper bound on the population risk ``Q_S[L]`` or, when
    ``is_gap_bound`` is set, on the gap ``Q_S[L] - Q_S[L_hat_S]``. The
    ``components`` are additive terms that sum to ``value``. ``diagnostics``
    carries derived quantities (kl budget, relaxed forms, ...) that are not
    part of the sum.
    """

    kind: str
    value: float
    is_gap_bound: bool
    components: dict[str, float]
    params: dict[str, Any]
    paper_tag: str
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        total = self.recombine()
        if math.isinf(self.value) or math.isinf(total):
            ok = total == self.value
        else:
            ok = abs(total - self.value) <= RECOMBINE_TOL * max(1.0, abs(self.value))
        if not ok:
            raise AssertionError(
                f"{self.kind}: components sum to {total!r}, value is {self.value!r}"
            )

    def recombine(self) -> float:
        return math.fsum(self.components.values())

    def to_dict(self) -> dict[str, Any]:
        out = {
            "kind": self.kind,
            "value": self.value,
            "is_gap_bound": self.is_gap_bound,
            "components": dict(self.components),
            "params": dict(self.params),
            "paper_tag": self.paper_tag,
        }
        if self.diagnostics:
            out["diagnostics"] = dict(self.diagnostics)
        return out


def risk_certificate(kind, terms, params, paper_tag, diagnostics=None, clamp=True):
    """Build a risk certificate from additive terms (one named ``emp``).

    When the sum exceeds 1 and ``clamp`` is set the value becomes 1; the
    components are then ``emp`` and ``clamped_remainder`` and the original
    terms move to ``diagnostics`` under ``unclamped.*``.
    """
    terms = dict(terms)
    diagnostics = dict(diagnostics or {})
    raw = math.fsum(terms.values())
    value = raw
    if clamp and raw > 1.0:
        value = 1.0
        for key, term in terms.items():
            diagnostics[f"unclamped.{key}"] = term
        diagnostics["unclamped_value"] = raw
        emp = terms["emp"]
        terms = {"emp": emp, "clamped_remainder": 1.0 - emp}
    return Certificate(
        kind=kind,
        value=value,
        is_gap_bound=False,
        components=terms,
        params=params,
        paper_tag=paper_tag,
        diagnostics=diagnostics,
    )
