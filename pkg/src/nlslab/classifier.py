"""Membership tests for the scattering / blow-up dichotomy.

For the competing-sign equation (E1) the decision compares the action
S_omega(u0) against the ground-state threshold and reads the sign of the
scaling derivative K(u0).  For the defocusing-saturated equation (E2) the
decision compares the mass of u0 with the mass of the critical-equation
ground state.  A label is only issued when the deciding margin clears
three times its estimated numerical uncertainty; otherwise the verdict
abstains with ``indeterminate`` and makes no prediction.

Verdicts carry all margins, the bound scale for the H1 trapping estimate,
a note on the unverified localization hypotheses behind the blow-up
prediction, and a digest of the ground-state profile used, so a verdict
written to disk can be traced to the exact threshold it was measured
against.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .spectral import ComplexField, spectral_tail_fraction
from .functionals import (
    ModelParams,
    action_K_H,
    gradient_l2_sq,
    mass,
    power_integrals,
)
from .groundstate import GroundStateSolution

__all__ = [
    "Margin",
    "Verdict",
    "TrapReport",
    "classify",
    "trap_bounds",
    "ground_state_digest",
    "verdict_to_json",
    "verdict_from_json",
]

SET_LABELS = (
    "A_plus",
    "A_minus",
    "above_threshold",
    "below_mass_threshold",
    "above_mass_threshold",
    "indeterminate",
)
PREDICTIONS = ("global_scattering", "finite_time_blowup", "no_prediction")

# A margin must beat this multiple of its uncertainty before we label.
GATE_FACTOR = 3.0

# Relative quadrature floor for spectral integrals of resolved fields.
_QUAD_EPS = 100.0 * float(np.finfo(float).eps)


@dataclass(frozen=True)
class Margin:
    """A signed decision quantity with its estimated numerical error."""

    value: float
    uncertainty: float

    @property
    def resolved(self) -> bool:
        return abs(self.value) > GATE_FACTOR * self.uncertainty


@dataclass(frozen=True)
class Verdict:
    equation: str
    set_label: str
    prediction: str
    action_margin: Margin | None
    k_value: Margin | None
    mass_margin: Margin | None
    h1_bound: float | None
    hypotheses: str | None
    ground_state_digest: str

    def __post_init__(self):
        if self.set_label not in SET_LABELS:
            raise ValueError(f"unknown set label {self.set_label!r}")
        if self.prediction not in PREDICTIONS:
            raise ValueError(f"unknown prediction {self.prediction!r}")


def ground_state_digest(gs: GroundStateSolution) -> str:
    """SHA-256 over the solved profile and its defining parameters."""
    h = hashlib.sha256()
    head = f"{gs.which}:{gs.params.d}:{gs.params.p!r}:{gs.omega!r}"
    h.update(head.encode())
    h.update(gs.r.tobytes())
    h.update(gs.profile.tobytes())
    return h.hexdigest()


def _relative_error_scale(u0: ComplexField) -> float:
    # Under-resolved fields carry truncation error far above rounding.
    # The top-band power fraction understates the aliasing error of the
    # nonlinear integrands by a small factor (about 2 on coarsely sampled
    # solitons), so pad it.
    return _QUAD_EPS + 10.0 * float(spectral_tail_fraction(u0))


def _check_compatible(mp: ModelParams, gs: GroundStateSolution):
    if mp.equation == "E1":
        if gs.which != "double":
            raise ValueError(
                "E1 classification needs the two-term ground state, "
                f"got which={gs.which!r}"
            )
        if gs.params.d != mp.d or gs.params.p != mp.p or gs.omega != mp.omega:
            raise ValueError(
                "ground state solved for "
                f"(d={gs.params.d}, p={gs.params.p}, omega={gs.omega}) "
                f"but data uses (d={mp.d}, p={mp.p}, omega={mp.omega})"
            )
    else:
        if gs.which != "mass_critical":
            raise ValueError(
                "E2 classification needs the critical-equation ground state, "
                f"got which={gs.which!r}"
            )
        if gs.params.d != mp.d:
            raise ValueError(
                f"ground state dimension {gs.params.d} != data dimension {mp.d}"
            )


def _blowup_hypotheses_note(mp: ModelParams) -> str:
    # The blow-up half of the dichotomy needs finite variance or, in
    # d >= 2 with a capped exponent, radial symmetry.  Neither property
    # is detectable from a sampled box field, so we record, not enforce.
    if mp.d >= 2:
        cap = 5.0 if mp.d == 2 else min(5.0, 1.0 + 4.0 / (mp.d - 2.0))
        if mp.p <= cap:
            return (
                "assumes finite-variance data, or radial data "
                f"(exponent cap {cap:g} met)"
            )
        return (
            "assumes finite-variance data; radial route unavailable "
            f"(p={mp.p:g} exceeds cap {cap:g})"
        )
    return "assumes finite-variance data; radial route needs d >= 2"


def classify(
    u0: ComplexField,
    mp: ModelParams,
    gs: GroundStateSolution,
) -> Verdict:
    """Decide which dichotomy set (if any) u0 belongs to.

    E1 compares S_omega(u0) with the minimal action and reads sign(K).
    E2 compares M(u0) with the critical ground-state mass.  Margins
    within GATE_FACTOR of their uncertainty yield ``indeterminate`` and
    prediction ``no_prediction``.
    """
    _check_compatible(mp, gs)

    rel = _relative_error_scale(u0)
    digest = ground_state_digest(gs)

    m_val = mass(u0)
    grad = gradient_l2_sq(u0)
    lp1, lmc = power_integrals(u0, mp)
    d, p, w = mp.d, mp.p, mp.omega

    mass_unc = rel * m_val + _QUAD_EPS * gs.mass
    mass_margin = Margin(m_val - gs.mass, mass_unc)

    if mp.equation == "E2":
        if not mass_margin.resolved:
            label, prediction = "indeterminate", "no_prediction"
        elif mass_margin.value < 0.0:
            label, prediction = "below_mass_threshold", "global_scattering"
        else:
            label, prediction = "above_mass_threshold", "no_prediction"
        return Verdict(
            equation="E2",
            set_label=label,
            prediction=prediction,
            action_margin=None,
            k_value=None,
            mass_margin=mass_margin,
            h1_bound=None,
            hypotheses=None,
            ground_state_digest=digest,
        )

    acts = action_K_H(u0, mp)

    # Sum of absolute contributions: the cancellation-free scale each
    # functional is assembled at.
    s_terms = 0.5 * grad + lp1 / (p + 1.0) + d / (2.0 * (d + 2.0)) * lmc + 0.5 * w * m_val
    k_terms = grad + d * (p - 1.0) / (2.0 * (p + 1.0)) * lp1 + d / (d + 2.0) * lmc
    # The threshold's own error: quadrature floor plus the measured
    # distance of the solved profile from exact criticality.
    m_omega_unc = _QUAD_EPS * gs.m_omega + abs(gs.K_value)

    action_margin = Margin(acts.s_omega - gs.m_omega, rel * s_terms + m_omega_unc)
    k_margin = Margin(acts.k_value, rel * k_terms)

    if not action_margin.resolved:
        label, prediction = "indeterminate", "no_prediction"
    elif action_margin.value >= 0.0:
        label, prediction = "above_threshold", "no_prediction"
    elif not k_margin.resolved:
        label, prediction = "indeterminate", "no_prediction"
    elif k_margin.value >= 0.0:
        label, prediction = "A_plus", "global_scattering"
    else:
        label, prediction = "A_minus", "finite_time_blowup"

    h1_bound = gs.m_omega + gs.m_omega / w if label == "A_plus" else None
    note = _blowup_hypotheses_note(mp) if label == "A_minus" else None

    return Verdict(
        equation="E1",
        set_label=label,
        prediction=prediction,
        action_margin=action_margin,
        k_value=k_margin,
        mass_margin=mass_margin,
        h1_bound=h1_bound,
        hypotheses=note,
        ground_state_digest=digest,
    )


# -- trapping estimates -------------------------------------------------------

@dataclass(frozen=True)
class TrapReport:
    """Measured trapping inequalities for labeled E1 data.

    For A_plus members: the squared H1 norm against the threshold scale
    m_omega (1 + 1/omega), with the measured ratio, plus the quadratic
    lower-bound branch for K and the implied trapping constant.  For
    A_minus members: the strict upper bound K < -(m_omega - S_omega).
    """

    set_label: str
    holds: bool
    h1_norm_sq: float | None = None
    h1_scale: float | None = None
    h1_ratio: float | None = None
    k_value: float | None = None
    k_quadratic_floor: float | None = None
    action_gap: float | None = None
    implied_delta: float | None = None
    k_upper_bound: float | None = None
    slack: float | None = None


def trap_bounds(
    u0: ComplexField,
    mp: ModelParams,
    gs: GroundStateSolution,
) -> TrapReport:
    """Evaluate the trapping bounds for data classified A_plus or A_minus."""
    if mp.equation != "E1":
        raise ValueError("trapping bounds are specific to the competing-sign equation")
    verdict = classify(u0, mp, gs)
    if verdict.set_label not in ("A_plus", "A_minus"):
        raise ValueError(
            f"trap_bounds needs labeled data, classification returned "
            f"{verdict.set_label!r}"
        )

    d, p, w = mp.d, mp.p, mp.omega
    grad = gradient_l2_sq(u0)
    lp1, lmc = power_integrals(u0, mp)
    acts = action_K_H(u0, mp)
    gap = gs.m_omega - acts.s_omega

    if verdict.set_label == "A_minus":
        upper = -gap
        return TrapReport(
            set_label="A_minus",
            holds=bool(acts.k_value < upper),
            k_value=acts.k_value,
            action_gap=gap,
            k_upper_bound=upper,
            slack=upper - acts.k_value,
        )

    h1_sq = grad + mass(u0)
    scale = gs.m_omega + gs.m_omega / w
    quad_floor = (d * (p - 1.0) - 4.0) / (d * (p - 1.0)) * (
        grad + d / (d + 2.0) * lmc
    )
    # The lower bound is a min over two branches with an unspecified
    # positive constant on the second; K >= quadratic branch certifies
    # it outright, otherwise any positive K certifies it with the
    # implied constant K / (m_omega - S_omega).
    if acts.k_value >= quad_floor:
        holds, delta = True, None
    else:
        holds = acts.k_value > 0.0 and gap > 0.0
        delta = acts.k_value / gap if gap > 0.0 else None
    return TrapReport(
        set_label="A_plus",
        holds=bool(holds),
        h1_norm_sq=h1_sq,
        h1_scale=scale,
        h1_ratio=h1_sq / scale,
        k_value=acts.k_value,
        k_quadratic_floor=quad_floor,
        action_gap=gap,
        implied_delta=delta,
    )


# -- serialization ------------------------------------------------------------

def _margin_obj(m: Margin | None):
    if m is None:
        return None
    return {"value": m.value, "uncertainty": m.uncertainty}


def verdict_to_json(v: Verdict) -> str:
    payload = {
        "equation": v.equation,
        "set_label": v.set_label,
        "prediction": v.prediction,
        "action_margin": _margin_obj(v.action_margin),
        "k_value": _margin_obj(v.k_value),
        "mass_margin": _margin_obj(v.mass_margin),
        "h1_bound": v.h1_bound,
        "hypotheses": v.hypotheses,
        "ground_state_digest": v.ground_state_digest,
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def _margin_from(obj) -> Margin | None:
    if obj is None:
        return None
    return Margin(float(obj["value"]), float(obj["uncertainty"]))


def verdict_from_json(text: str) -> Verdict:
    obj = json.loads(text)
    return Verdict(
        equation=obj["equation"],
        set_label=obj["set_label"],
        prediction=obj["prediction"],
        action_margin=_margin_from(obj["action_margin"]),
        k_value=_margin_from(obj["k_value"]),
        mass_margin=_margin_from(obj["mass_margin"]),
        h1_bound=obj["h1_bound"],
        hypotheses=obj["hypotheses"],
        ground_state_digest=obj["ground_state_digest"],
    )
