"""Single-trial drivers shared by the command line and the test suites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kepler
from .core import AlphaSystem
from .integrate import EventKind, IntegratorConfig, integrate


@dataclass(frozen=True)
class TwoBodyTrial:
    r: float
    rdot: float
    c: float
    side: str  # "-" inside the threshold radius, "+" outside
    predicted: str
    outcome: str
    t_collision: float | None
    t_bound: float | None
    min_separation: float
    threshold_radius: float
    k_sign_changes: int
    low_accuracy: bool

    @property
    def agrees(self) -> bool:
        if self.side == "-":
            return (
                self.outcome == "Collision"
                and self.t_collision is not None
                and self.t_collision <= self.t_bound
            )
        # surviving the horizon is what a finite run can show
        return (
            self.outcome != "Collision"
            and self.min_separation > self.threshold_radius
            and self.k_sign_changes == 0
        )


def _separation(record) -> np.ndarray:
    return np.array([np.linalg.norm(s.state.positions[0] - s.state.positions[1]) for s in record.samples])


def twobody_trial(
    r: float,
    rdot: float,
    c: float,
    m1: float = 0.5,
    m2: float = 0.5,
    alpha: float = 4.0,
    omega: float = 2.0,
    config: IntegratorConfig | None = None,
) -> TwoBodyTrial:
    """Integrate one two-body state below the excited energy and compare with the dichotomy.

    Inside the threshold radius the prediction is a collision no later than
    the parabola bound; outside it the separation must stay above the
    threshold radius for the whole horizon.
    """
    th = kepler.twobody_thresholds(m1, m2, alpha, omega)
    system = AlphaSystem((m1, m2), alpha)
    state = kepler.twobody_state(m1, m2, r, rdot, c)
    rec = integrate(system, state, omega, config or IntegratorConfig(), e_star=th.e_star)
    side = "-" if r < th.r0 else "+"
    inv = rec.samples[0].invariants
    bound = None
    if side == "-":
        bound = kepler.collision_time_bound(inv.inertia, inv.inertia_rate, th.e_star - inv.energy)
    sep = _separation(rec)
    t_coll = rec.outcome.time if rec.outcome.kind == "Collision" else None
    return TwoBodyTrial(
        r=r, rdot=rdot, c=c, side=side,
        predicted="Collision" if side == "-" else "GlobalConsistent",
        outcome=rec.outcome.kind,
        t_collision=None if t_coll is None else float(t_coll - state.time),
        t_bound=bound,
        min_separation=float(sep.min()),
        threshold_radius=th.r0,
        k_sign_changes=len(rec.events_of(EventKind.KSignChange)),
        low_accuracy=rec.low_accuracy,
    )
