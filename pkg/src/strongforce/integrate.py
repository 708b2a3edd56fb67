"""Adaptive integration of the N-body equations with event detection.

A run ends at a detected collision or at the horizon.  Along the way the
integrator records sign changes of ``K_omega`` and crossings of
``|A| = omega I``, locating each on the dense output.  The verdict on a
finished run follows the dichotomy theorems, restricted to what a finite
horizon can show: a collision is observed, or the tail of the run is
consistent with global existence, or nothing can be said.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import AlphaSystem, PhaseState
from .errors import PreconditionViolated, StepUnderflow
from .ode import DormandPrince, bisect_event
from .threshold import SetLabel

EPS = np.finfo(float).eps


class EventKind(enum.Enum):
    Collision = "Collision"
    KSignChange = "KSignChange"
    AOmegaICrossing = "AOmegaICrossing"
    Escape = "Escape"
    HorizonReached = "HorizonReached"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    detail: str = ""


@dataclass(frozen=True)
class Outcome:
    kind: str  # "Collision" | "GlobalConsistent" | "Undecided"
    time: float | None = None
    reason: str = ""

    def __str__(self):
        return self.kind


@dataclass
class IntegratorConfig:
    """Tolerances, step limits and horizon for one run.

    ``collision_radius_factor`` multiplies the initial configuration scale
    ``sqrt(I_cm / M)``; ``escape_window`` defaults to the final 20% of
    ``t_max``.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = 1.0
    collision_radius_factor: float = 1e-6
    t_max: float = 50.0
    escape_window: float | None = None
    # a collapsing step is read as a collision below this many scale units
    collapse_distance_factor: float = 1e-3
    escape_inertia_factor: float = 100.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2]")
        if not 0 < self.h_min < self.h_max:
            raise ValueError("need 0 < h_min < h_max")
        if self.h_init <= 0 or self.t_max <= 0 or self.collision_radius_factor <= 0:
            raise ValueError("h_init, t_max and collision_radius_factor must be positive")
        if self.escape_window is None:
            self.escape_window = 0.2 * self.t_max
        if self.escape_window <= 0:
            raise ValueError("escape_window must be positive")


@dataclass
class Sample:
    t: float
    state: PhaseState
    invariants: core.InvariantRecord
    k_omega: float
    label: SetLabel
    min_distance: float


@dataclass
class TrajectoryRecord:
    system: AlphaSystem
    omega: float
    e_star: float
    samples: list = field(default_factory=list)
    events: list = field(default_factory=list)
    outcome: Outcome = Outcome("Undecided")
    low_accuracy: bool = False
    max_energy_drift: float = 0.0
    nsteps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def series(self, name) -> np.ndarray:
        """Scalar time series: ``energy``, ``inertia``, ``k_omega``, ``min_distance`` ..."""
        if name in ("k_omega", "min_distance"):
            return np.array([getattr(s, name) for s in self.samples])
        return np.array([getattr(s.invariants, name) for s in self.samples])

    def events_of(self, kind: EventKind) -> list:
        return [e for e in self.events if e.kind is kind]

    @property
    def labels(self) -> list:
        return [s.label for s in self.samples]


def _raw_accelerations(system):
    m = system.m
    mm = np.outer(m, m)
    expo = -(system.alpha + 2) / 2
    alpha = system.alpha
    n = system.n

    def acc(x):
        d = x[:, None, :] - x[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        r2[np.diag_indices(n)] = 1.0
        w = mm * r2**expo
        w[np.diag_indices(n)] = 0.0
        return -alpha * np.einsum("ij,ijk->ik", w, d) / m[:, None]

    return acc


def _label(e0, a0, e_star, omega, inertia, k):
    if e0 >= e_star or a0 == 0.0:
        return SetLabel.OutOfK
    wide = a0 >= omega * inertia
    if k >= 0:
        return SetLabel.K1Plus if wide else SetLabel.K2Plus
    return SetLabel.K1Minus if wide else SetLabel.K2Minus


class _Run:
    def __init__(self, system, state0, omega, config, e_star):
        self.system = system
        self.omega = omega
        self.config = config
        self.e_star = e_star
        self.n = system.n
        acc = _raw_accelerations(system)
        half = 3 * self.n

        def rhs(t, y):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return np.concatenate([y[half:], acc(y[:half].reshape(-1, 3)).ravel()])

        self.rhs = rhs
        inv0 = core.invariants(system, state0)
        self.inv0 = inv0
        self.e0 = inv0.energy
        self.a0 = inv0.angular_momentum_norm
        self.scale = np.sqrt(core.centered_inertia(system, state0.positions) / system.total_mass)
        self.r_coll = config.collision_radius_factor * self.scale
        self.r_collapse = config.collapse_distance_factor * self.scale

    def state(self, t, y):
        half = 3 * self.n
        return PhaseState(y[:half].reshape(-1, 3), y[half:].reshape(-1, 3), t)

    def k_of(self, y):
        x = y[: 3 * self.n].reshape(-1, 3)
        return self.omega**2 * core.inertia(self.system, x) + self.system.alpha * core.potential(
            self.system, x
        )

    def a_minus_omega_i(self, y):
        return self.a0 - self.omega * core.inertia(self.system, y[: 3 * self.n].reshape(-1, 3))

    def rmin(self, y):
        return float(core.pairwise_distances(y[: 3 * self.n].reshape(-1, 3)).min())

    def contact_time(self, y):
        """``r / -r'`` for the closest pair, or ``inf`` if it is not approaching."""
        half = 3 * self.n
        x, v = y[:half].reshape(-1, 3), y[half:].reshape(-1, 3)
        d = core.pairwise_distances(x)
        k = int(np.argmin(d))
        i, j = (idx[k] for idx in np.triu_indices(self.n, 1))
        rate = float((x[j] - x[i]) @ (v[j] - v[i])) / d[k]
        return d[k] / -rate if rate < 0 else np.inf

    def sample(self, t, y):
        st = self.state(t, y)
        inv = core.invariants(self.system, st)
        k = self.omega**2 * inv.inertia + self.system.alpha * inv.potential
        lab = _label(self.e0, self.a0, self.e_star, self.omega, inv.inertia, k)
        return Sample(t, st, inv, k, lab, self.rmin(y))


def integrate(
    system: AlphaSystem,
    state0: PhaseState,
    omega: float,
    config: IntegratorConfig | None = None,
    e_star: float = np.inf,
) -> TrajectoryRecord:
    """Integrate from ``state0`` until collision or ``config.t_max``.

    Labels in the samples compare the conserved energy and angular momentum
    of ``state0`` with ``e_star`` and the running ``omega I``.

    Raises
    ------
    StepUnderflow
        If the step size collapses while no pair is within the collapse
        distance or about to meet.
    """
    config = config or IntegratorConfig()
    run = _Run(system, state0, omega, config, e_star)
    rec = TrajectoryRecord(system, omega, e_star)
    t0 = state0.time
    t_end = t0 + config.t_max

    solver = DormandPrince(
        run.rhs,
        t0,
        state0.flat(),
        rtol=config.rel_tol,
        atol=config.abs_tol,
        h_init=config.h_init,
        h_max=config.h_max,
    )
    prev = run.sample(t0, solver.y)
    rec.samples.append(prev)
    escaped = False
    max_drift = 0.0

    while True:
        remaining = t_end - solver.t
        if remaining <= 8 * EPS * max(1.0, abs(t_end)):
            rec.events.append(Event(solver.t, EventKind.HorizonReached))
            break
        solver.h_max = min(config.h_max, remaining)
        h_floor = min(max(config.h_min, 8 * EPS * abs(solver.t)), remaining)
        dense = solver.step(h_floor)
        if dense is None:
            r = run.rmin(solver.y)
            # time to contact below what double precision resolves near t
            imminent = run.contact_time(solver.y) < 1e-6 * max(1.0, abs(solver.t))
            if r < run.r_collapse or imminent:
                rec.events.append(Event(solver.t, EventKind.Collision, "step-size collapse"))
                rec.outcome = Outcome("Collision", solver.t, "step-size collapse near coincidence")
                break
            raise StepUnderflow(solver.t, solver.h, r)
        rec.nsteps += 1
        t, y = solver.t, solver.y

        r = run.rmin(y)
        if r < run.r_coll:
            g = lambda tt, yy: run.rmin(yy) - run.r_coll  # noqa: E731
            tc = bisect_event(g, dense, dense.t0, t, prev.min_distance - run.r_coll)
            rec.samples.append(run.sample(tc, dense(tc)))
            rec.events.append(Event(tc, EventKind.Collision, "pair inside collision radius"))
            rec.outcome = Outcome("Collision", tc, "pair inside collision radius")
            break

        cur = run.sample(t, y)
        new_events = []
        if (cur.k_omega >= 0) != (prev.k_omega >= 0):
            tk = bisect_event(lambda tt, yy: run.k_of(yy), dense, dense.t0, t, prev.k_omega)
            new_events.append(Event(tk, EventKind.KSignChange, "+" if cur.k_omega >= 0 else "-"))
        g_prev = run.a0 - omega * prev.invariants.inertia
        g_cur = run.a0 - omega * cur.invariants.inertia
        if (g_cur >= 0) != (g_prev >= 0):
            ta = bisect_event(lambda tt, yy: run.a_minus_omega_i(yy), dense, dense.t0, t, g_prev)
            new_events.append(Event(ta, EventKind.AOmegaICrossing, "up" if g_cur >= 0 else "down"))
        for ev in sorted(new_events, key=lambda e: e.t):
            rec.events.append(ev)
            if ev.t < t:
                rec.samples.append(run.sample(ev.t, dense(ev.t)))
        if (
            not escaped
            and cur.invariants.inertia > config.escape_inertia_factor * run.inv0.inertia
            and cur.invariants.inertia_rate > 0
        ):
            escaped = True
            rec.events.append(Event(t, EventKind.Escape, "inertia grew past escape factor"))
        rec.samples.append(cur)
        drift = abs(cur.invariants.energy - run.e0)
        max_drift = max(max_drift, drift)
        prev = cur

    rec.max_energy_drift = max_drift
    rec.low_accuracy = max_drift > 1e-8 * (1 + abs(run.e0))
    if rec.outcome.kind != "Collision":
        rec.outcome = _tail_verdict(rec, config)
    return rec


def propagate(
    system: AlphaSystem, state: PhaseState, duration: float,
    rel_tol: float = 1e-13, abs_tol: float = 1e-15, h_max: float = np.inf,
) -> PhaseState:
    """Advance a state by ``duration`` (negative runs backward) without event handling."""
    acc = _raw_accelerations(system)
    half = 3 * system.n
    sign = 1.0 if duration >= 0 else -1.0

    def rhs(t, y):
        return sign * np.concatenate([y[half:], acc(y[:half].reshape(-1, 3)).ravel()])

    solver = DormandPrince(rhs, 0.0, state.flat(), rel_tol, abs_tol, h_max=h_max)
    span = abs(duration)
    while span - solver.t > 8 * EPS * max(1.0, span):
        solver.h_max = min(h_max, span - solver.t)
        if solver.step(h_floor=1e-300) is None:
            raise StepUnderflow(solver.t, solver.h, float("nan"))
    y = solver.y
    return PhaseState(y[:half].reshape(-1, 3), y[half:].reshape(-1, 3), state.time + duration)


def _tail(rec, window):
    t_last = rec.samples[-1].t
    return [s for s in rec.samples if s.t >= t_last - window]


def _tail_verdict(rec, config, require_k_plus_labels=False):
    tail = _tail(rec, config.escape_window)
    if len(tail) < 2:
        return Outcome("Undecided", reason="tail too short")
    alpha, w = rec.system.alpha, rec.omega
    margins = [
        s.k_omega / (w**2 * s.invariants.inertia + alpha * abs(s.invariants.potential))
        for s in tail
    ]
    if min(margins) <= 1e-3:
        return Outcome("Undecided", reason="K_omega not bounded away from zero on the tail")
    if require_k_plus_labels and any(
        s.label not in (SetLabel.K1Plus, SetLabel.K2Plus) for s in tail
    ):
        return Outcome("Undecided", reason="tail leaves K+")
    r = np.array([s.min_distance for s in tail])
    if np.any(np.diff(r) < -1e-12 * r[:-1]):
        return Outcome("Undecided", reason="minimum pairwise distance not monotone on the tail")
    return Outcome(
        "GlobalConsistent",
        reason="tail stays in K+ with K_omega bounded away from 0 and separating bodies",
    )


class LabelAutomatonViolation(AssertionError):
    """A label sequence contradicts the proven transition rules."""


@dataclass
class Classification:
    outcome: Outcome
    set_history: list  # (label, t_start, t_end)
    transition_count: int
    theory_applies: bool
    record: TrajectoryRecord

    @property
    def transitions(self) -> list:
        h = self.set_history
        return [(a[0], b[0]) for a, b in zip(h, h[1:])]


def set_history(record: TrajectoryRecord) -> list:
    hist = []
    for s in record.samples:
        if hist and hist[-1][0] is s.label:
            hist[-1][2] = s.t
        else:
            hist.append([s.label, s.t, s.t])
    return [tuple(h) for h in hist]


def check_label_automaton(history, initial_inertia_rate) -> None:
    """Raise if ``K1Minus`` is left after an entry that the theory says is final."""
    locked = False
    for i, (label, _, _) in enumerate(history):
        if locked and label is not SetLabel.K1Minus:
            raise LabelAutomatonViolation(
                f"left K1Minus for {label} at t={history[i][1]:.6g}"
            )
        if label is SetLabel.K1Minus:
            entered = i > 0 and history[i - 1][0] in (SetLabel.K2Minus, SetLabel.K2Plus)
            started_inward = i == 0 and initial_inertia_rate <= 0
            locked = locked or entered or started_inward


def classify_trajectory(
    system: AlphaSystem,
    omega: float,
    state0: PhaseState,
    e_star: float,
    config: IntegratorConfig | None = None,
) -> Classification:
    """Integrate and give the finite-horizon verdict with the label history.

    Theorem-backed verdicts need ``E(state0) < e_star``; otherwise the
    outcome is ``Undecided`` with a by-theory reason whatever the run shows.
    """
    config = config or IntegratorConfig()
    rec = integrate(system, state0, omega, config, e_star=e_star)
    hist = set_history(rec)
    check_label_automaton(hist, rec.samples[0].invariants.inertia_rate)
    e0 = rec.samples[0].invariants.energy
    theory = e0 < e_star
    n_trans = max(len(hist) - 1, 0)
    if not theory:
        outcome = Outcome("Undecided", reason="undecided by theory: energy not below e_star")
    elif rec.outcome.kind == "Collision":
        outcome = rec.outcome
    else:
        outcome = _tail_verdict(rec, config, require_k_plus_labels=True)
        if outcome.kind == "Undecided" and len(rec.events_of(EventKind.KSignChange)) > 0:
            outcome = Outcome(
                "Undecided",
                reason=f"{len(rec.events_of(EventKind.KSignChange))} K sign changes observed; "
                "finitely many transitions cannot settle global existence",
            )
    return Classification(outcome, hist, n_trans, theory, rec)


@dataclass(frozen=True)
class VonZeipelReport:
    i_at_end: float
    i_sup_near_collision: float
    bounded: bool


def von_zeipel_probe(record: TrajectoryRecord, window_fraction: float = 0.1,
                     bound_factor: float = 10.0) -> VonZeipelReport:
    """Check that the moment of inertia stays bounded on the approach to a collision.

    ``bounded`` compares the supremum of ``I`` over the last
    ``window_fraction`` of the run with ``bound_factor`` times the largest
    value reached before that window.
    """
    if record.outcome.kind != "Collision":
        raise PreconditionViolated("von_zeipel_probe needs a record ending in a collision")
    t = record.times
    inertia = record.series("inertia")
    t_c = record.outcome.time
    start = t[0] + (1 - window_fraction) * (t_c - t[0])
    near = inertia[t >= start]
    before = inertia[t < start]
    sup_near = float(near.max())
    ref = float(before.max()) if before.size else float(inertia[0])
    bounded = bool(np.isfinite(sup_near) and sup_near <= bound_factor * ref)
    return VonZeipelReport(float(inertia[-1]), sup_near, bounded)
