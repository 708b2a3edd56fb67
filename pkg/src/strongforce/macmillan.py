"""MacMillan oscillator and its finite-mass perturbation.

Two primaries of mass 1/2 sit at ``(x1, y1, z1)`` and ``(-x1, -y1, z1)``; a
third body of mass ``epsilon`` moves on the symmetry axis at ``(0, 0, z3)``
with ``z1 = -epsilon z3`` so that the center of mass stays at the origin.
With ``epsilon = 0`` and the primaries on the unit circle the third body
obeys the one-degree-of-freedom MacMillan equation.

Writing ``rho = sqrt(x1**2 + y1**2)`` and ``A = x1 y1' - y1 x1'`` (the
conserved angular momentum), the symmetric motion reduces to

    rho''  = A**2 / rho**3 - alpha / (2**(alpha+2) rho**(alpha+1))
             - alpha epsilon rho / r13**(alpha+2)
    z3''   = -alpha (1 + epsilon) z3 / r13**(alpha+2)

with ``r13**2 = rho**2 + (1 + epsilon)**2 z3**2``.  With the third body at
the origin the primaries feel an effective attraction enhanced by the
factor ``1 + 2**(alpha+2) epsilon``; with it at infinity the factor is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaOutOfRange, PrimaryCollision
from .ode import DormandPrince, bisect_event

PRIMARY_FLOOR = 1e-12


@dataclass(frozen=True)
class MacParams:
    """Exponent and third mass of the perturbed MacMillan problem."""

    alpha: float
    epsilon: float = 1e-3

    def __post_init__(self):
        if not self.alpha > 2:
            raise AlphaOutOfRange("the MacMillan construction needs alpha > 2")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def omega_sq(self) -> float:
        """Squared angular speed of the unit-radius circular primaries."""
        return self.alpha / 2.0 ** (self.alpha + 2)

    @property
    def omega(self) -> float:
        return math.sqrt(self.omega_sq)

    @property
    def kappa(self) -> float:
        """Relative attraction added by a third body sitting between the primaries."""
        return 2.0 ** (self.alpha + 2) * self.epsilon


@dataclass
class ReducedState:
    x1: float
    y1: float
    z3: float
    x1dot: float
    y1dot: float
    z3dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.z3, self.x1dot, self.y1dot, self.z3dot])

    @classmethod
    def from_array(cls, y) -> "ReducedState":
        return cls(*(float(v) for v in y))

    @property
    def rho(self) -> float:
        return math.hypot(self.x1, self.y1)

    @property
    def angular_momentum(self) -> float:
        return self.x1 * self.y1dot - self.y1 * self.x1dot

    @property
    def separation(self) -> float:
        """Distance between the primaries."""
        return 2.0 * self.rho

    @property
    def separation_rate(self) -> float:
        return 2.0 * (self.x1 * self.x1dot + self.y1 * self.y1dot) / self.rho

    @classmethod
    def from_polar(cls, rho, rhodot, z3, z3dot, angular_momentum, theta=0.0) -> "ReducedState":
        c, s = math.cos(theta), math.sin(theta)
        tang = angular_momentum / rho
        return cls(rho * c, rho * s, z3, rhodot * c - tang * s, rhodot * s + tang * c, z3dot)


def mac_rhs(alpha: float, z, v):
    """MacMillan equation ``z'' = -alpha z / (1 + z**2)**((alpha+2)/2)``."""
    return v, -alpha * z * (1.0 + z * z) ** (-(alpha + 2) / 2)


def mac_hamiltonian(alpha: float, z, v):
    return 0.5 * v * v - (1.0 + z * z) ** (-alpha / 2)


def _r13_sq(params, rho_sq, z3):
    return rho_sq + ((1 + params.epsilon) * z3) ** 2


def eps_mac_rhs(params: MacParams, state: ReducedState) -> np.ndarray:
    """Time derivative of ``(x1, y1, z3, x1', y1', z3')``."""
    a, eps = params.alpha, params.epsilon
    rho_sq = state.x1**2 + state.y1**2
    if rho_sq <= PRIMARY_FLOOR**2:
        raise PrimaryCollision("primaries have collided")
    r13_sq = _r13_sq(params, rho_sq, state.z3)
    pull = a / 2.0 ** (a + 2) * rho_sq ** (-(a + 2) / 2) + a * eps * r13_sq ** (-(a + 2) / 2)
    return np.array(
        [
            state.x1dot,
            state.y1dot,
            state.z3dot,
            -pull * state.x1,
            -pull * state.y1,
            -a * (1 + eps) * state.z3 * r13_sq ** (-(a + 2) / 2),
        ]
    )


def eps_energy(params: MacParams, state: ReducedState) -> float:
    a, eps = params.alpha, params.epsilon
    rho_sq = state.x1**2 + state.y1**2
    r13_sq = _r13_sq(params, rho_sq, state.z3)
    return (
        0.5 * (state.x1dot**2 + state.y1dot**2)
        - rho_sq ** (-a / 2) / 2.0 ** (a + 2)
        + eps * ((1 + eps) * state.z3dot**2 / 2 - r13_sq ** (-a / 2))
    )


def _k_polar(params, rho, z3):
    a, eps, w2 = params.alpha, params.epsilon, params.omega_sq
    r13_sq = _r13_sq(params, rho * rho, z3)
    return w2 * rho * rho - a / (2.0 ** (a + 2) * rho**a) + eps * (
        (1 + eps) * w2 * z3 * z3 - a * r13_sq ** (-a / 2)
    )


def eps_k_omega(params: MacParams, state: ReducedState) -> float:
    """``K_omega`` of the full three-body configuration at the primaries' frequency."""
    return _k_polar(params, state.rho, state.z3)


def eps_inertia(params: MacParams, state: ReducedState) -> float:
    eps = params.epsilon
    return state.x1**2 + state.y1**2 + eps * (1 + eps) * state.z3**2


def eps_excited_energy(params: MacParams) -> float:
    """Excited energy of the three-body system at the primaries' frequency."""
    a = params.alpha
    return (a / 2 - 1) * (params.epsilon + 2.0 ** (-(a + 2))) ** (2 / (a + 2)) * 2.0 ** (-a)


@dataclass(frozen=True)
class ReferenceProfile:
    r0_ref: float
    r_inf: float
    v0_4omega: float
    v_inf_4omega: float


def reference_profile(params: MacParams) -> ReferenceProfile:
    """Saddles of the two frozen-third-body effective potentials.

    In terms of the primaries' separation ``r`` and with ``c = 4 omega``
    the planar dynamics with the third body fixed at the origin has
    effective potential ``c**2 / (2 r**2) - (1 + kappa) / r**alpha`` and with
    the third body at infinity the same with ``kappa = 0``.  Returns both
    critical radii and values.
    """
    a, k = params.alpha, params.kappa
    base = 4 * (a / 2 - 1) * 2.0 ** (-(a + 2))
    return ReferenceProfile(
        r0_ref=2 * (1 + k) ** (1 / (a - 2)),
        r_inf=2.0,
        v0_4omega=base * (1 + k) ** (-2 / (a - 2)),
        v_inf_4omega=base,
    )


def reference_potential(params: MacParams, r, third_at_origin: bool):
    """Effective potential in the separation with the third body frozen."""
    k = params.kappa if third_at_origin else 0.0
    c = 4 * params.omega
    return c**2 / (2 * r**2) - (1 + k) * r ** (-params.alpha)


@dataclass(frozen=True)
class SRegion:
    in_s: bool
    s_sign: str
    region: str


def s_region(params: MacParams, state: ReducedState, tol: float = 1e-10) -> SRegion:
    """Locate a state relative to the sub-threshold set and the two separatrices.

    ``in_s`` requires energy below a quarter of the origin-reference saddle
    value and angular momentum equal to ``omega``.  ``s_sign`` compares the
    separation with the origin-reference saddle radius.  Inside the set the
    outer part is region ``E``; the inner part is split by the
    infinity-reference separatrix into ``A`` (below it, left of its saddle),
    ``C`` (below it, right of its saddle), ``B`` (above it, separating) and
    ``D`` (above it, approaching).
    """
    prof = reference_profile(params)
    r, rdot = state.separation, state.separation_rate
    s_sign = "+" if r > prof.r0_ref else "-"
    in_s = (
        eps_energy(params, state) < prof.v0_4omega / 4
        and abs(state.angular_momentum - params.omega) < tol
    )
    if not in_s:
        return SRegion(False, s_sign, "none")
    if s_sign == "+":
        return SRegion(True, s_sign, "E")
    h_inf = 0.5 * rdot**2 + reference_potential(params, r, third_at_origin=False)
    if h_inf < prof.v_inf_4omega or rdot == 0:
        region = "A" if r < prof.r_inf else "C"
    else:
        region = "B" if rdot > 0 else "D"
    return SRegion(True, s_sign, region)


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of the transition experiment.

    ``rho_band`` bounds the half-separation and defaults to the window
    between the two reference saddles.  The run stops once the primaries
    leave it: their circular orbit is unstable and a departure from the
    window marks the start of collapse or escape.
    """

    t_max: float = 110.0
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    h_max: float = 0.5
    rho_band: tuple | None = None
    tune_initial_radius: bool = True
    tune_iterations: int = 60
    rho0: float | None = None


@dataclass
class ExperimentResult:
    params: MacParams
    rho0: float
    z3_amplitude: float
    transitions: list
    times: np.ndarray
    samples: np.ndarray
    k_values: np.ndarray
    k_at_z3_zero: list = field(default_factory=list)
    k_at_z3_extreme: list = field(default_factory=list)
    end_time: float = 0.0
    stop_reason: str = ""
    energy_drift: float = 0.0

    @property
    def count(self) -> int:
        return len(self.transitions)

    @property
    def max_abs_k(self) -> float:
        return float(np.abs(self.k_values).max())

    @property
    def pattern_ok(self) -> bool:
        """K negative at every axis crossing and positive at every turning point."""
        return all(k < 0 for _, k in self.k_at_z3_zero) and all(
            k > 0 for _, k in self.k_at_z3_extreme
        )


def _polar_rhs(params):
    a, eps, w2 = params.alpha, params.epsilon, params.omega_sq
    c_prim = a / 2.0 ** (a + 2)
    half = (a + 2) / 2

    def rhs(t, y):
        rho, rhodot, z, zdot = y
        r13_sq = rho * rho + ((1 + eps) * z) ** 2
        f13 = r13_sq ** (-half)
        return np.array(
            [
                rhodot,
                w2 / rho**3 - c_prim * rho ** (-a - 1) - a * eps * rho * f13,
                zdot,
                -a * (1 + eps) * z * f13,
            ]
        )

    return rhs


def _polar_energy(params, y):
    rho, rhodot, z, zdot = y
    state = ReducedState.from_polar(rho, rhodot, z, zdot, params.omega)
    return eps_energy(params, state)


def _band(params, cfg):
    if cfg.rho_band is not None:
        return cfg.rho_band
    prof = reference_profile(params)
    if params.epsilon == 0:
        return 0.5 * prof.r_inf * (1 - 1e-3), 0.5 * prof.r0_ref * (1 + 1e-3)
    return 0.5 * prof.r_inf, 0.5 * prof.r0_ref


def _run(params, y0, cfg, record):
    """Integrate the reduced flow until ``t_max`` or until rho leaves the band.

    Returns ``(fate, t_end, data)`` where ``fate`` is ``+1`` for leaving
    above the band, ``-1`` below, ``0`` for reaching ``t_max``.
    """
    rhs = _polar_rhs(params)
    lo_band, hi_band = _band(params, cfg)
    solver = DormandPrince(rhs, 0.0, y0, cfg.rel_tol, cfg.abs_tol, h_max=cfg.h_max)
    k_of = lambda y: _k_polar(params, y[0], y[2])  # noqa: E731
    data = {"t": [0.0], "y": [np.array(y0)], "k": [k_of(y0)], "cross": [], "zero": [], "ext": []}
    k_prev = data["k"][0]
    while solver.t < cfg.t_max:
        solver.h_max = min(cfg.h_max, cfg.t_max - solver.t)
        dense = solver.step(h_floor=1e-14)
        if dense is None:
            return -1, solver.t, data
        t0, t1, y_old, y_new = dense.t0, dense.t1, dense.y0, solver.y
        if y_new[0] > hi_band or y_new[0] < lo_band:
            edge = hi_band if y_new[0] > hi_band else lo_band
            t_exit = bisect_event(lambda t, y: y[0] - edge, dense, t0, t1, y_old[0] - edge)
            return (1 if edge == hi_band else -1), t_exit, data
        if record:
            k_new = k_of(y_new)
            if (k_new < 0) != (k_prev < 0):
                tc = bisect_event(lambda t, y: k_of(y), dense, t0, t1, k_prev)
                data["cross"].append((tc, "+-" if k_prev >= 0 else "-+", float(dense(tc)[2])))
            if (y_new[2] < 0) != (y_old[2] < 0):
                tz = bisect_event(lambda t, y: y[2], dense, t0, t1, y_old[2])
                data["zero"].append((tz, k_of(dense(tz))))
            if (y_new[3] < 0) != (y_old[3] < 0) and t0 > 0:
                te = bisect_event(lambda t, y: y[3], dense, t0, t1, y_old[3])
                data["ext"].append((te, k_of(dense(te))))
            data["t"].append(t1)
            data["y"].append(y_new.copy())
            data["k"].append(k_new)
            k_prev = k_new
    return 0, solver.t, data


def tune_initial_radius(params: MacParams, z3_amplitude: float, cfg: ExperimentConfig) -> float:
    """Half-separation between the two saddles that keeps the primaries bounded longest.

    The circular orbit of the primaries is unstable, so a generic start in
    the window drifts to collision or escape.  Bisection on the fate over
    ``[r_inf / 2, r0_ref / 2]`` homes in on the boundary between the two.
    """
    lo, hi = _band(params, cfg)
    fate = lambda rho: _run(params, [rho, 0.0, z3_amplitude, 0.0], cfg, False)[0]  # noqa: E731
    f_lo = fate(lo)
    mid = 0.5 * (lo + hi)
    for _ in range(cfg.tune_iterations):
        mid = 0.5 * (lo + hi)
        f_mid = fate(mid)
        if f_mid == 0:
            break
        if f_mid == f_lo:
            lo = mid
        else:
            hi = mid
    return mid


def transition_experiment(
    params: MacParams, z3_amplitude: float = 5.0, config: ExperimentConfig | None = None
) -> ExperimentResult:
    """Count sign changes of ``K_omega`` while the third body oscillates.

    The primaries start at rest radially with angular momentum ``omega``,
    the third body at ``z3_amplitude`` at rest.  With ``epsilon = 0`` the
    primaries start on the unit circle, where ``K_omega`` vanishes for all
    time.  Sign changes are located on the dense output; the value of
    ``K_omega`` is also recorded at every axis crossing and every turning
    point of the third body.
    """
    cfg = config or ExperimentConfig()
    if cfg.rho0 is not None:
        rho0 = cfg.rho0
    elif params.epsilon == 0 or not cfg.tune_initial_radius:
        rho0 = 1.0
    else:
        rho0 = tune_initial_radius(params, z3_amplitude, cfg)
    y0 = np.array([rho0, 0.0, z3_amplitude, 0.0])
    fate, t_end, data = _run(params, y0, cfg, True)
    ys = np.array(data["y"])
    e0 = _polar_energy(params, ys[0])
    drift = max(abs(_polar_energy(params, y) - e0) for y in ys[:: max(1, len(ys) // 200)])
    reason = {0: "horizon", 1: "primaries left band outward", -1: "primaries left band inward"}[fate]
    return ExperimentResult(
        params=params,
        rho0=float(rho0),
        z3_amplitude=float(z3_amplitude),
        transitions=data["cross"],
        times=np.array(data["t"]),
        samples=ys,
        k_values=np.array(data["k"]),
        k_at_z3_zero=data["zero"],
        k_at_z3_extreme=data["ext"],
        end_time=float(t_end),
        stop_reason=reason,
        energy_drift=float(drift),
    )
