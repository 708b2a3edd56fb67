"""Central configurations, relative equilibria and the excited energy.

A central configuration ``q`` with frequency ``omega`` solves
``omega**2 m_i q_i = grad_i U(q)``.  Contracting with ``q`` shows that every
such ``q`` lies on ``{K_omega = 0}``, and the minimum of ``E_omega`` over that
constraint set is attained at one of them.  The excited energy is therefore
computed by locating central configurations from many starts and keeping
the one of least energy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import core
from .core import AlphaSystem, PhaseState
from .errors import (
    AlphaOutOfRange,
    NoConvergence,
    NonPlanarConfiguration,
    SingularJacobian,
)


@dataclass(frozen=True)
class CentralConfig:
    positions: np.ndarray
    omega: float
    residual: float
    system: AlphaSystem

    @property
    def energy(self) -> float:
        """``E_omega`` at the configuration, the energy of its relative equilibrium."""
        return 0.5 * self.omega**2 * core.inertia(self.system, self.positions) + core.potential(
            self.system, self.positions
        )

    @property
    def is_planar(self) -> bool:
        return _plane_thickness(self.positions) <= 1e-9 * _scale(self.positions)

    @property
    def is_collinear(self) -> bool:
        s = np.linalg.svd(self.positions - self.positions.mean(axis=0), compute_uv=False)
        return s[1] <= 1e-8 * s[0]


@dataclass(frozen=True)
class ExcitedEnergyResult:
    e_star: float
    u_star: float
    minimizer: CentralConfig | None
    multiplier: float
    degenerate: bool = False
    candidates: tuple = ()

    @property
    def expected_multiplier(self) -> float:
        if self.minimizer is None:
            return float("nan")
        return -1.0 / (2.0 + self.minimizer.system.alpha)


def _scale(x):
    return float(np.sqrt(np.mean(np.sum((x - x.mean(axis=0)) ** 2, axis=1)))) or 1.0


def _plane_thickness(x):
    s = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    return float(s[-1]) if s.size >= 3 else 0.0


def cc_residual_vector(system: AlphaSystem, omega: float, positions) -> np.ndarray:
    """``grad(omega**2 I / 2 - U)``, shape ``(N, 3)``."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    return omega**2 * system.m[:, None] * x - core.potential_gradient(system, x)


def potential_hessian(system: AlphaSystem, positions) -> np.ndarray:
    """Hessian of U as a ``(3N, 3N)`` matrix."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    n, a, m = system.n, system.alpha, system.m
    h = np.zeros((3 * n, 3 * n))
    eye = np.eye(3)
    for i, j in zip(*np.triu_indices(n, k=1)):
        d = x[i] - x[j]
        r2 = d @ d
        block = a * m[i] * m[j] * r2 ** (-(a + 2) / 2) * (eye - (a + 2) * np.outer(d, d) / r2)
        si, sj = slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3)
        h[si, si] += block
        h[sj, sj] += block
        h[si, sj] -= block
        h[sj, si] -= block
    return h


def _canonical_orientation(x):
    """Rotate a planar configuration into the xy-plane, leave others alone."""
    xc = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(xc)
    if s.size < 3 or s[2] > 1e-9 * max(s[0], 1e-300):
        return x
    rot = vt.copy()
    if np.linalg.det(rot) < 0:
        rot[2] *= -1
    y = x @ rot.T
    y[:, 2] = 0.0
    return y


def central_config_solve(
    system: AlphaSystem,
    omega: float,
    initial_guess,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> CentralConfig:
    """Newton iteration on ``omega**2 m q - grad U(q) = 0``.

    Steps are minimum-norm least-squares solutions, which removes the
    rotational kernel of the Jacobian, and are halved until the residual
    norm decreases.  A planar result is rotated into the xy-plane.

    Raises
    ------
    NoConvergence
        When ``max_iter`` iterations do not bring the sup-norm residual
        below ``tol``.
    SingularJacobian
        When the Jacobian has more null directions than rotations explain.
    """
    x = np.array(initial_guess, dtype=float).reshape(-1, 3)
    x = x - core.center_of_mass(system, x)
    w2m = omega**2 * np.repeat(system.m, 3)
    res = cc_residual_vector(system, omega, x)
    norm = float(np.linalg.norm(res))
    for _ in range(max_iter):
        sup = float(np.abs(res).max())
        if sup < tol:
            break
        jac = np.diag(w2m) - potential_hessian(system, x)
        sv = np.linalg.svd(jac, compute_uv=False)
        # three rotations may be null at (or near) a solution
        informative = sv[: max(sv.size - 3, 1)]
        cond = informative[0] / informative[-1] if informative[-1] > 0 else np.inf
        if cond > 1e14:
            raise SingularJacobian("central configuration Jacobian is singular", cond)
        step = np.linalg.lstsq(jac, -res.ravel(), rcond=1e-12)[0].reshape(-1, 3)
        lam = 1.0
        while lam > 1e-8:
            trial = x + lam * step
            r = core.pairwise_distances(trial)
            if r.min() > 0:
                try:
                    trial_res = cc_residual_vector(system, omega, trial)
                except Exception:  # noqa: BLE001 - pair pushed under the collision floor
                    trial_res = None
                if trial_res is not None and np.linalg.norm(trial_res) < norm:
                    break
            lam *= 0.5
        else:
            raise NoConvergence("line search failed to reduce the residual")
        x, res = trial, trial_res
        norm = float(np.linalg.norm(res))
    else:
        raise NoConvergence(f"no convergence in {max_iter} iterations (residual {norm:.3e})")
    x = x - core.center_of_mass(system, x)
    x = _canonical_orientation(x)
    residual = float(np.abs(cc_residual_vector(system, omega, x)).max())
    return CentralConfig(x, float(omega), residual, system)


def relative_equilibrium_state(cc: CentralConfig, time: float = 0.0) -> PhaseState:
    """Lift a planar central configuration to the rigidly rotating solution."""
    q = cc.positions
    if np.ptp(q[:, 2]) > 1e-9 * _scale(q):
        raise NonPlanarConfiguration("central configuration is not in a horizontal plane")
    v = cc.omega * np.column_stack([-q[:, 1], q[:, 0], np.zeros(len(q))])
    return PhaseState(q.copy(), v, time)


def scale_to_k_zero(system: AlphaSystem, omega: float, positions) -> np.ndarray:
    """Dilate a configuration about its center of mass onto ``{K_omega = 0}``."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    x = x - core.center_of_mass(system, x)
    i0 = core.inertia(system, x)
    u0 = core.potential(system, x)
    lam = (-system.alpha * u0 / (omega**2 * i0)) ** (1.0 / (system.alpha + 2))
    return lam * x


def _shape_objective(system):
    """``log(-U) + (alpha/2) log I_cm``: invariant under dilation and rotation."""
    m, a, n = system.m, system.alpha, system.n

    def fun(flat):
        x = flat.reshape(-1, 3)
        x = x - m @ x / m.sum()
        d = x[:, None, :] - x[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        r2[np.diag_indices(n)] = 1.0
        inv = np.outer(m, m) * r2 ** (-a / 2)
        inv[np.diag_indices(n)] = 0.0
        negu = 0.5 * inv.sum()
        big_i = float(np.sum(m * np.sum(x * x, axis=1)))
        w = np.outer(m, m) * r2 ** (-(a + 2) / 2)
        w[np.diag_indices(n)] = 0.0
        grad_u = a * np.einsum("ij,ijk->ik", w, d)  # gradient of U
        grad = -grad_u / negu + a * m[:, None] * x / big_i
        return math.log(negu) + 0.5 * a * math.log(big_i), grad.ravel()

    return fun


def _structured_starts(system):
    n = system.n
    starts = []
    for perm in _orderings_mod_reversal(n):
        pos = np.zeros((n, 3))
        pos[list(perm), 0] = np.arange(n) - (n - 1) / 2
        starts.append(pos)
    ang = 2 * np.pi * np.arange(n) / n
    starts.append(np.column_stack([np.cos(ang), np.sin(ang), np.zeros(n)]))
    if n == 4:
        starts.append(np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float))
    if n >= 4:
        ang = 2 * np.pi * np.arange(n - 1) / (n - 1)
        starts.append(np.vstack([[0, 0, 0], np.column_stack([np.cos(ang), np.sin(ang), np.zeros(n - 1)])]))
    return starts


def _orderings_mod_reversal(n):
    for perm in itertools.permutations(range(n)):
        if perm <= perm[::-1]:
            yield perm


def _candidate_from_start(system, omega, start, polish_shape):
    x = np.asarray(start, dtype=float)
    if polish_shape:
        res = minimize(_shape_objective(system), x.ravel(), jac=True, method="BFGS",
                       options={"gtol": 1e-10, "maxiter": 2000})
        x = res.x.reshape(-1, 3)
    x = scale_to_k_zero(system, omega, x)
    return central_config_solve(system, omega, x)


def excited_energy(
    system: AlphaSystem, omega: float, restarts: int = 32, seed: int = 0
) -> ExcitedEnergyResult:
    """Excited energy ``E*(omega) = inf { E_omega(x) : K_omega(x) = 0 }``.

    Structured starts (every collinear ordering, the regular polygon and,
    for four bodies, the tetrahedron) are solved directly by Newton.  Each
    of ``restarts`` seeded random starts is first driven down the
    scale-invariant shape objective ``(-U) I**(alpha/2)``, then rescaled onto
    ``K_omega = 0`` and polished by Newton.  The best central configuration
    found is returned; the search is not exhaustive.

    For ``alpha == 2`` the excited energy is identically zero and for
    ``alpha < 2`` with three or more bodies it is ``-inf``; both come back
    flagged ``degenerate`` without running the search.
    """
    a = system.alpha
    if a == 2:
        return ExcitedEnergyResult(0.0, 0.0, None, float("nan"), degenerate=True)
    if a < 2:
        if system.n >= 3:
            return ExcitedEnergyResult(-np.inf, np.inf, None, float("nan"), degenerate=True)
        raise AlphaOutOfRange("two-body excited energy for alpha < 2 is not a threshold")
    rng = np.random.default_rng(seed)
    starts = [(s, False) for s in _structured_starts(system)]
    starts += [(s, True) for s in _structured_starts(system)]
    for _ in range(restarts):
        starts.append((rng.normal(size=(system.n, 3)), True))
    found = []
    for start, polish in starts:
        try:
            cc = _candidate_from_start(system, omega, start, polish)
        except (NoConvergence, SingularJacobian):
            continue
        found.append(cc)
    if not found:
        raise NoConvergence("no central configuration found from any start")
    found.sort(key=lambda c: (round(c.energy, 12), tuple(np.round(c.positions, 9).ravel())))
    best = found[0]
    u_star = -core.potential(system, best.positions)
    return ExcitedEnergyResult(
        e_star=(a / 2 - 1) * u_star,
        u_star=u_star,
        minimizer=best,
        multiplier=kkt_multiplier(system, omega, best.positions),
        candidates=tuple(sorted({round(c.energy, 9) for c in found})),
    )


def kkt_multiplier(system: AlphaSystem, omega: float, positions) -> float:
    """Least-squares ``lam`` in ``-grad U = lam grad K_omega``."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    grad_u = core.potential_gradient(system, x).ravel()
    grad_k = (2 * omega**2 * system.m[:, None] * x).ravel() + system.alpha * grad_u
    return float(-(grad_u @ grad_k) / (grad_k @ grad_k))


@dataclass(frozen=True)
class EqualMassThreeBody:
    x_lin: float
    e_linear: float
    a_linear: float
    r_tri: float
    e_triangle: float
    a_triangle: float

    @property
    def a_star(self) -> float:
        return self.a_linear

    @property
    def e_star(self) -> float:
        """Lower of the two relative-equilibrium energies."""
        return min(self.e_linear, self.e_triangle)


def equal_mass_3body_closed_forms(alpha: float, omega: float) -> EqualMassThreeBody:
    """Collinear and equilateral relative equilibria of three unit masses.

    Collinear: bodies at ``-x, 0, x`` with
    ``x**(alpha+2) = (alpha / omega**2) (1 + 2**-(alpha+1))``.
    Equilateral: side ``r`` with ``r**(alpha+2) = alpha M / omega**2``, M = 3.
    Both energies equal ``(alpha/2 - 1)(-U)`` and angular momenta ``omega I``.
    """
    if alpha <= 2:
        raise AlphaOutOfRange("closed forms need alpha > 2")
    a, w = alpha, omega
    g = 1 + 2.0 ** (-(a + 1))
    x = (a / w**2 * g) ** (1 / (a + 2))
    e_lin = 2 * (a / 2 - 1) * g ** (2 / (a + 2)) * (a / w**2) ** (-a / (a + 2))
    a_lin = 2 * (a * g) ** (2 / (a + 2)) * w ** ((a - 2) / (a + 2))
    r = (3 * a / w**2) ** (1 / (a + 2))
    e_tri = (a / 2 - 1) * 3.0 ** (2 / (a + 2)) * (a / w**2) ** (-a / (a + 2))
    a_tri = (3 * a) ** (2 / (a + 2)) * w ** ((a - 2) / (a + 2))
    return EqualMassThreeBody(x, e_lin, a_lin, r, e_tri, a_tri)


def moulton_collinear(
    system: AlphaSystem, omega: float, ordering, tol: float = 1e-12, max_iter: int = 200
) -> np.ndarray:
    """Collinear central configuration with bodies in the given left-to-right order.

    Newton on the one-dimensional equations
    ``omega**2 x_i = alpha sum_j m_j (x_i - x_j) / |x_i - x_j|**(alpha+2)``,
    damped so that no gap closes.  Returns ``(N, 3)`` positions on the x-axis.
    """
    if system.alpha <= 2:
        raise AlphaOutOfRange("collinear solver expects alpha > 2")
    order = list(ordering)
    n, a, m = system.n, system.alpha, system.m
    if sorted(order) != list(range(n)):
        raise ValueError("ordering must be a permutation of the bodies")
    x = np.zeros(n)
    x[order] = np.arange(n, dtype=float)
    pos = scale_to_k_zero(system, omega, np.column_stack([x, np.zeros((n, 2))]))
    x = pos[:, 0]

    def residual(x):
        d = x[:, None] - x[None, :]
        ad = np.abs(d)
        np.fill_diagonal(ad, 1.0)
        t = m[None, :] * d * ad ** (-(a + 2))
        np.fill_diagonal(t, 0.0)
        return omega**2 * x - a * t.sum(axis=1), ad

    def gaps(x):
        return np.diff(x[order])

    f, ad = residual(x)
    for _ in range(max_iter):
        if np.abs(f).max() < tol * max(1.0, np.abs(x).max()):
            break
        w = a * (a + 1) * m[None, :] * ad ** (-(a + 2))
        np.fill_diagonal(w, 0.0)
        jac = -w
        jac[np.diag_indices(n)] = omega**2 + w.sum(axis=1)
        step = np.linalg.solve(jac, -f)
        lam = 1.0
        while True:
            trial = x + lam * step
            if np.all(gaps(trial) > 0):
                f_trial, ad_trial = residual(trial)
                if np.linalg.norm(f_trial) < np.linalg.norm(f) or lam < 1e-10:
                    break
            lam *= 0.5
            if lam < 1e-12:
                raise NoConvergence("damping could not keep the gaps positive")
        x, f, ad = trial, f_trial, ad_trial
    else:
        raise NoConvergence("collinear Newton iteration did not converge")
    return np.column_stack([x, np.zeros((n, 2))])


def distinct_collinear_configs(system: AlphaSystem, omega: float, atol: float = 1e-8) -> list:
    """All collinear central configurations, one per ordering up to reversal."""
    out = []
    for perm in _orderings_mod_reversal(system.n):
        q = moulton_collinear(system, omega, perm)
        if not any(np.allclose(q, p, atol=atol) or np.allclose(q, -p, atol=atol) for p in out):
            out.append(q)
    return out


@dataclass(frozen=True)
class PlanarityKernel:
    kernel_dim: int
    kernel_basis: np.ndarray
    matrix: np.ndarray
    singular_values: np.ndarray


def planarity_matrix(positions, alpha: float) -> np.ndarray:
    """Weighted graph Laplacian with weights ``1 / r_ij**(alpha+2)``."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    d = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    np.fill_diagonal(d, 1.0)
    a = d ** (-(alpha + 2))
    np.fill_diagonal(a, 0.0)
    return np.diag(a.sum(axis=1)) - a


def planarity_kernel(positions, alpha: float, rtol: float = 1e-10) -> PlanarityKernel:
    """Numerical kernel of the vertical-force matrix of a configuration.

    A relative equilibrium rotating about z needs ``C z = 0`` for the vector
    of heights ``z``; a one-dimensional kernel spanned by ``(1, ..., 1)``
    forces all heights to agree.
    """
    c = planarity_matrix(positions, alpha)
    _, s, vt = np.linalg.svd(c)
    null = s < rtol * s[0]
    basis = vt[null]
    for k in range(basis.shape[0]):
        if basis[k].sum() < 0:
            basis[k] = -basis[k]
    return PlanarityKernel(int(null.sum()), basis, c, s)


@dataclass(frozen=True)
class MonotonicityRow:
    omega: float
    e_star: float
    planar: bool


def estar_monotonicity_probe(
    system: AlphaSystem, omegas, restarts: int = 8, seed: int = 0, rtol: float = 1e-8
):
    """Excited energy along an ascending frequency grid.

    Returns ``(rows, nondecreasing)`` where the flag allows a relative slack
    ``rtol`` for optimizer noise.
    """
    omegas = list(omegas)
    if any(b < a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omega grid must be ascending")
    rows = []
    for w in omegas:
        res = excited_energy(system, w, restarts=restarts, seed=seed)
        rows.append(MonotonicityRow(w, res.e_star, res.minimizer.is_planar))
    ok = all(b.e_star >= a.e_star * (1 - rtol) for a, b in zip(rows, rows[1:]))
    return rows, ok


def inertia_lower_bound(system: AlphaSystem, c: float) -> float:
    """Lower bound on ``I`` for any configuration with ``-U <= c``."""
    if c <= 0:
        raise ValueError("c must be positive")
    m, big_m = system.min_mass, system.total_mass
    return m**2 / big_m * (m**2 / c) ** (2 / system.alpha)


@dataclass(frozen=True)
class ExclusionReport:
    alpha: float
    omega: float
    energy_bound: float
    momentum_bound: float
    collinear_excluded: bool

    @property
    def incompatible(self) -> bool:
        return self.momentum_bound > self.energy_bound

    @property
    def excludes_all(self) -> bool:
        return self.incompatible and self.collinear_excluded


def re_exclusion_check(alpha: float, omega: float) -> ExclusionReport:
    """Can an equal-mass relative equilibrium sit below ``E_linear`` with ``|A| >= A_linear``?

    For a triangle at frequency ``w1`` the energy condition gives
    ``w1 < energy_bound`` and the momentum condition ``w1 >= momentum_bound``;
    the set excludes triangles when the bounds are incompatible.  Collinear
    equilibria are excluded because both energy and angular momentum
    increase with the frequency.
    """
    if alpha <= 2:
        raise AlphaOutOfRange("exclusion check needs alpha > 2")
    a = alpha
    g = 1 + 2.0 ** (-(a + 1))
    energy_bound = 2 ** ((a + 2) / (2 * a)) * (g / 3) ** (1 / a) * omega
    momentum_bound = 2 ** ((a + 2) / (a - 2)) * (g / 3) ** (2 / (a - 2)) * omega
    ref = equal_mass_3body_closed_forms(a, omega)
    above = equal_mass_3body_closed_forms(a, omega * (1 + 1e-6))
    collinear_excluded = above.e_linear > ref.e_linear and above.a_linear > ref.a_linear
    return ExclusionReport(a, omega, energy_bound, momentum_bound, collinear_excluded)
