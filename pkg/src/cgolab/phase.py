"""Phases, oscillatory weights, stationary-phase and boundary functionals.

The quadratic phase is Phi(z) = (z - z0)^2 - kappa with kappa normalized so
that Re Phi < -1 on the closed domain; the linear phase is exp(i theta) z.
The weight exp(tau (Phi - conj Phi)) is purely oscillatory, so quadrature
needs the oscillation resolved; `resolution_guard` enforces a minimum node
count per wavelength before any sweep runs.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, ResolutionError
from .grid import (
    Jet4,
    ScalarField,
    boundary_trace,
    csum,
    dz_values,
    integrate_area,
)


@dataclass(frozen=True)
class Phase:
    kind: str                    # "quadratic" | "linear"
    domain: object
    z_tilde: complex = 0.0       # critical point (quadratic)
    theta: float = 0.0           # direction angle (linear)
    kappa: float = 0.0           # real offset (quadratic only)
    phi: np.ndarray = None       # Phi on the area grid
    dz_phi: np.ndarray = None
    re_phi: np.ndarray = None    # varphi = Re Phi
    phi_b: np.ndarray = None     # Phi on boundary nodes
    dz_phi_b: np.ndarray = None

    @property
    def d2zz(self):
        return 2.0 if self.kind == "quadratic" else 0.0

    def weight_values(self, tau, sign=+1):
        return np.exp(2j * sign * tau * self.phi.imag)

    def weight(self, tau, sign=+1):
        w = ScalarField(self.domain, self.weight_values(tau, sign))
        w.boundary = np.exp(2j * sign * tau * self.phi_b.imag)
        return w

    def max_oscillation_gradient(self, tau, support_radius=None):
        """sup |grad (2 tau Im Phi)| over the domain (or a support disc)."""
        dom = self.domain
        reach = dom.radius if support_radius is None else min(support_radius, dom.radius)
        if self.kind == "quadratic":
            rmax = reach + abs(self.z_tilde - dom.center)
            return 4.0 * abs(tau) * rmax
        return 2.0 * abs(tau)


def make_quadratic_phase(domain, z_tilde):
    """Phi(z) = (z - z0)^2 - kappa with kappa = 1 + sup over grid pairs.

    The normalization makes Re Phi < -1 hold on the grid; the supremum of
    Re (z - z')^2 over pairs of grid nodes equals (2 r_max)^2, attained by
    the two outermost nodes on a common diameter.
    """
    z0 = complex(z_tilde)
    if abs(z0 - domain.center) >= domain.interior_radius():
        raise InvalidArgumentError("critical point must be strictly interior")
    kappa = 1.0 + (2.0 * domain.interior_radius()) ** 2
    rel = domain.zz - z0
    phi = rel ** 2 - kappa
    relb = domain.boundary_points - z0
    return Phase(
        kind="quadratic",
        domain=domain,
        z_tilde=z0,
        kappa=kappa,
        phi=phi,
        dz_phi=2.0 * rel,
        re_phi=phi.real,
        phi_b=relb ** 2 - kappa,
        dz_phi_b=2.0 * relb,
    )


def make_linear_phase(domain, theta):
    th = float(theta) % (2.0 * math.pi)
    phi = np.exp(1j * th) * domain.zz
    return Phase(
        kind="linear",
        domain=domain,
        theta=th,
        phi=phi,
        dz_phi=np.full_like(domain.zz, np.exp(1j * th)),
        re_phi=phi.real,
        phi_b=np.exp(1j * th) * domain.boundary_points,
        dz_phi_b=np.full_like(domain.boundary_points, np.exp(1j * th)),
    )


def oscillatory_weight(phase, tau, sign=+1):
    """exp(sign * tau * (Phi - conj Phi)); unit modulus everywhere."""
    return phase.weight(tau, sign)


# Nodes per oscillation wavelength demanded before a sweep may run.  The
# quadrature on this grid is spectral, so 2 is the aliasing limit; the
# default keeps a 60% safety margin on top of Nyquist.  `strict` selects the
# conservative 8-per-wavelength rule.
NODES_PER_WAVELENGTH = 3.2
NODES_PER_WAVELENGTH_STRICT = 8.0


def resolution_guard(domain, phase, tau, support_radius=None, strict=False):
    npw = NODES_PER_WAVELENGTH_STRICT if strict else NODES_PER_WAVELENGTH
    grad = phase.max_oscillation_gradient(tau, support_radius)
    if grad == 0:
        return
    lam = 2.0 * math.pi / grad
    dtheta = 2.0 * math.pi * domain.radius / domain.n_theta
    dr = float(np.diff(np.concatenate([[0.0], domain.r, [domain.radius]])).max())
    spacing = max(dtheta, dr)
    if lam / spacing < npw:
        need = int(math.ceil(domain.resolution[0] * npw * spacing / lam))
        raise ResolutionError(
            f"oscillation at tau={tau} under-resolved: {lam/spacing:.2f} nodes "
            f"per wavelength < {npw}; need n_area >= {need}",
            required_n_area=need,
        )


def frakF(jet, tau):
    """Three-term stationary-phase functional at the jet's base point."""
    if tau <= 0:
        raise InvalidArgumentError("frakF needs tau > 0")
    u = jet.get(0, 0)
    t2 = -jet.get(2, 0) + jet.get(0, 2)
    t3 = jet.get(4, 0) - 2.0 * jet.get(2, 2) + jet.get(0, 4)
    return (math.pi / 2.0) * (u / tau + t2 / (4.0 * tau ** 2) + t3 / (32.0 * tau ** 3))


def functional_L(jet):
    return 0.25 * (-jet.get(2, 0) + jet.get(0, 2))


def functional_P(jet):
    return jet.get(4, 0) / 32.0 - jet.get(2, 2) / 16.0 + jet.get(0, 4) / 32.0


@dataclass
class DecayReport:
    taus: list
    values: list
    slope: float
    slope_halfwidth: float
    intercept: float = 0.0
    label: str = ""
    extras: dict = field(default_factory=dict)

    def to_csv_rows(self):
        rows = []
        for t, v in zip(self.taus, self.values):
            rows.append(
                {
                    "tau": t,
                    "value": v,
                    "fit_slope": self.slope,
                    "fit_halfwidth": self.slope_halfwidth,
                }
            )
        return rows


def fit_decay(taus, values, label=""):
    """Least-squares log-log slope with a 95% half-width on the slope."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(taus) < 4:
        raise InvalidArgumentError("fit_decay needs at least 4 samples")
    if np.any(np.diff(taus) <= 0):
        raise InvalidArgumentError("tau list must be strictly increasing")
    if np.any(values <= 0):
        raise InvalidArgumentError("fit_decay needs positive values")
    x = np.log(taus)
    y = np.log(values)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = coef
    n = len(x)
    if n > 2:
        resid = y - A @ coef
        s2 = float(resid @ resid) / (n - 2)
        sxx = float(((x - x.mean()) ** 2).sum())
        half = 1.96 * math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    else:
        half = math.inf
    return DecayReport(list(taus), list(values), float(slope), half, float(intercept), label)


def verify_stationary_phase(u_profile, z_tilde, tau_list, n_area=1448, strict_guard=False):
    """Measure |oscillatory integral - frakF| over a tau sweep.

    The integral uses a dedicated high-resolution grid (about n_area^2/2
    nodes) and exact profile jets for the functional, so the reported decay
    reflects the asymptotics rather than quadrature noise.
    """
    from .grid import build_disc_domain
    from .profiles import sample

    taus = sorted(float(t) for t in tau_list)
    dom = build_disc_domain(1.0, n_area, 64)
    ph = make_quadratic_phase(dom, z_tilde)
    uf = sample(dom, u_profile)
    support = getattr(u_profile, "support_radius", None)
    jet = u_profile.jet(z_tilde)
    errs = []
    vals = []
    for tau in taus:
        resolution_guard(dom, ph, tau, support_radius=support, strict=strict_guard)
        integral = complex(csum(dom.weights * uf.values * ph.weight_values(tau)))
        pred = frakF(jet, tau)
        vals.append(integral)
        errs.append(abs(integral - pred))
    floor = 1e-17 * max(1.0, max(abs(v) for v in vals)) * max(taus) ** 0
    errs = [max(e, floor) for e in errs]
    rep = fit_decay(taus, errs, label="stationary_phase_error")
    rep.extras["integrals"] = vals
    rep.extras["tau3_scaled"] = [e * t ** 3 for e, t in zip(errs, taus)]
    return rep


def frakI(r_field, phase, tau):
    """Two-term boundary functional of the oscillatory pairing correction.

    The second term needs d_z of r near the boundary; r must be an area
    field.  1/(d_z Phi) on the boundary is expanded analytically, so no
    singular interior field is ever formed.
    """
    if phase.kind == "quadratic":
        bmin = np.abs(phase.dz_phi_b).min()
        if bmin < 1e-12:
            raise InvalidArgumentError("phase has a critical point on the boundary")
    dom = r_field.domain
    rb = r_field.with_boundary().boundary
    drb = boundary_trace(ScalarField(dom, dz_values(dom, r_field.values)))
    nu = dom.boundary_normals
    nu_m = nu.real - 1j * nu.imag
    w = np.exp(2j * tau * phase.phi_b.imag)
    term1 = csum(dom.boundary_weights * rb * nu_m / (2.0 * tau * phase.dz_phi_b) * w)
    # d_z(r / (2 tau^2 dzPhi)) = dz(r)/(2 tau^2 dzPhi) - r d2zzPhi/(2 tau^2 dzPhi^2)
    dq = drb / (2.0 * tau ** 2 * phase.dz_phi_b) - rb * phase.d2zz / (
        2.0 * tau ** 2 * phase.dz_phi_b ** 2
    )
    term2 = csum(dom.boundary_weights * nu_m * dq * w)
    return complex(term1 - term2)
