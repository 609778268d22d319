"""Carleman-gauged inverses and contraction-series CGO solutions.

A series solves Delta W + 2 A d_z W + 2 B dbar W + C W = 0 as
U = e^{tau Phi}(U0 - U1) + sum_{j>=2} (-1)^j U_j e^{tau conj Phi}, with the
terms produced by the gauged inverses R_tau and the frame parametrices.
Term recursion is sequential; everything inside a term is node-parallel.

Assembled fields are exponentially small (Re Phi < -1), so `assemble`
normalizes by the supremum of |e^{tau Phi}| by default and records the
scale; every downstream use is linear in the solution, so ratios and
residual quotients are unaffected.
"""
import math

import numpy as np

from . import vekua
from .errors import InvalidArgumentError, SolverFailureError
from .grid import (
    Field3,
    Matrix3Field,
    ScalarField,
    dz_matrix,
    dz_values,
    dzbar_matrix,
    dzbar_values,
    l2_norm,
)
from .phase import resolution_guard


class SystemCoeffs:
    """Coefficients (A, B, C) of one weakly coupled second-order system."""

    def __init__(self, A, B, C, check_support=True, support_tol=1e-8):
        self.domain = A.domain
        self.A = A.with_boundary()
        self.B = B.with_boundary()
        self.C = C.with_boundary()
        if check_support:
            for name, M in (("A", self.A), ("B", self.B)):
                top = np.abs(M.boundary).max()
                scale = max(np.abs(M.values).max(), 1.0)
                if top > support_tol * scale:
                    raise InvalidArgumentError(
                        f"coefficient {name} must have zero boundary trace "
                        f"(got {top:.2e})"
                    )
        self.Q1 = (dz_matrix(self.A) * (-2.0) - self.B.matmul(self.A) + self.C).with_boundary()
        self.Q2 = (dzbar_matrix(self.B) * (-2.0) - self.A.matmul(self.B) + self.C).with_boundary()
        self._frames = {}

    def frame(self, which, anchor=None):
        """Vekua frame for matrix 'A' or 'B' (cached per anchor)."""
        anchor = self.domain.center if anchor is None else complex(anchor)
        key = (which, anchor)
        if key not in self._frames:
            M = self.A if which == "A" else self.B
            self._frames[key] = vekua.build_vekua_frame(M, anchor)
        return self._frames[key]

    def apply_P(self, W):
        """Pointwise principal operator P(x,D) W for a plain field."""
        dom = self.domain
        lap = np.stack(
            [4.0 * dz_values(dom, dzbar_values(dom, W.values[i])) for i in range(3)]
        )
        dzW = Field3(dom, np.stack([dz_values(dom, W.values[i]) for i in range(3)]))
        dbW = Field3(dom, np.stack([dzbar_values(dom, W.values[i]) for i in range(3)]))
        out = (
            Field3(dom, lap)
            + 2.0 * self.A.matvec(dzW)
            + 2.0 * self.B.matvec(dbW)
            + self.C.matvec(W)
        )
        return out


def zero_coeffs(domain):
    Z = Matrix3Field.zeros(domain)
    return SystemCoeffs(Z, Z, Z, check_support=False)


def apply_Rtau(g, phase, tau, variant="R"):
    """Gauged inverse: R solves (2 dbar + 2 tau dbar(conj Phi)) u = g,
    R-tilde solves the d_z companion."""
    resolution_guard(g.domain, phase, tau)
    wp = phase.weight(tau, +1)
    wm = phase.weight(tau, -1)
    from .cauchy import cauchy_dbar_inv, cauchy_dz_inv

    if variant == "R":
        return 0.5 * (cauchy_dbar_inv(g * wm) * wp)
    if variant in ("Rt", "R~", "Rtilde"):
        return 0.5 * (cauchy_dz_inv(g * wp) * wm)
    raise InvalidArgumentError("variant must be 'R' or 'Rt'")


def apply_Rtau_B(frame, g, phase, tau, variant="R"):
    """Frame-gauged inverse: (2 dbar + 2 tau dbar(conj Phi) + B) u = g."""
    resolution_guard(g.domain, phase, tau)
    wp = phase.weight(tau, +1)
    wm = phase.weight(tau, -1)
    if variant == "R":
        return vekua.apply_PB(frame, g * wm) * wp
    if variant in ("Rt", "R~", "Rtilde"):
        return vekua.apply_TB(frame, g * wp) * wm
    raise InvalidArgumentError("variant must be 'R' or 'Rt'")


class CGOSeries:
    """Truncated CGO series with per-term norms and contraction diagnostics."""

    def __init__(self, side, coeffs, phase, tau, terms, gauge, corrector, power=0):
        self.side = side              # 'U', 'V', 'U~', 'V~'
        self.coeffs = coeffs
        self.phase = phase
        self.tau = float(tau)
        self.terms = terms            # [U0, U1, ..., UN]
        self.gauge = gauge
        self.corrector = corrector    # q1 (U side) or q2 (V side)
        self.power = power            # z-power k of the tilde variants
        self.N = len(terms) - 1
        self.term_norms = [l2_norm(t) for t in terms]
        self.ratios = [
            self.term_norms[j + 1] / self.term_norms[j]
            if self.term_norms[j] > 0
            else math.inf
            for j in range(len(terms) - 1)
        ]

    def contraction_ok(self, bound=0.5, start=2):
        rs = self.ratios[start:]
        return bool(rs) and all(r <= bound for r in rs)

    def _phase_exponents(self):
        """(leading, tail) exponent fields s with factor e^{s}."""
        ph = self.phase
        if self.side in ("U", "U~"):
            return self.tau * ph.phi, self.tau * np.conj(ph.phi)
        return -self.tau * np.conj(ph.phi), -self.tau * ph.phi

    def scale(self):
        """Normalization constant exp(-max Re of the leading exponent)."""
        lead, _ = self._phase_exponents()
        return math.exp(-float(lead.real.max()))

    def assemble(self, normalized=True):
        lead, tail = self._phase_exponents()
        s = self.scale() if normalized else 1.0
        el = np.exp(lead + math.log(s))
        et = np.exp(tail + math.log(s))
        dom = self.terms[0].domain
        vals = el[None] * (self.terms[0].values - self.terms[1].values)
        for j in range(2, self.N + 1):
            vals = vals + (-1.0) ** j * self.terms[j].values * et[None]
        return Field3(dom, vals)

    def term_phase_values(self, j, normalized=True):
        lead, tail = self._phase_exponents()
        s = math.log(self.scale()) if normalized else 0.0
        return np.exp((lead if j <= 1 else tail) + s)


def _check_contraction(norms, tau, phase):
    bad = 0
    for j in range(2, len(norms) - 1):
        if norms[j] > 0 and norms[j + 1] / norms[j] >= 1.0:
            bad += 1
            if bad >= 2:
                suggestion = 2.0 * tau * max(
                    norms[j + 1] / norms[j] for j in range(2, len(norms) - 1)
                )
                raise SolverFailureError(
                    f"series not contracting at tau={tau}; try tau >= "
                    f"{suggestion:.1f}",
                    factor=norms[-1] / norms[-2],
                )


def build_cgo_U(coeffs, U0, gauge_A1=None, phase=None, tau=None, N=4, anchor=None):
    """Series for the j=1 system: U0 solves 2 dbar U0 + A U0 = 0."""
    if N < 2:
        raise InvalidArgumentError("need N >= 2 terms")
    dom = coeffs.domain
    resolution_guard(dom, phase, tau)
    frame_A = coeffs.frame("A", anchor)
    frame_B = coeffs.frame("B", anchor)
    wp = phase.weight(tau, +1)
    q1 = vekua.apply_PB(frame_A, coeffs.Q1.matvec(U0))
    if gauge_A1 is not None:
        q1 = q1 - gauge_A1
    terms = [U0]
    terms.append(apply_Rtau_B(frame_B, q1, phase, tau, "Rt"))
    inner = vekua.apply_TB(frame_B, coeffs.Q2.matvec(terms[1] * wp))
    terms.append(apply_Rtau_B(frame_A, inner, phase, tau, "R"))
    for j in range(3, N + 1):
        inner = vekua.apply_TB(frame_B, coeffs.Q1.matvec(terms[j - 1]))
        terms.append(apply_Rtau_B(frame_A, inner, phase, tau, "R"))
    series = CGOSeries("U", coeffs, phase, tau, terms, gauge_A1, q1)
    _check_contraction(series.term_norms, tau, phase)
    return series


def build_cgo_V(coeffs, V0, gauge_D2=None, phase=None, tau=None, N=4, anchor=None):
    """Series for the j=2 system: V0 solves 2 dz V0 + B V0 = 0.

    Exact mirror of the U side under z <-> zbar; the oscillatory factor in
    the second term is e^{tau(Phi - conj Phi)} as required for the
    factorization to telescope.
    """
    if N < 2:
        raise InvalidArgumentError("need N >= 2 terms")
    dom = coeffs.domain
    resolution_guard(dom, phase, tau)
    frame_A = coeffs.frame("A", anchor)   # P_{A2}
    frame_B = coeffs.frame("B", anchor)   # T_{B2}
    wp = phase.weight(tau, +1)
    q2 = vekua.apply_TB(frame_B, coeffs.Q2.matvec(V0))
    if gauge_D2 is not None:
        q2 = q2 - gauge_D2
    terms = [V0]
    # V1 = R_{-tau, A2} q2 = w- P_{A2}(w+ q2)
    terms.append(vekua.apply_PB(frame_A, q2 * wp) * phase.weight(tau, -1))
    # V2 = R~_{-tau, B2} (P_{A2}(Q1(2) w+ V1)) = w+ T_{B2}(w- .)
    inner = vekua.apply_PB(frame_A, coeffs.Q1.matvec(terms[1] * wp))
    terms.append(vekua.apply_TB(frame_B, inner * phase.weight(tau, -1)) * wp)
    for j in range(3, N + 1):
        inner = vekua.apply_PB(frame_A, coeffs.Q2.matvec(terms[j - 1]))
        terms.append(vekua.apply_TB(frame_B, inner * phase.weight(tau, -1)) * wp)
    series = CGOSeries("V", coeffs, phase, tau, terms, gauge_D2, q2)
    _check_contraction(series.term_norms, tau, phase)
    return series


def build_cgo_tilde(coeffs, base, k, theta, tau, N=4, side="U", anchor=None):
    """Linear-phase series with the z^k (resp. conj z^k) modulated amplitude."""
    from .phase import make_linear_phase

    if k not in (0, 1, 2):
        raise InvalidArgumentError("power k must be 0, 1 or 2")
    dom = coeffs.domain
    ph = make_linear_phase(dom, theta)
    rel = dom.zz - dom.center
    relb = dom.boundary_points - dom.center
    if side == "U":
        mod = ScalarField(dom, rel ** k, relb ** k)
        series = build_cgo_U(coeffs, base * mod, None, ph, tau, N, anchor)
        series.side = "U~"
    else:
        # conj z^k multiplies kernel solutions of the d_z system
        mod = ScalarField(dom, np.conj(rel) ** k, np.conj(relb) ** k)
        series = build_cgo_V(coeffs, base * mod, None, ph, tau, N, anchor)
        series.side = "V~"
    series.power = k
    return series


def _apply_P_phase(coeffs, u, phase, tau, holo):
    """P(x,D)(e^{s} u) / e^{s} for s = tau*Phi (holo) or tau*conj(Phi)."""
    dom = coeffs.domain
    dzU = Field3(dom, np.stack([dz_values(dom, u.values[i]) for i in range(3)]))
    dbU = Field3(dom, np.stack([dzbar_values(dom, u.values[i]) for i in range(3)]))
    lap = Field3(
        dom, np.stack([4.0 * dz_values(dom, dbU.values[i]) for i in range(3)])
    )
    if holo:
        extra = ScalarField(dom, tau * phase.dz_phi)
        out = lap + (4.0 * extra) * dbU
        out = out + 2.0 * coeffs.A.matvec(dzU + extra * u) + 2.0 * coeffs.B.matvec(dbU)
    else:
        extra = ScalarField(dom, tau * np.conj(phase.dz_phi))
        out = lap + (4.0 * extra) * dzU
        out = out + 2.0 * coeffs.A.matvec(dzU) + 2.0 * coeffs.B.matvec(dbU + extra * u)
    return out + coeffs.C.matvec(u)


def cgo_residual(series, coeffs=None):
    """P(x,D) applied to the truncated series, against the telescoped bound.

    Returns (residual_field, report).  The residual field carries the
    series normalization; the report compares its L2 norm with
    ||Q1 U_N e^{tau Phi}|| computed independently (the moduli of e^{tau Phi}
    and e^{tau conj Phi} agree pointwise, so the magnitude comparison is
    insensitive to the analytic sign/phase of the error term).
    """
    coeffs = series.coeffs if coeffs is None else coeffs
    dom = coeffs.domain
    ph = series.phase
    tau = series.tau
    mirror = series.side in ("V", "V~")
    total = None
    for j, term in enumerate(series.terms):
        lead_term = j <= 1
        if not mirror:
            holo = lead_term  # e^{tau Phi} on terms 0,1; e^{tau conj Phi} after
            amp = _apply_P_phase(coeffs, term, ph, tau if holo else tau, holo)
        else:
            holo = not lead_term  # e^{-tau conj Phi} leading, e^{-tau Phi} tail
            amp = _apply_P_phase(coeffs, term, ph, -tau, holo)
        pf = series.term_phase_values(j)
        sign = -1.0 if j == 1 else (-1.0) ** j
        contrib = Field3(dom, sign * amp.values * pf[None])
        total = contrib if total is None else total + contrib
    resid_norm = l2_norm(total)
    QN = (coeffs.Q1 if not mirror else coeffs.Q2).matvec(series.terms[-1])
    pf = series.term_phase_values(series.N)
    pred = l2_norm(Field3(dom, QN.values * np.abs(pf)[None]))
    report = {
        "residual_l2": resid_norm,
        "telescoped_l2": pred,
        "agreement": resid_norm / pred if pred > 0 else math.inf,
        "term_norms": series.term_norms,
        "ratios": series.ratios,
    }
    return total, report


def metla_gap(series):
    """tau * ||U1 - q1 / (2 tau dzPhi)||_L2 (needs the corrector pinned at
    the phase critical point, else the quotient is not square integrable)."""
    ph = series.phase
    dom = series.terms[0].domain
    denom = 2.0 * series.tau * ph.dz_phi
    small = np.abs(denom) < 1e-12
    denom = np.where(small, 1.0, denom)
    quot = series.corrector.values / denom[None]
    quot = np.where(small[None], 0.0, quot)
    gap = Field3(dom, series.terms[1].values - quot)
    return series.tau * l2_norm(gap)


def solve_inhomogeneous(coeffs, f, phase, tau, N=4, anchor=None):
    """Series solution of P(x,D) Z = e^{tau Phi} f with growth report.

    All norms are weighted by e^{-tau varphi} (varphi = Re Phi), which makes
    the comparison finite: |e^{tau Phi} e^{-tau varphi}| = 1 pointwise.
    """
    from .grid import weighted_sobolev_norm

    dom = coeffs.domain
    resolution_guard(dom, phase, tau)
    frame_A = coeffs.frame("A", anchor)
    frame_B = coeffs.frame("B", anchor)
    f = f.with_boundary()
    terms = [apply_Rtau_B(frame_B, vekua.apply_PB(frame_A, f), phase, tau, "Rt")]
    for j in range(1, N + 1):
        inner = vekua.apply_PB(frame_A, coeffs.Q2.matvec(terms[j - 1]))
        terms.append(apply_Rtau_B(frame_B, inner, phase, tau, "Rt"))
    norms = [l2_norm(t) for t in terms]
    bad = sum(
        1 for j in range(1, N) if norms[j] > 0 and norms[j + 1] / norms[j] >= 1.0
    )
    if bad >= 2:
        raise SolverFailureError(
            f"inhomogeneous series not contracting at tau={tau}",
            factor=norms[-1] / norms[-2] if norms[-2] > 0 else math.inf,
        )
    osc = np.exp(1j * tau * phase.phi.imag)  # e^{tau Phi} e^{-tau varphi}
    vals = np.zeros_like(terms[0].values)
    resid_vals = np.zeros_like(terms[0].values)
    for j, t in enumerate(terms):
        vals = vals + (-1.0) ** j * t.values * osc[None]
        amp = _apply_P_phase(coeffs, t, phase, tau, holo=True)
        resid_vals = resid_vals + (-1.0) ** j * amp.values * osc[None]
    Zw = Field3(dom, vals)  # e^{-tau varphi} Z up to a unit-modulus factor
    resid_vals = resid_vals - f.values * osc[None]
    fw = l2_norm(f)
    lhs = weighted_sobolev_norm(Zw, 2, tau)
    rhs = (1.0 + tau ** 2) * fw
    report = {
        "term_norms": norms,
        "pde_residual_rel": l2_norm(Field3(dom, resid_vals)) / fw if fw > 0 else math.inf,
        "telescoped_rel": l2_norm(coeffs.Q2.matvec(terms[-1])) / fw if fw > 0 else math.inf,
        "zopa_lhs": lhs,
        "zopa_rhs": rhs,
        "zopa_ratio": lhs / rhs if rhs > 0 else math.inf,
    }
    return terms, Zw, report
