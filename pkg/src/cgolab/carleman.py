"""Carleman weights and numerical probes of the weighted inequalities.

The probes evaluate both sides of the first-order and bi-Laplacian
estimates by direct quadrature.  Sample derivatives come from the exact
profile algebra (the estimates involve up to fourth derivatives of merely
C^3-smooth bump composites, where grid differentiation would be noisy).
The doubly-exponential weight e^{2 s phi_s} restricts the usable s range;
the build rejects any s whose weight would leave floating-point range, and
the shipped scenarios run on a small disc where s up to 16 is admissible.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolationError, EmptyReportError, InvalidArgumentError
from .grid import csum
from .profiles import Profile

_OVERFLOW_CAP = 300.0  # require s * max(phi_s) <= this (exponents stay < 709)


@dataclass(frozen=True)
class CarlemanWeight:
    domain: object
    offset: float
    direction: tuple
    s: float
    beta: np.ndarray        # beta-tilde on the grid (real)
    grad_beta: tuple        # constant gradient (the affine choice)

    def phi_s(self, s):
        self.check_s(s)
        return np.exp(s * self.beta)

    def check_s(self, s):
        top = s * math.exp(s * float(self.beta.max()))
        if top > _OVERFLOW_CAP:
            raise ConstraintViolationError(
                f"overflow guard failed: s * max(phi_s) = {top:.3g} > {_OVERFLOW_CAP}"
            )


def build_carleman_weight(domain, offset, direction, s):
    """Affine weight beta = offset + <direction, x> with the paper's
    pseudoconvexity constraints checked on the grid."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (2,) or abs(np.hypot(d[0], d[1]) - 1.0) > 1e-9:
        raise InvalidArgumentError("direction must be a unit 2-vector")
    x1 = domain.zz.real
    x2 = domain.zz.imag
    beta = float(offset) + d[0] * x1 + d[1] * x2
    bmin, bmax = float(beta.min()), float(beta.max())
    if bmin <= 0:
        raise ConstraintViolationError(
            f"constraint beta >= 0 failed: min beta = {bmin:.4g}"
        )
    if not bmin > 0.75 * bmax:
        raise ConstraintViolationError(
            f"constraint min beta > (3/4) max beta failed: "
            f"{bmin:.4g} <= {0.75 * bmax:.4g}"
        )
    w = CarlemanWeight(domain, float(offset), (d[0], d[1]), float(s), beta, (d[0], d[1]))
    w.check_s(s)
    return w


@dataclass
class EstimateReport:
    s_list: list
    worst_ratios: list
    C_hat: float
    n_used: int
    n_excluded: int
    sample_desc: list = field(default_factory=list)
    passed: bool = False

    def to_csv_rows(self):
        return [
            {"s": s, "worst_ratio": r, "n_samples_used": self.n_used}
            for s, r in zip(self.s_list, self.worst_ratios)
        ]


def _cartesian_derivative_coeffs(m, n):
    """d1^m d2^n as {(a, b): coeff} over d_z^a d_zbar^b."""
    terms = {(0, 0): 1.0 + 0.0j}
    for _ in range(m):  # multiply by (dz + dzb)
        new = {}
        for (a, b), c in terms.items():
            new[(a + 1, b)] = new.get((a + 1, b), 0.0) + c
            new[(a, b + 1)] = new.get((a, b + 1), 0.0) + c
        terms = new
    for _ in range(n):  # multiply by i (dz - dzb)
        new = {}
        for (a, b), c in terms.items():
            new[(a + 1, b)] = new.get((a + 1, b), 0.0) + 1j * c
            new[(a, b + 1)] = new.get((a, b + 1), 0.0) - 1j * c
        terms = new
    return terms


def _profile_cartesian_derivative(prof, m, n, zz):
    out = np.zeros(zz.shape, dtype=complex)
    for (a, b), c in _cartesian_derivative_coeffs(m, n).items():
        out += c * np.asarray(prof.wirtinger(a, b)(zz), dtype=complex)
    return out


def _as_profile_vector(sample):
    if isinstance(sample, Profile):
        return [sample]
    return list(sample)


def check_first_order(domain, A, samples, weight, s_list, exclude_tol=1e-28):
    """Worst LHS/RHS of the first-order estimate over the sample set.

    LHS = int phi_s s^2 |W|^2 e^{2 s phi_s};  RHS = ||e^{s phi_s} f||^2 with
    f = d_z W + A W.  Samples are catalog profile vectors (C^1, compactly
    supported); zero samples are excluded and counted.
    """
    s_list = [float(s) for s in s_list]
    if sorted(s_list) != s_list:
        raise InvalidArgumentError("s_list must be increasing")
    zz = domain.zz
    wq = domain.weights
    prepared = []
    excluded = 0
    for sample in samples:
        comps = _as_profile_vector(sample)
        if len(comps) != 3:
            raise InvalidArgumentError("first-order samples must be 3-vectors")
        Wv = np.stack([np.asarray(p(zz), dtype=complex) for p in comps])
        dz_v = np.stack(
            [np.asarray(p.wirtinger(1, 0)(zz), dtype=complex) for p in comps]
        )
        fv = dz_v + np.einsum("ijrt,jrt->irt", A.values, Wv)
        mag2 = np.einsum("irt,irt->rt", Wv, np.conj(Wv)).real
        fmag2 = np.einsum("irt,irt->rt", fv, np.conj(fv)).real
        if float(csum(wq * mag2)) < exclude_tol:
            excluded += 1
            continue
        prepared.append((mag2, fmag2))
    if not prepared:
        raise EmptyReportError("all first-order samples were zero")
    worst = []
    for s in s_list:
        weight.check_s(s)
        phi = np.exp(s * weight.beta)
        expw = np.exp(2.0 * s * phi)
        best = 0.0
        for mag2, fmag2 in prepared:
            lhs = float(csum(wq * phi * s ** 2 * mag2 * expw))
            rhs = float(csum(wq * fmag2 * expw))
            if rhs <= 0:
                continue
            best = max(best, lhs / rhs)
        worst.append(best)
    rep = EstimateReport(
        s_list, worst, max(worst), len(prepared), excluded,
        [f"poly_bump_{i}" for i in range(len(prepared))],
    )
    spread = max(worst) / max(min(worst), 1e-300)
    trend_ok = all(worst[i + 1] <= worst[i] * 1.25 for i in range(len(worst) - 1))
    rep.passed = spread <= 2.0 and trend_ok
    return rep


_BILAPLACIAN_MULTIS = [
    (m, n) for tot in range(4) for m in range(tot + 1) for n in [tot - m]
]


def check_bilaplacian(domain, samples, weight, s_list, exclude_tol=1e-28):
    """Worst LHS/RHS of the bi-Laplacian estimate over scalar samples.

    LHS sums phi_s^{2(3-|b|)} s^{8-2|b|} |d^b W|^2 over |b| <= 3 (Cartesian
    multi-indices); RHS = ||e^{s phi_s} Delta^2 W||^2.
    """
    s_list = [float(s) for s in s_list]
    zz = domain.zz
    wq = domain.weights
    prepared = []
    excluded = 0
    for prof in samples:
        if not isinstance(prof, Profile):
            raise InvalidArgumentError("bilaplacian samples must be scalar profiles")
        derivs = {
            (m, n): np.abs(_profile_cartesian_derivative(prof, m, n, zz)) ** 2
            for (m, n) in _BILAPLACIAN_MULTIS
        }
        bilap = 16.0 * np.asarray(prof.wirtinger(2, 2)(zz), dtype=complex)
        if float(csum(wq * derivs[(0, 0)])) < exclude_tol:
            excluded += 1
            continue
        prepared.append((derivs, np.abs(bilap) ** 2))
    if not prepared:
        raise EmptyReportError("all bilaplacian samples were zero")
    worst = []
    for s in s_list:
        weight.check_s(s)
        phi = np.exp(s * weight.beta)
        expw = np.exp(2.0 * s * phi)
        best = 0.0
        for derivs, bl2 in prepared:
            lhs = 0.0
            for (m, n), d2 in derivs.items():
                order = m + n
                lhs += float(
                    csum(wq * phi ** (2 * (3 - order)) * s ** (8 - 2 * order) * d2 * expw)
                )
            rhs = float(csum(wq * bl2 * expw))
            if rhs <= 0:
                continue
            best = max(best, lhs / rhs)
        worst.append(best)
    rep = EstimateReport(
        s_list, worst, max(worst), len(prepared), excluded,
        [f"poly_bump_{i}" for i in range(len(prepared))],
    )
    spread = max(worst) / max(min(worst), 1e-300)
    rep.passed = spread <= 2.0
    return rep
