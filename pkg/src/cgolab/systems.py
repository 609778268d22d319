"""Stokes/Lame decoupling transforms, H-operator assembly, and the two
bilinear identities.

Conventions pinned by the verification suite:

* The Stokes residual is checked in the proof's form J_k with the 1/2 in
  front of the symmetrized stress divergence ("half" convention); the
  unscaled operator display is exposed for comparison and is inconsistent
  with the mapped pressure.

* The quadratic-form operator H is assembled from a first-principles
  integration-by-parts derivation (both for the viscosity difference and
  for the Lame differences) and is validated directly against the bilinear
  identity; the assembled Cartesian rows keep the structure
  (X_1, X_2, div X).
"""
import math

import numpy as np

from .cauchy import cauchy_dbar_inv, cauchy_dz_inv
from .errors import InvalidArgumentError, PreconditionError
from .grid import (
    Field3,
    Matrix3Field,
    ScalarField,
    csum,
    dx1,
    dx2,
    dz_matrix,
    dz_values,
    dzbar_matrix,
    dzbar_values,
    integrate_area,
    l2_norm,
    laplacian,
    pairing,
)

# ---------------------------------------------------------------------------
# small vector-calculus helpers on scalar fields
# ---------------------------------------------------------------------------

def _grad(f):
    return dx1(f), dx2(f)


def _div(a, b):
    return dx1(a) + dx2(b)


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def pairing2(u, v):
    """Bilinear pairing of 2-vector fields."""
    return pairing(u[0], v[0]) + pairing(u[1], v[1])


def solve_poisson_particular(rhs):
    """A particular solution of Delta f = rhs (spectral, polar harmonics)."""
    return 0.25 * cauchy_dz_inv(cauchy_dbar_inv(rhs))


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

class StokesCoeffs:
    def __init__(self, mu, mu2=None):
        if np.abs(mu.values.imag).max() > 1e-12 or mu.values.real.min() <= 0:
            raise InvalidArgumentError("viscosity must be real and positive")
        self.mu = mu
        self.mu2 = mu2
        if mu2 is not None:
            self.mubar = mu - mu2

    @property
    def domain(self):
        return self.mu.domain


class LameCoeffs:
    def __init__(self, lam, mu):
        if mu.values.real.min() <= 0 or (lam.values + mu.values).real.min() <= 0:
            raise InvalidArgumentError("need mu > 0 and lambda + mu > 0")
        self.lam = lam
        self.mu = mu
        self.lam_mu = lam + mu
        self.lam_2mu = lam + 2.0 * mu

    @property
    def domain(self):
        return self.mu.domain


# ---------------------------------------------------------------------------
# Stokes decoupling
# ---------------------------------------------------------------------------

def stokes_decoupled_residual(mu, w, f):
    """Residual fields of the decoupled system (f-row, then the two w-rows)."""
    w1, w2 = w
    divw = _div(w1, w2)
    r0 = laplacian(f) - divw
    m1, m2 = _grad(mu)
    r1 = (
        mu * laplacian(w1)
        + 2.0 * m1 * dx1(w1)
        + m2 * (dx2(w1) + dx1(w2))
        + m1 * divw
        + 2.0 * dx1(m1) * dx1(f)
        + 2.0 * dx2(m1) * dx2(f)
    )
    r2 = (
        mu * laplacian(w2)
        + 2.0 * m2 * dx2(w2)
        + m1 * (dx2(w1) + dx1(w2))
        + m2 * divw
        + 2.0 * dx2(m2) * dx2(f)
        + 2.0 * dx1(m2) * dx1(f)
    )
    return r0, r1, r2


def decoupled_to_stokes(mu, w, f, tol=5e-2):
    """Map a decoupled pair to a Stokes pair (u, p)."""
    r0, r1, r2 = stokes_decoupled_residual(mu, w, f)
    scale = max(l2_norm(mu * laplacian(w[0])), l2_norm(mu * laplacian(w[1])),
                l2_norm(laplacian(f)), 1e-300)
    measured = max(l2_norm(r1), l2_norm(r2), l2_norm(r0)) / scale
    if measured > tol:
        raise PreconditionError(
            f"decoupled residual {measured:.2e} above tolerance {tol}",
            measured=measured,
        )
    u = (w[0] - dx1(f), w[1] - dx2(f))
    m1, m2 = _grad(mu)
    p = 0.5 * mu * laplacian(f) + m1 * dx1(f) + m2 * dx2(f)
    return u, p


def stokes_residual(mu, u, p, convention="half"):
    """J_k residual of the Stokes system under the chosen convention."""
    if convention not in ("half", "unscaled"):
        raise InvalidArgumentError("convention must be 'half' or 'unscaled'")
    c = 0.5 if convention == "half" else 1.0
    u1, u2 = u
    j1 = c * (
        dx1(mu * (2.0 * dx1(u1)))
        + dx2(mu * (dx2(u1) + dx1(u2)))
    ) + dx1(p)
    j2 = c * (
        dx1(mu * (dx2(u1) + dx1(u2)))
        + dx2(mu * (2.0 * dx2(u2)))
    ) + dx2(p)
    return j1, j2


def stokes_operator(mu, u, p=None):
    """Unscaled operator rows with an optional pressure (pressure slot 0)."""
    u1, u2 = u
    r1 = dx1(mu * (2.0 * dx1(u1))) + dx2(mu * (dx2(u1) + dx1(u2)))
    r2 = dx1(mu * (dx2(u1) + dx1(u2))) + dx2(mu * (2.0 * dx2(u2)))
    if p is not None:
        r1 = r1 + dx1(p)
        r2 = r2 + dx2(p)
    return r1, r2


# ---------------------------------------------------------------------------
# first-order matrices of the decoupled systems
# ---------------------------------------------------------------------------

def _first_order_to_wirtinger(domain, N1, N2):
    """A = (N1 + i N2)/2, B = (N1 - i N2)/2 for N1 d1 + N2 d2."""
    A = Matrix3Field(domain, 0.5 * (N1 + 1j * N2))
    B = Matrix3Field(domain, 0.5 * (N1 - 1j * N2))
    return A.with_boundary(), B.with_boundary()


def _ns_first_order(mu, row3_sign):
    dom = mu.domain
    m1, m2 = _grad(mu)
    m11 = dx1(m1)
    m12 = dx2(m1)
    m22 = dx2(m2)
    inv = 1.0 / mu.values
    N1 = np.zeros((3, 3, dom.n_r, dom.n_theta), dtype=complex)
    N2 = np.zeros_like(N1)
    N1[0, 0] = 3.0 * m1.values * inv
    N1[0, 1] = m2.values * inv
    N1[0, 2] = 2.0 * m11.values * inv
    N2[0, 0] = m2.values * inv
    N2[0, 1] = m1.values * inv
    N2[0, 2] = 2.0 * m12.values * inv
    N1[1, 0] = m2.values * inv
    N1[1, 1] = m1.values * inv
    N1[1, 2] = 2.0 * m12.values * inv
    N2[1, 0] = m1.values * inv
    N2[1, 1] = 3.0 * m2.values * inv
    N2[1, 2] = 2.0 * m22.values * inv
    N1[2, 0] = row3_sign
    N2[2, 1] = row3_sign
    return N1, N2


def ns_matrices(mu1):
    """The displayed matrices (C1, C2, A1, B1) of the viscosity system.

    The third rows carry +1/2 entries exactly as displayed; note that the
    faithful encoding of the decoupled system's f-row (Delta f = div w)
    needs the opposite sign there -- `ns_system_coeffs` uses that encoding.
    """
    dom = mu1.domain
    N1, N2 = _ns_first_order(mu1, +1.0)
    C1 = Matrix3Field(dom, 0.5 * N1)
    C2 = Matrix3Field(dom, 0.5 * N2)
    A1 = Matrix3Field(dom, 0.5 * (N1 + 1j * N2))
    B1 = Matrix3Field(dom, 0.5 * (N1 - 1j * N2))
    return C1, C2, A1, B1


def ns_system_coeffs(mu1):
    """SystemCoeffs encoding the decoupled viscosity system faithfully."""
    from .cgo import SystemCoeffs

    dom = mu1.domain
    N1, N2 = _ns_first_order(mu1, -1.0)
    A, B = _first_order_to_wirtinger(dom, N1, N2)
    C = Matrix3Field.zeros(dom)
    return SystemCoeffs(A, B, C, check_support=False)


def lame_system_coeffs(lame):
    """SystemCoeffs for the decoupled Lame system (W = (w1, w2, f))."""
    from .cgo import SystemCoeffs

    dom = lame.domain
    mu = lame.mu
    m1, m2 = _grad(mu)
    kap = lame.lam_mu.values / lame.lam_2mu.values
    inv = 1.0 / mu.values
    inv2 = 1.0 / lame.lam_2mu.values
    m11, m12, m22 = dx1(m1), dx2(m1), dx2(m2)
    N1 = np.zeros((3, 3, dom.n_r, dom.n_theta), dtype=complex)
    N2 = np.zeros_like(N1)
    N1[0, 0] = m1.values * (1.0 + 2.0 * kap) * inv
    N1[0, 1] = m2.values * inv
    N1[0, 2] = (-2.0 * m11.values + 4.0 * m1.values ** 2 * inv2) * inv
    N2[0, 0] = m2.values * inv
    N2[0, 1] = m1.values * (2.0 * kap - 1.0) * inv
    N2[0, 2] = (-2.0 * m12.values + 4.0 * m1.values * m2.values * inv2) * inv
    N1[1, 0] = m2.values * (2.0 * kap - 1.0) * inv
    N1[1, 1] = m1.values * inv
    N1[1, 2] = (-2.0 * m12.values + 4.0 * m2.values * m1.values * inv2) * inv
    N2[1, 0] = m1.values * inv
    N2[1, 1] = m2.values * (1.0 + 2.0 * kap) * inv
    N2[1, 2] = (-2.0 * m22.values + 4.0 * m2.values ** 2 * inv2) * inv
    N1[2, 0] = kap
    N1[2, 2] = 2.0 * m1.values * inv2
    N2[2, 1] = kap
    N2[2, 2] = 2.0 * m2.values * inv2
    A, B = _first_order_to_wirtinger(dom, N1, N2)
    C = Matrix3Field.zeros(dom)
    return SystemCoeffs(A, B, C, check_support=False)


# ---------------------------------------------------------------------------
# Wirtinger-form second-order operators
# ---------------------------------------------------------------------------

class OperatorH:
    """Second-order operator C1 d_zz + C0 d_zzb + C2 d_zbzb + B1 d_z +
    B2 d_zb + B0, with 3x3 matrix coefficient fields."""

    def __init__(self, C1, C0, C2, B1, B2, B0):
        self.C1, self.C0, self.C2 = C1, C0, C2
        self.B1, self.B2, self.B0 = B1, B2, B0
        self.domain = C1.domain

    @classmethod
    def zero(cls, domain):
        Z = Matrix3Field.zeros(domain)
        return cls(Z, Z, Z, Z, Z, Z)

    def coeff_sup(self):
        return max(
            np.abs(M.values).max()
            for M in (self.C1, self.C0, self.C2, self.B1, self.B2, self.B0)
        )

    def apply(self, V, sz=None, szb=None):
        """Apply H with optional zeroth-order shifts d_z -> d_z + sz,
        d_zb -> d_zb + szb (sz, szb: scalar arrays on the grid)."""
        dom = self.domain
        dzV = Field3(dom, np.stack([dz_values(dom, V.values[i]) for i in range(3)]))
        dbV = Field3(dom, np.stack([dzbar_values(dom, V.values[i]) for i in range(3)]))
        dzzV = Field3(dom, np.stack([dz_values(dom, dzV.values[i]) for i in range(3)]))
        dzbV = Field3(dom, np.stack([dzbar_values(dom, dzV.values[i]) for i in range(3)]))
        dbbV = Field3(dom, np.stack([dzbar_values(dom, dbV.values[i]) for i in range(3)]))
        out = (
            self.C1.matvec(dzzV)
            + self.C0.matvec(dzbV)
            + self.C2.matvec(dbbV)
            + self.B1.matvec(dzV)
            + self.B2.matvec(dbV)
            + self.B0.matvec(V)
        )
        if sz is not None:
            s = ScalarField(dom, sz)
            ds = ScalarField(dom, dz_values(dom, sz))
            out = out + self.C1.matvec(ds * V + 2.0 * (s * dzV) + (s * (s * V)))
            out = out + self.C0.matvec(s * dbV)
            out = out + self.B1.matvec(s * V)
        if szb is not None:
            t = ScalarField(dom, szb)
            dt = ScalarField(dom, dzbar_values(dom, szb))
            out = out + self.C2.matvec(dt * V + 2.0 * (t * dbV) + (t * (t * V)))
            out = out + self.C0.matvec(t * dzV)
            out = out + self.B2.matvec(t * V)
            if sz is not None:
                out = out + self.C0.matvec(ScalarField(dom, sz * szb) * V)
        return out

    def adjoint(self):
        """Formal adjoint under the bilinear pairing (transposes, no conj)."""
        C1t, C0t, C2t = self.C1.T(), self.C0.T(), self.C2.T()
        B1t, B2t, B0t = self.B1.T(), self.B2.T(), self.B0.T()
        nB1 = 2.0 * dz_matrix(C1t) + dzbar_matrix(C0t) - B1t
        nB2 = 2.0 * dzbar_matrix(C2t) + dz_matrix(C0t) - B2t
        nB0 = (
            dz_matrix(dz_matrix(C1t))
            + dzbar_matrix(dz_matrix(C0t))
            + dzbar_matrix(dzbar_matrix(C2t))
            - dz_matrix(B1t)
            - dzbar_matrix(B2t)
            + B0t
        )
        return OperatorH(C1t, C0t, C2t, nB1, nB2, nB0)

    # derived first-order combinations (computed against supplied frames'
    # coefficient matrices)
    def b_field(self, A1):
        return self.B2 - dzbar_matrix(self.C2) + A1.T().matmul(self.C2)

    def btilde_field(self, B2):
        return self.B1 + self.C1.matmul(B2) - dz_matrix(self.C1)

    def bcal1_field(self, B1, A2):
        return (
            -2.0 * dz_matrix(self.C1)
            + 2.0 * B1.T().matmul(self.C1)
            - self.C0.matmul(A2)
            + self.B1
        )

    def bcal2_field(self, B1, A2):
        return (
            B1.T().matmul(self.C0)
            - dz_matrix(self.C0)
            - 2.0 * self.C2.matmul(A2)
            + self.B2
        )


def extract_zcoeffs(cartesian):
    """Cartesian second-order coefficients -> Wirtinger form (invertible)."""
    M20 = cartesian.get((2, 0))
    dom = M20.domain
    Z = Matrix3Field.zeros(dom)
    M11 = cartesian.get((1, 1), Z)
    M02 = cartesian.get((0, 2), Z)
    M10 = cartesian.get((1, 0), Z)
    M01 = cartesian.get((0, 1), Z)
    M00 = cartesian.get((0, 0), Z)
    C1 = M20 - M02 + 1j * M11
    C0 = 2.0 * (M20 + M02)
    C2 = M20 - M02 - 1j * M11
    B1 = M10 + 1j * M01
    B2 = M10 - 1j * M01
    return OperatorH(C1, C0, C2, B1, B2, M00)


def wirtinger_to_cartesian(H):
    """Inverse change of basis (for the round-trip oracle)."""
    M20 = 0.25 * H.C0 + 0.25 * (H.C1 + H.C2)
    M02 = 0.25 * H.C0 - 0.25 * (H.C1 + H.C2)
    M11 = (-0.5j) * (H.C1 - H.C2)
    M10 = 0.5 * (H.B1 + H.B2)
    M01 = (-0.5j) * (H.B1 - H.B2)
    return {(2, 0): M20, (1, 1): M11, (0, 2): M02,
            (1, 0): M10, (0, 1): M01, (0, 0): H.B0}


def extract_cartesian_coeffs(apply_fn, domain):
    """Recover Cartesian coefficient fields of a second-order operator by
    polynomial probing (exact for operators of order <= 2)."""
    x1 = domain.zz.real
    x2 = domain.zz.imag
    monos = {
        (0, 0): np.ones_like(x1),
        (1, 0): x1,
        (0, 1): x2,
        (2, 0): 0.5 * x1 * x1,
        (1, 1): x1 * x2,
        (0, 2): 0.5 * x2 * x2,
    }
    applied = {}
    for key, m in monos.items():
        cols = []
        for j in range(3):
            vals = np.zeros((3, domain.n_r, domain.n_theta), dtype=complex)
            vals[j] = m
            cols.append(apply_fn(Field3(domain, vals)).values)
        applied[key] = cols
    out = {}

    def matfield(cols_vals):
        vals = np.stack([np.stack([cols_vals[j][i] for j in range(3)]) for i in range(3)])
        return Matrix3Field(domain, vals)

    out[(0, 0)] = matfield([applied[(0, 0)][j] for j in range(3)])
    out[(1, 0)] = matfield(
        [applied[(1, 0)][j] - x1 * applied[(0, 0)][j] for j in range(3)]
    )
    out[(0, 1)] = matfield(
        [applied[(0, 1)][j] - x2 * applied[(0, 0)][j] for j in range(3)]
    )
    out[(2, 0)] = matfield(
        [
            applied[(2, 0)][j] - x1 * applied[(1, 0)][j] + 0.5 * x1 * x1 * applied[(0, 0)][j]
            for j in range(3)
        ]
    )
    out[(0, 2)] = matfield(
        [
            applied[(0, 2)][j] - x2 * applied[(0, 1)][j] + 0.5 * x2 * x2 * applied[(0, 0)][j]
            for j in range(3)
        ]
    )
    out[(1, 1)] = matfield(
        [
            applied[(1, 1)][j]
            - x1 * applied[(0, 1)][j]
            - x2 * applied[(1, 0)][j]
            + x1 * x2 * applied[(0, 0)][j]
            for j in range(3)
        ]
    )
    return out


# ---------------------------------------------------------------------------
# the Navier-Stokes quadratic-form operator
# ---------------------------------------------------------------------------

def _check_compact_support(name, f, jets=1, tol=1e-6):
    g = f.with_boundary()
    scale = max(np.abs(f.values).max(), 1e-300)
    if np.abs(g.boundary).max() > tol * scale:
        raise InvalidArgumentError(f"{name} must vanish on the boundary")
    if jets >= 1:
        d1 = dx1(f).with_boundary()
        d2 = dx2(f).with_boundary()
        worst = max(np.abs(d1.boundary).max(), np.abs(d2.boundary).max())
        if worst > 100 * tol * scale:
            raise InvalidArgumentError(f"{name} must have vanishing boundary jets")


class AssembledH:
    """Cartesian application of an assembled quadratic-form operator, plus
    its Wirtinger-form extraction (cached)."""

    def __init__(self, domain, label, apply_rows=None, apply_full=None):
        self._apply_rows = apply_rows
        self._apply_full = apply_full
        self.domain = domain
        self.label = label
        self._wirtinger = None

    def apply(self, V):
        if self._apply_full is not None:
            return self._apply_full(V)
        X1, X2 = self.rows(V.comp(0), V.comp(1), V.comp(2))
        X3 = _div(X1, X2)
        return Field3(self.domain, np.stack([X1.values, X2.values, X3.values]))

    def rows(self, v1, v2, g):
        return self._apply_rows(v1, v2, g)

    def operator_h(self):
        if self._wirtinger is None:
            cart = extract_cartesian_coeffs(self.apply, self.domain)
            self._wirtinger = extract_zcoeffs(cart)
        return self._wirtinger


def m2_rows_ns(mu2, v1, v2, g):
    """The displayed first-order rows with mu2 coefficients."""
    p1, p2 = _grad(mu2)
    dv = _div(v1, v2)
    r1 = (
        2.0 * p1 * dx1(v1)
        + p2 * (dx2(v1) + dx1(v2))
        + p1 * dv
        + 2.0 * dx1(p1) * dx1(g)
        + 2.0 * dx2(p1) * dx2(g)
    )
    r2 = (
        2.0 * p2 * dx2(v2)
        + p1 * (dx2(v1) + dx1(v2))
        + p2 * dv
        + 2.0 * dx2(p2) * dx2(g)
        + 2.0 * dx1(p2) * dx1(g)
    )
    return r1, r2


def assemble_ns_H(mubar, mu2):
    """Quadratic-form operator for the viscosity difference.

    Derived (and verified against the bilinear identity) as
    X = -(mubar/mu2) M2(v, g) + ((grad mubar, grad v_k))_k
        - ((v, grad d_k mubar))_k + (grad mubar) div v
        + 2 ((grad d_k mubar, grad g))_k,        H = (X_1, X_2, div X).
    """
    _check_compact_support("mubar", mubar)
    dom = mubar.domain
    b1, b2 = _grad(mubar)
    b11, b12 = dx1(b1), dx2(b1)
    b21, b22 = dx1(b2), dx2(b2)

    def rows(v1, v2, g):
        m1, m2 = m2_rows_ns(mu2, v1, v2, g)
        ratio = mubar / mu2
        dv = _div(v1, v2)
        X1 = (
            -1.0 * (ratio * m1)
            + b1 * dx1(v1) + b2 * dx2(v1)
            - (v1 * b11 + v2 * b12)
            + b1 * dv
            + 2.0 * (b11 * dx1(g) + b12 * dx2(g))
        )
        X2 = (
            -1.0 * (ratio * m2)
            + b1 * dx1(v2) + b2 * dx2(v2)
            - (v1 * b21 + v2 * b22)
            + b2 * dv
            + 2.0 * (b21 * dx1(g) + b22 * dx2(g))
        )
        return X1, X2

    return AssembledH(dom, "ns", apply_rows=rows)


def check_bilinear_identity_ns(mu1, mu2, wf, vg, tol_pre=5e-2):
    """Both sides of the viscosity bilinear identity.

    lhs pairs (w - grad f) with L_mubar(v - grad g, 0); rhs pairs (w, f)
    with H(v, g).  Both the unscaled and the half conventions of L are
    evaluated and reported.
    """
    w, f = wf
    v, g = vg
    mubar = mu1 - mu2
    _check_compact_support("mu1 - mu2", mubar)
    r0v, r1v, r2v = stokes_decoupled_residual(mu2, v, g)
    scale_v = max(l2_norm(laplacian(v[0])), l2_norm(laplacian(g)), 1e-300)
    pre_v = max(l2_norm(r0v), l2_norm(r1v), l2_norm(r2v)) / scale_v
    r0w = laplacian(f) - _div(w[0], w[1])
    pre_w = l2_norm(r0w) / max(l2_norm(laplacian(f)), 1e-300)
    if max(pre_v, pre_w) > tol_pre:
        raise PreconditionError(
            f"decoupled residuals too large (w-side {pre_w:.2e}, v-side {pre_v:.2e})",
            measured=max(pre_v, pre_w),
        )
    u = (w[0] - dx1(f), w[1] - dx2(f))
    ut = (v[0] - dx1(g), v[1] - dx2(g))
    Lrows = stokes_operator(mubar, ut)
    lhs = pairing2(u, Lrows)
    H = assemble_ns_H(mubar, mu2)
    X1, X2 = H.rows(v[0], v[1], g)
    rhs = pairing(w[0], X1) + pairing(w[1], X2) + pairing(f, _div(X1, X2))
    gap = abs(lhs - rhs)
    return {
        "lhs": lhs,
        "lhs_half": 0.5 * lhs,
        "rhs": rhs,
        "gap": gap,
        "rel_gap": gap / max(abs(lhs), 1e-12),
        "rel_gap_half": abs(0.5 * lhs - rhs) / max(abs(0.5 * lhs), 1e-12),
        "pre_w": pre_w,
        "pre_v": pre_v,
    }


# ---------------------------------------------------------------------------
# Lame decoupling
# ---------------------------------------------------------------------------

def m2_rows_lame(lame, w, f):
    """M2(x, D)(w, f) rows of the decoupled Lame system."""
    mu = lame.mu
    m1, m2 = _grad(mu)
    w1, w2 = w
    dv = _div(w1, w2)
    kap = ScalarField(lame.domain, lame.lam_mu.values / lame.lam_2mu.values)
    gmgf = m1 * dx1(f) + m2 * dx2(f)
    inv2 = ScalarField(lame.domain, 1.0 / lame.lam_2mu.values)
    r1 = (
        -1.0 * (m1 * dv)
        + m1 * dx1(w1) + m2 * dx2(w1)
        + m1 * dx1(w1) + m2 * dx1(w2)
        + 2.0 * (kap * (m1 * dv))
        - 2.0 * (dx1(m1) * dx1(f) + dx2(m1) * dx2(f))
        + 4.0 * (m1 * (gmgf * inv2))
    )
    r2 = (
        -1.0 * (m2 * dv)
        + m1 * dx1(w2) + m2 * dx2(w2)
        + m1 * dx2(w1) + m2 * dx2(w2)
        + 2.0 * (kap * (m2 * dv))
        - 2.0 * (dx1(m2) * dx1(f) + dx2(m2) * dx2(f))
        + 4.0 * (m2 * (gmgf * inv2))
    )
    return r1, r2


def lame_decoupled_residual(lame, w, f):
    """Residuals (f-row, w-rows) of the decoupled Lame system."""
    w1, w2 = w
    r0 = (
        ScalarField(lame.domain, lame.lam_2mu.values) * laplacian(f)
        + ScalarField(lame.domain, lame.lam_mu.values) * _div(w1, w2)
        + 2.0 * (dx1(lame.mu) * dx1(f) + dx2(lame.mu) * dx2(f))
    )
    m1, m2 = m2_rows_lame(lame, w, f)
    r1 = lame.mu * laplacian(w1) + m1
    r2 = lame.mu * laplacian(w2) + m2
    return r0, r1, r2


def decoupled_to_lame(w, f):
    """u = w + grad f."""
    return (w[0] + dx1(f), w[1] + dx2(f))


def lame_residual(lame, u):
    """L_{mu,lambda} u in the expanded classical form."""
    mu, lam = lame.mu, lame.lam
    u1, u2 = u
    du = _div(u1, u2)
    m1, m2 = _grad(mu)
    l1, l2 = _grad(lam)
    r1 = (
        mu * laplacian(u1)
        + ScalarField(lame.domain, lame.lam_mu.values) * dx1(du)
        + du * l1
        + m1 * dx1(u1) + m2 * dx2(u1)
        + m1 * dx1(u1) + m2 * dx1(u2)
    )
    r2 = (
        mu * laplacian(u2)
        + ScalarField(lame.domain, lame.lam_mu.values) * dx2(du)
        + du * l2
        + m1 * dx1(u2) + m2 * dx2(u2)
        + m1 * dx2(u1) + m2 * dx2(u2)
    )
    return r1, r2


def assemble_lame_H(lame1, lame2):
    """Quadratic-form operator for the Lame differences alpha = mu1 - mu2,
    beta = lam1 - lam2 (derived by integration by parts, verified against
    the bilinear identity)."""
    alpha = lame1.mu - lame2.mu
    beta = lame1.lam - lame2.lam
    _check_compact_support("mu1 - mu2", alpha)
    _check_compact_support("lam1 - lam2", beta)
    dom = alpha.domain
    a1, a2 = _grad(alpha)
    a11, a12 = dx1(a1), dx2(a1)
    a21, a22 = dx1(a2), dx2(a2)
    inv2_1 = ScalarField(dom, 1.0 / lame1.lam_2mu.values)
    inv2_2 = ScalarField(dom, 1.0 / lame2.lam_2mu.values)
    mu1f = lame1.mu
    gm1 = _grad(lame1.mu)
    gm2 = _grad(lame2.mu)

    def pieces(v1, v2, g):
        dv = _div(v1, v2)
        E_v = (lame2.lam * dv + 4.0 * (gm2[0] * dx1(g) + gm2[1] * dx2(g))) * inv2_2
        D_v = (lame2.mu * dv - 2.0 * (gm2[0] * dx1(g) + gm2[1] * dx2(g))) * inv2_2
        m2r = m2_rows_lame(lame2, (v1, v2), g)
        brace = (2.0 * lame2.lam_mu.values / lame2.lam_2mu.values)
        P1 = (
            -2.0 * (a11 * dx1(g) + a12 * dx2(g))
            + ScalarField(dom, brace) * dv * a1
            + 4.0 * ((gm2[0] * dx1(g) + gm2[1] * dx2(g)) * inv2_2) * a1
            + a1 * dx1(v1) + a2 * dx2(v1)
            + a1 * dx1(v1) + a2 * dx1(v2)
            - a1 * dv
            - (alpha / lame2.mu) * m2r[0]
        )
        P2 = (
            -2.0 * (a21 * dx1(g) + a22 * dx2(g))
            + ScalarField(dom, brace) * dv * a2
            + 4.0 * ((gm2[0] * dx1(g) + gm2[1] * dx2(g)) * inv2_2) * a2
            + a1 * dx1(v2) + a2 * dx2(v2)
            + a1 * dx2(v1) + a2 * dx2(v2)
            - a2 * dv
            - (alpha / lame2.mu) * m2r[1]
        )
        gag = a1 * dx1(g) + a2 * dx2(g)
        return P1, P2, E_v, D_v, gag

    def apply(V):
        v1, v2, g = V.comp(0), V.comp(1), V.comp(2)
        P1, P2, E_v, D_v, gag = pieces(v1, v2, g)
        cA = alpha * (mu1f * (E_v * inv2_1))
        cB = 2.0 * (mu1f * (gag * inv2_1))
        cC = beta * (mu1f * (D_v * inv2_1))
        top1 = P1 - dx1(cA) + dx1(cB) + dx1(cC)
        top2 = P2 - dx2(cA) + dx2(cB) + dx2(cC)
        vecA = (2.0 * (alpha * (E_v * inv2_1)) * gm1[0],
                2.0 * (alpha * (E_v * inv2_1)) * gm1[1])
        vecB = (4.0 * (gag * inv2_1) * gm1[0], 4.0 * (gag * inv2_1) * gm1[1])
        vecC = (2.0 * (beta * (D_v * inv2_1)) * gm1[0],
                2.0 * (beta * (D_v * inv2_1)) * gm1[1])
        bot = (
            -1.0 * _div(P1, P2)
            + _div(*vecA)
            - _div(*vecB)
            - _div(*vecC)
        )
        return Field3(dom, np.stack([top1.values, top2.values, bot.values]))

    return AssembledH(dom, "lame", apply_full=apply)


def check_bilinear_identity_lame(lame1, lame2, wf, vg, tol_pre=5e-2):
    """Both sides of the Lame bilinear identity (pairing of w + grad f with
    L_{alpha,beta}(v + grad g) against ((w, f), H(v, g)))."""
    w, f = wf
    v, g = vg
    alpha = lame1.mu - lame2.mu
    beta = lame1.lam - lame2.lam
    r0v, r1v, r2v = lame_decoupled_residual(lame2, v, g)
    scale_v = max(l2_norm(laplacian(v[0])), l2_norm(laplacian(g)), 1e-300)
    pre_v = max(l2_norm(r0v), l2_norm(r1v), l2_norm(r2v)) / scale_v
    r0w, _, _ = lame_decoupled_residual(lame1, w, f)
    pre_w = l2_norm(r0w) / max(l2_norm(laplacian(f)), 1e-300)
    if max(pre_v, pre_w) > tol_pre:
        raise PreconditionError(
            f"decoupled residuals too large (w {pre_w:.2e}, v {pre_v:.2e})",
            measured=max(pre_v, pre_w),
        )
    u = decoupled_to_lame(w, f)
    ut = decoupled_to_lame(v, g)
    # L_{alpha,beta} ut = Z_alpha(ut) + grad(beta div ut)
    du = _div(ut[0], ut[1])
    ga = _grad(alpha)
    z1 = (
        alpha * laplacian(ut[0]) + alpha * dx1(du)
        + ga[0] * dx1(ut[0]) + ga[1] * dx2(ut[0])
        + ga[0] * dx1(ut[0]) + ga[1] * dx1(ut[1])
    )
    z2 = (
        alpha * laplacian(ut[1]) + alpha * dx2(du)
        + ga[0] * dx1(ut[1]) + ga[1] * dx2(ut[1])
        + ga[0] * dx2(ut[0]) + ga[1] * dx2(ut[1])
    )
    l1 = z1 + dx1(beta * du)
    l2 = z2 + dx2(beta * du)
    lhs = pairing2(u, (l1, l2))
    H = assemble_lame_H(lame1, lame2)
    vals = np.stack([v[0].values, v[1].values, g.values])
    HV = H.apply(Field3(alpha.domain, vals))
    rhs = (
        pairing(w[0], HV.comp(0))
        + pairing(w[1], HV.comp(1))
        + pairing(f, HV.comp(2))
    )
    gap = abs(lhs - rhs)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "gap": gap,
        "rel_gap": gap / max(abs(lhs), 1e-12),
        "pre_w": pre_w,
        "pre_v": pre_v,
    }
