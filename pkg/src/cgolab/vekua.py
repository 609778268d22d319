"""Vekua frames and the parametrices P_B, T_B for 2 dbar + B and 2 dz + B.

Kernel solutions with prescribed jets come from a contraction fixed point
U = P(z) + dbar^{-1}(-(1/2) A U) over a holomorphic vector polynomial P,
followed by a linear re-solve of the jet-matching system (the jet map is
affine in P).  Frames assemble three such columns; the determinant splits
off a holomorphic factor q whose zero set, when present, is patched by a
second frame and a Hermite interpolant r.
"""
import hashlib
import math

import numpy as np

from . import cauchy as _cauchy
from .errors import (
    DegenerateSpecError,
    FrameDegeneracyError,
    InvalidArgumentError,
    SolverFailureError,
)
from .grid import (
    Field3,
    Matrix3Field,
    ScalarField,
    dz_values,
    dzbar_values,
    interp,
    l2_norm,
    sup_norm,
)


class JetSpec:
    """Prescribed d^j values (j = 0, 1, 2) at up to five interior points."""

    def __init__(self, entries):
        self.points = []
        self.jets = []
        for point, r0, r1, r2 in entries:
            self.points.append(complex(point))
            self.jets.append(
                [np.asarray(r0, dtype=complex),
                 np.asarray(r1, dtype=complex),
                 np.asarray(r2, dtype=complex)]
            )
        if len(set(self.points)) != len(self.points):
            raise InvalidArgumentError("jet points must be pairwise distinct")
        if len(self.points) > 5:
            raise InvalidArgumentError("at most five jet points are supported")

    def conj(self):
        return JetSpec(
            [
                (p, np.conj(j[0]), np.conj(j[1]), np.conj(j[2]))
                for p, j in zip(self.points, self.jets)
            ]
        )

    def target_vector(self):
        return np.concatenate([np.concatenate(j) for j in self.jets])


def _matrix_key(m):
    return hashlib.sha1(np.ascontiguousarray(m.values).tobytes()).hexdigest()[:16]


class _DbarJetSolver:
    """Shared fixed-point machinery for one coefficient matrix and point set."""

    def __init__(self, A, points, tol=1e-11, max_iter=60):
        self.A = A.with_boundary() if A.boundary is None else A
        self.domain = A.domain
        self.points = tuple(points)
        self.tol = tol
        self.max_iter = max_iter
        npts = len(points)
        self.degree = max(4, 3 * npts - 1)
        self.ndof = 3 * (self.degree + 1)
        self._basis_solutions = None
        self._offset = None
        self._jet_matrix = None

    def _poly_field(self, coeffs):
        # coeffs: (degree+1, 3); polynomial in (z - center)
        dom = self.domain
        rel = dom.zz - dom.center
        relb = dom.boundary_points - dom.center
        vals = np.zeros((3, dom.n_r, dom.n_theta), dtype=complex)
        bvals = np.zeros((3, dom.n_boundary), dtype=complex)
        for m in range(self.degree + 1):
            zm = rel ** m
            bm = relb ** m
            for i in range(3):
                vals[i] += coeffs[m, i] * zm
                bvals[i] += coeffs[m, i] * bm
        return Field3(dom, vals, bvals)

    def _fixed_point(self, P):
        U = P
        prev_delta = None
        factor = None
        for it in range(self.max_iter):
            AU = self.A.matvec(U)
            Unew = P - 0.5 * _cauchy.cauchy_dbar_inv(AU)
            delta = l2_norm(Unew - U)
            U = Unew
            if prev_delta is not None and prev_delta > 0:
                factor = delta / prev_delta
                if factor >= 1.0 and delta > self.tol:
                    raise SolverFailureError(
                        f"dbar fixed point diverging (factor {factor:.3f})",
                        factor=factor,
                    )
            if delta <= self.tol:
                break
            prev_delta = delta
        return U

    def _jets_of(self, U):
        dom = self.domain
        out = []
        d1 = Field3(dom, np.stack([dz_values(dom, U.values[i]) for i in range(3)]))
        d2 = Field3(dom, np.stack([dz_values(dom, d1.values[i]) for i in range(3)]))
        for p in self.points:
            for F in (U, d1, d2):
                out.append(np.array([interp(F.comp(i), p) for i in range(3)]))
        return np.concatenate(out)

    def _build(self):
        zero = np.zeros((self.degree + 1, 3), dtype=complex)
        U0 = self._fixed_point(self._poly_field(zero))
        self._offset = (U0, self._jets_of(U0))
        cols = []
        sols = []
        for m in range(self.degree + 1):
            for i in range(3):
                c = zero.copy()
                c[m, i] = 1.0
                Ub = self._fixed_point(self._poly_field(c))
                sols.append(Ub - U0)
                cols.append(self._jets_of(Ub) - self._offset[1])
        self._jet_matrix = np.stack(cols, axis=1)
        self._basis_solutions = sols

    def solve(self, spec):
        if self._jet_matrix is None:
            self._build()
        target = spec.target_vector() - self._offset[1]
        coef, res, rank, sv = np.linalg.lstsq(self._jet_matrix, target, rcond=None)
        fit = self._jet_matrix @ coef - target
        if np.abs(fit).max() > 1e-6 * max(1.0, np.abs(spec.target_vector()).max()):
            raise DegenerateSpecError(
                f"jet system singular or inconsistent (defect {np.abs(fit).max():.2e})"
            )
        U = self._offset[0]
        vals = U.values.copy()
        bvals = U.boundary.copy()
        for c, sol in zip(coef, self._basis_solutions):
            vals = vals + c * sol.values
            bvals = bvals + c * sol.boundary
        return Field3(self.domain, vals, bvals)


def _solver_for(A, points):
    key = ("dbar_jet", _matrix_key(A), tuple(complex(p) for p in points))
    solver = A.domain._cache.get(key)
    if solver is None:
        solver = _DbarJetSolver(A, points)
        A.domain._cache[key] = solver
    return solver


def solve_dbar_jet(A, spec):
    """Solution of 2 dbar U + A U = 0 with prescribed d_z^j jets."""
    if not isinstance(spec, JetSpec):
        spec = JetSpec(spec)
    for p in spec.points:
        if abs(p - A.domain.center) >= A.domain.interior_radius():
            raise InvalidArgumentError("jet points must be strictly interior")
    return _solver_for(A, spec.points).solve(spec)


def solve_dz_jet(B, spec):
    """Solution of 2 dz V + B V = 0 with prescribed dbar^j jets (conjugate trick)."""
    if not isinstance(spec, JetSpec):
        spec = JetSpec(spec)
    Bc = Matrix3Field(
        B.domain,
        np.conj(B.values),
        None if B.boundary is None else np.conj(B.boundary),
    )
    return solve_dbar_jet(Bc, spec.conj()).conj()


def dbar_jet_residual(A, U):
    dom = A.domain
    dU = Field3(dom, np.stack([dzbar_values(dom, U.values[i]) for i in range(3)]))
    R = 2.0 * dU + A.matvec(U)
    return R


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

class VekuaFrame:
    """Frame data for one coefficient matrix B.

    P-side (columns of 2 dbar + B) and the mirrored T-side (2 dz + B) share
    the anchor.  q is the holomorphic factor of det Pi; when its zero set is
    empty the interpolант r is identically one and the tilde frame is unused.
    """

    def __init__(self, B, anchor, pi, q, zeros, r_poly, pi_tilde, q_tilde,
                 pi0, q0, zeros0, r0_poly, pi0_tilde, q0_tilde):
        self.B = B
        self.anchor = complex(anchor)
        self.domain = B.domain
        self.pi = pi
        self.q = q
        self.zeros = zeros              # list of (point, multiplicity)
        self.r_poly = r_poly            # None means r == 1
        self.pi_tilde = pi_tilde
        self.q_tilde = q_tilde
        self.pi0 = pi0
        self.q0 = q0
        self.zeros0 = zeros0
        self.r0_poly = r0_poly
        self.pi0_tilde = pi0_tilde
        self.q0_tilde = q0_tilde
        self._pi_inv = None
        self._pi0_inv = None

    # lazily inverted frames -------------------------------------------------
    @property
    def pi_inv(self):
        if self._pi_inv is None:
            self._pi_inv = self.pi.inv()
        return self._pi_inv

    @property
    def pi0_inv(self):
        if self._pi0_inv is None:
            self._pi0_inv = self.pi0.inv()
        return self._pi0_inv

    def r_values(self):
        dom = self.domain
        if self.r_poly is None:
            one = np.ones_like(dom.zz)
            return one, np.ones(dom.n_boundary, dtype=complex)
        rel = dom.zz - dom.center
        relb = dom.boundary_points - dom.center
        return (
            np.polyval(self.r_poly, rel),
            np.polyval(self.r_poly, relb),
        )

    def r0_values(self):
        dom = self.domain
        if self.r0_poly is None:
            return np.ones_like(dom.zz), np.ones(dom.n_boundary, dtype=complex)
        relb = np.conj(dom.boundary_points - dom.center)
        rel = np.conj(dom.zz - dom.center)
        return np.polyval(self.r0_poly, rel), np.polyval(self.r0_poly, relb)


def _columns_to_matrix(cols):
    dom = cols[0].domain
    vals = np.stack([c.values for c in cols], axis=1)  # (3rows? ) - careful
    # columns: Pi[:, k] = cols[k]; entry (i, j) = cols[j].comp(i)
    vals = np.stack([np.stack([cols[j].values[i] for j in range(3)]) for i in range(3)])
    b = np.stack([np.stack([cols[j].boundary[i] for j in range(3)]) for i in range(3)])
    return Matrix3Field(dom, vals, b)


def _detect_zeros(q_vals, dom, rel_tol=1e-6):
    mags = np.abs(q_vals)
    mmax = mags.max()
    if mmax == 0:
        raise FrameDegeneracyError("determinant factor vanishes identically")
    low = mags < rel_tol * mmax
    if not low.any():
        return []
    pts = dom.zz[low]
    clusters = []
    for p in pts:
        for c in clusters:
            if abs(p - c[0][0]) < 0.05 * dom.radius:
                c.append((p, 0))
                break
        else:
            clusters.append([(p, 0)])
    out = []
    for c in clusters:
        center = np.mean([p for p, _ in c])
        out.append((complex(center), 1))
    return out


def hermite_switch_poly(zeros, zeros_tilde, order):
    """Holomorphic polynomial r with r = 0 at `zeros` and 1 - r = 0 at
    `zeros_tilde`, both to the given order (lowest-degree choice).

    Solves a(z) s(z) + b(z) t(z) = 1 with a = prod (z-zi)^order,
    b = prod (z-wj)^order and returns r = a s = 1 - b t.
    """
    a = np.poly1d([1.0])
    for z0, _ in zeros:
        a = a * np.poly1d([1.0, -z0]) ** order
    b = np.poly1d([1.0])
    for w0, _ in zeros_tilde:
        b = b * np.poly1d([1.0, -w0]) ** order
    da, db = a.order, b.order
    # unknowns: s of degree db-1, t of degree da-1
    n = da + db
    M = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    rhs[-1] = 1.0
    for j in range(db):  # s coefficients (highest first)
        col = np.zeros(n, dtype=complex)
        prod = a * np.poly1d([1.0] + [0.0] * (db - 1 - j))
        col[n - 1 - prod.order : n] = prod.coeffs
        M[:, j] = col
    for j in range(da):
        col = np.zeros(n, dtype=complex)
        prod = b * np.poly1d([1.0] + [0.0] * (da - 1 - j))
        col[n - 1 - prod.order : n] = prod.coeffs
        M[:, db + j] = col
    sol = np.linalg.solve(M, rhs)
    s = np.poly1d(sol[:db])
    r = a * s
    return r.coeffs


def build_vekua_frame(B, anchor, zero_tol=1e-6):
    """Frame for the matrix B anchored at an interior point."""
    dom = B.domain
    B = B.with_boundary() if B.boundary is None else B
    e = np.eye(3)
    cols = [
        solve_dbar_jet(B, [(anchor, e[k], np.zeros(3), np.zeros(3))]) for k in range(3)
    ]
    pi = _columns_to_matrix(cols)
    trB = B.trace_scalar()
    expo = _cauchy.cauchy_dbar_inv(trB)
    q_vals = pi.det().values * np.exp(0.5 * expo.values)
    q_b = pi.det().boundary * np.exp(0.5 * expo.boundary)
    zeros = _detect_zeros(q_vals, dom, zero_tol)
    pi_tilde = q_tilde = None
    r_poly = None
    if zeros:
        spec = [(p, None, None, None) for p, _ in zeros]
        colsT = [
            solve_dbar_jet(
                B, [(p, e[k], np.zeros(3), np.zeros(3)) for p, _ in zeros]
            )
            for k in range(3)
        ]
        pi_tilde = _columns_to_matrix(colsT)
        qt_vals = pi_tilde.det().values * np.exp(0.5 * expo.values)
        zeros_t = _detect_zeros(qt_vals, dom, zero_tol)
        if any(
            abs(p - pt) < 0.05 * dom.radius for p, _ in zeros for pt, _ in zeros_t
        ):
            raise FrameDegeneracyError("zero sets of q and q-tilde intersect")
        order = max([m for _, m in zeros] + [m for _, m in zeros_t] + [1])
        r_poly = hermite_switch_poly(
            [(p - dom.center, m) for p, m in zeros],
            [(p - dom.center, m) for p, m in zeros_t],
            order,
        )
        q_tilde = ScalarField(dom, qt_vals)
    # mirrored T-side frame
    cols0 = [
        solve_dz_jet(B, [(anchor, e[k], np.zeros(3), np.zeros(3))]) for k in range(3)
    ]
    pi0 = _columns_to_matrix(cols0)
    expo0 = _cauchy.cauchy_dz_inv(trB)
    q0_vals = pi0.det().values * np.exp(0.5 * expo0.values)
    zeros0 = _detect_zeros(q0_vals, dom, zero_tol)
    pi0_tilde = q0_tilde = None
    r0_poly = None
    if zeros0:
        cols0T = [
            solve_dz_jet(
                B, [(p, e[k], np.zeros(3), np.zeros(3)) for p, _ in zeros0]
            )
            for k in range(3)
        ]
        pi0_tilde = _columns_to_matrix(cols0T)
        q0t_vals = pi0_tilde.det().values * np.exp(0.5 * expo0.values)
        zeros0_t = _detect_zeros(q0t_vals, dom, zero_tol)
        order = max([m for _, m in zeros0] + [m for _, m in zeros0_t] + [1])
        r0_poly = hermite_switch_poly(
            [(np.conj(p - dom.center), m) for p, m in zeros0],
            [(np.conj(p - dom.center), m) for p, m in zeros0_t],
            order,
        )
        q0_tilde = ScalarField(dom, q0t_vals)
    return VekuaFrame(
        B, anchor, pi, ScalarField(dom, q_vals, q_b), zeros, r_poly,
        pi_tilde, q_tilde, pi0, ScalarField(dom, q0_vals), zeros0, r0_poly,
        pi0_tilde, q0_tilde,
    )


def _scalar_times_field3(vals, bvals, f):
    b = None
    if f.boundary is not None and bvals is not None:
        b = bvals[None, :] * f.boundary
    return Field3(f.domain, vals[None] * f.values, b)


def apply_PB(frame, f):
    """P_B f with (2 dbar + B) P_B f = f."""
    f = f.with_boundary()
    rv, rb = frame.r_values()
    main = frame.pi.matvec(
        _cauchy.cauchy_dbar_inv(frame.pi_inv.matvec(_scalar_times_field3(rv, rb, f)))
    )
    out = 0.5 * main
    if frame.r_poly is not None:
        pit_inv = frame.pi_tilde.inv()
        out = out + 0.5 * frame.pi_tilde.matvec(
            _cauchy.cauchy_dbar_inv(
                pit_inv.matvec(_scalar_times_field3(1.0 - rv, 1.0 - rb, f))
            )
        )
    return out


def apply_TB(frame, f):
    """T_B f with (2 dz + B) T_B f = f."""
    f = f.with_boundary()
    rv, rb = frame.r0_values()
    main = frame.pi0.matvec(
        _cauchy.cauchy_dz_inv(frame.pi0_inv.matvec(_scalar_times_field3(rv, rb, f)))
    )
    out = 0.5 * main
    if frame.r0_poly is not None:
        pit_inv = frame.pi0_tilde.inv()
        out = out + 0.5 * frame.pi0_tilde.matvec(
            _cauchy.cauchy_dz_inv(
                pit_inv.matvec(_scalar_times_field3(1.0 - rv, 1.0 - rb, f))
            )
        )
    return out


def apply_PB_star(frame, g):
    """P_B* g with (-2 dbar + B^T) P_B* g = g (transpose, no conjugation)."""
    g = g.with_boundary()
    rv, rb = frame.r_values()
    piT = frame.pi.T()
    inner = _cauchy.cauchy_dbar_inv(piT.matvec(g))
    out = -0.5 * _scalar_times_field3(
        rv, rb, frame.pi_inv.T().matvec(inner)
    )
    if frame.r_poly is not None:
        pitT = frame.pi_tilde.T()
        inner2 = _cauchy.cauchy_dbar_inv(pitT.matvec(g))
        out = out - 0.5 * _scalar_times_field3(
            1.0 - rv, 1.0 - rb, frame.pi_tilde.inv().T().matvec(inner2)
        )
    return out


def apply_TB_star(frame, g):
    """T_B* g with (-2 dz + B^T) T_B* g = g."""
    g = g.with_boundary()
    rv, rb = frame.r0_values()
    inner = _cauchy.cauchy_dz_inv(frame.pi0.T().matvec(g))
    out = -0.5 * _scalar_times_field3(
        rv, rb, frame.pi0_inv.T().matvec(inner)
    )
    if frame.r0_poly is not None:
        inner2 = _cauchy.cauchy_dz_inv(frame.pi0_tilde.T().matvec(g))
        out = out - 0.5 * _scalar_times_field3(
            1.0 - rv, 1.0 - rb, frame.pi0_tilde.inv().T().matvec(inner2)
        )
    return out


def _d_matrix(dom, M, op):
    vals = np.stack(
        [np.stack([op(dom, M.values[i, j]) for j in range(3)]) for i in range(3)]
    )
    return Matrix3Field(dom, vals)


def _boundary_field3(dom, arr):
    """Field3 carrier for a (3, n_b) boundary-only array (values unused)."""
    return arr


def commutator_dz_PB(frame, f):
    """Closed form of [d_z, P_B] f: area terms plus a boundary Cauchy term."""
    dom = frame.domain
    f = f.with_boundary()
    rv, rb = frame.r_values()
    piinv = frame.pi_inv
    dz_pi = _d_matrix(dom, frame.pi, dz_values)
    inner = piinv.matvec(_scalar_times_field3(rv, rb, f))
    term1 = 0.5 * dz_pi.matvec(_cauchy.cauchy_dbar_inv(inner))
    # boundary term: -(Pi / 8 pi) * int (nu1 - i nu2) Pi^{-1} r f / (z - zeta) dzeta
    nu_m = dom.boundary_normals.real - 1j * dom.boundary_normals.imag
    binner = inner.boundary * nu_m[None, :]
    bterm = [
        _cauchy.boundary_cauchy(binner[i], domain=dom, measure="dz") for i in range(3)
    ]
    bfield = Field3(dom, np.stack([b.values for b in bterm]))
    term2 = (-1.0 / (8.0 * np.pi)) * frame.pi.matvec(bfield)
    # area term with d_z(Pi^{-1} r) f
    piinv_r = Matrix3Field(
        dom,
        piinv.values * rv[None, None],
        None if piinv.boundary is None else piinv.boundary * rb[None, None],
    )
    dz_piinv_r = _d_matrix(dom, piinv_r, dz_values)
    term3 = 0.5 * frame.pi.matvec(
        _cauchy.cauchy_dbar_inv(dz_piinv_r.matvec(f))
    )
    out = term1 + term2 + term3
    if frame.r_poly is not None:
        pit = frame.pi_tilde
        pitinv = pit.inv()
        dz_pit = _d_matrix(dom, pit, dz_values)
        inner_t = pitinv.matvec(_scalar_times_field3(1.0 - rv, 1.0 - rb, f))
        out = out + 0.5 * dz_pit.matvec(_cauchy.cauchy_dbar_inv(inner_t))
        binner_t = inner_t.boundary * nu_m[None, :]
        bt = [
            _cauchy.boundary_cauchy(binner_t[i], domain=dom, measure="dz")
            for i in range(3)
        ]
        out = out + (-1.0 / (8.0 * np.pi)) * pit.matvec(
            Field3(dom, np.stack([b.values for b in bt]))
        )
        pitinv_1r = Matrix3Field(dom, pitinv.values * (1.0 - rv)[None, None])
        out = out + 0.5 * pit.matvec(
            _cauchy.cauchy_dbar_inv(_d_matrix(dom, pitinv_1r, dz_values).matvec(f))
        )
    return out


def commutator_dzbar_TB(frame, f):
    """Closed form of [dbar, T_B] f (mirror of the P_B commutator)."""
    dom = frame.domain
    f = f.with_boundary()
    rv, rb = frame.r0_values()
    piinv = frame.pi0_inv
    dzb_pi = _d_matrix(dom, frame.pi0, dzbar_values)
    inner = piinv.matvec(_scalar_times_field3(rv, rb, f))
    term1 = 0.5 * dzb_pi.matvec(_cauchy.cauchy_dz_inv(inner))
    nu_p = dom.boundary_normals.real + 1j * dom.boundary_normals.imag
    binner = inner.boundary * nu_p[None, :]
    bterm = [
        _cauchy.boundary_cauchy(binner[i], domain=dom, measure="dz", kernel="zbar")
        for i in range(3)
    ]
    term2 = (-1.0 / (8.0 * np.pi)) * frame.pi0.matvec(
        Field3(dom, np.stack([b.values for b in bterm]))
    )
    piinv_r = Matrix3Field(
        dom,
        piinv.values * rv[None, None],
        None if piinv.boundary is None else piinv.boundary * rb[None, None],
    )
    dzb_piinv_r = _d_matrix(dom, piinv_r, dzbar_values)
    term3 = 0.5 * frame.pi0.matvec(
        _cauchy.cauchy_dz_inv(dzb_piinv_r.matvec(f))
    )
    out = term1 + term2 + term3
    if frame.r0_poly is not None:
        pit = frame.pi0_tilde
        pitinv = pit.inv()
        inner_t = pitinv.matvec(_scalar_times_field3(1.0 - rv, 1.0 - rb, f))
        out = out + 0.5 * _d_matrix(dom, pit, dzbar_values).matvec(
            _cauchy.cauchy_dz_inv(inner_t)
        )
        binner_t = inner_t.boundary * nu_p[None, :]
        bt = [
            _cauchy.boundary_cauchy(binner_t[i], domain=dom, measure="dz", kernel="zbar")
            for i in range(3)
        ]
        out = out + (-1.0 / (8.0 * np.pi)) * pit.matvec(
            Field3(dom, np.stack([b.values for b in bt]))
        )
        pitinv_1r = Matrix3Field(dom, pitinv.values * (1.0 - rv)[None, None])
        out = out + 0.5 * pit.matvec(
            _cauchy.cauchy_dz_inv(_d_matrix(dom, pitinv_1r, dzbar_values).matvec(f))
        )
    return out


def pb_residual(frame, f, out=None):
    """|| (2 dbar + B) P_B f - f ||_sup / ||f||_sup."""
    dom = frame.domain
    u = apply_PB(frame, f) if out is None else out
    du = Field3(dom, np.stack([dzbar_values(dom, u.values[i]) for i in range(3)]))
    res = 2.0 * du + frame.B.matvec(u) - f
    denom = max(sup_norm(c) for c in f.comps())
    return max(sup_norm(c) for c in res.comps()) / max(denom, 1e-300)
