"""Per-mode linearization around the equilibrium and its spectral analysis.

For a wavevector k the linear part of the system acts on the coefficient vector
``(a, u1, u2, u3, theta, b1, b2, b3)`` as an 8x8 matrix. The direction
``k . b`` evolves on its own (eigenvalue ``-sigma |k|^2``), so the analysis is
done on the 7-dimensional physical subspace ``k . b = 0``.

Inside that subspace the shear (Alfven) plane spanned by ``u = e`` and
``b = e`` with ``e`` perpendicular to both k and n is invariant, with
characteristic polynomial ``lam^2 + sigma |k|^2 lam + (n.k)^2``. The matrix is
block upper-triangular in the basis (shear plane, complement), which the
abscissa scan uses to get the shear roots in closed form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .system import Params

_I3 = np.eye(3)
# real parts below this multiple of the matrix scale are rounding noise
_SNAP = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class ModeSystem:
    k: tuple[int, int, int]
    matrix: np.ndarray
    basis: np.ndarray  # (8, 7) orthonormal basis of k . b = 0

    @property
    def restricted(self) -> np.ndarray:
        return self.basis.conj().T @ self.matrix @ self.basis


def _as_batch(ks) -> np.ndarray:
    ks = np.asarray(ks, dtype=float)
    return ks[None] if ks.ndim == 1 else ks


def mode_matrices(ks, p: Params) -> np.ndarray:
    """Batched linear operators, shape ``(N, 8, 8)``."""
    ks = _as_batch(ks)
    n = p.n_vec
    kk = np.sum(ks**2, axis=1)
    nk = ks @ n
    out = np.zeros((len(ks), 8, 8), dtype=complex)
    out[:, 0, 1:4] = -1j * ks
    out[:, 1:4, 0] = -1j * p.R * ks
    out[:, 1:4, 4] = -1j * p.R * ks
    out[:, 1:4, 5:8] = 1j * nk[:, None, None] * _I3 - 1j * np.einsum("ni,j->nij", ks, n)
    out[:, 4, 4] = -p.kappa * kk
    out[:, 4, 1:4] = -1j * p.R * ks
    out[:, 5:8, 5:8] = -p.sigma * kk[:, None, None] * _I3
    out[:, 5:8, 1:4] = 1j * nk[:, None, None] * _I3 - 1j * np.einsum("i,nj->nij", n, ks)
    return out


def _frames(ks, n) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit k-hat, shear direction e (perp to k and n), and e2 = k-hat x e."""
    ks = _as_batch(ks)
    khat = ks / np.linalg.norm(ks, axis=1)[:, None]
    shear = np.cross(ks, np.broadcast_to(n, ks.shape))
    size = np.linalg.norm(shear, axis=1)
    scale = np.linalg.norm(ks, axis=1) * max(np.linalg.norm(n), 1.0)
    degenerate = size <= 1e-12 * scale
    if np.any(degenerate):
        # k parallel to n (or n = 0): any unit vector perpendicular to k will do
        kd = ks[degenerate]
        axis = np.eye(3)[np.argmin(np.abs(kd), axis=1)]
        shear[degenerate] = np.cross(kd, axis)
        size[degenerate] = np.linalg.norm(shear[degenerate], axis=1)
    shear = shear / size[:, None]
    return khat, shear, np.cross(khat, shear)


def physical_bases(ks, n) -> np.ndarray:
    """Orthonormal bases of the subspace k . b = 0, shape ``(N, 8, 7)``.

    Column order: a, u1, u2, u3, theta, b along e, b along e2.
    """
    _, e, e2 = _frames(ks, n)
    q = np.zeros((len(e), 8, 7), dtype=complex)
    q[:, 0, 0] = 1.0
    q[:, 1:4, 1:4] = _I3
    q[:, 4, 4] = 1.0
    q[:, 5:8, 5] = e
    q[:, 5:8, 6] = e2
    return q


def _shear_and_complement(ks, n) -> tuple[np.ndarray, np.ndarray]:
    khat, e, e2 = _frames(ks, n)
    N = len(e)
    shear = np.zeros((N, 8, 2), dtype=complex)
    shear[:, 1:4, 0] = e
    shear[:, 5:8, 1] = e
    comp = np.zeros((N, 8, 5), dtype=complex)
    comp[:, 0, 0] = 1.0
    comp[:, 4, 1] = 1.0
    comp[:, 1:4, 2] = khat
    comp[:, 1:4, 3] = e2
    comp[:, 5:8, 4] = e2
    return shear, comp


def mode_matrix(k, p: Params) -> ModeSystem:
    k = tuple(int(v) for v in k)
    matrix = mode_matrices(k, p)[0]
    if not any(k):
        basis = np.zeros((8, 7), dtype=complex)
        basis[:7, :7] = np.eye(7)
    else:
        basis = physical_bases(k, p.n_vec)[0]
    return ModeSystem(k, matrix, basis)


def _sort_eigs(ev: np.ndarray) -> np.ndarray:
    """Sort each row by real part descending, ties by imaginary part descending."""
    scale = np.max(np.abs(ev), axis=-1, keepdims=True) + 1.0
    re_key = np.round(ev.real / scale, 12)
    order = np.lexsort((-ev.imag, -re_key), axis=-1)
    return np.take_along_axis(ev, order, axis=-1)


def spectrum(ms: ModeSystem) -> np.ndarray:
    """Eigenvalues on the physical subspace, real part descending.

    Raises
    ------
    ValueError
        For k = 0, where the physical subspace is not defined.
    NumericalError
        If the eigen-solver fails.
    """
    if not any(ms.k):
        raise ValueError("spectrum requires k != 0")
    try:
        ev = np.linalg.eigvals(ms.restricted)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-solve failed at k={ms.k}: {exc}") from exc
    return _sort_eigs(ev)


def spectra(ks, p: Params) -> np.ndarray:
    """Batched :func:`spectrum` for nonzero modes, shape ``(N, 7)``."""
    ks = _as_batch(ks)
    q = physical_bases(ks, p.n_vec)
    a = np.conj(np.transpose(q, (0, 2, 1))) @ mode_matrices(ks, p) @ q
    try:
        return _sort_eigs(np.linalg.eigvals(a))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"batched eigen-solve failed: {exc}") from exc


def reduced_dispersion(k, p: Params) -> tuple[complex, complex]:
    """Closed-form roots of ``lam^2 + sigma |k|^2 lam + (n.k)^2 = 0``.

    The larger-magnitude root is formed first and the other one from the
    product of roots, which avoids cancellation when ``(n.k)^2`` is tiny.
    """
    k = np.asarray(k, dtype=float)
    if not np.any(k):
        raise ValueError("reduced_dispersion requires k != 0")
    roots = _shear_roots(np.array([p.sigma * (k @ k)]), np.array([p.n_vec @ k]))[0]
    return complex(roots[0]), complex(roots[1])


def _shear_roots(damp: np.ndarray, nk: np.ndarray) -> np.ndarray:
    """Batched roots of lam^2 + damp lam + nk^2, sorted as eigenvalues."""
    q = nk.astype(complex) ** 2
    sq = np.sqrt(damp.astype(complex) ** 2 - 4.0 * q)
    big = -0.5 * (damp + sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        small = np.where(big != 0, q / np.where(big != 0, big, 1.0), 0.0) + 0.0
    return _sort_eigs(np.stack([big, small], axis=-1))


def _snap(ev: np.ndarray, scale: np.ndarray) -> np.ndarray:
    re = np.where(np.abs(ev.real) <= _SNAP * scale[:, None], 0.0, ev.real)
    return re + 1j * ev.imag


@dataclass(frozen=True)
class AbscissaScan:
    modes: np.ndarray  # (N, 3) integer wavevectors
    abscissa: np.ndarray  # (N,)
    eigenvalues: np.ndarray  # (N, 7), sorted
    shear: np.ndarray  # (N, 2) closed-form shear roots
    ndotk: np.ndarray  # (N,)
    global_max: float
    argmax: tuple[int, int, int]


def lattice(K: int) -> np.ndarray:
    r1 = np.arange(-K, K + 1)
    pts = np.array(list(itertools.product(r1, r1, r1)))
    return pts[np.any(pts != 0, axis=1)]


def abscissa_scan(p: Params, K: int, modes=None) -> AbscissaScan:
    """Spectral abscissa on every mode of ``0 < |k|_inf <= K``.

    Each spectrum is the union of the closed-form shear roots and the
    eigenvalues of the 5x5 compression onto the complement of the shear
    plane. Real parts within rounding of zero (64 eps times the matrix norm)
    are reported as exactly zero. The global maximum goes to the first mode
    in lexicographic order among ties.
    """
    if modes is None:
        if K < 1:
            raise ValueError("K must be >= 1")
        modes = lattice(K)
    modes = np.asarray(modes)
    ks = modes.astype(float)
    n = p.n_vec
    mats = mode_matrices(ks, p)
    shear_q, comp_q = _shear_and_complement(ks, n)
    comp = np.conj(np.transpose(comp_q, (0, 2, 1))) @ mats @ comp_q
    try:
        comp_ev = np.linalg.eigvals(comp)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-solve failed: {exc}") from exc
    scale = np.linalg.norm(mats, axis=(1, 2))
    shear = _shear_roots(p.sigma * np.sum(ks**2, axis=1), ks @ n)
    ev = _sort_eigs(np.concatenate([shear, _snap(comp_ev, scale)], axis=1))
    absc = ev[:, 0].real + 0.0
    i = int(np.argmax(absc))
    return AbscissaScan(
        modes=modes,
        abscissa=absc,
        eigenvalues=ev,
        shear=shear,
        ndotk=ks @ n,
        global_max=float(absc[i]),
        argmax=tuple(int(v) for v in modes[i]),
    )


def shear_invariance_defect(ks, p: Params) -> np.ndarray:
    """Norm of the part of A Q_shear leaving the shear plane (0 if invariant)."""
    ks = _as_batch(ks)
    q, _ = _shear_and_complement(ks, p.n_vec)
    aq = mode_matrices(ks, p) @ q
    proj = q @ (np.conj(np.transpose(q, (0, 2, 1))) @ aq)
    return np.linalg.norm(aq - proj, axis=(1, 2))


def shear_membership(ks, p: Params) -> np.ndarray:
    """Relative smallest singular value of ``A_phys - lam I`` at each shear root.

    Returns shape ``(N, 2)``; values near machine epsilon certify that the
    closed-form roots belong to the dense physical-subspace spectrum, without
    relying on eigenvalue conditioning near double roots.
    """
    ks = _as_batch(ks)
    q = physical_bases(ks, p.n_vec)
    a = np.conj(np.transpose(q, (0, 2, 1))) @ mode_matrices(ks, p) @ q
    roots = _shear_roots(p.sigma * np.sum(ks**2, axis=1), ks @ p.n_vec)
    scale = np.linalg.norm(a, axis=(1, 2)) + 1.0
    out = np.empty(roots.shape)
    eye = np.eye(7)
    for j in range(2):
        shifted = a - roots[:, j, None, None] * eye
        out[:, j] = np.linalg.svd(shifted, compute_uv=False)[:, -1] / scale
    return out


# wave structures ------------------------------------------------------------


def _mode_parts(x):
    return x[0], x[1:4], x[4], x[5:8]


def wave_equation_check(k, p: Params, x=None, rng=None) -> dict[str, float]:
    """Relative residuals of the second-order wave identities at one mode.

    Applies the first-order operator twice to mode data ``x`` (random unit
    data with ``k . b = 0`` if omitted) and compares against:

    ``acoustic_a``
        a'' + R|k|^2 a = -R|k|^2 theta - |k|^2 (n.b)
    ``acoustic_div``
        D'' + R|k|^2 D = R|k|^2 theta' + |k|^2 (n.b')  with D = i k.u
    ``shear_u`` / ``shear_b`` (pressure coupling dropped)
        u'' + sigma|k|^2 u' + (n.k)^2 u = (n.k)(n.u) k - |n|^2 (k.u) k + (n.k)(k.u) n
        b'' + sigma|k|^2 b' + (n.k)^2 b = (n.k)(n.b) k - |k|^2 (n.b) n
    ``thermal_div`` / ``thermal_theta`` (a and b coupling dropped)
        D'' + kappa|k|^2 D' + R^2 |k|^2 D = 0,  same for theta
    """
    k = np.asarray(k, dtype=float)
    if not np.any(k):
        raise ValueError("wave_equation_check requires k != 0")
    n = p.n_vec
    kk, nk = k @ k, n @ k
    if x is None:
        rng = np.random.default_rng() if rng is None else rng
        x = rng.normal(size=8) + 1j * rng.normal(size=8)
    x = np.asarray(x, dtype=complex).copy()
    x[5:8] -= k * (k @ x[5:8]) / kk
    x /= np.linalg.norm(x)

    def rel(lhs_terms, rhs_terms):
        lhs = sum(lhs_terms)
        rhs = sum(rhs_terms)
        scale = max(max(np.linalg.norm(t) for t in lhs_terms + rhs_terms), 1e-300)
        return float(np.linalg.norm(lhs - rhs) / scale)

    out = {}
    full = mode_matrices(k, p)[0]
    x1 = full @ x
    x2 = full @ x1
    a0, u0, t0, b0 = _mode_parts(x)
    a1, u1, t1, b1 = _mode_parts(x1)
    a2, u2, _, _ = _mode_parts(x2)
    out["acoustic_a"] = rel([a2, p.R * kk * a0], [-p.R * kk * t0, -kk * (n @ b0)])
    d0, d1, d2 = (1j * (k @ v) for v in (u0, u1, u2))
    out["acoustic_div"] = rel([d2, p.R * kk * d0], [p.R * kk * t1, kk * (n @ b1)])

    shear_op = full.copy()
    shear_op[1:4, 0] = 0.0
    shear_op[1:4, 4] = 0.0
    y1 = shear_op @ x
    y2 = shear_op @ y1
    _, su1, _, sb1 = _mode_parts(y1)
    _, su2, _, sb2 = _mode_parts(y2)
    out["shear_u"] = rel(
        [su2, p.sigma * kk * su1, nk**2 * u0],
        [nk * (n @ u0) * k, -(n @ n) * (k @ u0) * k, nk * (k @ u0) * n],
    )
    out["shear_b"] = rel(
        [sb2, p.sigma * kk * sb1, nk**2 * b0],
        [nk * (n @ b0) * k, -kk * (n @ b0) * n],
    )

    thermal_op = full.copy()
    thermal_op[1:4, 0] = 0.0
    thermal_op[1:4, 5:8] = 0.0
    z1 = thermal_op @ x
    z2 = thermal_op @ z1
    _, tu1, tt1, _ = _mode_parts(z1)
    _, tu2, tt2, _ = _mode_parts(z2)
    e0, e1, e2 = (1j * (k @ v) for v in (u0, tu1, tu2))
    out["thermal_div"] = rel([e2, p.kappa * kk * e1, p.R**2 * kk * e0], [0.0 * e0])
    out["thermal_theta"] = rel([tt2, p.kappa * kk * tt1, p.R**2 * kk * t0], [0.0 * t0])
    return out
