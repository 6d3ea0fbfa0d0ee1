"""Independent reference implementations used to check the library.

These deliberately take the brute-force route (vertex enumeration, sign
enumeration, quadrature, first-order iteration) so they share no code path
with the implementations under test.
"""

import itertools

import numpy as np
import scipy.integrate


def polytope_vertices_2d(normals, offsets, tol=1e-9):
    """All vertices of {x : Hx <= h} in 2-D by row-pair intersection."""
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    pts = []
    m = normals.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            mat = np.vstack([normals[i], normals[j]])
            if abs(np.linalg.det(mat)) < 1e-12:
                continue
            p = np.linalg.solve(mat, np.array([offsets[i], offsets[j]]))
            if (normals @ p <= offsets + tol).all():
                pts.append(p)
    uniq = []
    for p in pts:
        if not any(np.allclose(p, q, atol=1e-9) for q in uniq):
            uniq.append(p)
    return np.array(uniq) if uniq else np.zeros((0, 2))


def polytope_support_2d(normals, offsets, direction):
    verts = polytope_vertices_2d(normals, offsets)
    if verts.size == 0:
        raise ValueError("empty polytope")
    return float((verts @ np.asarray(direction)).max())


def zonotope_points(center, generators):
    """All sign-combination extreme points (covers every vertex)."""
    generators = np.asarray(generators, dtype=float)
    m = generators.shape[0]
    pts = []
    for signs in itertools.product((-1.0, 1.0), repeat=m):
        pts.append(np.asarray(center) + np.asarray(signs) @ generators)
    return np.array(pts) if pts else np.asarray(center)[None, :]


def zonotope_support_enum(center, generators, direction):
    pts = zonotope_points(center, generators)
    return float((pts @ np.asarray(direction)).max())


def minkowski_support_enum(poly_pts, zono_pts, direction):
    """Support of the Minkowski sum via all pairwise point sums."""
    d = np.asarray(direction)
    sums = poly_pts[:, None, :] + zono_pts[None, :, :]
    return float((sums.reshape(-1, d.size) @ d).max())


def normal_cdf_quadrature(x):
    """Standard normal CDF by adaptive quadrature of the density."""
    def pdf(t):
        return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)

    val, _ = scipy.integrate.quad(pdf, 0.0, x, limit=200)
    return 0.5 + val


def inv_norm_cdf_bisection(q, tol=1e-13):
    lo, hi = -10.0, 10.0
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if normal_cdf_quadrature(mid) < q:
            lo = mid
        else:
            hi = mid
        if abs(normal_cdf_quadrature(0.5 * (lo + hi)) - q) < tol:
            break
    return 0.5 * (lo + hi)


def qp_projected_gradient(h_mat, f, g_mat, h_vec, iters=30_000):
    """Reference QP solve: accelerated projected gradient on the dual.

    The dual of  min 1/2 x'Hx + f'x  s.t. Gx <= h  over multipliers
    lam >= 0 is a box-constrained quadratic, so projection is a clip.
    Returns the primal point recovered from the converged multipliers.
    """
    h_inv_gt = np.linalg.solve(h_mat, g_mat.T)
    dual_q = g_mat @ h_inv_gt
    dual_l = g_mat @ np.linalg.solve(h_mat, f) + h_vec
    step = 1.0 / (np.linalg.eigvalsh(dual_q)[-1] + 1e-12)

    lam = np.zeros(g_mat.shape[0])
    lam_prev = lam.copy()
    tk = 1.0
    for _ in range(iters):
        mom = lam + ((tk - 1.0) / (tk + 2.0)) * (lam - lam_prev)
        grad = dual_q @ mom + dual_l
        new = np.clip(mom - step * grad, 0.0, None)
        lam_prev, lam = lam, new
        tk += 1.0
    x = -np.linalg.solve(h_mat, f + g_mat.T @ lam)
    return x, lam


def riccati_fixed_point(a, g, qc, rc, iters=200_000, tol=1e-14):
    """Plain fixed-point DARE iteration used as a numeric oracle."""
    p = np.asarray(qc, dtype=float).copy()
    for _ in range(iters):
        gpg = g.T @ p @ g + rc
        apg = a.T @ p @ g
        p_next = a.T @ p @ a - apg @ np.linalg.solve(gpg, apg.T) + qc
        p_next = 0.5 * (p_next + p_next.T)
        if np.abs(p_next - p).max() <= tol:
            return p_next
        p = p_next
    return p
