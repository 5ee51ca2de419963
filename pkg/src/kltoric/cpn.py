"""Reference model: complex projective space with its standard metric.

Points are unit vectors z in C^{n+1} modulo phase; covectors are
represented by horizontal vectors xi (<xi, z> = 0 hermitian), geodesics
are horizontal great circles z(t) = z0 cos t + w sin t.  The classical
commuting family attached to a constant row 1 = c_0 > ... > c_n = 0:

  * rational sums    F_i = sum_{j != i} |z_i xi_j - z_j xi_i|^2 / (c_j - c_i)
  * the full sum     C   = sum_{i,j}   |z_i xi_j - z_j xi_i|^2
  * circle momenta   J_i = Im(z_i conj(xi_i))

with the energy E = C/4 (equal to |xi|^2 / 2 on the constraint set).
All of these are invariant under the cotangent lift of the scaling and
phase actions, so their canonical brackets in the flat ambient
coordinates, evaluated on the constraint set, are the reduced brackets.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateDirection


def _pairs(z, xi):
    """psi_{ij} = z_i xi_j - z_j xi_i, shape (..., n+1, n+1)."""
    return z[..., :, None] * xi[..., None, :] - z[..., None, :] * xi[..., :, None]


def integrals(z, xi, c) -> dict:
    """Evaluate the commuting family at (z, xi); leading axes broadcast."""
    z = np.asarray(z)
    xi = np.asarray(xi)
    c = np.asarray(c, dtype=float)
    n = len(c) - 1
    psi2 = np.abs(_pairs(z, xi)) ** 2
    out = {}
    for i in range(1, n):
        denom = c - c[i]
        denom[i] = 1.0          # psi_{ii} = 0, so the i-term drops out
        out[f"F{i}"] = np.sum(psi2[..., i, :] / denom, axis=-1)
    C = np.sum(psi2, axis=(-2, -1))
    out["C"] = C
    out["E"] = C / 4.0
    for i in range(1, n + 1):
        out[f"J{i}"] = np.imag(z[..., i] * np.conj(xi[..., i]))
    return out


def random_point(rng, n):
    z = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    return z / np.linalg.norm(z)


def horizontal(z, v, tol: float = 1e-12):
    """Project v to the horizontal space at z and normalise."""
    w = v - np.vdot(z, v) * z
    norm = np.linalg.norm(w)
    if norm < tol * np.linalg.norm(v):
        raise DegenerateDirection("direction parallel to the base point")
    return w / norm


def geodesic(z0, w):
    """Closed-form unit-speed geodesic and its velocity covector."""
    def at(t):
        t = np.asarray(t, dtype=float)
        z = z0 * np.cos(t)[..., None] + w * np.sin(t)[..., None]
        xi = -z0 * np.sin(t)[..., None] + w * np.cos(t)[..., None]
        return z, xi
    return at


def conservation_check(n: int, c, n_geodesics: int = 100, n_times: int = 60,
                       seed: int = 0) -> dict:
    """Max relative drift of every family member along closed-form
    geodesics; pure evaluation error."""
    rng = np.random.default_rng(seed)
    c = np.asarray(c, dtype=float)
    ts = np.linspace(0.0, np.pi, n_times)
    worst = 0.0
    per_name: dict[str, float] = {}
    for _ in range(n_geodesics):
        z0 = random_point(rng, n)
        w = horizontal(z0, rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1))
        z, xi = geodesic(z0, w)(ts)
        vals = integrals(z, xi, c)
        for name, arr in vals.items():
            ref = float(arr[0])
            drift = float(np.max(np.abs(arr - ref))) / max(abs(ref), 1.0)
            per_name[name] = max(per_name.get(name, 0.0), drift)
            worst = max(worst, drift)
    return {"max_rel_drift": worst, "per_invariant": per_name,
            "geodesics": n_geodesics}


def _flat_family(c):
    """Family as functions of the flat real coordinates
    u = [Re z | Im z | Re xi | Im xi]."""
    c = np.asarray(c, dtype=float)
    n = len(c) - 1
    m = n + 1

    def func(u):
        z = u[..., :m] + 1j * u[..., m:2 * m]
        xi = u[..., 2 * m:3 * m] + 1j * u[..., 3 * m:]
        vals = integrals(z, xi, c)
        names = sorted(vals.keys())
        return np.stack([vals[k] for k in names], axis=-1), names

    return func


def bracket_check(n: int, c, n_points: int = 1000, fd_step: float = 1e-4,
                  seed: int = 0) -> dict:
    """Pairwise normalized canonical brackets at random constraint points,
    by 4th-order central differences with one Richardson pass."""
    rng = np.random.default_rng(seed)
    c = np.asarray(c, dtype=float)
    m = n + 1
    zs = np.empty((n_points, m), dtype=complex)
    xis = np.empty((n_points, m), dtype=complex)
    for k in range(n_points):
        z = random_point(rng, n)
        xi = horizontal(z, rng.standard_normal(m) + 1j * rng.standard_normal(m))
        zs[k] = z
        xis[k] = xi
    u = np.concatenate([zs.real, zs.imag, xis.real, xis.imag], axis=1)
    func = _flat_family(c)
    base, names = func(u)
    d = 4 * m

    grads = np.empty((n_points, d, base.shape[-1]))
    for k in range(d):
        def d4(step):
            e = np.zeros(d)
            e[k] = step
            return (8 * (func(u + e)[0] - func(u - e)[0])
                    - (func(u + 2 * e)[0] - func(u - 2 * e)[0])) / (12 * step)
        dh = d4(fd_step)
        dh2 = d4(fd_step / 2)
        grads[:, k, :] = (16 * dh2 - dh) / 15

    # canonical structure: q = (Re z, Im z), p = (Re xi, Im xi)
    gq = grads[:, :2 * m, :]
    gp = grads[:, 2 * m:, :]
    worst = 0.0
    table = {}
    nf = base.shape[-1]
    for a in range(nf):
        for b in range(a + 1, nf):
            br = np.sum(gq[:, :, a] * gp[:, :, b] - gp[:, :, a] * gq[:, :, b], axis=1)
            na = np.linalg.norm(grads[:, :, a], axis=1)
            nb = np.linalg.norm(grads[:, :, b], axis=1)
            rel = float(np.max(np.abs(br) / np.maximum(na * nb, 1e-300)))
            table[f"{{{names[a]},{names[b]}}}"] = rel
            worst = max(worst, rel)
    return {"max_normalized_bracket": worst, "pairs": table, "points": n_points}


def unitary_invariance(n: int, n_trials: int = 20, seed: int = 0) -> float:
    """The full sum is invariant under unitary coordinate changes; returns
    the max relative deviation over random unitaries."""
    rng = np.random.default_rng(seed)
    m = n + 1
    worst = 0.0
    for _ in range(n_trials):
        z = random_point(rng, n)
        xi = horizontal(z, rng.standard_normal(m) + 1j * rng.standard_normal(m))
        A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        U, _ = np.linalg.qr(A)
        c0 = float(np.sum(np.abs(_pairs(z, xi)) ** 2))
        c1 = float(np.sum(np.abs(_pairs(U @ z, U @ xi)) ** 2))
        worst = max(worst, abs(c1 - c0) / max(abs(c0), 1e-300))
    return worst
