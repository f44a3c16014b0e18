"""Pure-numpy implementation of the hot kernels.

Same call signatures as the compiled ``_core`` extension. Every field is a
C-contiguous float64 array of shape ``(ny, nx)``; one-dimensional grids use
``ny == 1``, for which all y-direction differences vanish identically.
"""
import math

import numpy as np

STATUS_OK = 0
STATUS_NEGATIVE = 1
STATUS_NAN = 2
STATUS_CG = 3

# semi-implicit step rejection: halve on negativity, regrow geometrically
MIN_FACTOR = 1e-6
GROW = 1.05


def convolve(u, oy, ox, w):
    """Circular convolution ``sum_k w[k] * u(x - y_k)`` by direct summation."""
    out = np.zeros_like(u)
    for k in range(len(w)):
        out += w[k] * np.roll(u, (int(oy[k]), int(ox[k])), axis=(0, 1))
    return out


def nonlocal_difference(u, oy, ox, w):
    """``sum_k w[k] * (u(x) - u(x - y_k))``; exactly zero on constants."""
    out = np.zeros_like(u)
    for k in range(len(w)):
        out += w[k] * (u - np.roll(u, (int(oy[k]), int(ox[k])), axis=(0, 1)))
    return out


def _axes(u):
    return (1,) if u.shape[0] == 1 else (0, 1)


def face_mobility(u, mu):
    """Upwind (donor-cell) mobility on the '+' face of every cell, per axis."""
    out = []
    for axis in (0, 1):
        if axis == 0 and u.shape[0] == 1:
            out.append(np.zeros_like(u))
            continue
        dmu = np.roll(mu, -1, axis=axis) - mu
        out.append(np.where(dmu > 0, np.roll(u, -1, axis=axis), u))
    return out[0], out[1]


def divergence_with_mobility(my, mx, mu, h):
    div = np.zeros_like(mu)
    for axis, m in ((1, mx), (0, my)):
        if axis == 0 and mu.shape[0] == 1:
            continue
        flux = m * (np.roll(mu, -1, axis=axis) - mu) / h
        div += (flux - np.roll(flux, 1, axis=axis)) / h
    return div


def flux_divergence(u, mu, h):
    my, mx = face_mobility(u, mu)
    return divergence_with_mobility(my, mx, mu, h)


def upwind_dissipation(u, mu, h):
    """Sum over faces of M * (dmu/h)**2 (no cell-volume factor)."""
    my, mx = face_mobility(u, mu)
    total = 0.0
    for axis, m in ((1, mx), (0, my)):
        if axis == 0 and u.shape[0] == 1:
            continue
        g = (np.roll(mu, -1, axis=axis) - mu) / h
        total += float(np.sum(m * g * g))
    return total


def laplacian(u, h):
    out = np.zeros_like(u)
    for axis in _axes(u):
        out += np.roll(u, -1, axis=axis) + np.roll(u, 1, axis=axis) - 2.0 * u
    return out / (h * h)


def _gradient_energy(u, h):
    total = 0.0
    for axis in _axes(u):
        g = (np.roll(u, -1, axis=axis) - u) / h
        total += float(np.sum(g * g))
    return total


def _entropy_sum(u, c):
    x = u / c
    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return float(np.sum(xlogx - x + 1.0))


def _cg(my, mx, b, h, coef, tol, maxiter):
    """Solve (I - coef * div(M grad .)) x = b by plain conjugate gradients.

    Starting from x = b keeps sum(r) = 0, so the iterates conserve sum(b).
    """
    def apply(v):
        return v - coef * divergence_with_mobility(my, mx, v, h)

    x = b.copy()
    r = b - apply(x)
    p = r.copy()
    rs = float(np.sum(r * r))
    target = tol * math.sqrt(float(np.sum(b * b)))
    it = 0
    while math.sqrt(rs) > target:
        if it >= maxiter:
            return x, it, False
        ap = apply(p)
        alpha = rs / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    return x, it, True


def advance(u, oy, ox, w, h, eps, gamma, p_h, growth, local, kappa, semi,
            cfl, dt_max, t, t_stop, neg_tol, lin_tol, monitor,
            prev_energy, prev_entropy, max_steps):
    """Integrate from ``t`` to ``t_stop`` with adaptively chosen steps.

    Returns ``(u, u_prev, t, stats)``; on abort ``stats['status']`` is
    nonzero and ``u`` is the last valid state.
    """
    u = np.array(u, dtype=np.float64, copy=True)
    ny, nx = u.shape
    dim = 1 if ny == 1 else 2
    vol = h ** dim
    eps2 = eps * eps
    c_hom = p_h ** (1.0 / gamma)
    stats = dict(status=STATUS_OK, err_index=-1, err_value=0.0, steps=0,
                 clipped=0, rejected=0, dt_last=0.0, dt_min=math.inf, dt_max_used=0.0,
                 max_diffusivity=0.0, cg_iters_max=0, cg_iters_total=0,
                 max_energy_increase=-math.inf, max_entropy_increase=-math.inf,
                 max_mean=-math.inf, energy_last=prev_energy,
                 entropy_last=prev_entropy)
    u_prev = u.copy()
    factor = 1.0
    e_prev, s_prev = prev_energy, prev_entropy
    while t < t_stop and stats["steps"] < max_steps:
        umax = float(u.max())
        pmax = umax ** gamma
        diff = gamma * pmax
        if local:
            diff += 4.0 * dim * kappa * umax / (h * h)
        elif not semi:
            diff += umax / eps2
        stats["max_diffusivity"] = max(stats["max_diffusivity"], diff)
        dt = dt_max if diff <= 0.0 else min(dt_max, cfl * h * h / (2.0 * dim * diff))
        dt *= factor
        last = t + dt >= t_stop
        if last:
            dt = t_stop - t

        p = u ** gamma
        if local:
            conv = None
            mu = p - kappa * laplacian(u, h)
        else:
            conv = convolve(u, oy, ox, w)
            mu = p + (u - conv) / eps2
        src = u * (p_h - p) if growth else np.zeros_like(u)

        if monitor:
            if local:
                energy = vol * (0.5 * kappa * _gradient_energy(u, h)
                                + float(np.sum(u * p)) / (gamma + 1.0))
            else:
                energy = vol * float(np.sum(u * (u - conv) / (2.0 * eps2)
                                            + u * p / (gamma + 1.0)))
            entropy = vol * _entropy_sum(u, c_hom)
            mean = float(np.sum(u)) / (nx * ny)
            stats["max_mean"] = max(stats["max_mean"], mean)
            if not math.isnan(e_prev):
                stats["max_energy_increase"] = max(stats["max_energy_increase"], energy - e_prev)
                stats["max_entropy_increase"] = max(stats["max_entropy_increase"], entropy - s_prev)
            e_prev, s_prev = energy, entropy

        if semi:
            my, mx = face_mobility(u, mu)
            b = u + dt * (divergence_with_mobility(my, mx, p - conv / eps2, h) + src)
            new, its, ok = _cg(my, mx, b, h, dt / eps2, lin_tol, 10 * nx * ny)
            stats["cg_iters_max"] = max(stats["cg_iters_max"], its)
            stats["cg_iters_total"] += its
            if not ok:
                stats["status"] = STATUS_CG
                stats["err_value"] = float(its)
                break
        else:
            new = u + dt * (flux_divergence(u, mu, h) + src)

        if not np.all(np.isfinite(new)):
            stats["status"] = STATUS_NAN
            stats["err_index"] = int(np.flatnonzero(~np.isfinite(new))[0])
            break
        neg = new < 0.0
        if neg.any():
            bad = new <= -neg_tol
            if bad.any() and semi and factor > MIN_FACTOR:
                # reject: retry from the same state with half the step
                factor *= 0.5
                stats["rejected"] += 1
                continue
            if bad.any():
                idx = int(np.argmin(new))
                stats["status"] = STATUS_NEGATIVE
                stats["err_index"] = idx
                stats["err_value"] = float(new.flat[idx])
                break
            stats["clipped"] += int(neg.sum())
            new[neg] = 0.0

        factor = min(1.0, factor * GROW)
        u_prev = u
        u = new
        t = t_stop if last else t + dt
        stats["steps"] += 1
        stats["dt_last"] = dt
        stats["dt_min"] = min(stats["dt_min"], dt)
        stats["dt_max_used"] = max(stats["dt_max_used"], dt)

    if monitor and stats["status"] == STATUS_OK:
        p = u ** gamma
        if local:
            energy = vol * (0.5 * kappa * _gradient_energy(u, h)
                            + float(np.sum(u * p)) / (gamma + 1.0))
        else:
            conv = convolve(u, oy, ox, w)
            energy = vol * float(np.sum(u * (u - conv) / (2.0 * eps2)
                                        + u * p / (gamma + 1.0)))
        entropy = vol * _entropy_sum(u, c_hom)
        stats["max_mean"] = max(stats["max_mean"], float(np.sum(u)) / (nx * ny))
        if not math.isnan(e_prev):
            stats["max_energy_increase"] = max(stats["max_energy_increase"], energy - e_prev)
            stats["max_entropy_increase"] = max(stats["max_entropy_increase"], entropy - s_prev)
        stats["energy_last"] = energy
        stats["entropy_last"] = entropy
    return u, u_prev, t, stats
