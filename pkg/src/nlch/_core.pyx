# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirrors ``nlch._fallback`` call for call.

Fields are C-contiguous float64 arrays of shape (ny, nx); ny == 1 is a
one-dimensional grid and skips every y-direction loop.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, log, sqrt, isfinite, INFINITY, NAN, isnan

cnp.import_array()

cdef enum:
    STATUS_OK = 0
    STATUS_NEGATIVE = 1
    STATUS_NAN = 2
    STATUS_CG = 3

# semi-implicit step rejection: halve on negativity, regrow geometrically
cdef double MIN_FACTOR = 1e-6
cdef double GROW = 1.05


cdef inline double _ipow(double x, long n) noexcept nogil:
    cdef double r = 1.0
    while n > 0:
        if n & 1:
            r *= x
        x *= x
        n >>= 1
    return r


cdef inline double _power(double x, double g, long gi) noexcept nogil:
    if gi > 0:
        return _ipow(x, gi)
    return pow(x, g)


cdef void _conv(double[:, ::1] u, long[::1] oy, long[::1] ox, double[::1] w,
                double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], nk = w.shape[0]
    cdef Py_ssize_t k, j, i, jj, sx
    cdef double wk
    for j in range(ny):
        for i in range(nx):
            out[j, i] = 0.0
    for k in range(nk):
        wk = w[k]
        sx = ox[k] % nx
        if sx < 0:
            sx += nx
        for j in range(ny):
            jj = (j - oy[k]) % ny
            if jj < 0:
                jj += ny
            for i in range(sx):
                out[j, i] += wk * u[jj, i - sx + nx]
            for i in range(sx, nx):
                out[j, i] += wk * u[jj, i - sx]


cdef void _diff(double[:, ::1] u, long[::1] oy, long[::1] ox, double[::1] w,
                double[:, ::1] out) noexcept nogil:
    """out = sum_k w[k] (u(x) - u(x - y_k)); exactly zero on constants."""
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], nk = w.shape[0]
    cdef Py_ssize_t k, j, i, jj, sx
    cdef double wk
    for j in range(ny):
        for i in range(nx):
            out[j, i] = 0.0
    for k in range(nk):
        wk = w[k]
        sx = ox[k] % nx
        if sx < 0:
            sx += nx
        for j in range(ny):
            jj = (j - oy[k]) % ny
            if jj < 0:
                jj += ny
            for i in range(sx):
                out[j, i] += wk * (u[j, i] - u[jj, i - sx + nx])
            for i in range(sx, nx):
                out[j, i] += wk * (u[j, i] - u[jj, i - sx])


cdef void _mobility(double[:, ::1] u, double[:, ::1] mu,
                    double[:, ::1] my, double[:, ::1] mx) noexcept nogil:
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], j, i, ip, jp
    for j in range(ny):
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            mx[j, i] = u[j, ip] if mu[j, ip] - mu[j, i] > 0 else u[j, i]
    if ny == 1:
        for i in range(nx):
            my[0, i] = 0.0
        return
    for j in range(ny):
        jp = j + 1 if j + 1 < ny else 0
        for i in range(nx):
            my[j, i] = u[jp, i] if mu[jp, i] - mu[j, i] > 0 else u[j, i]


cdef void _div_mob(double[:, ::1] my, double[:, ::1] mx, double[:, ::1] v,
                   double h, double[:, ::1] fx, double[:, ::1] fy,
                   double[:, ::1] out) noexcept nogil:
    """out = div(M grad v) with face fluxes formed first (deterministic)."""
    cdef Py_ssize_t ny = v.shape[0], nx = v.shape[1], j, i, ip, im, jp, jm
    for j in range(ny):
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            fx[j, i] = mx[j, i] * (v[j, ip] - v[j, i]) / h
    if ny > 1:
        for j in range(ny):
            jp = j + 1 if j + 1 < ny else 0
            for i in range(nx):
                fy[j, i] = my[j, i] * (v[jp, i] - v[j, i]) / h
    for j in range(ny):
        jm = j - 1 if j > 0 else ny - 1
        for i in range(nx):
            im = i - 1 if i > 0 else nx - 1
            out[j, i] = 0.0 + (fx[j, i] - fx[j, im]) / h
            if ny > 1:
                out[j, i] += (fy[j, i] - fy[jm, i]) / h


cdef void _lap(double[:, ::1] u, double h, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], j, i, ip, im, jp, jm
    cdef double h2 = h * h, s
    for j in range(ny):
        jp = j + 1 if j + 1 < ny else 0
        jm = j - 1 if j > 0 else ny - 1
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            im = i - 1 if i > 0 else nx - 1
            s = 0.0 + (u[j, ip] + u[j, im] - 2.0 * u[j, i])
            if ny > 1:
                s = s + (u[jp, i] + u[jm, i] - 2.0 * u[j, i])
            out[j, i] = s / h2


cdef double _grad_energy(double[:, ::1] u, double h) noexcept nogil:
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], j, i, ip, jp
    cdef double total = 0.0, g
    for j in range(ny):
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            g = (u[j, ip] - u[j, i]) / h
            total += g * g
    if ny > 1:
        for j in range(ny):
            jp = j + 1 if j + 1 < ny else 0
            for i in range(nx):
                g = (u[jp, i] - u[j, i]) / h
                total += g * g
    return total


cdef double _dot(double[:, ::1] a, double[:, ::1] b) noexcept nogil:
    cdef Py_ssize_t ny = a.shape[0], nx = a.shape[1], j, i
    cdef double s = 0.0
    for j in range(ny):
        for i in range(nx):
            s += a[j, i] * b[j, i]
    return s


def convolve(cnp.ndarray u, cnp.ndarray oy, cnp.ndarray ox, cnp.ndarray w):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty((uv.shape[0], uv.shape[1]), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef long[::1] oyv = np.ascontiguousarray(oy, dtype=np.int_)
    cdef long[::1] oxv = np.ascontiguousarray(ox, dtype=np.int_)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    with nogil:
        _conv(uv, oyv, oxv, wv, ov)
    return out


def nonlocal_difference(cnp.ndarray u, cnp.ndarray oy, cnp.ndarray ox, cnp.ndarray w):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty((uv.shape[0], uv.shape[1]), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef long[::1] oyv = np.ascontiguousarray(oy, dtype=np.int_)
    cdef long[::1] oxv = np.ascontiguousarray(ox, dtype=np.int_)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    with nogil:
        _diff(uv, oyv, oxv, wv, ov)
    return out


def flux_divergence(cnp.ndarray u, cnp.ndarray mu, double h):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    shape = (uv.shape[0], uv.shape[1])
    out = np.empty(shape)
    cdef double[:, ::1] my = np.empty(shape), mx = np.empty(shape)
    cdef double[:, ::1] fx = np.empty(shape), fy = np.empty(shape), ov = out
    with nogil:
        _mobility(uv, mv, my, mx)
        _div_mob(my, mx, mv, h, fx, fy, ov)
    return out


def upwind_dissipation(cnp.ndarray u, cnp.ndarray mu, double h):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    shape = (uv.shape[0], uv.shape[1])
    cdef double[:, ::1] my = np.empty(shape), mx = np.empty(shape)
    cdef Py_ssize_t ny = uv.shape[0], nx = uv.shape[1], j, i, ip, jp
    cdef double total = 0.0, g
    _mobility(uv, mv, my, mx)
    for j in range(ny):
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            g = (mv[j, ip] - mv[j, i]) / h
            total += mx[j, i] * g * g
    if ny > 1:
        for j in range(ny):
            jp = j + 1 if j + 1 < ny else 0
            for i in range(nx):
                g = (mv[jp, i] - mv[j, i]) / h
                total += my[j, i] * g * g
    return total


def laplacian(cnp.ndarray u, double h):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty((uv.shape[0], uv.shape[1]))
    cdef double[:, ::1] ov = out
    _lap(uv, h, ov)
    return out


cdef int _cg(double[:, ::1] my, double[:, ::1] mx, double[:, ::1] b,
             double h, double coef, double tol, long maxiter,
             double[:, ::1] x, double[:, ::1] r, double[:, ::1] p,
             double[:, ::1] ap, double[:, ::1] fx, double[:, ::1] fy,
             long* iters) noexcept nogil:
    """Plain CG for (I - coef div(M grad .)) x = b, started at x = b."""
    cdef Py_ssize_t ny = b.shape[0], nx = b.shape[1], j, i
    cdef double rs, rs_new, alpha, beta, target
    cdef long it = 0
    for j in range(ny):
        for i in range(nx):
            x[j, i] = b[j, i]
    _div_mob(my, mx, x, h, fx, fy, ap)
    for j in range(ny):
        for i in range(nx):
            r[j, i] = b[j, i] - (x[j, i] - coef * ap[j, i])
            p[j, i] = r[j, i]
    rs = _dot(r, r)
    target = tol * sqrt(_dot(b, b))
    while sqrt(rs) > target:
        if it >= maxiter:
            iters[0] = it
            return 0
        _div_mob(my, mx, p, h, fx, fy, ap)
        for j in range(ny):
            for i in range(nx):
                ap[j, i] = p[j, i] - coef * ap[j, i]
        alpha = rs / _dot(p, ap)
        for j in range(ny):
            for i in range(nx):
                x[j, i] += alpha * p[j, i]
                r[j, i] -= alpha * ap[j, i]
        rs_new = _dot(r, r)
        beta = rs_new / rs
        for j in range(ny):
            for i in range(nx):
                p[j, i] = r[j, i] + beta * p[j, i]
        rs = rs_new
        it += 1
    iters[0] = it
    return 1


def advance(cnp.ndarray u_in, cnp.ndarray oy, cnp.ndarray ox, cnp.ndarray w,
            double h, double eps, double gamma, double p_h, bint growth,
            bint local, double kappa, bint semi, double cfl, double dt_max,
            double t, double t_stop, double neg_tol, double lin_tol,
            bint monitor, double prev_energy, double prev_entropy,
            long max_steps):
    """Integrate from ``t`` to ``t_stop``; see ``nlch._fallback.advance``."""
    u_arr = np.array(u_in, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t ny = u_arr.shape[0], nx = u_arr.shape[1], j, i
    shape = (ny, nx)
    prev_arr = u_arr.copy()
    new_arr = np.empty(shape)
    cdef double[:, ::1] u = u_arr, u_prev = prev_arr, new = new_arr
    cdef double[:, ::1] p = np.empty(shape), conv = np.empty(shape)
    cdef double[:, ::1] mu = np.empty(shape), src = np.empty(shape)
    cdef double[:, ::1] div = np.empty(shape), lap = np.empty(shape)
    cdef double[:, ::1] my = np.empty(shape), mx = np.empty(shape)
    cdef double[:, ::1] fx = np.empty(shape), fy = np.empty(shape)
    cdef double[:, ::1] rest = np.empty(shape), b = np.empty(shape)
    cdef double[:, ::1] cr = np.empty(shape), cp = np.empty(shape), cap = np.empty(shape)
    cdef double[:, ::1] tmp
    cdef long[::1] oyv = np.ascontiguousarray(oy, dtype=np.int_)
    cdef long[::1] oxv = np.ascontiguousarray(ox, dtype=np.int_)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)

    cdef int dim = 1 if ny == 1 else 2
    cdef double vol = h if dim == 1 else h * h
    cdef double eps2 = eps * eps
    cdef double c_hom = pow(p_h, 1.0 / gamma)
    cdef long gi = <long>gamma if (gamma == <double>(<long>gamma) and gamma <= 256) else 0
    cdef double umax, diff, dt, x, energy = 0.0, entropy = 0.0, mean, s_e, s_s
    cdef double e_prev = prev_energy, s_prev = prev_entropy
    cdef long steps = 0, clipped = 0, its = 0, cg_max = 0, cg_total = 0
    cdef int status = STATUS_OK, ok
    cdef bint last = False
    cdef double factor = 1.0
    cdef long rejected = 0, nclip = 0
    cdef long err_index = -1
    cdef double err_value = 0.0
    cdef double dt_last = 0.0, dt_min = INFINITY, dt_maxu = 0.0, dmax = 0.0
    cdef double max_de = -INFINITY, max_ds = -INFINITY, max_mean = -INFINITY
    cdef long maxiter = 10 * ny * nx

    with nogil:
        while t < t_stop and steps < max_steps:
            umax = u[0, 0]
            for j in range(ny):
                for i in range(nx):
                    if u[j, i] > umax:
                        umax = u[j, i]
            diff = gamma * _power(umax, gamma, gi)
            if local:
                diff = diff + 4.0 * dim * kappa * umax / (h * h)
            elif not semi:
                diff = diff + umax / eps2
            if diff > dmax:
                dmax = diff
            if diff <= 0.0:
                dt = dt_max
            else:
                dt = cfl * h * h / (2.0 * dim * diff)
                if dt > dt_max:
                    dt = dt_max
            dt = dt * factor
            last = t + dt >= t_stop
            if last:
                dt = t_stop - t

            for j in range(ny):
                for i in range(nx):
                    p[j, i] = _power(u[j, i], gamma, gi)
            if local:
                _lap(u, h, lap)
                for j in range(ny):
                    for i in range(nx):
                        mu[j, i] = p[j, i] - kappa * lap[j, i]
            else:
                _conv(u, oyv, oxv, wv, conv)
                for j in range(ny):
                    for i in range(nx):
                        mu[j, i] = p[j, i] + (u[j, i] - conv[j, i]) / eps2
            for j in range(ny):
                for i in range(nx):
                    src[j, i] = u[j, i] * (p_h - p[j, i]) if growth else 0.0

            if monitor:
                s_e = 0.0
                s_s = 0.0
                mean = 0.0
                for j in range(ny):
                    for i in range(nx):
                        if not local:
                            s_e += u[j, i] * (u[j, i] - conv[j, i]) / (2.0 * eps2) + u[j, i] * p[j, i] / (gamma + 1.0)
                        x = u[j, i] / c_hom
                        s_s += (x * log(x) if x > 0 else 0.0) - x + 1.0
                        mean += u[j, i]
                if local:
                    s_e = 0.0
                    for j in range(ny):
                        for i in range(nx):
                            s_e += u[j, i] * p[j, i]
                    s_e = 0.5 * kappa * _grad_energy(u, h) + s_e / (gamma + 1.0)
                energy = vol * s_e
                entropy = vol * s_s
                mean = mean / (nx * ny)
                if mean > max_mean:
                    max_mean = mean
                if not isnan(e_prev):
                    if energy - e_prev > max_de:
                        max_de = energy - e_prev
                    if entropy - s_prev > max_ds:
                        max_ds = entropy - s_prev
                e_prev = energy
                s_prev = entropy

            if semi:
                _mobility(u, mu, my, mx)
                for j in range(ny):
                    for i in range(nx):
                        rest[j, i] = p[j, i] - conv[j, i] / eps2
                _div_mob(my, mx, rest, h, fx, fy, div)
                for j in range(ny):
                    for i in range(nx):
                        b[j, i] = u[j, i] + dt * (div[j, i] + src[j, i])
                ok = _cg(my, mx, b, h, dt / eps2, lin_tol, maxiter,
                         new, cr, cp, cap, fx, fy, &its)
                if its > cg_max:
                    cg_max = its
                cg_total += its
                if not ok:
                    status = STATUS_CG
                    err_value = its
                    break
            else:
                _mobility(u, mu, my, mx)
                _div_mob(my, mx, mu, h, fx, fy, div)
                for j in range(ny):
                    for i in range(nx):
                        new[j, i] = u[j, i] + dt * (div[j, i] + src[j, i])

            nclip = 0
            for j in range(ny):
                for i in range(nx):
                    x = new[j, i]
                    if not isfinite(x):
                        status = STATUS_NAN
                        err_index = j * nx + i
                        break
                    if x < 0.0:
                        if x <= -neg_tol:
                            if status != STATUS_NEGATIVE or x < err_value:
                                status = STATUS_NEGATIVE
                                err_index = j * nx + i
                                err_value = x
                        else:
                            new[j, i] = 0.0
                            nclip += 1
                if status == STATUS_NAN:
                    break
            if status == STATUS_NEGATIVE and semi and factor > MIN_FACTOR:
                # reject: retry from the same state with half the step
                status = STATUS_OK
                err_index = -1
                err_value = 0.0
                factor *= 0.5
                rejected += 1
                continue
            if status != STATUS_OK:
                break
            clipped += nclip
            if factor < 1.0:
                factor = factor * GROW if factor * GROW < 1.0 else 1.0

            tmp = u_prev
            u_prev = u
            u = new
            new = tmp
            if last:
                t = t_stop
            else:
                t = t + dt
            steps += 1
            dt_last = dt
            if dt < dt_min:
                dt_min = dt
            if dt > dt_maxu:
                dt_maxu = dt

        if monitor and status == STATUS_OK:
            for j in range(ny):
                for i in range(nx):
                    p[j, i] = _power(u[j, i], gamma, gi)
            s_e = 0.0
            s_s = 0.0
            mean = 0.0
            if not local:
                _conv(u, oyv, oxv, wv, conv)
            for j in range(ny):
                for i in range(nx):
                    if local:
                        s_e += u[j, i] * p[j, i]
                    else:
                        s_e += u[j, i] * (u[j, i] - conv[j, i]) / (2.0 * eps2) + u[j, i] * p[j, i] / (gamma + 1.0)
                    x = u[j, i] / c_hom
                    s_s += (x * log(x) if x > 0 else 0.0) - x + 1.0
                    mean += u[j, i]
            if local:
                s_e = 0.5 * kappa * _grad_energy(u, h) + s_e / (gamma + 1.0)
            energy = vol * s_e
            entropy = vol * s_s
            mean = mean / (nx * ny)
            if mean > max_mean:
                max_mean = mean
            if not isnan(e_prev):
                if energy - e_prev > max_de:
                    max_de = energy - e_prev
                if entropy - s_prev > max_ds:
                    max_ds = entropy - s_prev

    stats = dict(status=status, err_index=err_index, err_value=err_value,
                 steps=steps, clipped=clipped, rejected=rejected, dt_last=dt_last, dt_min=dt_min,
                 dt_max_used=dt_maxu, max_diffusivity=dmax, cg_iters_max=cg_max,
                 cg_iters_total=cg_total, max_energy_increase=max_de,
                 max_entropy_increase=max_ds, max_mean=max_mean,
                 energy_last=energy if (monitor and status == STATUS_OK) else prev_energy,
                 entropy_last=entropy if (monitor and status == STATUS_OK) else prev_entropy)
    return np.asarray(u).copy(), np.asarray(u_prev).copy(), t, stats
