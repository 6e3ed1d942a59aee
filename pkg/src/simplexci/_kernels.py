"""Low-level numerical kernels (numba-compiled when available).

Everything here works on raw float64 arrays. The public API wraps these in
the typed interfaces of :mod:`simplexci.interval_engine`.

Key objects:

* exponential tilting of a distribution to a prescribed mean, and the induced
  rate function  rate(q; w, m) = sup_t [t*m - log E_q exp(t*w)], which equals
  min{KL(p, q) : sum_j w_j p_j = m} by convex duality,
* exact maximization of a linear objective over a Sanov KL-ball and over the
  box polytope region,
* interior-point (log-barrier Newton) solves of the bi-level feasibility
  program: minimize rate(q; w, F0) subject to q on the simplex slice
  {sum q = 1, w.q = u} and a base-region constraint on q.

The barrier iterations work with the scaled objective G + (1/tau)*barrier so
that function values stay O(1) and Newton decrements remain meaningful in
float64 even at the final barrier weight.
"""

from __future__ import annotations

import os

import numpy as np

_T_CAP = 690.0  # |t| cap; log-sum-exp shifts keep exp() finite below this

# status codes shared by the probe kernels
OK = 0
INFEASIBLE = 1
BOUNDARY = 2
NO_CONVERGENCE = 3


def _identity_jit(func):
    return func


if os.environ.get("SIMPLEXCI_NO_NUMBA"):
    njit = None
else:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None

if njit is None:  # pragma: no cover
    _jit = _identity_jit
else:
    def _jit(func):
        # IEEE division semantics: 1/0 -> inf, handled by the finite guards
        return njit(cache=True, error_model="numpy")(func)


@_jit
def tilt_stats(q, w, t):
    """(logZ, mean, var) of the t-tilted version of q along weights w.

    Log-sum-exp over log(q_i) + t*w_i, so extreme tilts of near-degenerate
    q cannot underflow (the shifted sum is always >= 1).
    """
    k = q.shape[0]
    hi = -np.inf
    for i in range(k):
        if q[i] > 0.0:
            v = np.log(q[i]) + t * w[i]
            if v > hi:
                hi = v
    if not np.isfinite(hi):
        return -np.inf, 0.0, 0.0
    Z = 0.0
    E = 0.0
    E2 = 0.0
    for i in range(k):
        if q[i] > 0.0:
            e = np.exp(np.log(q[i]) + t * w[i] - hi)
            Z += e
            E += e * w[i]
            E2 += e * w[i] * w[i]
    m = E / Z
    v = E2 / Z - m * m
    if v < 0.0:
        v = 0.0
    return hi + np.log(Z), m, v


@_jit
def tilt_solve(q, w, target, t0):
    """Solve mean(t) = target for the tilt parameter t.

    Returns (t, ok). ok=False when the target is outside the reachable range
    at |t| = T_CAP (caller treats it as a boundary case).
    """
    lo = -_T_CAP
    hi = _T_CAP
    _, mlo, _ = tilt_stats(q, w, lo)
    if target <= mlo:
        return lo, False
    _, mhi, _ = tilt_stats(q, w, hi)
    if target >= mhi:
        return hi, False
    t = t0
    if not (lo < t < hi):
        t = 0.0
    for _ in range(200):
        _, m, v = tilt_stats(q, w, t)
        err = m - target
        if err > 0.0:
            hi = t
        else:
            lo = t
        if abs(err) < 1e-14:
            return t, True
        if v > 1e-18:
            tn = t - err / v
        else:
            tn = 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        if abs(tn - t) < 1e-15 * (1.0 + abs(t)):
            return tn, True
        t = tn
    return t, True


@_jit
def rate_value(q, w, m, t0):
    """rate(q; w, m) = min{KL(p, q) : w.p = m} and the optimal tilt t.

    Boundary targets (m at the extreme weights) use the closed form
    -log(mass of the extreme weight class under q); unreachable targets
    return +inf.
    """
    k = q.shape[0]
    wmin = w[0]
    wmax = w[k - 1]
    if m < wmin - 1e-12 or m > wmax + 1e-12:
        return np.inf, 0.0
    if m <= wmin + 1e-13:
        s = 0.0
        for i in range(k):
            if w[i] <= wmin + 1e-13:
                s += q[i]
        if s <= 0.0:
            return np.inf, -_T_CAP
        return -np.log(s), -_T_CAP
    if m >= wmax - 1e-13:
        s = 0.0
        for i in range(k):
            if w[i] >= wmax - 1e-13:
                s += q[i]
        if s <= 0.0:
            return np.inf, _T_CAP
        return -np.log(s), _T_CAP
    t, ok = tilt_solve(q, w, m, t0)
    if not ok:
        # capped tilt: fall back to the extreme-class mass, which is the
        # t -> +-inf limit of the dual objective
        s = 0.0
        target_w = wmax if t > 0.0 else wmin
        for i in range(k):
            if abs(w[i] - target_w) <= 1e-13:
                s += q[i]
        if s <= 0.0:
            logZ, _, _ = tilt_stats(q, w, t)
            return t * m - logZ, t
        return -np.log(s), t
    logZ, _, _ = tilt_stats(q, w, t)
    val = t * m - logZ
    if val < 0.0:
        val = 0.0
    return val, t


@_jit
def rate_grad_hess(q, w, m, t0, grad, hess):
    """Value, gradient and Hessian of q -> rate(q; w, m). Fills grad/hess."""
    k = q.shape[0]
    val, t = rate_value(q, w, m, t0)
    if not np.isfinite(val):
        return val, t
    if t <= -_T_CAP + 1.0 or t >= _T_CAP - 1.0:
        # boundary branch: rate = -log(beta . q) for the extreme weight class
        target_w = w[k - 1] if t > 0.0 else w[0]
        s = 0.0
        for i in range(k):
            if abs(w[i] - target_w) <= 1e-13:
                s += q[i]
        for i in range(k):
            bi = 1.0 if abs(w[i] - target_w) <= 1e-13 else 0.0
            grad[i] = -bi / s
        for i in range(k):
            for j in range(k):
                hess[i, j] = grad[i] * grad[j]
        return val, t
    logZ, _, var = tilt_stats(q, w, t)
    if var < 1e-300:
        var = 1e-300
    for i in range(k):
        grad[i] = -np.exp(t * w[i] - logZ)
    for i in range(k):
        for j in range(k):
            hess[i, j] = grad[i] * grad[j] * (1.0 + (w[i] - m) * (w[j] - m) / var)
    return val, t


@_jit
def kl_vec(p, q):
    """KL(p, q) for raw vectors; +inf when p puts mass where q has none."""
    out = 0.0
    for i in range(p.shape[0]):
        if p[i] > 0.0:
            if q[i] <= 0.0:
                return np.inf
            out += p[i] * np.log(p[i] / q[i])
    return out


@_jit
def tilt_to_mean(q, w, target, out):
    """Fill out with the tilt of q whose mean is target; returns the tilt t."""
    k = q.shape[0]
    t, ok = tilt_solve(q, w, target, 0.0)
    logZ, _, _ = tilt_stats(q, w, t)
    for i in range(k):
        out[i] = q[i] * np.exp(t * w[i] - logZ)
    s = 0.0
    for i in range(k):
        s += out[i]
    for i in range(k):
        out[i] /= s
    return t


# ---------------------------------------------------------------------------
# linear optimization over the base regions
# ---------------------------------------------------------------------------


@_jit
def _sanov_inner_kl(p_s, c_s, cmax, g):
    """KL radius and harmonic sum along the KKT curve at gap g = lam - max c."""
    ks = p_s.shape[0]
    M = 0.0
    acc = 0.0
    for i in range(ks):
        d = g + (cmax - c_s[i])
        M += p_s[i] / d
        acc += p_s[i] * np.log(d)
    return acc + np.log(M), M


@_jit
def _sanov_inner_max(p_s, c_s, zeta):
    """max{c.q : KL(p_s, q) <= zeta, q in simplex(S)} for full-support p_s.

    Parametrizes the KKT curve q_i = mu*p_i/(lam - c_i), lam > max c_s, on
    which the KL radius is monotone decreasing from +inf to 0.
    """
    ks = p_s.shape[0]
    cmax = c_s[0]
    for i in range(ks):
        if c_s[i] > cmax:
            cmax = c_s[i]
    base = 0.0
    for i in range(ks):
        base += p_s[i] * c_s[i]
    if zeta <= 1e-15:
        return base
    mass_off = 0.0
    for i in range(ks):
        if c_s[i] < cmax - 1e-15:
            mass_off += p_s[i]
    if mass_off <= 0.0:
        # all mass already on the argmax class
        return cmax

    g_hi = 1.0
    klv, M = _sanov_inner_kl(p_s, c_s, cmax, g_hi)
    it = 0
    while klv > zeta and it < 200:
        g_hi *= 4.0
        klv, M = _sanov_inner_kl(p_s, c_s, cmax, g_hi)
        it += 1
    if klv > zeta:
        return base
    g_lo = g_hi
    klv, M = _sanov_inner_kl(p_s, c_s, cmax, g_lo)
    it = 0
    while klv < zeta and it < 4000:
        g_lo *= 0.125
        if g_lo < 1e-300:
            lam = cmax + g_lo
            return lam - 1.0 / M
        klv, M = _sanov_inner_kl(p_s, c_s, cmax, g_lo)
        it += 1
    # bisect on log-gap: KL decreasing in g
    for _ in range(200):
        g = np.sqrt(g_lo * g_hi)
        klv, M = _sanov_inner_kl(p_s, c_s, cmax, g)
        if klv > zeta:
            g_lo = g
        else:
            g_hi = g
        if g_hi - g_lo < 1e-15 * g_hi:
            break
    g = np.sqrt(g_lo * g_hi)
    klv, M = _sanov_inner_kl(p_s, c_s, cmax, g)
    lam = cmax + g
    return lam - 1.0 / M


@_jit
def sanov_linmax(p, c, z):
    """max{c.q : KL(p, q) <= z, q in the closed simplex}.

    Mass m placed outside supp(p) only costs the renormalization -log(1-m)
    in KL, and goes to the off-support argmax of c; the value is concave in m
    (simplex slices of a convex set), solved by golden section.
    """
    k = p.shape[0]
    ns = 0
    for i in range(k):
        if p[i] > 0.0:
            ns += 1
    p_s = np.empty(ns)
    c_s = np.empty(ns)
    j = 0
    c_out = -np.inf
    for i in range(k):
        if p[i] > 0.0:
            p_s[j] = p[i]
            c_s[j] = c[i]
            j += 1
        else:
            if c[i] > c_out:
                c_out = c[i]
    if z <= 1e-15 or ns == k or not np.isfinite(c_out):
        return _sanov_inner_max(p_s, c_s, z)

    m_hi = 1.0 - np.exp(-z)
    lo = 0.0
    hi = m_hi
    gr = 0.6180339887498949
    x1 = hi - gr * (hi - lo)
    x2 = lo + gr * (hi - lo)
    zeta1 = z + np.log(1.0 - x1)
    zeta2 = z + np.log(1.0 - x2)
    f1 = x1 * c_out + (1.0 - x1) * _sanov_inner_max(p_s, c_s, max(zeta1, 0.0))
    f2 = x2 * c_out + (1.0 - x2) * _sanov_inner_max(p_s, c_s, max(zeta2, 0.0))
    for _ in range(140):
        if hi - lo < 1e-13:
            break
        if f1 < f2:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + gr * (hi - lo)
            zeta2 = z + np.log(1.0 - x2)
            f2 = x2 * c_out + (1.0 - x2) * _sanov_inner_max(p_s, c_s, max(zeta2, 0.0))
        else:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - gr * (hi - lo)
            zeta1 = z + np.log(1.0 - x1)
            f1 = x1 * c_out + (1.0 - x1) * _sanov_inner_max(p_s, c_s, max(zeta1, 0.0))
    m = 0.5 * (lo + hi)
    zet = z + np.log(1.0 - m)
    best = m * c_out + (1.0 - m) * _sanov_inner_max(p_s, c_s, max(zet, 0.0))
    v0 = _sanov_inner_max(p_s, c_s, z)
    if v0 > best:
        best = v0
    vh = m_hi * c_out + (1.0 - m_hi) * _sanov_inner_max(p_s, c_s, 0.0)
    if vh > best:
        best = vh
    return best


@_jit
def box_linargmax(a, b, c, q):
    """Fill q with the argmax of {c.q : a <= q <= b, sum q = 1}; returns c.q.

    Assumes sum a <= 1 <= sum b. Greedy fill in decreasing c.
    """
    k = a.shape[0]
    rem = 1.0
    for i in range(k):
        q[i] = a[i]
        rem -= a[i]
    order = np.argsort(c)
    for idx in range(k - 1, -1, -1):
        if rem <= 0.0:
            break
        i = order[idx]
        room = b[i] - a[i]
        add = room if room < rem else rem
        q[i] += add
        rem -= add
    out = 0.0
    for i in range(k):
        out += c[i] * q[i]
    return out


@_jit
def box_linmax(a, b, c):
    q = np.empty(a.shape[0])
    return box_linargmax(a, b, c, q)


# ---------------------------------------------------------------------------
# barrier-Newton feasibility probes
# ---------------------------------------------------------------------------


@_jit
def _kkt_step(H, A, g, k):
    """Solve the equality-constrained Newton system; returns dq (A dq = 0)."""
    n = k + 2
    M = np.zeros((n, n))
    rhs = np.zeros(n)
    for i in range(k):
        for j in range(k):
            M[i, j] = H[i, j]
        M[i, k] = A[0, i]
        M[i, k + 1] = A[1, i]
        M[k, i] = A[0, i]
        M[k + 1, i] = A[1, i]
        rhs[i] = -g[i]
    sol = np.linalg.solve(M, rhs)
    return sol[:k]


@_jit
def _project_affine(q, w, u):
    """Pull q back onto {sum q = 1, w.q = u} (removes numerical drift)."""
    k = q.shape[0]
    s = 0.0
    mw = 0.0
    sw = 0.0
    sww = 0.0
    for i in range(k):
        s += q[i]
        mw += w[i] * q[i]
        sw += w[i]
        sww += w[i] * w[i]
    r0 = s - 1.0
    r1 = mw - u
    det = k * sww - sw * sw
    if det <= 0.0:
        return
    x0 = (sww * r0 - sw * r1) / det
    x1 = (k * r1 - sw * r0) / det
    for i in range(k):
        q[i] -= x0 + x1 * w[i]


@_jit
def _project_affine_safe(q, w, u):
    """Affine projection that backs off if it would cross a positivity wall."""
    k = q.shape[0]
    saved = np.empty(k)
    for i in range(k):
        saved[i] = q[i]
    _project_affine(q, w, u)
    for i in range(k):
        if q[i] <= 0.0:
            for j in range(k):
                q[j] = saved[j]
            return


@_jit
def _all_finite(g, H):
    k = g.shape[0]
    for i in range(k):
        if not np.isfinite(g[i]):
            return False
        for j in range(k):
            if not np.isfinite(H[i, j]):
                return False
    return True


@_jit
def _project_affine_residual(res, w):
    """Remove the span of the equality gradients [1, w] from res (in place)."""
    k = res.shape[0]
    s = float(k)
    sw = 0.0
    sww = 0.0
    r0 = 0.0
    r1 = 0.0
    for i in range(k):
        sw += w[i]
        sww += w[i] * w[i]
        r0 += res[i]
        r1 += res[i] * w[i]
    det = s * sww - sw * sw
    if det <= 0.0:
        return
    x0 = (sww * r0 - sw * r1) / det
    x1 = (s * r1 - sw * r0) / det
    for i in range(k):
        res[i] -= x0 + x1 * w[i]


@_jit
def _phi_scaled_sanov(q, w, F0, phat, z, inv_tau, t0):
    """Scaled barrier objective rate + inv_tau * (-sum log q - log(z-KL))."""
    k = q.shape[0]
    for i in range(k):
        if q[i] <= 0.0:
            return np.inf, t0
    s = z - kl_vec(phat, q)
    if s <= 0.0:
        return np.inf, t0
    val, t = rate_value(q, w, F0, t0)
    if not np.isfinite(val):
        return np.inf, t0
    acc = val - inv_tau * np.log(s)
    for i in range(k):
        acc -= inv_tau * np.log(q[i])
    return acc, t


@_jit
def _phi_scaled_box(q, w, F0, a, b, inv_tau, t0):
    k = q.shape[0]
    for i in range(k):
        if q[i] <= a[i] or q[i] >= b[i]:
            return np.inf, t0
    val, t = rate_value(q, w, F0, t0)
    if not np.isfinite(val):
        return np.inf, t0
    acc = val
    for i in range(k):
        acc -= inv_tau * (np.log(q[i] - a[i]) + np.log(b[i] - q[i]))
    return acc, t


@_jit
def _center_sanov(q, w, F0, phat, z, u, inv_tau, t0, A, dec_tol, gnorm_tol, max_steps):
    """Newton centering at fixed barrier weight.

    Exits on the Newton decrement (dec_tol, path-following stages) or on the
    projected gradient norm (gnorm_tol, final polish; this norm is exactly the
    reported KKT stationarity residual). Returns (iters, t, gnorm).
    """
    k = q.shape[0]
    grad = np.empty(k)
    hess = np.empty((k, k))
    g = np.empty(k)
    gp = np.empty(k)
    H = np.empty((k, k))
    qn = np.empty(k)
    qbest = q.copy()
    t = t0
    iters = 0
    best_gnorm = np.inf
    prev_gnorm = np.inf
    for _ in range(max_steps):
        iters += 1
        _, t = rate_grad_hess(q, w, F0, t, grad, hess)
        s = z - kl_vec(phat, q)
        if s <= 0.0:
            break
        for i in range(k):
            pi = phat[i]
            g[i] = grad[i] - inv_tau * (1.0 / q[i] + (pi / q[i]) / s)
            for j in range(k):
                H[i, j] = hess[i, j] + inv_tau * (pi / q[i]) * (phat[j] / q[j]) / (s * s)
            H[i, i] += inv_tau * (1.0 / (q[i] * q[i]) + pi / (q[i] * q[i] * s))
        if not _all_finite(g, H):
            break
        for i in range(k):
            gp[i] = g[i]
        _project_affine_residual(gp, w)
        gnorm = 0.0
        for i in range(k):
            if abs(gp[i]) > gnorm:
                gnorm = abs(gp[i])
        if gnorm < best_gnorm:
            best_gnorm = gnorm
            for i in range(k):
                qbest[i] = q[i]
        if gnorm <= gnorm_tol:
            break
        if gnorm <= 1e-8 and gnorm >= 0.5 * prev_gnorm:
            break  # float64 noise floor
        prev_gnorm = gnorm
        dq = _kkt_step(H, A, g, k)
        dec = 0.0
        for i in range(k):
            dec -= g[i] * dq[i]
        if dec < 0.0:
            dec = 0.0
        if dec * 0.5 <= dec_tol:
            break
        alpha = 1.0
        for i in range(k):
            if dq[i] < 0.0:
                amax = -0.995 * q[i] / dq[i]
                if amax < alpha:
                    alpha = amax
        phi0, _ = _phi_scaled_sanov(q, w, F0, phat, z, inv_tau, t)
        ok = False
        skip_armijo = dec < 1e-12
        for _bt in range(60):
            for i in range(k):
                qn[i] = q[i] + alpha * dq[i]
            phin, tn = _phi_scaled_sanov(qn, w, F0, phat, z, inv_tau, t)
            if np.isfinite(phin) and (
                phin <= phi0 - 1e-4 * alpha * dec
                or (skip_armijo and phin <= phi0 + 1e-14 * (1.0 + abs(phi0)))
            ):
                ok = True
                break
            alpha *= 0.5
        if not ok:
            break
        for i in range(k):
            q[i] = qn[i]
        _project_affine_safe(q, w, u)
        t = tn
    if best_gnorm < np.inf:
        for i in range(k):
            q[i] = qbest[i]
    return iters, t, best_gnorm


@_jit
def _center_box(q, w, F0, a, b, u, inv_tau, t0, A, dec_tol, gnorm_tol, max_steps):
    k = q.shape[0]
    grad = np.empty(k)
    hess = np.empty((k, k))
    g = np.empty(k)
    gp = np.empty(k)
    H = np.empty((k, k))
    qn = np.empty(k)
    qbest = q.copy()
    t = t0
    iters = 0
    best_gnorm = np.inf
    prev_gnorm = np.inf
    for _ in range(max_steps):
        iters += 1
        _, t = rate_grad_hess(q, w, F0, t, grad, hess)
        wall = False
        for i in range(k):
            if q[i] - a[i] <= 0.0 or b[i] - q[i] <= 0.0:
                wall = True
        if wall:
            break
        for i in range(k):
            dlo = q[i] - a[i]
            dhi = b[i] - q[i]
            g[i] = grad[i] - inv_tau * (1.0 / dlo - 1.0 / dhi)
            for j in range(k):
                H[i, j] = hess[i, j]
            H[i, i] += inv_tau * (1.0 / (dlo * dlo) + 1.0 / (dhi * dhi))
        if not _all_finite(g, H):
            break
        for i in range(k):
            gp[i] = g[i]
        _project_affine_residual(gp, w)
        gnorm = 0.0
        for i in range(k):
            if abs(gp[i]) > gnorm:
                gnorm = abs(gp[i])
        if gnorm < best_gnorm:
            best_gnorm = gnorm
            for i in range(k):
                qbest[i] = q[i]
        if gnorm <= gnorm_tol:
            break
        if gnorm <= 1e-8 and gnorm >= 0.5 * prev_gnorm:
            break
        prev_gnorm = gnorm
        dq = _kkt_step(H, A, g, k)
        dec = 0.0
        for i in range(k):
            dec -= g[i] * dq[i]
        if dec < 0.0:
            dec = 0.0
        if dec * 0.5 <= dec_tol:
            break
        alpha = 1.0
        for i in range(k):
            if dq[i] < 0.0:
                amax = -0.995 * (q[i] - a[i]) / dq[i]
                if amax < alpha:
                    alpha = amax
            elif dq[i] > 0.0:
                amax = 0.995 * (b[i] - q[i]) / dq[i]
                if amax < alpha:
                    alpha = amax
        phi0, _ = _phi_scaled_box(q, w, F0, a, b, inv_tau, t)
        ok = False
        skip_armijo = dec < 1e-12
        for _bt in range(60):
            for i in range(k):
                qn[i] = q[i] + alpha * dq[i]
            phin, tn = _phi_scaled_box(qn, w, F0, a, b, inv_tau, t)
            if np.isfinite(phin) and (
                phin <= phi0 - 1e-4 * alpha * dec
                or (skip_armijo and phin <= phi0 + 1e-14 * (1.0 + abs(phi0)))
            ):
                ok = True
                break
            alpha *= 0.5
        if not ok:
            break
        for i in range(k):
            q[i] = qn[i]
        _project_affine_safe(q, w, u)
        t = tn
    if best_gnorm < np.inf:
        for i in range(k):
            q[i] = qbest[i]
    return iters, t, best_gnorm


@_jit
def _phase1_sanov(q, w, u, phat, z, A):
    """Drive KL(phat, q) below z on the slice {sum q = 1, w.q = u}.

    Damped Newton on KL + tiny positivity barrier. Returns (iters, best_kl).
    """
    k = q.shape[0]
    eps = 1e-9
    g = np.empty(k)
    H = np.empty((k, k))
    qn = np.empty(k)
    margin = z * 1e-3
    if margin > 1e-4:
        margin = 1e-4
    if margin < 1e-12:
        margin = 1e-12
    target = z - margin
    iters = 0
    for _ in range(200):
        iters += 1
        klv = kl_vec(phat, q)
        if klv <= target:
            return iters, klv
        if not np.isfinite(klv):
            # q lacks support where phat has mass; unreachable by descent
            return iters, klv
        for i in range(k):
            g[i] = -(phat[i] + eps) / q[i]
            for j in range(k):
                H[i, j] = 0.0
            H[i, i] = (phat[i] + eps) / (q[i] * q[i])
        if not _all_finite(g, H):
            return iters, kl_vec(phat, q)
        dq = _kkt_step(H, A, g, k)
        dec = 0.0
        for i in range(k):
            dec -= g[i] * dq[i]
        if dec * 0.5 <= 1e-14:
            return iters, kl_vec(phat, q)
        alpha = 1.0
        for i in range(k):
            if dq[i] < 0.0:
                amax = -0.995 * q[i] / dq[i]
                if amax < alpha:
                    alpha = amax
        obj0 = klv
        for i in range(k):
            if q[i] > 0.0:
                obj0 -= eps * np.log(q[i])
            else:
                obj0 = np.inf
        ok = False
        for _bt in range(60):
            feasible = True
            for i in range(k):
                qn[i] = q[i] + alpha * dq[i]
                if qn[i] <= 0.0:
                    feasible = False
            if feasible:
                objn = kl_vec(phat, qn)
                for i in range(k):
                    objn -= eps * np.log(qn[i])
                if objn <= obj0 - 1e-4 * alpha * dec:
                    ok = True
                    break
            alpha *= 0.5
        if not ok:
            return iters, kl_vec(phat, q)
        for i in range(k):
            q[i] = qn[i]
        _project_affine_safe(q, w, u)
    return iters, kl_vec(phat, q)


@_jit
def probe_sanov(phat, w, F0, u, z, q0, use_warm):
    """Feasibility probe with a Sanov-ball base constraint.

    minimize rate(q; w, F0)  s.t.  sum q = 1, w.q = u, KL(phat, q) <= z.

    Returns (status, objective, q, t, iterations, kkt_residual).
    """
    k = phat.shape[0]
    A = np.empty((2, k))
    for i in range(k):
        A[0, i] = 1.0
        A[1, i] = w[i]
    q = np.empty(k)
    iters = 0

    warm_ok = False
    if use_warm:
        for i in range(k):
            q[i] = q0[i]
        _project_affine(q, w, u)
        good = True
        for i in range(k):
            if q[i] < 1e-12:
                good = False
        if good and kl_vec(phat, q) < z * (1.0 - 1e-6):
            warm_ok = True

    if not warm_ok:
        # strictly positive start with mean exactly u: tilt the uniform with a
        # capped parameter (bounded dynamic range), then blend toward the
        # corner that absorbs the residual mean
        base = np.empty(k)
        for i in range(k):
            base[i] = 1.0 / k
        t_start, _ok = tilt_solve(base, w, u, 0.0)
        if t_start > 25.0:
            t_start = 25.0
        elif t_start < -25.0:
            t_start = -25.0
        logZ, _, _ = tilt_stats(base, w, t_start)
        ssum = 0.0
        for i in range(k):
            q[i] = base[i] * np.exp(t_start * w[i] - logZ)
            ssum += q[i]
        m_cur = 0.0
        for i in range(k):
            q[i] /= ssum
            m_cur += w[i] * q[i]
        if u > m_cur:
            theta = (u - m_cur) / (1.0 - m_cur)
            for i in range(k):
                q[i] *= 1.0 - theta
            q[k - 1] += theta
        elif u < m_cur:
            theta = (m_cur - u) / m_cur
            for i in range(k):
                q[i] *= 1.0 - theta
            q[0] += theta
        it1, klv = _phase1_sanov(q, w, u, phat, z, A)
        iters += it1
        if klv > z - 1e-12:
            val, t = rate_value(q, w, F0, 0.0)
            if klv > z + 1e-12:
                return INFEASIBLE, np.inf, q, t, iters, np.inf
            # the slice touches the ball in (numerically) a single point
            return BOUNDARY, val, q, t, iters, 0.0

    t = 0.0
    m_ineq = float(k + 1)
    tau = 16.0
    while m_ineq / tau > 1e-10:
        it, t, _ = _center_sanov(q, w, F0, phat, z, u, 1.0 / tau, t, A, 1e-7, 0.0, 40)
        iters += it
        tau *= 30.0
    tau /= 30.0
    # final polish: drive the projected gradient (the KKT stationarity
    # residual) to the float64 floor
    it, t, gnorm = _center_sanov(q, w, F0, phat, z, u, 1.0 / tau, t, A, -1.0, 1e-11, 25)
    iters += it

    val, t = rate_value(q, w, F0, t)
    r = gnorm
    gap = m_ineq / tau
    if gap > r:
        r = gap
    status = OK if r <= 1e-8 else NO_CONVERGENCE
    return status, val, q, t, iters, r


@_jit
def probe_box(a, b, w, F0, u, q0, use_warm):
    """Feasibility probe with a box (confidence-polytope) base constraint.

    minimize rate(q; w, F0)  s.t.  sum q = 1, w.q = u, a <= q <= b.
    """
    k = a.shape[0]
    A = np.empty((2, k))
    for i in range(k):
        A[0, i] = 1.0
        A[1, i] = w[i]
    q = np.empty(k)
    iters = 0

    warm_ok = False
    if use_warm:
        for i in range(k):
            q[i] = q0[i]
        _project_affine(q, w, u)
        good = True
        for i in range(k):
            gap = b[i] - a[i]
            margin = 1e-9 * (gap + 1e-9)
            if q[i] < a[i] + margin or q[i] > b[i] - margin:
                good = False
        if good:
            warm_ok = True

    if not warm_ok:
        # analytic strictly-interior start: blend the extreme-mean vertices of
        # a shrunken box
        shrink = 0.02
        ok_start = False
        qlo = np.empty(k)
        qhi = np.empty(k)
        asb = np.empty(k)
        bsb = np.empty(k)
        negw = np.empty(k)
        for i in range(k):
            negw[i] = -w[i]
        for _try in range(40):
            ssum = 0.0
            bs = 0.0
            for i in range(k):
                pad = shrink * (b[i] - a[i])
                asb[i] = a[i] + pad
                bsb[i] = b[i] - pad
                ssum += asb[i]
                bs += bsb[i]
            if ssum <= 1.0 <= bs:
                mhi = box_linargmax(asb, bsb, w, qhi)
                box_linargmax(asb, bsb, negw, qlo)
                mlo = 0.0
                for i in range(k):
                    mlo += w[i] * qlo[i]
                if mlo - 1e-15 <= u <= mhi + 1e-15:
                    span = mhi - mlo
                    if span <= 1e-15:
                        for i in range(k):
                            q[i] = qlo[i]
                    else:
                        alpha2 = (u - mlo) / span
                        for i in range(k):
                            q[i] = (1.0 - alpha2) * qlo[i] + alpha2 * qhi[i]
                    ok_start = True
                    break
            shrink *= 0.25
        if not ok_start:
            return INFEASIBLE, np.inf, q, 0.0, iters, np.inf
        _project_affine(q, w, u)
        inside = True
        for i in range(k):
            gap = b[i] - a[i]
            if q[i] <= a[i] + 1e-13 * gap or q[i] >= b[i] - 1e-13 * gap:
                inside = False
        if not inside:
            # probing at (numerically) the box's own functional extreme: the
            # feasible set degenerates to the contact face
            for i in range(k):
                if q[i] < a[i]:
                    q[i] = a[i]
                elif q[i] > b[i]:
                    q[i] = b[i]
            val, t = rate_value(q, w, F0, 0.0)
            return BOUNDARY, val, q, t, iters, 0.0

    t = 0.0
    m_ineq = float(2 * k)
    tau = 16.0
    while m_ineq / tau > 1e-10:
        it, t, _ = _center_box(q, w, F0, a, b, u, 1.0 / tau, t, A, 1e-7, 0.0, 40)
        iters += it
        tau *= 30.0
    tau /= 30.0
    it, t, gnorm = _center_box(q, w, F0, a, b, u, 1.0 / tau, t, A, -1.0, 1e-11, 25)
    iters += it

    val, t = rate_value(q, w, F0, t)
    r = gnorm
    gap = m_ineq / tau
    if gap > r:
        r = gap
    status = OK if r <= 1e-8 else NO_CONVERGENCE
    return status, val, q, t, iters, r


@_jit
def rate_batch(Q, w, m, out):
    """rate(Q[i]; w, m) for a batch of rows (grid-oracle support)."""
    n = Q.shape[0]
    for i in range(n):
        v, _ = rate_value(Q[i], w, m, 0.0)
        out[i] = v
