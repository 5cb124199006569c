# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Heston pricing kernel.

Same algorithm as ``_reference``: branch-stable characteristic function with
rationalized (beta - d) and series-protected expm1/log1p, integrated on a
precomputed composite Simpson grid.

Complex arithmetic is hand-rolled on (re, im) pairs: libm's complex
transcendentals dominate the node loop otherwise. All loops run without the
GIL so callers can parallelize over quotes with plain threads.
"""

from libc.math cimport atan2, copysign, exp, fabs, log, sqrt

cdef extern from *:
    """
    extern void sincos(double, double*, double*);
    """
    void sincos(double x, double* s, double* c) nogil

cdef double PI = 3.141592653589793238462643383279502884


cdef struct C2:
    double re
    double im


cdef inline C2 c2(double re, double im) noexcept nogil:
    cdef C2 z
    z.re = re
    z.im = im
    return z


cdef inline C2 cmul(C2 a, C2 b) noexcept nogil:
    return c2(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)


cdef inline C2 cscale(C2 a, double s) noexcept nogil:
    return c2(a.re * s, a.im * s)


cdef inline C2 cdivv(C2 a, C2 b) noexcept nogil:
    cdef double inv = 1.0 / (b.re * b.re + b.im * b.im)
    return c2((a.re * b.re + a.im * b.im) * inv,
              (a.im * b.re - a.re * b.im) * inv)


cdef inline C2 csqrt2(C2 z) noexcept nogil:
    # principal branch; magnitudes here are far from overflow
    cdef double m = sqrt(z.re * z.re + z.im * z.im)
    cdef double t
    if z.re >= 0.0:
        t = sqrt(0.5 * (m + z.re))
        if t == 0.0:
            return c2(0.0, 0.0)
        return c2(t, 0.5 * z.im / t)
    t = sqrt(0.5 * (m - z.re))
    return c2(0.5 * fabs(z.im) / t, copysign(t, z.im))


cdef inline C2 cexp2(C2 z) noexcept nogil:
    cdef double e = exp(z.re)
    cdef double s, c
    sincos(z.im, &s, &c)
    return c2(e * c, e * s)


cdef inline C2 cexpm12(C2 z) noexcept nogil:
    # exp(z) - 1, series for small |z| (matches the reference threshold)
    cdef C2 acc, e
    if z.re * z.re + z.im * z.im < 1e-8:
        acc = cscale(z, 1.0 / 24.0)
        acc.re += 1.0 / 6.0
        acc = cmul(z, acc)
        acc.re += 0.5
        acc = cmul(z, acc)
        acc.re += 1.0
        return cmul(z, acc)
    e = cexp2(z)
    e.re -= 1.0
    return e


cdef inline C2 clog1p2(C2 z) noexcept nogil:
    # log(1 + z), series for small |z|
    cdef C2 acc
    cdef double wre, wim
    if z.re * z.re + z.im * z.im < 1e-8:
        acc = cscale(z, -0.25)
        acc.re += 1.0 / 3.0
        acc = cmul(z, acc)
        acc.re -= 0.5
        acc = cmul(z, acc)
        acc.re += 1.0
        return cmul(z, acc)
    wre = 1.0 + z.re
    wim = z.im
    return c2(0.5 * log(wre * wre + wim * wim), atan2(wim, wre))


cdef inline C2 _char_fn_j(
    double u,
    double b,
    double uj,
    double sig2,
    double rho_sigma,
    double a_over_sig2,
    double inv_sig2,
    double v0,
    double log_spot,
    double maturity,
    double rate,
) noexcept nogil:
    cdef C2 beta, z, d, bpd, inv_bpd, s, bm, g, em1, one_m_edt, one_m_g
    cdef C2 one_m_gedt, argw, lr, arg
    cdef double u2 = u * u

    if u == 0.0:
        return c2(1.0, 0.0)

    beta = c2(b, -rho_sigma * u)
    s = c2(-sig2 * u2, 2.0 * uj * sig2 * u)
    # beta^2 - s, expanded in reals
    z = c2(b * b - rho_sigma * rho_sigma * u2 - s.re,
           -2.0 * b * rho_sigma * u - s.im)
    d = csqrt2(z)
    bpd = c2(beta.re + d.re, beta.im + d.im)
    inv_bpd = cdivv(c2(1.0, 0.0), bpd)
    bm = cmul(s, inv_bpd)            # beta - d, rationalized
    g = cmul(bm, inv_bpd)

    em1 = cexpm12(c2(-d.re * maturity, -d.im * maturity))
    one_m_edt = c2(-em1.re, -em1.im)
    one_m_g = c2(1.0 - g.re, -g.im)
    one_m_gedt = c2(one_m_g.re - (g.re * em1.re - g.im * em1.im),
                    one_m_g.im - (g.re * em1.im + g.im * em1.re))
    argw = cdivv(cmul(g, one_m_edt), one_m_g)
    lr = clog1p2(argw)

    # C + D*v0 + iu*log(spot)
    arg = cscale(bm, maturity)
    arg.re -= 2.0 * lr.re
    arg.im -= 2.0 * lr.im
    arg = cscale(arg, a_over_sig2)
    arg.im += rate * u * maturity + u * log_spot
    z = cmul(cscale(bm, inv_sig2 * v0), cdivv(one_m_edt, one_m_gedt))
    arg.re += z.re
    arg.im += z.im
    return cexp2(arg)


cdef double _price_one(
    double spot,
    double strike,
    double maturity,
    double rate,
    double kappa,
    double theta_v,
    double sigma_v,
    double rho,
    double v0,
    const double[::1] nodes,
    const double[::1] weights,
) noexcept nogil:
    cdef Py_ssize_t i, n = nodes.shape[0]
    cdef double u, w, log_strike, log_spot, acc1, acc2, sk, ck, inv_u
    cdef double sig2, rho_sigma, a_over_sig2, inv_sig2, b1, b2
    cdef C2 phi

    sig2 = sigma_v * sigma_v
    rho_sigma = rho * sigma_v
    a_over_sig2 = kappa * theta_v / sig2
    inv_sig2 = 1.0 / sig2
    b1 = kappa - rho_sigma
    b2 = kappa

    log_strike = log(strike)
    log_spot = log(spot)
    acc1 = 0.0
    acc2 = 0.0
    for i in range(n):
        u = nodes[i]
        w = weights[i]
        # Re[e^{-iu lnK} phi / (iu)] = (-sk*phi.re + ck*phi.im) / u
        sincos(u * log_strike, &sk, &ck)
        inv_u = w / u
        phi = _char_fn_j(u, b1, 0.5, sig2, rho_sigma, a_over_sig2,
                         inv_sig2, v0, log_spot, maturity, rate)
        acc1 += inv_u * (ck * phi.im - sk * phi.re)
        phi = _char_fn_j(u, b2, -0.5, sig2, rho_sigma, a_over_sig2,
                         inv_sig2, v0, log_spot, maturity, rate)
        acc2 += inv_u * (ck * phi.im - sk * phi.re)

    return (spot * (0.5 + acc1 / PI)
            - strike * exp(-rate * maturity) * (0.5 + acc2 / PI))


def char_fn(double u, int j, double kappa, double theta_v, double sigma_v,
            double rho, double v0, double spot, double maturity, double rate):
    """Scalar characteristic function (for parity tests with the reference)."""
    cdef double sig2 = sigma_v * sigma_v
    cdef double b = kappa - rho * sigma_v if j == 1 else kappa
    cdef double uj = 0.5 if j == 1 else -0.5
    cdef C2 out
    with nogil:
        out = _char_fn_j(u, b, uj, sig2, rho * sigma_v,
                         kappa * theta_v / sig2, 1.0 / sig2, v0,
                         log(spot), maturity, rate)
    return complex(out.re, out.im)


def price_call(double spot, double strike, double maturity, double rate,
               double kappa, double theta_v, double sigma_v, double rho,
               double v0, const double[::1] nodes, const double[::1] weights):
    """Heston call price on a precomputed Simpson grid."""
    cdef double out
    with nogil:
        out = _price_one(spot, strike, maturity, rate, kappa, theta_v,
                         sigma_v, rho, v0, nodes, weights)
    return out


def price_batch(const double[::1] spot, const double[::1] strike,
                const double[::1] maturity, const double[::1] rate,
                double kappa, double theta_v, double sigma_v, double rho,
                double v0, const double[::1] nodes, const double[::1] weights,
                double[::1] out):
    """Price many quotes at one parameter vector into a preallocated buffer."""
    cdef Py_ssize_t q, n = spot.shape[0]
    with nogil:
        for q in range(n):
            out[q] = _price_one(spot[q], strike[q], maturity[q], rate[q],
                                kappa, theta_v, sigma_v, rho, v0,
                                nodes, weights)
    return None
