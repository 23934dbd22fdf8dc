# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled TFA iteration kernels.

Mirrors ``_fallback`` operation for operation; the loops, summation order and
comparisons must stay identical so that both backends are bit-identical.
"""

ctypedef const double[::1] dvec
ctypedef const Py_ssize_t[::1] ivec


cdef inline double _node_delay(Py_ssize_t i, dvec z, ivec nfp, dvec fc, ivec fp,
                               ivec fpair, dvec fcoef) noexcept nogil:
    cdef Py_ssize_t f, k
    cdef double acc
    cdef double best = 0.0
    for f in range(nfp[i], nfp[i + 1]):
        acc = fc[f]
        for k in range(fp[f], fp[f + 1]):
            acc = acc + fcoef[k] * z[fpair[k]]
        if f == nfp[i] or acc < best:
            best = acc
    return best


cdef inline double _pair_burst(Py_ssize_t p, dvec d, dvec pb, dvec pr, ivec pp,
                               ivec pn) noexcept nogil:
    cdef Py_ssize_t q
    cdef double s = 0.0
    for q in range(pp[p], pp[p + 1]):
        s = s + d[pn[q]]
    return pb[p] + pr[p] * s


def delays(plan, const double[::1] z, double[::1] d_out):
    cdef ivec nfp = plan.node_form_ptr
    cdef dvec fc = plan.form_const
    cdef ivec fp = plan.form_ptr
    cdef ivec fpair = plan.form_pair
    cdef dvec fcoef = plan.form_coef
    cdef Py_ssize_t i
    with nogil:
        for i in range(d_out.shape[0]):
            d_out[i] = _node_delay(i, z, nfp, fc, fp, fpair, fcoef)


def burstinesses(plan, const double[::1] d, double[::1] z_out):
    cdef dvec pb = plan.pair_burst
    cdef dvec pr = plan.pair_rate
    cdef ivec pp = plan.pred_ptr
    cdef ivec pn = plan.pred_node
    cdef Py_ssize_t p
    with nogil:
        for p in range(z_out.shape[0]):
            z_out[p] = _pair_burst(p, d, pb, pr, pp, pn)


def sync_step(plan, const double[::1] z, const double[::1] d, double[::1] z_out, double[::1] d_out):
    delays(plan, z, d_out)
    burstinesses(plan, d, z_out)


def alt_round(plan, double[::1] z, double[::1] d):
    delays(plan, z, d)
    burstinesses(plan, d, z)


def async_epoch(plan, const Py_ssize_t[::1] round_ptr, const Py_ssize_t[::1] round_nodes,
                double[::1] z, double[::1] d, double[::1] zbuf):
    cdef ivec nfp = plan.node_form_ptr
    cdef dvec fc = plan.form_const
    cdef ivec fp = plan.form_ptr
    cdef ivec fpair = plan.form_pair
    cdef dvec fcoef = plan.form_coef
    cdef dvec pb = plan.pair_burst
    cdef dvec pr = plan.pair_rate
    cdef ivec pp = plan.pred_ptr
    cdef ivec pn = plan.pred_node
    cdef ivec op = plan.out_ptr
    cdef ivec opair = plan.out_pair
    cdef Py_ssize_t r, q, i, k, p
    cdef Py_ssize_t updates = 0
    with nogil:
        for r in range(round_ptr.shape[0] - 1):
            for q in range(round_ptr[r], round_ptr[r + 1]):
                i = round_nodes[q]
                d[i] = _node_delay(i, z, nfp, fc, fp, fpair, fcoef)
                updates += 1
            for q in range(round_ptr[r], round_ptr[r + 1]):
                i = round_nodes[q]
                for k in range(op[i], op[i + 1]):
                    p = opair[k]
                    zbuf[p] = _pair_burst(p, d, pb, pr, pp, pn)
            for q in range(round_ptr[r], round_ptr[r + 1]):
                i = round_nodes[q]
                for k in range(op[i], op[i + 1]):
                    p = opair[k]
                    z[p] = zbuf[p]
    return updates


def fptfa_sweep(plan, const Py_ssize_t[::1] order, const unsigned char[::1] is_cut,
                double[::1] z, double[::1] zp, double[::1] d):
    cdef ivec nfp = plan.node_form_ptr
    cdef dvec fc = plan.form_const
    cdef ivec fp = plan.form_ptr
    cdef ivec fpair = plan.form_pair
    cdef dvec fcoef = plan.form_coef
    cdef dvec pb = plan.pair_burst
    cdef dvec pr = plan.pair_rate
    cdef ivec up = plan.pair_up
    cdef ivec op = plan.out_ptr
    cdef ivec opair = plan.out_pair
    cdef Py_ssize_t k, i, q, p
    cdef double di, base, val
    with nogil:
        for k in range(order.shape[0]):
            i = order[k]
            di = _node_delay(i, z, nfp, fc, fp, fpair, fcoef)
            d[i] = di
            for q in range(op[i], op[i + 1]):
                p = opair[q]
                if up[p] < 0:
                    base = pb[p]
                else:
                    base = z[up[p]]
                val = base + pr[p] * di
                if is_cut[p]:
                    zp[p] = val
                else:
                    z[p] = val
