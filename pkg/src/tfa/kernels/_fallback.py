"""Pure-Python TFA iteration kernels.

Same signatures and operation order as the compiled ``_core`` module. Arrays are
converted to lists on entry because indexing Python lists is much faster than
indexing numpy arrays element by element.
"""


def _node_delay(i, z, nfp, fc, fp, fpair, fcoef):
    best = 0.0
    first = nfp[i]
    for f in range(first, nfp[i + 1]):
        acc = fc[f]
        for k in range(fp[f], fp[f + 1]):
            acc = acc + fcoef[k] * z[fpair[k]]
        if f == first or acc < best:
            best = acc
    return best


def _pair_burst(p, d, pb, pr, pp, pn):
    s = 0.0
    for q in range(pp[p], pp[p + 1]):
        s = s + d[pn[q]]
    return pb[p] + pr[p] * s


def _delays(L, z):
    nfp, fc, fp, fpair, fcoef = L.node_form_ptr, L.form_const, L.form_ptr, L.form_pair, L.form_coef
    return [_node_delay(i, z, nfp, fc, fp, fpair, fcoef) for i in range(L.n_nodes)]


def _bursts(L, d):
    pb, pr, pp, pn = L.pair_burst, L.pair_rate, L.pred_ptr, L.pred_node
    return [_pair_burst(p, d, pb, pr, pp, pn) for p in range(L.n_pairs)]


def delays(plan, z, d_out):
    d_out[:] = _delays(plan.py, z.tolist())


def burstinesses(plan, d, z_out):
    z_out[:] = _bursts(plan.py, d.tolist())


def sync_step(plan, z, d, z_out, d_out):
    L = plan.py
    d_new = _delays(L, z.tolist())
    z_out[:] = _bursts(L, d.tolist())
    d_out[:] = d_new


def alt_round(plan, z, d):
    L = plan.py
    dl = _delays(L, z.tolist())
    d[:] = dl
    z[:] = _bursts(L, dl)


def async_epoch(plan, round_ptr, round_nodes, z, d, zbuf):
    L = plan.py
    nfp, fc, fp, fpair, fcoef = L.node_form_ptr, L.form_const, L.form_ptr, L.form_pair, L.form_coef
    pb, pr, pp, pn = L.pair_burst, L.pair_rate, L.pred_ptr, L.pred_node
    op, opair = L.out_ptr, L.out_pair
    zl, dl = z.tolist(), d.tolist()
    rp, rn = round_ptr.tolist(), round_nodes.tolist()
    updates = 0
    for r in range(len(rp) - 1):
        members = rn[rp[r]:rp[r + 1]]
        for i in members:
            dl[i] = _node_delay(i, zl, nfp, fc, fp, fpair, fcoef)
            updates += 1
        staged = {}
        for i in members:
            for k in range(op[i], op[i + 1]):
                p = opair[k]
                staged[p] = _pair_burst(p, dl, pb, pr, pp, pn)
        for p, v in staged.items():
            zl[p] = v
    z[:] = zl
    d[:] = dl
    return updates


def fptfa_sweep(plan, order, is_cut, z, zp, d):
    L = plan.py
    nfp, fc, fp, fpair, fcoef = L.node_form_ptr, L.form_const, L.form_ptr, L.form_pair, L.form_coef
    pb, pr, up = L.pair_burst, L.pair_rate, L.pair_up
    op, opair = L.out_ptr, L.out_pair
    zl, zpl, dl = z.tolist(), zp.tolist(), d.tolist()
    cut = is_cut.tolist()
    for i in order.tolist():
        di = _node_delay(i, zl, nfp, fc, fp, fpair, fcoef)
        dl[i] = di
        for q in range(op[i], op[i + 1]):
            p = opair[q]
            base = pb[p] if up[p] < 0 else zl[up[p]]
            val = base + pr[p] * di
            if cut[p]:
                zpl[p] = val
            else:
                zl[p] = val
    z[:] = zl
    zp[:] = zpl
    d[:] = dl
