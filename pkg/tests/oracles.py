"""Straight-line scalar oracles for the nine quality models.

Deliberately independent of the package under test: every formula is spelled
out inline with the math module only, including a private 0-100 <-> MOS
cubic and its own bisection inverse. Each oracle takes plain scalars and
returns the final MOS (clamps applied in the published order).
"""

import math


def clamp(v, lo, hi):
    return min(max(v, lo), hi)


def oracle_mos_from_r(r):
    r = clamp(r, 0.0, 100.0)
    return 1.0 + 0.035 * r + r * (r - 60.0) * (100.0 - r) * 0.000007


def oracle_r_from_mos(m):
    m = clamp(m, 1.0, 4.5)
    lo, hi = 0.0, 100.0
    while hi - lo > 1e-12:
        mid = (lo + hi) / 2.0
        if oracle_mos_from_r(mid) < m:
            lo = mid
        else:
            hi = mid
    return hi


def oracle_g1070(br, fr, a1, a2, a3, a4, a5, a6, a7, a8):
    i_ofr = clamp(a1 - a2 / (1.0 + (br / a3) ** a4), 0.0, 4.0)
    o_fr = clamp(a5 + a6 * br, 0.0, 30.0)
    d_frv = a7 + a8 * br
    i_coding = i_ofr * math.exp(-((math.log(fr) - math.log(o_fr)) ** 2) / (2.0 * d_frv ** 2))
    qv = 1.0 + i_coding
    return clamp(qv, 1.0, 5.0)


def oracle_p1201_1(br, fr, avg_byte_i, c1, c2, c3, c4):
    cpx = min(math.sqrt(br / avg_byte_i), 1.0)
    normbr = br * 8.0 * 30.0 / (1000.0 * min(30.0, fr))
    e = c3 * cpx + c4
    qcod = 4.0 / (1.0 + (normbr / e) ** e)
    if fr < 24.0:
        qv = 5.0 - qcod
    else:
        qv = (5.0 - qcod) * (1.0 + c1 * cpx - c2 * cpx * math.log10(1000.0 / fr))
    return clamp(qv, 1.0, 5.0)


def oracle_p1201_2(br, fr, width, height, scenes, c1, c2, c3, c4):
    """scenes: iterable of (gop_count, avg_iframe_bytes, weight)."""
    pixels = width * height
    num = 0.0
    den = 0.0
    for gop_count, size, weight in scenes:
        num += weight * gop_count
        den += size * weight * gop_count
    cpx = (num / den) * (pixels * fr / 1000.0)
    bpp = br * 1e6 / (pixels * fr)
    qcod = c1 * math.exp(c2 * bpp) + c3 * cpx + c4
    qv = clamp(100.0 - qcod, 0.0, 100.0)
    return oracle_mos_from_r(qv)


def oracle_p1203(quant, fr, cod_pixels, dis_pixels, device,
                 q1, q2, q3, u1, u2, t1, t2, t3, h1, h2, h3, h4):
    mosq = clamp(q1 + q2 * math.exp(q3 * quant), 1.0, 5.0)
    dq = clamp(100.0 - oracle_r_from_mos(mosq), 0.0, 100.0)

    scale = max(dis_pixels / cod_pixels, 1.0)
    du = clamp(u1 * math.log10(u2 * (scale - 1.0) + 1.0), 0.0, 100.0)

    if fr < 24.0:
        dt1 = 100.0 * (t1 - t2 * fr) / (t3 + fr)
        dt2 = dq * (t1 - t2 * fr) / (t3 + fr)
        dt3 = du * (t1 - t2 * fr) / (t3 + fr)
        dt = clamp(dt1 - dt2 - dt3, 0.0, 100.0)
    else:
        dt = 0.0

    d = clamp(dq + du + dt, 0.0, 100.0)
    q = 100.0 - d
    mos = mosq if (du == 0.0 and dt == 0.0) else oracle_mos_from_r(q)
    if device == "handheld":
        mos = clamp(h1 + h2 * mos + h3 * mos ** 2 + h4 * mos ** 3, 1.0, 5.0)
    return clamp(mos, 1.0, 5.0)


def oracle_yamagishi(br, fr, c1, c2, c3, c4, c5, c6, c7):
    f_o = c1 + c2 * br
    d_fr = c3 + c4 * br
    v0 = c5 * (1.0 - 1.0 / (1.0 + (br / c6) ** c7))
    v_c = v0 * math.exp(-((math.log(fr) - math.log(f_o)) ** 2) / (2.0 * d_fr ** 2))
    return clamp(1.0 + v_c, 1.0, 5.0)


def oracle_ries(br, fr, c1, c2, c3, c4, c5):
    qv = c1 + c2 * br + c3 / br + c4 * fr + c5 / fr
    return clamp(qv, 1.0, 5.0)


def oracle_joskowicz(br, sad, c1, c2, c3, c4, c5, c6):
    v1 = c1 * sad ** c2 + c3
    v2 = c4 * sad ** c5 + c6
    v_c = 4.0 * (1.0 - 1.0 / (1.0 + (br / v1) ** v2))
    return clamp(1.0 + v_c, 1.0, 5.0)


def oracle_takagi(br, fr, pixels, qp,
                  a1, a2, a3, b1, b2, b3, c1, c2, c3, d1, d2, d3, e):
    v_c = max(qp - e * math.log(br), 1e-6)
    alpha = a1 * math.log10(pixels) + b1 * math.log10(fr) + c1 * math.log10(v_c) + d1
    beta = a2 * math.log10(pixels) + b2 * math.log10(fr) + c2 * math.log(v_c) + d2
    gamma = a3 * math.log10(pixels) + b3 * math.log10(fr) + c3 * math.log10(v_c) + d3
    mos_p = -1.0 / (1.0 / gamma + math.exp(alpha * (qp - beta))) + gamma
    return clamp(mos_p, 1.0, 5.0)


def oracle_uves_qcod(br, fr, avg_byte_i, avg_qp, max_qp, min_qp, iflicker,
                     skip_ratio, avg_mv, kfr,
                     n1, n2, n3, n4, n5, n6, n7, n8, n9, n10, n11):
    kfr_imp = n2 * kfr + n3
    qp_fr = (n4 + n5 * (avg_qp / 51.0) ** n6 + n7 / fr
             + n8 * iflicker + n9 * (max_qp - min_qp))
    cpx = min(math.sqrt(br / avg_byte_i) + n10 * skip_ratio, 1.0)
    mv_imp = n11 * avg_mv * (1.0 - fr / 30.0)
    qcod = kfr_imp * math.exp(n1 * (qp_fr + cpx + mv_imp))
    return min(max(qcod, 1.0), 5.0)


def oracle_uves_model1_1(br, fr, avg_byte_i, avg_qp, max_qp, min_qp, iflicker,
                         skip_ratio, avg_mv, kfr, coefficients):
    qcod = oracle_uves_qcod(br, fr, avg_byte_i, avg_qp, max_qp, min_qp, iflicker,
                            skip_ratio, avg_mv, kfr, *coefficients[:11])
    return clamp(qcod, 1.0, 5.0)


def oracle_uves_mode1(br, fr, avg_byte_i, avg_qp, max_qp, min_qp, iflicker,
                      skip_ratio, avg_mv, kfr, width, height, screen_inches,
                      coefficients):
    (n1, n2, n3, n4, n5, n6, n7, n8, n9, n10, n11,
     n12, n13, n14, n15, n16, n17) = coefficients
    qcod = oracle_uves_qcod(br, fr, avg_byte_i, avg_qp, max_qp, min_qp, iflicker,
                            skip_ratio, avg_mv, kfr,
                            n1, n2, n3, n4, n5, n6, n7, n8, n9, n10, n11)
    ppi = math.sqrt(width ** 2 + height ** 2) / screen_inches
    q_disp = n14 * (1.0 - 1.0 / (1.0 + (ppi / (n15 * screen_inches ** n16)) ** n17))
    q_disp = max(1.0, min(5.0, q_disp))
    qd = q_disp - (q_disp - 1.0) / (1.0 + math.exp(n12 * avg_qp / n13))
    qs = qd - (5.0 - qcod) * (qd - 4.0) / 100.0
    return clamp(qs, 1.0, 5.0)
