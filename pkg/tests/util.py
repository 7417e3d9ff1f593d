"""Test-side oracles: independent order-2 curve construction through a pair,
using its own propagation code (the exponential-curve composition rule), plus
finite-difference extraction of curve coefficients."""

import numpy as np
import scipy.linalg

from parrep.surface import relator


def ad(m, x):
    return m @ x @ np.linalg.inv(m)


def curve_value(images, word, gen_values, rule_bracket):
    """Extend generator jet values along a word with
    F(u t) = F(u) + Ad_u F(t) + rule_bracket * [X(u), Ad_u X(t)].

    ``gen_values[name] = (x, w)``; returns (x_word, w_word)."""
    some = next(iter(gen_values.values()))[0]
    r = some.shape[0]
    xu = np.zeros((r, r), dtype=complex)
    wu = np.zeros((r, r), dtype=complex)
    m = np.eye(r, dtype=complex)
    for name, e in word.letters:
        x, w = gen_values[name]
        if e == 1:
            xt, wt = ad(m, x), ad(m, w)
            m_next = m @ images[name]
        else:
            m_next = m @ np.linalg.inv(images[name])
            xt = -ad(m_next, x)
            wt = -ad(m_next, w)
        wu = wu + wt + rule_bracket * (xu @ xt - xt @ xu)
        xu = xu + xt
        m = m_next
    return xu, wu


def exp_curve_images(pair, x_values, w_values, t):
    """rho_t(gen) = exp(X t + W t^2) rho(gen) for every generator."""
    out = {}
    for name, m in pair.images.items():
        out[name] = scipy.linalg.expm(t * x_values[name] + t * t * w_values[name]) @ m
    return out


def relator_coefficients_fd(pair, x_values, w_values, h=0.003):
    """Finite-difference t and t^2 coefficients of rho_t(relator) - Id."""
    from parrep.surface import evaluate

    rel = relator(pair.presentation)

    def defect(t):
        return evaluate(exp_curve_images(pair, x_values, w_values, t), rel) - np.eye(pair.rank)

    d1, dm1 = defect(h), defect(-h)
    d2, dm2 = defect(2 * h), defect(-2 * h)
    c1 = (8.0 * (d1 - dm1) - (d2 - dm2)) / (12.0 * h)
    s_h = (d1 + dm1) / 2.0
    s_2h = (d2 + dm2) / 2.0
    c2 = (16.0 * s_h - s_2h) / (12.0 * h * h)
    return np.linalg.norm(c1), np.linalg.norm(c2)


def order2_feasible_single_puncture(ctx, x):
    """Independent cone test for one-puncture pairs: is there a second-order
    curve coefficient W (curve composition rule) with W(g1) in the parabolic?

    Probes the affine map from free W-values to W(g1) with curve_value and
    solves the projected system by least squares."""
    r = ctx.r
    free = ctx.free_names
    proj = ctx.par_complements[0].conj().T
    if proj.shape[0] == 0:
        return True
    zeros = {f: np.zeros((r, r), dtype=complex) for f in free}

    def gn_value(w_free):
        gen_values = {f: (x.values[f], w_free[f]) for f in free}
        _, w_gn = curve_value(ctx.images, ctx.gamma_n_word, gen_values, 0.5)
        return w_gn

    const = gn_value(zeros)
    cols = []
    for f in free:
        for k in range(r * r):
            e = np.zeros((r, r), dtype=complex)
            e.flat[k] = 1.0
            probe = dict(zeros)
            probe[f] = e
            cols.append(proj @ (gn_value(probe) - const).reshape(-1))
    a = np.array(cols).T
    b = -proj @ const.reshape(-1)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    cutoff = 1e-12 * max(1.0, float(s[0]) if s.size else 0.0, float(np.linalg.norm(b)))
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    sol = vh.conj().T @ (inv * (u.conj().T @ b))
    return bool(np.linalg.norm(a @ sol - b) <= 1e-7 * (np.linalg.norm(b) + 1.0))


def conjugation_curve(pair, w_mat, u_mat):
    """Order-2 data of the conjugation curve g_t rho g_t^{-1}, g_t = exp(tW + t^2 U).

    Returns (x_values, w_values, lifts_y, lifts_z): the exponential-curve jets
    on every generator and the flag displacement jets (all equal to W, U)."""
    x_values, w_values = {}, {}
    for name, m in pair.images.items():
        x_values[name] = w_mat - ad(m, w_mat)
        w_values[name] = (
            u_mat - ad(m, u_mat) - 0.5 * (w_mat @ ad(m, w_mat) - ad(m, w_mat) @ w_mat)
        )
    n = pair.presentation.punctures
    return x_values, w_values, [w_mat] * n, [u_mat] * n
