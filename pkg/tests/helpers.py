"""Shared test oracles.

The finite-difference helpers differentiate a scalar loss numerically by
central differences, touching one parameter entry at a time.  They know
nothing about how the package computes gradients, which makes them a fair
referee for every analytic gradient in the losses module.
"""

import numpy as np


def fd_grad_w_row(loss_fn, params, i, h=1e-5):
    """Central-difference gradient of loss_fn(params) w.r.t. row W[i]."""
    grad = np.zeros(params.d)
    for a in range(params.d):
        orig = params.W[i, a]
        params.W[i, a] = orig + h
        up = loss_fn(params)
        params.W[i, a] = orig - h
        down = loss_fn(params)
        params.W[i, a] = orig
        grad[a] = (up - down) / (2.0 * h)
    return grad


def fd_grad_o(loss_fn, params, rows, h=1e-5):
    """Central-difference gradients w.r.t. the given rows of O.

    Returns a dict row id -> d-vector, matching LossGrad.grad_o's shape.
    """
    out = {}
    for r in rows:
        grad = np.zeros(params.d)
        for a in range(params.d):
            orig = params.O[r, a]
            params.O[r, a] = orig + h
            up = loss_fn(params)
            params.O[r, a] = orig - h
            down = loss_fn(params)
            params.O[r, a] = orig
            grad[a] = (up - down) / (2.0 * h)
        out[int(r)] = grad
    return out


def dense_o_grad(loss_grad, card_j, d):
    """Expand a LossGrad's sparse output-row gradients to a full matrix."""
    out = np.zeros((card_j, d))
    for t, g in loss_grad.grad_o.items():
        out[t] += g
    return out


def relative_error(analytic, numeric, floor=1e-12):
    """Scale-free gradient disagreement: ||a - n|| / max(||n||, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(float(np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric)) / denom


def chi_square_pvalue(observed, probs, min_expected=5.0):
    """Goodness-of-fit p-value for draw counts against a known distribution.

    Bins whose expectation falls below ``min_expected`` are lumped into one
    residual bin so the chi-square approximation stays honest; exactly-zero
    probability bins must hold zero observations and are excluded.
    """
    from scipy import stats

    observed = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n = observed.sum()
    expected = probs * n

    zero = probs == 0
    assert observed[zero].sum() == 0, "draws landed on zero-probability targets"
    observed, expected = observed[~zero], expected[~zero]

    main = expected >= min_expected
    obs = observed[main].tolist()
    exp = expected[main].tolist()
    if (~main).any():
        obs.append(observed[~main].sum())
        exp.append(expected[~main].sum())
    assert len(obs) >= 2, "not enough bins for a chi-square test"
    return float(stats.chisquare(obs, exp).pvalue)


def check_loss_gradients(loss_fn_of_params, loss_grad, params, i,
                         tol=1e-6, h=1e-5):
    """Assert both gradient blocks of one LossGrad against finite differences."""
    fd_w = fd_grad_w_row(loss_fn_of_params, params, i, h=h)
    err_w = relative_error(loss_grad.grad_w_i, fd_w)
    assert err_w < tol, f"W-row gradient off by {err_w:.3g}"

    fd_o = fd_grad_o(loss_fn_of_params, params, loss_grad.o_ids, h=h)
    for t, g in loss_grad.grad_o.items():
        err = relative_error(g, fd_o[t], floor=1e-9)
        assert err < tol, f"O-row {t} gradient off by {err:.3g}"
