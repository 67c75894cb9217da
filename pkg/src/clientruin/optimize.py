"""Small optimizers: golden-section search and damped Newton ascent."""

from dataclasses import dataclass

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a, b, rtol=1e-4, atol=1e-10, maxiter=200):
    """Minimize a unimodal ``f`` on [a, b]. Returns (x, f(x))."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= rtol * max(abs(c), abs(d)) + atol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    diverged: bool
    message: str = ""


def newton_ascent(fun, x0, feasible=None, tol=1e-7, maxiter=200, cap=1e3):
    """Maximize a concave function with damped Newton steps.

    ``fun(x)`` returns ``(value, grad, hess)``. Steps that leave the
    ``feasible`` set, or do not increase the value, are halved. When the
    Hessian is not negative definite a gradient step is taken instead.
    ``diverged`` is set when ``|x|`` exceeds ``cap`` while the objective is
    still rising, i.e. the supremum is approached only at infinity.
    """
    x = np.asarray(x0, dtype=float).copy()
    val, g, H = fun(x)
    it = 0
    for it in range(1, maxiter + 1):
        gn = float(np.linalg.norm(g))
        if gn < tol:
            return AscentResult(x, val, gn, it - 1, True, False)
        try:
            L = np.linalg.cholesky(-H)
            step = np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            step = g / max(1.0, np.abs(np.diag(H)).max(initial=0.0))
        t = 1.0
        improved = False
        for _ in range(60):
            xn = x + t * step
            if feasible is None or feasible(xn):
                try:
                    vn, gn_, Hn = fun(xn)
                except (ValueError, FloatingPointError, OverflowError):
                    vn = -np.inf
                if np.isfinite(vn) and vn >= val - 1e-14 * (1 + abs(val)):
                    improved = True
                    break
            t *= 0.5
        if not improved:
            return AscentResult(x, val, gn, it, gn < 1e3 * tol, False, "line search failed")
        gain = vn - val
        x, val, g, H = xn, vn, gn_, Hn
        if np.linalg.norm(x) > cap:
            rising = gain > 1e-10 * (1 + abs(val))
            return AscentResult(x, val, float(np.linalg.norm(g)), it, not rising, rising, "dual cap reached")
    gn = float(np.linalg.norm(g))
    return AscentResult(x, val, gn, maxiter, gn < tol, False, "iteration limit")


def fd_grad_hess(fun, x, h=1e-4):
    """Central finite-difference gradient and Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    n = x.size
    f0 = fun(x)
    g = np.zeros(n)
    H = np.zeros((n, n))
    fp = np.zeros(n)
    fm = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fp[i], fm[i] = fun(x + e), fun(x - e)
        g[i] = (fp[i] - fm[i]) / (2 * h)
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h**2
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            v = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (4 * h * h)
            H[i, j] = H[j, i] = v
    return f0, g, H
