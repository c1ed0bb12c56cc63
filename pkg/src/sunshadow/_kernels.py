"""Numba kernels for the hybrid Kepler/Stark flow.

State layout: y = (pu, pv, u, v, t), with the regime energy h carried
separately (frozen at each regime entry).  The variational matrix M has
rows (pu, pv, u, v, h) so that the re-freezing of h at regime switches
enters the chain through a saltation matrix with a reset row.

All kernels are nopython-compiled; the public wrappers live in
`propagate`.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

KEPLER = 0
STARK = 1

# flow statuses
ST_SECTION = 1     # returned to the section with the right orientation
ST_COLLISION = 2
ST_ESCAPE = 3
ST_BUDGET = 4
ST_SINGULAR = 5
ST_NOCONV = 6
ST_TAU_END = 7
ST_EVENT = 8       # stopped at first guarded crossing (single-leg mode)

# stop modes
STOP_TAU = 0
STOP_SECTION = 1
STOP_EVENT = 2

_S15 = math.sqrt(15.0)
_GA = np.array([
    [5.0 / 36.0, 2.0 / 9.0 - _S15 / 15.0, 5.0 / 36.0 - _S15 / 30.0],
    [5.0 / 36.0 + _S15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - _S15 / 24.0],
    [5.0 / 36.0 + _S15 / 30.0, 2.0 / 9.0 + _S15 / 15.0, 5.0 / 36.0],
])
_GB = np.array([5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0])


@njit(cache=True)
def _field(y, regime, h, f, out):
    pu, pv, u, v = y[0], y[1], y[2], y[3]
    if regime == STARK:
        out[0] = 2.0 * h * u + 2.0 * f * u * u * u
        out[1] = 2.0 * h * v - 2.0 * f * v * v * v
    else:
        out[0] = 2.0 * h * u
        out[1] = 2.0 * h * v
    out[2] = pu
    out[3] = pv
    out[4] = u * u + v * v


@njit(cache=True)
def _jac5(y, regime, h, f, out):
    """Jacobian of the (pu, pv, u, v) field w.r.t. (pu, pv, u, v, h)."""
    u, v = y[2], y[3]
    out[:, :] = 0.0
    if regime == STARK:
        out[0, 2] = 2.0 * h + 6.0 * f * u * u
        out[1, 3] = 2.0 * h - 6.0 * f * v * v
    else:
        out[0, 2] = 2.0 * h
        out[1, 3] = 2.0 * h
    out[0, 4] = 2.0 * u
    out[1, 4] = 2.0 * v
    out[2, 0] = 1.0
    out[3, 1] = 1.0


@njit(cache=True)
def _hamiltonian(y, regime, mu, f):
    pu, pv, u, v = y[0], y[1], y[2], y[3]
    rho = u * u + v * v
    h = (pu * pu + pv * pv - 4.0 * mu) / (2.0 * rho)
    if regime == STARK:
        h -= 0.5 * f * (u * u - v * v)
    return h


@njit(cache=True)
def _grad_hamiltonian(y, regime, mu, f, out):
    """Gradient of the regime Hamiltonian w.r.t. (pu, pv, u, v)."""
    pu, pv, u, v = y[0], y[1], y[2], y[3]
    rho = u * u + v * v
    k = pu * pu + pv * pv - 4.0 * mu
    out[0] = pu / rho
    out[1] = pv / rho
    out[2] = -k * u / (rho * rho)
    out[3] = -k * v / (rho * rho)
    if regime == STARK:
        out[2] -= f * u
        out[3] += f * v


@njit(cache=True)
def _laplace_lenz(y, regime, mu, f):
    pu, pv, u, v = y[0], y[1], y[2], y[3]
    u2, v2 = u * u, v * v
    rho = u2 + v2
    ell = (pu * pu * v2 - pv * pv * u2) / (2.0 * rho) + mu * (u2 - v2) / rho
    if regime == STARK:
        ell -= 0.5 * f * u2 * v2
    return ell


@njit(cache=True)
def _agm(a, b):
    for _ in range(60):
        if abs(a - b) <= 1e-16 * (a + b):
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


@njit(cache=True)
def _leg_dtau(regime, h, ell, mu, f, steps_per_period):
    """Fixed step for one leg, from the leg's own period scale."""
    t_char = 2.0 * math.pi / math.sqrt(2.0 * abs(h) + 1e-30)
    if regime == STARK:
        rv = (h / f) ** 2 + 2.0 * (mu - ell) / f
        if rv > 0.0:
            sv = math.sqrt(rv)
            eta1 = h / f + sv
            eta2 = h / f - sv
            if eta1 > 0.0:
                if eta2 < 0.0:
                    tv = 2.0 * math.pi / (math.sqrt(f) * _agm(math.sqrt(eta1 - eta2), math.sqrt(-eta2)))
                elif eta2 > 0.0:
                    tv = math.pi / (math.sqrt(f) * _agm(math.sqrt(eta1), math.sqrt(eta2)))
                else:
                    tv = t_char
                if tv < t_char:
                    t_char = tv
    return t_char / steps_per_period


@njit(cache=True)
def _gauss_step(y, M, nvar, regime, h, f, dtau, tol_abs, y_out, M_out):
    """One 3-stage Gauss collocation step (order 6); returns success flag.

    When nvar > 0 the variational matrix M (5 x nvar) is advanced with
    the same collocation stages.
    """
    K = np.empty((3, 5))
    f0 = np.empty(5)
    _field(y, regime, h, f, f0)
    for i in range(3):
        K[i, :] = f0
    yi = np.empty(5)
    fi = np.empty(5)
    ok = False
    for _ in range(100):
        delta = 0.0
        scale = 1.0
        for i in range(3):
            for m in range(5):
                yi[m] = y[m] + dtau * (_GA[i, 0] * K[0, m] + _GA[i, 1] * K[1, m] + _GA[i, 2] * K[2, m])
            _field(yi, regime, h, f, fi)
            for m in range(5):
                d = abs(fi[m] - K[i, m])
                if d > delta:
                    delta = d
                a = abs(fi[m])
                if a > scale:
                    scale = a
                K[i, m] = fi[m]
        if delta <= tol_abs * scale:
            ok = True
            break
    for m in range(5):
        y_out[m] = y[m] + dtau * (_GB[0] * K[0, m] + _GB[1] * K[1, m] + _GB[2] * K[2, m])
    if not ok or nvar == 0:
        return ok

    # matrix stages: linear fixed-point with the frozen y-stages
    J = np.empty((3, 5, 5))
    for i in range(3):
        for m in range(5):
            yi[m] = y[m] + dtau * (_GA[i, 0] * K[0, m] + _GA[i, 1] * K[1, m] + _GA[i, 2] * K[2, m])
        _jac5(yi, regime, h, f, J[i])
    KM = np.empty((3, 5, nvar))
    Mi = np.empty((5, nvar))
    for i in range(3):
        for r in range(5):
            for c in range(nvar):
                KM[i, r, c] = 0.0
                for m in range(5):
                    KM[i, r, c] += J[i, r, m] * M[m, c]
    for _ in range(100):
        delta = 0.0
        scale = 1.0
        for i in range(3):
            for r in range(5):
                for c in range(nvar):
                    Mi[r, c] = M[r, c] + dtau * (_GA[i, 0] * KM[0, r, c] + _GA[i, 1] * KM[1, r, c] + _GA[i, 2] * KM[2, r, c])
            for r in range(5):
                for c in range(nvar):
                    val = 0.0
                    for m in range(5):
                        val += J[i, r, m] * Mi[m, c]
                    d = abs(val - KM[i, r, c])
                    if d > delta:
                        delta = d
                    a = abs(val)
                    if a > scale:
                        scale = a
                    KM[i, r, c] = val
        if delta <= tol_abs * scale:
            break
    for r in range(5):
        for c in range(nvar):
            M_out[r, c] = M[r, c] + dtau * (_GB[0] * KM[0, r, c] + _GB[1] * KM[1, r, c] + _GB[2] * KM[2, r, c])
    return True


@njit(cache=True)
def _locate_event(y_a, regime, h, f, dtau, g_a, g_b, sgn, R, ev_tol, tol_abs):
    """Fraction theta in (0, 1] where u*v - sgn*R vanishes within the step.

    Bisection on single Gauss steps from the step start, then Newton
    polish.  Returns (theta, ok).
    """
    lo, hi = 0.0, 1.0
    glo = g_a
    y_m = np.empty(5)
    dummy = np.empty((1, 1))
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        if not _gauss_step(y_a, dummy, 0, regime, h, f, dtau * mid, tol_abs, y_m, dummy):
            return 0.0, False
        g_m = y_m[2] * y_m[3] - sgn * R
        if g_m == 0.0:
            lo = mid
            glo = g_m
            break
        if (glo < 0.0) == (g_m < 0.0):
            lo = mid
            glo = g_m
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    # Newton polish on the fictitious time offset
    for _ in range(6):
        if not _gauss_step(y_a, dummy, 0, regime, h, f, dtau * theta, tol_abs, y_m, dummy):
            return 0.0, False
        g = y_m[2] * y_m[3] - sgn * R
        if abs(g) <= 0.01 * ev_tol:
            break
        gdot = y_m[0] * y_m[3] + y_m[1] * y_m[2]
        if gdot == 0.0:
            break
        theta -= g / (gdot * dtau)
        if theta <= 0.0 or theta > 1.0:
            theta = 0.5 * (lo + hi)
            break
    return theta, True


@njit(cache=True)
def _angle_inc(u0, v0, u1, v1):
    """Principal rotation of (u, v) between two states."""
    cross = u0 * v1 - v0 * u1
    dot = u0 * u1 + v0 * v1
    return math.atan2(cross, dot)


@njit(cache=True)
def _apply_saltation(M, nvar, y, h_old, reg_old, h_new, reg_new, sgn, mu, f):
    """M <- S M with the 5x5 saltation for guard u*v = sgn*R plus h reset.

    Returns the transversality denominator (grad s . X-)."""
    u, v = y[2], y[3]
    xm = np.empty(5)
    xp = np.empty(5)
    _field(y, reg_old, h_old, f, xm)
    _field(y, reg_new, h_new, f, xp)
    # grad s over (pu, pv, u, v, h) is (0, 0, v, u, 0); ds/dtau = v u' + u v'
    denom = v * xm[2] + u * xm[3]
    gH = np.empty(4)
    _grad_hamiltonian(y, reg_new, mu, f, gH)
    # S = DR + (Xp5 - DR Xm5) n^T / denom, in (pu, pv, u, v, h) rows
    xm5 = np.empty(5)
    xp5 = np.empty(5)
    for r in range(4):
        xm5[r] = xm[r]
        xp5[r] = xp[r]
    xm5[4] = 0.0
    xp5[4] = 0.0
    # DR x: identity on first four rows, row 5 = gH . x[:4]
    drxm = np.empty(5)
    for r in range(4):
        drxm[r] = xm5[r]
    drxm[4] = gH[0] * xm5[0] + gH[1] * xm5[1] + gH[2] * xm5[2] + gH[3] * xm5[3]
    n = np.empty(5)
    n[0] = 0.0
    n[1] = 0.0
    n[2] = v
    n[3] = u
    n[4] = 0.0
    S = np.empty((5, 5))
    for r in range(5):
        for c in range(5):
            S[r, c] = 1.0 if r == c else 0.0
    # reset row: h+ = H+(U), independent of old h
    S[4, 0] = gH[0]
    S[4, 1] = gH[1]
    S[4, 2] = gH[2]
    S[4, 3] = gH[3]
    S[4, 4] = 0.0
    for r in range(5):
        coeff = (xp5[r] - drxm[r]) / denom
        for c in range(5):
            S[r, c] += coeff * n[c]
    out = np.empty((5, nvar))
    for r in range(5):
        for c in range(nvar):
            val = 0.0
            for m in range(5):
                val += S[r, m] * M[m, c]
            out[r, c] = val
    for r in range(5):
        for c in range(nvar):
            M[r, c] = out[r, c]
    return denom


@njit(cache=True)
def _flow_core(y, M, nvar, regime0, mu, f, R, r_esc, tau_budget, switch_budget,
               steps_per_period, tol_abs, stop_mode, tau_end, direction,
               ev, traj, ev_tol):
    """Hybrid flow with guarded regime switching.

    y (len 5) and M (5 x nvar) are advanced in place.  Events are written
    to ev (rows: tau, t, pu, pv, u, v, surface, old_regime, new_regime,
    dh, dell).  traj rows (tau, t, u, v, pu, pv, regime, h, event_flag)
    are filled while capacity lasts (pass shape (0, 9) to disable).

    Returns (status, regime, h, tau, n_events, n_traj, theta_uv).
    """
    max_ev = ev.shape[0]
    max_traj = traj.shape[0]
    sqrtR = math.sqrt(R)
    regime = regime0
    h = _hamiltonian(y, regime, mu, f)
    ell = _laplace_lenz(y, regime, mu, f)
    dtau = _leg_dtau(regime, h, ell, mu, f, steps_per_period) * direction
    tau = 0.0
    theta_uv = 0.0
    n_events = 0
    n_traj = 0
    n_switch = 0
    arm_hi = abs(y[2] * y[3] - R) > 10.0 * ev_tol
    arm_lo = abs(y[2] * y[3] + R) > 10.0 * ev_tol
    y_new = np.empty(5)
    M_new = np.empty((5, max(nvar, 1)))

    if max_traj > 0:
        traj[0, 0] = tau
        traj[0, 1] = y[4]
        traj[0, 2] = y[2]
        traj[0, 3] = y[3]
        traj[0, 4] = y[0]
        traj[0, 5] = y[1]
        traj[0, 6] = regime
        traj[0, 7] = h
        traj[0, 8] = 0.0
        n_traj = 1

    while True:
        if abs(tau) >= tau_budget:
            return ST_BUDGET, regime, h, tau, n_events, n_traj, theta_uv
        step = dtau
        hit_end = False
        if stop_mode == STOP_TAU:
            rem = tau_end - tau
            if rem == 0.0:
                return ST_TAU_END, regime, h, tau, n_events, n_traj, theta_uv
            if abs(rem) <= abs(step):
                step = rem
                hit_end = True
        if not _gauss_step(y, M, nvar, regime, h, f, step, tol_abs, y_new, M_new):
            return ST_NOCONV, regime, h, tau, n_events, n_traj, theta_uv

        g1_a = y[2] * y[3] - R
        g2_a = y[2] * y[3] + R
        g1_b = y_new[2] * y_new[3] - R
        g2_b = y_new[2] * y_new[3] + R
        if not arm_hi and abs(g1_a) > 10.0 * ev_tol:
            arm_hi = True
        if not arm_lo and abs(g2_a) > 10.0 * ev_tol:
            arm_lo = True

        th1 = 2.0
        th2 = 2.0
        if arm_hi and (g1_a < 0.0) != (g1_b < 0.0):
            th1, ok1 = _locate_event(y, regime, h, f, step, g1_a, g1_b, 1.0, R, ev_tol, tol_abs)
            if not ok1:
                return ST_NOCONV, regime, h, tau, n_events, n_traj, theta_uv
        if arm_lo and (g2_a < 0.0) != (g2_b < 0.0):
            th2, ok2 = _locate_event(y, regime, h, f, step, g2_a, g2_b, -1.0, R, ev_tol, tol_abs)
            if not ok2:
                return ST_NOCONV, regime, h, tau, n_events, n_traj, theta_uv

        if th1 <= 1.0 or th2 <= 1.0:
            if th1 <= th2:
                theta, sgn = th1, 1.0
            else:
                theta, sgn = th2, -1.0
            if not _gauss_step(y, M, nvar, regime, h, f, step * theta, tol_abs, y_new, M_new):
                return ST_NOCONV, regime, h, tau, n_events, n_traj, theta_uv
            theta_uv += _angle_inc(y[2], y[3], y_new[2], y_new[3])
            for m in range(5):
                y[m] = y_new[m]
            if nvar > 0:
                for r in range(5):
                    for c in range(nvar):
                        M[r, c] = M_new[r, c]
            tau += step * theta

            if abs(y[2]) < sqrtR:
                # not a shadow boundary (x < 0 side of the hyperbola)
                if sgn > 0.0:
                    arm_hi = False
                else:
                    arm_lo = False
                continue

            # genuine regime switch
            gdot = y[0] * y[3] + y[1] * y[2]
            if abs(gdot) < 1e-13 * (1.0 + abs(y[0] * y[3]) + abs(y[1] * y[2])):
                return ST_SINGULAR, regime, h, tau, n_events, n_traj, theta_uv
            reg_new = 1 - regime
            h_new = _hamiltonian(y, reg_new, mu, f)
            ell_new = _laplace_lenz(y, reg_new, mu, f)
            if n_events < max_ev:
                ev[n_events, 0] = tau
                ev[n_events, 1] = y[4]
                ev[n_events, 2] = y[0]
                ev[n_events, 3] = y[1]
                ev[n_events, 4] = y[2]
                ev[n_events, 5] = y[3]
                ev[n_events, 6] = sgn
                ev[n_events, 7] = regime
                ev[n_events, 8] = reg_new
                ev[n_events, 9] = h_new - h
                ev[n_events, 10] = ell_new - ell
                n_events += 1
            if nvar > 0:
                _apply_saltation(M, nvar, y, h, regime, h_new, reg_new, sgn, mu, f)
            if max_traj > 0 and n_traj < max_traj:
                traj[n_traj, 0] = tau
                traj[n_traj, 1] = y[4]
                traj[n_traj, 2] = y[2]
                traj[n_traj, 3] = y[3]
                traj[n_traj, 4] = y[0]
                traj[n_traj, 5] = y[1]
                traj[n_traj, 6] = reg_new
                traj[n_traj, 7] = h_new
                traj[n_traj, 8] = 1.0
                n_traj += 1
            regime = reg_new
            h = h_new
            ell = ell_new
            n_switch += 1
            if sgn > 0.0:
                arm_hi = False
            else:
                arm_lo = False

            if stop_mode == STOP_EVENT:
                return ST_EVENT, regime, h, tau, n_events, n_traj, theta_uv
            if stop_mode == STOP_SECTION and sgn > 0.0:
                want_stark_after = direction > 0.0
                is_match = (regime == STARK) if want_stark_after else (regime == KEPLER)
                if is_match:
                    u, v, pu, pv = y[2], y[3], y[0], y[1]
                    if u * pv > 0.0 and u * pv > -pu * v:
                        return ST_SECTION, regime, h, tau, n_events, n_traj, theta_uv
            if n_switch > switch_budget:
                return ST_BUDGET, regime, h, tau, n_events, n_traj, theta_uv
            dtau = _leg_dtau(regime, h, ell, mu, f, steps_per_period) * direction
            continue

        # no event: accept the full step
        theta_uv += _angle_inc(y[2], y[3], y_new[2], y_new[3])
        for m in range(5):
            y[m] = y_new[m]
        if nvar > 0:
            for r in range(5):
                for c in range(nvar):
                    M[r, c] = M_new[r, c]
        tau += step
        if max_traj > 0 and n_traj < max_traj:
            traj[n_traj, 0] = tau
            traj[n_traj, 1] = y[4]
            traj[n_traj, 2] = y[2]
            traj[n_traj, 3] = y[3]
            traj[n_traj, 4] = y[0]
            traj[n_traj, 5] = y[1]
            traj[n_traj, 6] = regime
            traj[n_traj, 7] = h
            traj[n_traj, 8] = 0.0
            n_traj += 1
        rho = y[2] * y[2] + y[3] * y[3]
        if 0.5 * rho <= R:
            return ST_COLLISION, regime, h, tau, n_events, n_traj, theta_uv
        if 0.5 * rho >= r_esc:
            return ST_ESCAPE, regime, h, tau, n_events, n_traj, theta_uv
        if hit_end:
            return ST_TAU_END, regime, h, tau, n_events, n_traj, theta_uv


@njit(cache=True, parallel=True)
def _map_batch(Y0, kind, mu, f, R, r_esc, tau_budget, switch_budget,
               steps_per_period, tol_abs, direction, event_tol, out):
    """Run the section-return flow over a batch of lifted states.

    Y0: (n, 5) initial states.  out: (n, 8) rows
    (status, pu, pv, u, v, t, theta_uv, tau).
    """
    n = Y0.shape[0]
    for i in prange(n):
        y = Y0[i].copy()
        M = np.zeros((5, 1))
        ev = np.zeros((switch_budget + 2, 11))
        traj = np.zeros((0, 9))
        status, regime, h, tau, n_ev, n_traj, theta = _flow_core(
            y, M, 0, kind, mu, f, R, r_esc, tau_budget, switch_budget,
            steps_per_period, tol_abs, STOP_SECTION, 0.0, direction,
            ev, traj, event_tol)
        out[i, 0] = float(status)
        out[i, 1] = y[0]
        out[i, 2] = y[1]
        out[i, 3] = y[2]
        out[i, 4] = y[3]
        out[i, 5] = y[4]
        out[i, 6] = theta
        out[i, 7] = tau
