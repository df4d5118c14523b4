"""Hot pointwise kernels.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version. The numba path is used when numba imports cleanly and the
environment variable ``NLS2_DISABLE_NUMBA`` is unset (or "0"). Both paths
compute the same quantities; the test-suite checks them against each other.
"""
import math
import os

import numpy as np

_DISABLE = os.environ.get("NLS2_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLE:
        raise ImportError("numba disabled by NLS2_DISABLE_NUMBA")
    import numba
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def num_threads():
    """Thread cap from ``NLS2_NUM_THREADS`` (None when unset)."""
    val = os.environ.get("NLS2_NUM_THREADS")
    if not val:
        return None
    n = int(val)
    if n < 1:
        raise ValueError("NLS2_NUM_THREADS must be a positive integer")
    return n


# ---------------------------------------------------------------- numpy path

def _np_nonlinear_phase(u, v, tau, beta):
    # in place; returns max(|u|^2, |v|^2), which the rotation leaves unchanged
    au = u.real**2 + u.imag**2
    av = v.real**2 + v.imag**2
    pu = au + beta * av
    pv = av + beta * au
    peak = max(au.max(), av.max())
    u *= np.exp(1j * tau * pu)
    v *= np.exp(1j * tau * pv)
    return float(peak)


def _np_quartic_sum(u, v, beta):
    au = u.real**2 + u.imag**2
    av = v.real**2 + v.imag**2
    return float(np.sum(au * au + 2.0 * beta * au * av + av * av))


def _np_power_sum(f, p):
    return float(np.sum(np.abs(f) ** p))


def _np_max_potential(u, v, beta):
    au = u.real**2 + u.imag**2
    av = v.real**2 + v.imag**2
    return float(max((au + beta * av).max(), (av + beta * au).max()))


def _np_weighted_power(F, w):
    return float(np.sum(w * (F.real**2 + F.imag**2)))


def _np_tail_power(F, k2, cut2):
    p = F.real**2 + F.imag**2
    return float(np.sum(p[k2 > cut2])), float(np.sum(p))


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:

    @njit(cache=True)
    def _nb_nonlinear_phase(u, v, tau, beta):
        uf = u.reshape(-1)
        vf = v.reshape(-1)
        peak = 0.0
        for i in range(uf.size):
            a = uf[i].real * uf[i].real + uf[i].imag * uf[i].imag
            b = vf[i].real * vf[i].real + vf[i].imag * vf[i].imag
            pu = a + beta * b
            pv = b + beta * a
            if a > peak:
                peak = a
            if b > peak:
                peak = b
            uf[i] *= complex(np.cos(tau * pu), np.sin(tau * pu))
            vf[i] *= complex(np.cos(tau * pv), np.sin(tau * pv))
        return peak

    @njit(cache=True)
    def _nb_quartic_sum(u, v, beta):
        uf = u.reshape(-1)
        vf = v.reshape(-1)
        s = 0.0
        for i in range(uf.size):
            a = uf[i].real * uf[i].real + uf[i].imag * uf[i].imag
            b = vf[i].real * vf[i].real + vf[i].imag * vf[i].imag
            s += a * a + 2.0 * beta * a * b + b * b
        return s

    @njit(cache=True)
    def _nb_power_sum(f, p):
        # even powers and p = 5 avoid the generic pow (several times slower)
        ff = f.reshape(-1)
        s = 0.0
        if p == 4.0:
            for i in range(ff.size):
                a2 = ff[i].real * ff[i].real + ff[i].imag * ff[i].imag
                s += a2 * a2
        elif p == 5.0:
            for i in range(ff.size):
                a2 = ff[i].real * ff[i].real + ff[i].imag * ff[i].imag
                s += a2 * a2 * math.sqrt(a2)
        elif p == 2.0:
            for i in range(ff.size):
                s += ff[i].real * ff[i].real + ff[i].imag * ff[i].imag
        else:
            for i in range(ff.size):
                s += abs(ff[i]) ** p
        return s

    @njit(cache=True)
    def _nb_max_potential(u, v, beta):
        uf = u.reshape(-1)
        vf = v.reshape(-1)
        peak = 0.0
        for i in range(uf.size):
            a = uf[i].real * uf[i].real + uf[i].imag * uf[i].imag
            b = vf[i].real * vf[i].real + vf[i].imag * vf[i].imag
            peak = max(peak, a + beta * b, b + beta * a)
        return peak

    @njit(cache=True)
    def _nb_weighted_power(F, w):
        Ff = F.reshape(-1)
        wf = w.reshape(-1)
        s = 0.0
        for i in range(Ff.size):
            s += wf[i] * (Ff[i].real * Ff[i].real + Ff[i].imag * Ff[i].imag)
        return s

    @njit(cache=True)
    def _nb_tail_power(F, k2, cut2):
        Ff = F.reshape(-1)
        kf = k2.reshape(-1)
        tail = 0.0
        total = 0.0
        for i in range(Ff.size):
            p = Ff[i].real * Ff[i].real + Ff[i].imag * Ff[i].imag
            total += p
            if kf[i] > cut2:
                tail += p
        return tail, total

    nonlinear_phase = _nb_nonlinear_phase
    quartic_sum = _nb_quartic_sum
    max_potential = _nb_max_potential
    weighted_power = _nb_weighted_power
    tail_power = _nb_tail_power

    def power_sum(f, p):
        return float(_nb_power_sum(f, float(p)))

    if num_threads() is not None:
        numba.set_num_threads(min(num_threads(), numba.config.NUMBA_NUM_THREADS))
else:
    nonlinear_phase = _np_nonlinear_phase
    quartic_sum = _np_quartic_sum
    max_potential = _np_max_potential
    weighted_power = _np_weighted_power
    tail_power = _np_tail_power
    power_sum = _np_power_sum

BACKEND = "numba" if HAS_NUMBA else "numpy"

NUMPY_KERNELS = {
    "nonlinear_phase": _np_nonlinear_phase,
    "quartic_sum": _np_quartic_sum,
    "power_sum": _np_power_sum,
    "max_potential": _np_max_potential,
    "weighted_power": _np_weighted_power,
    "tail_power": _np_tail_power,
}
