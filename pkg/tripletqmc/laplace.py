# Copyright (c) 2020 The tripletqmc authors
# All rights reserved.
#
#   Redistribution and use in source and binary forms, with or
#   without modification, are permitted provided that the following
#   conditions are met:
#
#    1. Redistributions of source code must retain the above copyright
#       notice, this list of conditions and the following disclaimer.
#    2. Redistributions in binary form must reproduce the above
#       copyright notice, this list of conditions and the following
#       disclaimer in the documentation and/or other materials provided
#       with the distribution.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS
# FOR A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE
# COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT,
# INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING,
# BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES;
# LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT
# LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN
# ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE
# POSSIBILITY OF SUCH DAMAGE.

"""Post-processing of Laplace-domain signals C(s).

Rational-polynomial extrapolation, Zakian inversion back to the time domain
and extraction of oscillation frequency and amplitude.
"""

from collections import namedtuple
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares
import logging
import numpy as np

from .error import SimulationError

logger = logging.getLogger(__name__)

__all__ = [
    'ZAKIAN_ALPHA',
    'ZAKIAN_K',
    'RationalModel',
    'rational_fit',
    'check_zakian_constants',
    'zakian_invert',
    'PeakResult',
    'log_derivative_peak',
    'amplitude_estimate',
    'dominant_frequency'
]


# Five-term Zakian tabulation
ZAKIAN_ALPHA = np.array([
    12.83767675 + 1.666063445j,
    12.22613209 + 5.012718792j,
    10.93430308 + 8.409673116j,
    8.776434715 + 11.92185389j,
    5.225453361 + 15.72952905j,
])
ZAKIAN_K = np.array([
    -36902.08210 + 196990.4257j,
    61277.02524 - 95408.62551j,
    -28916.56288 + 18169.18531j,
    4655.361138 - 1.901528642j,
    -118.7414011 - 141.3036911j,
])

DIVERGENCE_FACTOR = 1e6


def _trim(coefficients):
    """Drops negligible leading (highest power) coefficients."""
    coefficients = np.asarray(coefficients, dtype=float)
    scale = np.max(np.abs(coefficients)) if len(coefficients) else 0.0
    degree = len(coefficients) - 1
    while degree > 0 and abs(coefficients[degree]) <= 1e-10 * scale:
        degree -= 1
    return coefficients[:degree + 1]


class RationalModel(object):
    """P(s) / Q(s) with coefficients in ascending powers and Q(0) = 1.

    :param numerator: Coefficients a_0 .. a_p.
    :param denominator: Coefficients 1, b_1 .. b_q.
    :param residual: Root mean square residual of the fit.
    """

    def __init__(self, numerator, denominator, residual=0.0):
        self.numerator = np.asarray(numerator, dtype=float)
        self.denominator = np.asarray(denominator, dtype=float)
        self.residual = float(residual)
        self.history = []

    @property
    def order(self):
        return len(self.numerator) - 1, len(self.denominator) - 1

    @property
    def parameters(self):
        return np.concatenate([self.numerator, self.denominator[1:]])

    def __call__(self, s):
        return (P.polyval(s, self.numerator) /
                P.polyval(s, self.denominator))

    def limit_zero(self):
        """Value of the model as s -> 0."""
        return self.numerator[0] / self.denominator[0]

    def limit_infinity(self):
        """Value of the model as s -> infinity."""
        numerator = _trim(self.numerator)
        denominator = _trim(self.denominator)
        p, q = len(numerator) - 1, len(denominator) - 1
        if p > q:
            raise SimulationError.ERR.UNDEFINED_LIMIT(
                'Numerator degree {} exceeds denominator degree {}'.format(
                    p, q))
        if p < q:
            return 0.0
        return numerator[-1] / denominator[-1]

    def poles(self):
        """Roots of Q not cancelled by a root of P.

        Degenerate fits of a lower-order signal carry a common factor in P
        and Q; such pole-zero pairs do not change the ratio.
        """
        denominator = _trim(self.denominator)
        if len(denominator) < 2:
            return np.zeros(0, dtype=complex)
        poles = list(P.polyroots(denominator))
        numerator = _trim(self.numerator)
        zeros = list(P.polyroots(numerator)) if len(numerator) > 1 else []
        for z in zeros:
            if not poles:
                break
            k = int(np.argmin([abs(p - z) for p in poles]))
            if abs(poles[k] - z) <= 1e-6 * (1 + abs(z)):
                poles.pop(k)
        return np.array(poles, dtype=complex)

    def has_pole_in(self, s_min, s_max):
        """True if the model has a real pole in [s_min, s_max]."""
        poles = self.poles()
        real = poles[np.abs(poles.imag) <= 1e-9 * (1 + np.abs(poles.real))]
        return bool(np.any((real.real >= s_min) & (real.real <= s_max)))

    def __repr__(self):
        return 'RationalModel(order=%r, residual=%.3g)' % (self.order,
                                                           self.residual)


def _split(x, p):
    return x[:p + 1], np.concatenate([[1.0], x[p + 1:]])


def _initial_guess(s, c, p, q):
    """Linearized fit P(s) - c Q(s) + c = 0, solved in least squares."""
    columns = [s ** k for k in range(p + 1)]
    columns += [-c * s ** k for k in range(1, q + 1)]
    x, _, _, _ = np.linalg.lstsq(np.stack(columns, axis=1), c, rcond=None)
    return x


def _fit_order(s, c, p, q, x0):
    def residuals(x):
        a, b = _split(x, p)
        return P.polyval(s, a) / P.polyval(s, b) - c

    solution = least_squares(residuals, x0, method='lm', xtol=1e-15,
                             ftol=1e-15, gtol=1e-15,
                             max_nfev=2000 * (len(x0) + 1))
    a, b = _split(solution.x, p)
    residual = np.sqrt(np.mean(solution.fun ** 2))
    return RationalModel(a, b, residual), solution


def _stable(model, solution, s, limit):
    return (solution.status >= 0 and
            np.all(np.isfinite(model.parameters)) and
            np.isfinite(model.residual) and
            np.max(np.abs(model.parameters)) <= limit and
            not model.has_pole_in(s[0], s[-1]))


def _widen(x, p, q):
    """Warm start for order (p + 1, q + 1) from an optimum at (p, q)."""
    return np.concatenate([x[:p + 1], [0.0], x[p + 1:], [0.0]])


def rational_fit(s_values, c_values, start_order=2, max_order=6):
    """Fits C(s) with rational functions of increasing order.

    Starting at order (start_order, start_order), each accepted optimum
    warm-starts the next order. Escalation stops before the first order
    whose optimum diverges (parameter magnitude above 1e6 times the data
    scale, a pole inside the data range, or a larger residual).

    :param s_values: Distinct positive s values.
    :param c_values: Signal values; the real part is fitted.
    :param start_order: The first order.
    :param max_order: The highest order tried.
    :return: The last stable RationalModel, with `history` listing
        (order, residual) of each accepted order.
    """
    s = np.asarray(s_values, dtype=float)
    c = np.asarray(c_values)
    if np.iscomplexobj(c):
        c = c.real
    c = c.astype(float)
    order = np.argsort(s)
    s, c = s[order], c[order]
    if start_order < 1 or max_order < start_order:
        raise SimulationError.ERR.INVALID_INPUT('Invalid fit orders')
    if len(s) < 2 * (max_order + 1):
        raise SimulationError.ERR.INVALID_INPUT(
            'Need at least {} points for order {}'.format(
                2 * (max_order + 1), max_order))
    if np.any(s <= 0) or np.any(np.diff(s) == 0):
        raise SimulationError.ERR.INVALID_INPUT(
            's values must be positive and distinct')

    scale = np.max(np.abs(c)) or 1.0
    limit = DIVERGENCE_FACTOR * scale
    p = start_order
    x = _initial_guess(s, c, p, p)
    best, solution = _fit_order(s, c, p, p, x)
    if not _stable(best, solution, s, limit):
        raise SimulationError.ERR.FIT_FAILURE(
            'No stable fit at order ({0}, {0}), residual {1:.3g}'.format(
                p, best.residual))
    x = solution.x
    history = [(best.order, best.residual)]
    logger.debug('Order %r: residual %.3g', best.order, best.residual)

    for p in range(start_order + 1, max_order + 1):
        candidate, solution = _fit_order(s, c, p, p, _widen(x, p - 1, p - 1))
        if (not _stable(candidate, solution, s, limit) or
                candidate.residual > best.residual * (1 + 1e-9) + 1e-15):
            logger.warning('Stopping fit escalation at order %r',
                           candidate.order)
            break
        best, x = candidate, solution.x
        history.append((best.order, best.residual))
        logger.debug('Order %r: residual %.3g', best.order, best.residual)

    best.history = history
    return best


def _zakian(f, t):
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    if np.any(flat <= 0):
        raise SimulationError.ERR.INVALID_INPUT('t must be positive')
    points = ZAKIAN_ALPHA[None, :] / flat[:, None]
    values = np.asarray(f(points), dtype=complex).reshape(points.shape)
    result = (2.0 / flat) * np.real(values * ZAKIAN_K[None, :]).sum(axis=1)
    if t.ndim == 0:
        return float(result[0])
    return result.reshape(t.shape)


_constants_checked = []


def check_zakian_constants():
    """Verifies the tabulated constants by inverting 1/s, once."""
    if not _constants_checked:
        value = _zakian(lambda s: 1.0 / s, np.array([0.5, 1.0, 4.0]))
        if np.max(np.abs(value - 1)) > 1e-6:
            raise SimulationError.ERR.ACCURACY(
                'Zakian constants fail the 1/s round trip')
        _constants_checked.append(True)


def zakian_invert(f, t):
    """Numerical inverse Laplace transform by the Zakian method.

    f(t) = (2/t) sum_i Re[K_i F(alpha_i / t)].

    :param f: Callable accepting a complex numpy array of s points, e.g. a
        RationalModel.
    :param t: Positive time or array of times.
    :return: The time-domain value(s).
    """
    check_zakian_constants()
    return _zakian(f, t)


PeakResult = namedtuple('PeakResult', ['frequency', 's', 'derivative'])


def log_derivative_peak(s_values, c_values):
    """Locates the extremum of d log|C| / d log s.

    A natural cubic spline is fitted to log|C| against log s and its
    derivative is sampled on a 10 times refined grid. The extremum counts
    only when it lies strictly inside the grid.

    :return: A PeakResult; `frequency` is the s value of the extremum, or
        None when the derivative has no interior extremum.
    """
    s = np.asarray(s_values, dtype=float)
    magnitude = np.abs(np.asarray(c_values))
    if len(s) < 8:
        raise SimulationError.ERR.INVALID_INPUT('Need at least 8 points')
    if np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise SimulationError.ERR.INVALID_INPUT(
            's values must be positive and ascending')
    if np.any(magnitude == 0):
        raise SimulationError.ERR.INVALID_INPUT('C(s) must be nonzero')

    x = np.log(s)
    spline = CubicSpline(x, np.log(magnitude), bc_type='natural')
    fine = np.linspace(x[0], x[-1], 10 * (len(x) - 1) + 1)
    derivative = spline(fine, 1)
    ends = derivative[[0, -1]]

    k_max = int(np.argmax(derivative))
    k_min = int(np.argmin(derivative))
    rise = derivative[k_max] - ends.max()
    dip = ends.min() - derivative[k_min]
    threshold = 1e-6 * (1 + np.ptp(derivative))
    k = k_max if rise >= dip else k_min
    if max(rise, dip) <= threshold or not 0 < k < len(fine) - 1:
        return PeakResult(None, np.exp(fine), derivative)
    return PeakResult(float(np.exp(fine[k])), np.exp(fine), derivative)


def amplitude_estimate(s_values, c_values, model=None):
    """Distance between the s -> 0 and s -> infinity limits of C(s).

    :param model: A fitted RationalModel; fitted from the data when None.
    """
    if model is None:
        model = rational_fit(s_values, c_values)
    return abs(model.limit_zero() - model.limit_infinity())


def dominant_frequency(times, values):
    """Angular frequency of the largest non-constant Fourier component of a
    uniformly sampled series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    spectrum = np.abs(np.fft.rfft(values - values.mean()))
    frequencies = 2 * np.pi * np.fft.rfftfreq(len(values), times[1] - times[0])
    return float(frequencies[1:][np.argmax(spectrum[1:])])
