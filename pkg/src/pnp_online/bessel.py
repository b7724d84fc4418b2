"""Order-zero Bessel functions J0, Y0 and the outgoing Hankel function H0^(1).

Small arguments use the ascending power series; large arguments use the
Hankel asymptotic expansion with optimal truncation. The crossover at
|x| = 12 balances series cancellation against the smallest asymptotic term,
giving roughly 1e-10 absolute accuracy on both sides.
"""

import math

EULER_GAMMA = 0.5772156649015328606065120900824

_SERIES_CUTOFF = 12.0
_MAX_SERIES_TERMS = 80
_MAX_ASYMPTOTIC_TERMS = 40


def _j0_series(x):
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    for k in range(1, _MAX_SERIES_TERMS):
        term *= -q / (k * k)
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def _y0_series(x):
    # Y0(x) = (2/pi)[(ln(x/2) + gamma) J0(x) + sum_{k>=1} (-1)^{k+1} H_k q^k/(k!)^2]
    q = 0.25 * x * x
    term = 1.0
    harmonic = 0.0
    total = 0.0
    for k in range(1, _MAX_SERIES_TERMS):
        term *= -q / (k * k)
        harmonic += 1.0 / k
        contrib = -term * harmonic
        total += contrib
        if abs(contrib) < 1e-18 * max(abs(total), 1e-300):
            break
    return (2.0 / math.pi) * ((math.log(0.5 * x) + EULER_GAMMA) * _j0_series(x)
                              + total)


def _hankel1_0_asymptotic(x):
    # H0^(1)(x) ~ sqrt(2/(pi x)) e^{i(x - pi/4)} sum_k i^k a_k / x^k with
    # a_k = (-1)^k ((2k-1)!!)^2 / (k! 8^k); truncated at the smallest term.
    total = complex(1.0, 0.0)
    coef = 1.0  # a_k / x^k magnitude carrier, signs folded in below
    ik = complex(1.0, 0.0)
    prev_mag = 1.0
    for k in range(1, _MAX_ASYMPTOTIC_TERMS):
        coef *= -((2 * k - 1) ** 2) / (8.0 * k * x)
        ik *= 1j
        mag = abs(coef)
        if mag > prev_mag:
            break  # divergent tail: stop at the smallest term
        total += ik * coef
        prev_mag = mag
        if mag < 1e-18:
            break
    amplitude = math.sqrt(2.0 / (math.pi * x))
    phase = x - 0.25 * math.pi
    return amplitude * complex(math.cos(phase), math.sin(phase)) * total


def bessel_j0(x):
    """J0(x) for real x."""
    x = abs(float(x))
    if x < _SERIES_CUTOFF:
        return _j0_series(x)
    return _hankel1_0_asymptotic(x).real


def bessel_y0(x):
    """Y0(x) for real x > 0."""
    x = float(x)
    if x <= 0.0:
        raise ValueError("Y0 requires x > 0")
    if x < _SERIES_CUTOFF:
        return _y0_series(x)
    return _hankel1_0_asymptotic(x).imag


def hankel1_0(x):
    """H0^(1)(x) = J0(x) + i Y0(x) for real x > 0."""
    x = float(x)
    if x <= 0.0:
        raise ValueError("H0^(1) requires x > 0")
    if x < _SERIES_CUTOFF:
        return complex(_j0_series(x), _y0_series(x))
    return _hankel1_0_asymptotic(x)
