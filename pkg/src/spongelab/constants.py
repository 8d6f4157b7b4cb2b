"""Pure evaluators for the explicit constant pipelines.

Every emitted constant carries an anchor string (the defining formula) and can
be re-substituted into its defining inequality.  Values are exact rationals
wherever the formula is rational; rational powers with non-integer exponents
are enclosed in rational intervals of reported width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .measure import IntervalQ


class ConstantError(ValueError):
    """Domain violation in a constant pipeline."""


def _int_nth_root(v: int, n: int) -> int:
    """floor(v ** (1/n)) for nonnegative integers, by Newton iteration."""
    if v < 0 or n < 1:
        raise ValueError("nth root needs v >= 0, n >= 1")
    if v == 0:
        return 0
    x = 1 << ((v.bit_length() + n - 1) // n)
    while True:
        y = ((n - 1) * x + v // x ** (n - 1)) // n
        if y >= x:
            break
        x = y
    while x**n > v:
        x -= 1
    return x


def qpow_interval(base: Fraction, exponent: Fraction, prec_bits: int = 80) -> IntervalQ:
    """Rational enclosure of base ** exponent for base > 0, rational exponent."""
    base = Fraction(base)
    exponent = Fraction(exponent)
    if base <= 0:
        raise ConstantError("power base must be positive")
    if base == 1 or exponent == 0:
        return IntervalQ.point(Fraction(1))
    if exponent < 0:
        inner = qpow_interval(base, -exponent, prec_bits)
        return IntervalQ(1 / inner.hi, 1 / inner.lo)
    a, b = exponent.numerator, exponent.denominator
    if b == 1:
        return IntervalQ.point(base**a)
    v = base**a if a.bit_length() < 20 else None
    if v is not None and b <= 4096:
        rn = _int_nth_root(v.numerator, b)
        rd = _int_nth_root(v.denominator, b)
        if rn**b == v.numerator and rd**b == v.denominator:
            return IntervalQ.point(Fraction(rn, rd))
    if v is not None and b <= 64:
        # b-th root of v via integer roots at 2^prec_bits resolution
        shift = 1 << prec_bits
        num_scaled = v.numerator * shift**b // v.denominator
        root = _int_nth_root(num_scaled, b)
        return IntervalQ(Fraction(root, shift), Fraction(root + 1, shift))
    # large root index: go through base^e = 2^(e * log2 base)
    lg = _log2_interval(base, prec_bits)
    t_lo = min(exponent * lg.lo, exponent * lg.hi)
    t_hi = max(exponent * lg.lo, exponent * lg.hi)
    return IntervalQ(_two_pow_lower(t_lo, prec_bits), _two_pow_upper(t_hi, prec_bits))


def _two_pow_lower(t: Fraction, prec_bits: int) -> Fraction:
    n = t.numerator // t.denominator
    frac = t - n
    lo, _ = _two_pow_frac(frac, prec_bits)
    return Fraction(2) ** n * lo


def _two_pow_upper(t: Fraction, prec_bits: int) -> Fraction:
    n = t.numerator // t.denominator
    frac = t - n
    _, hi = _two_pow_frac(frac, prec_bits)
    return Fraction(2) ** n * hi


def _two_pow_frac(f: Fraction, prec_bits: int) -> tuple[Fraction, Fraction]:
    """Enclosure of 2^f for f in [0,1), by the square-root chain of 2."""
    if not (0 <= f < 1):
        raise ConstantError("fractional exponent expected")
    P = prec_bits + 16
    one = 1 << P
    lo = hi = one
    c_lo, c_hi = math.isqrt(2 << (2 * P)), math.isqrt(2 << (2 * P)) + 1  # 2^(1/2)
    ff = f
    steps = prec_bits + 8
    for _ in range(steps):
        if ff == 0:
            break
        ff *= 2
        if ff >= 1:
            ff -= 1
            lo = (lo * c_lo) >> P
            hi = ((hi * c_hi) >> P) + 1
        c_lo = math.isqrt(c_lo << P)
        c_hi = math.isqrt(c_hi << P) + 1
    if ff != 0:
        # leftover exponent < 2^-steps, bounded by the current chain factor
        hi = ((hi * c_hi) >> P) + 1
    return Fraction(lo, one), Fraction(hi, one)


@dataclass(frozen=True)
class Constant:
    """A named pipeline output with its defining-formula anchor."""

    name: str
    value: Fraction | IntervalQ
    anchor: str

    def exact(self) -> Fraction:
        if isinstance(self.value, Fraction):
            return self.value
        raise ConstantError(f"{self.name} is interval-valued, width {self.value.width}")

    def as_interval(self) -> IntervalQ:
        if isinstance(self.value, IntervalQ):
            return self.value
        return IntervalQ.point(self.value)

    def to_jsonable(self) -> dict:
        if isinstance(self.value, Fraction):
            val = {"exact": f"{self.value.numerator}/{self.value.denominator}"}
        else:
            val = {
                "lo": f"{self.value.lo.numerator}/{self.value.lo.denominator}",
                "hi": f"{self.value.hi.numerator}/{self.value.hi.denominator}",
                "width": float(self.value.width),
            }
        return {"name": self.name, "anchor": self.anchor, **val}


def tau_threshold(p: Fraction, q: Fraction, delta: Fraction, Delta: Fraction) -> Fraction | IntervalQ:
    """tau0(q, delta) = min{1, (delta / 2 Delta)^(p q / (q - p))}."""
    p, q, delta, Delta = map(Fraction, (p, q, delta, Delta))
    if not (q > p >= 1):
        raise ConstantError(f"need q > p >= 1, got p={p}, q={q}")
    if delta <= 0 or Delta <= 0:
        raise ConstantError("delta and Delta must be positive")
    base = delta / (2 * Delta)
    if base >= 1:
        return Fraction(1)
    expo = p * q / (q - p)
    val = qpow_interval(base, expo)
    if val.lo == val.hi:
        return val.lo
    return IntervalQ(min(val.lo, Fraction(1)), min(val.hi, Fraction(1)))


def isoperimetric_constants(D: Fraction, C_B: Fraction, Lambda_B: Fraction) -> tuple[Fraction | IntervalQ, Fraction]:
    """(C_S, Lambda) = (2 D^(4 + 2 log2(Lambda_B)) C_B, 2 Lambda_B)."""
    D, C_B, Lambda_B = map(Fraction, (D, C_B, Lambda_B))
    if D < 2:
        raise ConstantError("doubling constant must be >= 2")
    if Lambda_B < 1:
        raise ConstantError("inflation factor must be >= 1")
    lam = 2 * Lambda_B
    # D^(4 + 2 log2(Lambda_B)) = D^4 * (D^2)^(log2 Lambda_B) = D^4 * Lambda_B^(2 log2 D);
    # exact whenever Lambda_B is a power of two.
    log2_lb = _exact_log2(Lambda_B)
    if log2_lb is not None:
        c_s: Fraction | IntervalQ = 2 * D ** (4 + 2 * log2_lb) * C_B
    else:
        e = _log2_interval(Lambda_B)
        power = _interval_pow(D, IntervalQ(4 + 2 * e.lo, 4 + 2 * e.hi))
        c_s = IntervalQ(2 * C_B * power.lo, 2 * C_B * power.hi)
    return c_s, lam


def _exact_log2(v: Fraction) -> Optional[int]:
    if v.denominator == 1:
        n = v.numerator
        if n >= 1 and n & (n - 1) == 0:
            return n.bit_length() - 1
    elif v.numerator == 1:
        n = v.denominator
        if n & (n - 1) == 0:
            return -(n.bit_length() - 1)
    return None


def _log2_bits(x_scaled: int, P: int, bits: int, round_up: bool) -> Fraction:
    """Fractional log2 bits of x_scaled/2^P in [1,2), fixed point, directed rounding."""
    acc = Fraction(0)
    w = Fraction(1)
    x = x_scaled
    bias = (1 << P) - 1 if round_up else 0
    for _ in range(bits):
        x = (x * x + bias) >> P
        w /= 2
        if x >= (2 << P):
            acc += w
            x = (x + (1 if round_up else 0)) >> 1
    return acc


def _log2_interval(v: Fraction, prec_bits: int = 48) -> IntervalQ:
    """Rational enclosure of log2(v) via monotone fixed-point digit extraction."""
    if v <= 0:
        raise ConstantError("log2 needs a positive argument")
    k = 0
    while v >= 2:
        v /= 2
        k += 1
    while v < 1:
        v *= 2
        k -= 1
    P = prec_bits + 16
    scaled = v * (1 << P)
    x_floor = scaled.numerator // scaled.denominator
    x_ceil = x_floor if scaled.denominator == 1 else x_floor + 1
    lo = _log2_bits(x_floor, P, prec_bits, round_up=False)
    hi = _log2_bits(x_ceil, P, prec_bits, round_up=True) + Fraction(1, 2**prec_bits)
    return IntervalQ(k + lo, k + hi)


def _interval_pow(base: Fraction, expo: IntervalQ) -> IntervalQ:
    lo = qpow_interval(base, expo.lo)
    hi = qpow_interval(base, expo.hi)
    if base >= 1:
        return IntervalQ(lo.lo, hi.hi)
    return IntervalQ(hi.lo, lo.hi)


def doubling_after_filling(D: Fraction, epsilon: Fraction) -> Fraction:
    """D' = D / (1 - epsilon)."""
    D, epsilon = Fraction(D), Fraction(epsilon)
    if not (0 <= epsilon < 1):
        raise ConstantError("epsilon must lie in [0, 1)")
    return D / (1 - epsilon)


def uniform_ahlfors_constant(A: Fraction, Q: int, C_AR: Fraction) -> Fraction:
    """C = (4 A)^Q * C_AR."""
    A, C_AR = Fraction(A), Fraction(C_AR)
    if A < 1:
        raise ConstantError("uniformity constant must be >= 1")
    if Q <= 0:
        raise ConstantError("regularity exponent must be positive")
    return (4 * A) ** Q * C_AR


@dataclass
class FillingBundle:
    """Full dependency chain delta' -> tau0 -> tau -> m -> n -> eps1."""

    delta_prime: Constant
    tau0: Constant
    tau: Constant
    m: Constant
    n: Constant
    eps1: Constant
    inputs: dict

    def constants(self) -> list[Constant]:
        return [self.delta_prime, self.tau0, self.tau, self.m, self.n, self.eps1]

    def to_jsonable(self) -> dict:
        return {
            "inputs": {k: str(v) for k, v in self.inputs.items()},
            "constants": [c.to_jsonable() for c in self.constants()],
        }

    def verify(self) -> list[str]:
        """Re-substitute each emitted value into its defining inequality.

        Returns the list of violated anchors (empty when the chain is sound).
        Interval quantities are checked with the conservative endpoint.
        """
        bad = []
        p = Fraction(self.inputs["p"])
        q = Fraction(self.inputs["q"])
        D = Fraction(self.inputs["D"])
        C0 = Fraction(self.inputs["C0"])
        lam = Fraction(self.inputs["Lambda"])
        delta = Fraction(self.inputs["delta"])
        eps0 = Fraction(self.inputs["eps0"])
        dp = self.delta_prime.exact()
        tau0 = self.tau0.exact()
        tau = self.tau.exact()
        m = int(self.m.exact())
        n = int(self.n.exact())
        eps1 = self.eps1.exact()

        pw = qpow_interval(2 * D, Fraction(4) / q)
        if not lam * (6 * pw.hi + 2) * dp < delta:
            bad.append(self.delta_prime.anchor)
        if not (2 * lam + 2 * C0 + 4 * lam * pw.hi) * dp <= C0:
            bad.append(self.delta_prime.anchor + " (second choice inequality)")
        if not (2 * D) ** 4 * tau <= tau0 / 2:
            bad.append(self.tau.anchor)
        if not (2 ** (m - 1) <= C0 + 1 < 2**m):
            bad.append(self.m.anchor)
        v = qpow_interval(tau, 1 / p, prec_bits=192)
        v_lo, v_hi = dp * v.lo, dp * v.hi
        two_neg_n = Fraction(1, 2**n)
        if v.lo == v.hi:
            n_ok = v_lo / 2 <= two_neg_n < v_lo
        else:
            # strictness certified against the conservative enclosure endpoints
            n_ok = v_hi / 2 <= two_neg_n < v_lo
        if not n_ok:
            bad.append(self.n.anchor)
        if not (eps1 <= Fraction(1, 4) * D ** -(5 + n + m) * tau and eps1 <= eps0):
            bad.append(self.eps1.anchor)
        return bad


def filling_parameters(
    p: Fraction,
    q: Fraction,
    D: Fraction,
    C0: Fraction,
    Lambda: Fraction,
    delta_target: Fraction,
    eps0: Fraction,
    Delta: Optional[Fraction] = None,
) -> FillingBundle:
    """Evaluate the scale-parameter chain for the filling-to-connectivity step.

    Delta defaults to C0: the two constants are produced together by the same
    connectivity statement and only their ratio to delta' matters here.
    """
    p, q, D, C0, Lambda = map(Fraction, (p, q, D, C0, Lambda))
    delta_target, eps0 = Fraction(delta_target), Fraction(eps0)
    if not q > p >= 1:
        raise ConstantError("need q > p >= 1")
    if delta_target <= 0:
        raise ConstantError("target delta must be positive")
    if min(D, C0, Lambda, eps0) <= 0 or C0 < 1:
        raise ConstantError("D, Lambda, eps0 positive and C0 >= 1 required")
    if Delta is None:
        Delta = C0
    Delta = Fraction(Delta)

    pw = qpow_interval(2 * D, Fraction(4) / q)
    # Safety factor 1/2 below the binding inequality keeps both choices strict.
    bound1 = delta_target / (Lambda * (6 * pw.hi + 2))
    bound2 = C0 / (2 * Lambda + 2 * C0 + 4 * Lambda * pw.hi)
    delta_prime = min(bound1, bound2) / 2

    tau0_raw = tau_threshold(p, q, delta_prime, Delta)
    tau0 = tau0_raw.lo if isinstance(tau0_raw, IntervalQ) else tau0_raw

    tau = tau0 / (2 * (2 * D) ** 4)

    m = 1
    while not (C0 + 1 < Fraction(2) ** m):
        m += 1

    n = _choose_dyadic_exponent(delta_prime, tau, p)

    eps1 = min(Fraction(1, 4) * D ** -(5 + n + m) * tau, eps0)

    inputs = {
        "p": p, "q": q, "D": D, "C0": C0, "Lambda": Lambda,
        "delta": delta_target, "eps0": eps0, "Delta": Delta,
    }
    return FillingBundle(
        delta_prime=Constant("delta_prime", delta_prime,
                             "Lambda*(6*(2D)^(4/q)+2)*delta' < delta, with safety factor 1/2"),
        tau0=Constant("tau0", tau0, "tau0 = min{1, (delta'/2Delta)^(pq/(q-p))}"),
        tau=Constant("tau", tau, "(2D)^4 * tau <= tau0/2"),
        m=Constant("m", Fraction(m), "2^(m-1) < C0+1 < 2^m (larger m on exact powers)"),
        n=Constant("n", Fraction(n), "(1/2)*delta'*tau^(1/p) <= 2^-n < delta'*tau^(1/p)"),
        eps1=Constant("eps1", eps1, "eps1 = min{(1/4)*D^-(5+n+m)*tau, eps0}"),
        inputs=inputs,
    )


def _choose_dyadic_exponent(delta_prime: Fraction, tau: Fraction, p: Fraction) -> int:
    """The unique n with (1/2) delta' tau^(1/p) <= 2^-n < delta' tau^(1/p)."""
    for prec in (96, 192, 384, 768):
        v = qpow_interval(tau, 1 / Fraction(p), prec_bits=prec)
        v_lo, v_hi = delta_prime * v.lo, delta_prime * v.hi
        if v_lo <= 0:
            continue
        n = 0
        while Fraction(1, 2**n) >= v_hi:
            n += 1
        # certified iff the whole enclosure agrees on this n
        if Fraction(1, 2**n) < v_lo and v_hi / 2 <= Fraction(1, 2**n):
            return n
        if v.lo == v.hi:
            # exactly rational value: boundary case 2^-n == v/2 is admissible
            val = v_lo
            n = 0
            while Fraction(1, 2**n) >= val:
                n += 1
            if val / 2 <= Fraction(1, 2**n) < val:
                return n
    raise ConstantError("could not certify the dyadic exponent; enclosure straddles a power of two")
