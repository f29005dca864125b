"""Rational-number encoding of binary stacks and the linear stack kernels.

A stack word ``w = w1 w2 ... wn`` (w1 = top) is encoded as the exact rational

    q = sum_i (2*w[i] + 1) / 4**i

so the empty stack is 0, any nonempty stack lies in [1/4, 1), a stack whose
top bit is 1 lies in [3/4, 1) and a stack whose top bit is 0 lies in
[1/4, 1/2). The gap around 1/2 is what lets a hard threshold read the top
bit: the affine forms used by the read kernels never land in (0, 1) shifted
against the threshold center 1/2 (the "separation" property; see tests).

Everything here is exact `fractions.Fraction` arithmetic. No floats: a
single rounding error would leak probability out of the point masses that
the inference engine propagates. The only float-producing function is
`logistic`, the finite-steepness companion of `heaviside` used by the soft
inference mode.
"""

from __future__ import annotations

import math
from fractions import Fraction

# A stack value is a plain Fraction; a stack word is a str over {'0','1'},
# index 0 = top of stack.
StackValue = Fraction
BitString = str

ZERO = Fraction(0)
ONE_QUARTER = Fraction(1, 4)
ONE_HALF = Fraction(1, 2)
ONE = Fraction(1)


class InvalidEncoding(ValueError):
    """Rational is not the encoding of any finite binary stack."""


class ThresholdAmbiguous(ArithmeticError):
    """Heaviside argument hit the center point 1/2 exactly.

    Unreachable from valid stack values; raising instead of guessing makes
    corrupted networks fail loudly.
    """


class EmptyStack(ValueError):
    """Read or pop attempted on the empty-stack encoding q = 0."""


class TopMismatch(ValueError):
    """pop() called with a bit that is not the actual top of the stack."""


def encode(word: BitString) -> StackValue:
    """Encode a binary word (top bit first) into its stack rational."""
    n = len(word)
    acc = 0
    for ch in word:
        if ch == "0":
            acc = 4 * acc + 1
        elif ch == "1":
            acc = 4 * acc + 3
        else:
            raise ValueError(f"stack word must be over {{0,1}}, got {word!r}")
    # acc == q * 4**n by Horner's rule; one Fraction construction keeps the
    # exhaustive round-trip tests inside their time budget.
    return Fraction(acc, 4**n)


def depth(q: StackValue) -> int:
    """Number of bits in the stack encoded by ``q``.

    Derived from the reduced denominator (a depth-n stack has denominator
    dividing 4**n, and the deepest bit keeps the denominator even), so this
    is O(1) and doubles as the termination bound for `decode`.
    """
    if q == 0:
        return 0
    den = q.denominator
    if den & (den - 1):
        raise InvalidEncoding(f"{q} has non-power-of-two denominator {den}")
    # den == 2**k  =>  n == ceil(k / 2)
    return (den.bit_length()) // 2


def decode(q: StackValue) -> BitString:
    """Recover the binary word encoded by ``q``.

    Runs exactly depth(q) iterations of (read top, pop). The iteration count
    is bounded up front by the reduced denominator, so adversarial inputs
    such as 1/3 (a fixed point of top-0 popping) are rejected instead of
    looping. Raises InvalidEncoding if any intermediate value leaves
    {0} + [1/4, 1) or fails to reach 0 within the bound; a value landing
    exactly on a threshold center propagates ThresholdAmbiguous.
    """
    if q == 0:
        return ""
    if q < ONE_QUARTER or q >= ONE:
        raise InvalidEncoding(f"{q} outside {{0}} u [1/4, 1)")
    n = depth(q)
    # Work on the integer N = q * 4**n; each level mirrors top()/pop() on
    # the rational q_i = N_i / 4**n.
    scale = 4**n
    lo = scale // 4
    cut = 5 * scale  # 8*N > 5*scale  <=>  4q - 2 > 1/2
    acc = q.numerator * (scale // q.denominator)
    bits = []
    for _ in range(n):
        if acc == 0 or acc < lo or acc >= scale:
            raise InvalidEncoding(f"{q} leaves {{0}} u [1/4, 1) while popping")
        eight = 8 * acc
        if eight == cut:
            raise ThresholdAmbiguous(f"top read of {q} hits 1/2 exactly")
        if eight > cut:
            bits.append("1")
            acc = 4 * acc - 3 * scale
        else:
            bits.append("0")
            acc = 4 * acc - scale
    if acc != 0:
        raise InvalidEncoding(f"{q} does not reach the empty stack in {n} pops")
    return "".join(bits)


def heaviside(x: Fraction) -> int:
    """Hard threshold centered at 1/2: 1 if x > 1/2, 0 if x < 1/2.

    The caller applies the affine shift (4q-2 for a top read, 1-4q for an
    empty check) so one kernel serves every threshold CPD.
    """
    if x == ONE_HALF:
        raise ThresholdAmbiguous("heaviside argument is exactly 1/2")
    return 1 if x > ONE_HALF else 0


def logistic(x: Fraction | float, k: float) -> float:
    """Finite-steepness threshold: sigma(k * (x - 1/2)).

    Converges to `heaviside` pointwise as k -> inf. Used by the soft
    inference mode; output is binary64, inputs may stay exact.
    """
    a = k * (float(x) - 0.5)
    if a >= 0.0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


def top(q: StackValue) -> int:
    """Top bit of a nonempty stack: heaviside(4q - 2)."""
    if q == 0:
        raise EmptyStack("top of empty stack")
    return heaviside(4 * q - 2)


def is_empty(q: StackValue) -> int:
    """1 iff the stack is empty: 1 - heaviside(4q)."""
    return 1 - heaviside(4 * q)


def push(q: StackValue, bit: int) -> StackValue:
    """Push a bit: q/4 + (2b+1)/4. Depth grows by one."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return Fraction(q.numerator + (2 * bit + 1) * q.denominator, 4 * q.denominator)


def pop(q: StackValue, bit: int) -> StackValue:
    """Pop the top bit (which the caller must name): 4q - (2b+1).

    The popped bit is an argument rather than a return value because the
    stack-update densities are selected by the already-read top; a mismatch
    would produce a value violating the encoding invariants, so it is
    rejected up front.
    """
    if q == 0:
        raise EmptyStack("pop of empty stack")
    if bit != top(q):
        raise TopMismatch(f"pop with bit {bit} but top({q}) = {top(q)}")
    return Fraction(4 * q.numerator - (2 * bit + 1) * q.denominator, q.denominator)


def is_valid(q: StackValue) -> bool:
    """True iff ``q`` encodes some finite binary stack."""
    try:
        decode(q)
    except (InvalidEncoding, ThresholdAmbiguous):
        return False
    return True


def format_rational(q: Fraction) -> str:
    """Serialize exactly, always as 'numerator/denominator'."""
    return f"{q.numerator}/{q.denominator}"


def parse_rational(s: str) -> Fraction:
    """Inverse of `format_rational`; also accepts bare integers."""
    return Fraction(s)
