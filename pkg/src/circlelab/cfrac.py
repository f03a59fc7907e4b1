"""Continued fractions on (0, 1) with a terminal infinity symbol.

A rotation number rho in (0, 1) is expanded as

    rho = 1 / (r_0 + 1 / (r_1 + ...))

with integer partial quotients r_i >= 1.  Rational numbers have a
finite expansion; we mark the end either with ``exhausted`` (the
expansion is complete) or with an explicit terminal infinity entry,
1/inf being understood as 0.  The infinity marker is a distinguished
flag on the sequence, never a sentinel integer mixed into the
quotients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConvergentOverflowError, DomainError

_INT64_MAX = 2**63 - 1
_EPS = 2.0**-52


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial-quotient sequence, possibly inf-terminated.

    quotients: finite partial quotients, each an integer >= 1.
    inf_terminated: the expansion ends with the infinity symbol
        (rational value reached exactly, e.g. by a height becoming
        infinite).  Implies exhausted.
    exhausted: no further quotients exist beyond the stored ones.
        False means the sequence is a truncation of something longer.
    """

    quotients: tuple
    inf_terminated: bool = False
    exhausted: bool = False

    def __post_init__(self):
        q = tuple(int(r) for r in self.quotients)
        for r in q:
            if r < 1:
                raise DomainError(f"partial quotient {r} < 1")
        object.__setattr__(self, "quotients", q)
        if self.inf_terminated:
            # the infinity entry can only close the expansion
            object.__setattr__(self, "exhausted", True)

    @property
    def entries(self):
        """Quotients with the terminal infinity rendered as math.inf."""
        if self.inf_terminated:
            return self.quotients + (math.inf,)
        return self.quotients

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        body = ",".join(str(r) for r in self.quotients)
        if self.inf_terminated:
            body = body + ",inf" if body else "inf"
        tail = "" if self.exhausted else ",..."
        return f"[{body}{tail}]"


def from_entries(entries, exhausted=False):
    """Build a ContinuedFraction from a sequence that may end in math.inf."""
    entries = list(entries)
    inf_terminated = False
    if entries and entries[-1] == math.inf:
        entries = entries[:-1]
        inf_terminated = True
    if any(e == math.inf for e in entries):
        raise DomainError("infinity is only allowed as the last entry")
    return ContinuedFraction(tuple(entries), inf_terminated, exhausted or inf_terminated)


def cf_from_real(x, depth):
    """Expand x in (0, 1) to at most ``depth`` partial quotients.

    Extraction stops early, with ``exhausted`` set, when the residual
    drops below 8 * eps * q_m**2: past that point the floating input
    cannot distinguish the value from the rational convergent reached.
    """
    x = float(x)
    if not 0.0 < x < 1.0:
        raise DomainError(f"cf_from_real needs 0 < x < 1, got {x}")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    quotients = []
    y = x
    q_prev, q_cur = 0, 1  # q_{-1}, q_0
    exhausted = False
    for _ in range(depth):
        if y <= 8.0 * _EPS * q_cur * q_cur:
            exhausted = True
            break
        inv = 1.0 / y
        r = math.floor(inv)
        frac = inv - r
        if frac < 0.0:  # guard against floor landing one too high
            r -= 1
            frac = inv - r
        if frac >= 1.0:
            r += 1
            frac = inv - r
        if r < 1:
            r, frac = 1, inv - 1.0
        q_next = r * q_cur + q_prev
        # snap up when the residual sits just under the next integer:
        # at that distance the input cannot justify the split [.., r, 1, R]
        if frac > 0.5 and (1.0 - frac) <= 8.0 * _EPS * (q_next + q_cur) ** 2:
            r += 1
            frac = 0.0
            q_next += q_cur
        if q_next > _INT64_MAX:
            break  # cap the depth rather than wrap
        quotients.append(r)
        q_prev, q_cur = q_cur, q_next
        y = frac
    else:
        # full depth reached; the tail may continue
        return ContinuedFraction(tuple(quotients), False, False)
    return ContinuedFraction(tuple(quotients), False, exhausted)


def cf_from_records(times, ints, terminated=False):
    """Partial quotients from closest-return records.

    times are the record iteration counts, ints the matching integer
    parts of the lift displacement.  Both denominator and numerator
    recurrences are checked in exact integer arithmetic; records past
    the first inconsistency are the footprint of convergence into a
    periodic cycle and terminate the expansion.  ``terminated`` marks
    an expansion the producer already knows is complete (exact landing
    or a confirmed periodic lock).
    """
    times = [int(t) for t in times]
    ints = [int(p) for p in ints]
    if not times:
        # orbit pinned at the base point: value 0
        return from_entries([math.inf])
    if ints[0] == 0:
        if times[0] != 1:
            raise DomainError("record structure: first record late with p=0")
        qs = times
        ps = ints
    else:
        qs = [1] + times
        ps = [0] + ints
    quotients = []
    q_prev, q_cur = 0, qs[0]
    p_prev, p_cur = 1, ps[0]
    valid = 1
    for i in range(1, len(qs)):
        num = qs[i] - q_prev
        if num <= 0 or num % q_cur != 0:
            break
        r = num // q_cur
        if ps[i] != r * p_cur + p_prev:
            break
        quotients.append(r)
        q_prev, q_cur = q_cur, qs[i]
        p_prev, p_cur = p_cur, ps[i]
        valid = i + 1
    if valid < len(qs):
        terminated = True
    if terminated:
        if len(quotients) >= 2 and quotients[-1] == 1:
            # canonical finite form: [.., r, 1] == [.., r + 1]
            quotients = quotients[:-2] + [quotients[-2] + 1]
        return from_entries(quotients + [math.inf])
    return ContinuedFraction(tuple(quotients), False, False)


def real_from_cf(cf):
    """Evaluate the (possibly truncated) expansion as a float.

    The empty expansion evaluates to 0.  A terminal infinity simply
    contributes 0, so it does not change the arithmetic.
    """
    v = 0.0
    for r in reversed(cf.quotients):
        v = 1.0 / (r + v)
    return v


class Convergents(NamedTuple):
    """p[m]/q[m] best rational approximations, m = 0 .. m_max."""

    p: tuple
    q: tuple

    def bound(self, m):
        """|value - p_m/q_m| <= 1/(q_m q_{m+1}); needs level m+1 stored."""
        return 1.0 / (self.q[m] * self.q[m + 1])


def convergents(cf, m_max):
    """Convergent numerators and denominators up to level m_max.

    Uses q_0 = 1, q_1 = r_0, q_{m+1} = r_m q_m + q_{m-1} and
    p_0 = 0, p_1 = 1, p_{m+1} = r_m p_m + p_{m-1}.  Consumes the
    first m_max finite quotients; integers are checked against the
    64-bit range and overflow raises with the offending level.
    """
    if m_max < 0:
        raise DomainError("m_max must be >= 0")
    if m_max > len(cf.quotients):
        raise DomainError(
            f"need {m_max} finite quotients, have {len(cf.quotients)}"
        )
    p = [0, 1]
    q = [1]
    if m_max >= 1:
        q.append(cf.quotients[0])
    for m in range(1, m_max):
        r = cf.quotients[m]
        q_next = r * q[m] + q[m - 1]
        p_next = r * p[m] + p[m - 1]
        if q_next > _INT64_MAX or p_next > _INT64_MAX:
            raise ConvergentOverflowError(m + 1)
        q.append(q_next)
        p.append(p_next)
    return Convergents(tuple(p[: m_max + 1]), tuple(q[: m_max + 1]))


def gauss_shift(cf):
    """Drop the leading quotient: G(rho) = {1/rho}.

    Undefined for the empty expansion and for a leading infinity
    (value 0): raises DomainError in both cases.
    """
    if not cf.quotients:
        raise DomainError("Gauss shift undefined: no leading quotient")
    return ContinuedFraction(cf.quotients[1:], cf.inf_terminated, cf.exhausted)


def is_bounded_type(cf, bound):
    """True iff every finite entry is <= bound and no entry is infinity.

    A truncation can only certify its visible prefix; callers decide
    how much evidence they need.
    """
    if cf.inf_terminated:
        return False
    return all(r <= bound for r in cf.quotients)


def compare_values(a, b):
    """Order the values of two expansions: -1, 0, or +1.

    Works entry by entry with the alternating rule: at even index a
    larger quotient means a smaller value, at odd index a larger one.
    Exhausted expansions are padded with the infinity entry, which is
    exactly the value identity [.., r] = [.., r, inf].  Raises
    DomainError if the order would depend on entries beyond a
    truncated (non-exhausted) sequence.
    """

    def entry(cf, i):
        if i < len(cf.quotients):
            return cf.quotients[i]
        if cf.exhausted:
            # one infinity entry then the expansion is over for good
            return math.inf if i == len(cf.quotients) else None
        return None  # unknown tail

    i = 0
    while True:
        ea, eb = entry(a, i), entry(b, i)
        if ea is None or eb is None:
            if a.exhausted and b.exhausted and ea is None and eb is None:
                return 0
            raise DomainError("order undecidable: truncated expansion")
        if ea != eb:
            bigger_quotient_smaller_value = i % 2 == 0
            if (ea > eb) == bigger_quotient_smaller_value:
                return -1
            return 1
        if ea == math.inf:  # both ended with infinity at the same index
            return 0
        i += 1
