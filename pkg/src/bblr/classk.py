"""Extended class-K-infinity comparison functions.

A function gamma belongs to extended class K-infinity when it is continuous,
strictly increasing, gamma(0) = 0, and unbounded in both directions. These
are the comparison functions that lower-bound the barrier Lie derivative in
every safety condition this library enforces.

Instances are nonnegative combinations of three shapes:

  * ``Linear``            -- r
  * ``SignedPower(d)``    -- sign(r) * |r|**d, the odd extension of r**d
  * ``PssfShift(g, rho)`` -- g(r - rho) - g(-rho), the robustified transform

All three shapes are strictly increasing through the origin, so any sum with
at least one positive coefficient is again extended class K-infinity. That
keeps the invariants checkable by construction instead of by analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "Linear",
    "SignedPower",
    "PssfShift",
    "ClassKFn",
    "RhoCondition",
    "linear",
    "signed_power",
    "evaluate",
    "add",
    "scale",
    "make_pssf",
    "check_rho_condition",
    "inverse_at",
    "to_records",
    "from_records",
]

INVERSION_TOL = 1e-9
INVERSION_MAX_ITER = 200


@dataclass(frozen=True)
class Linear:
    """Identity shape: value(r) = r."""


@dataclass(frozen=True)
class SignedPower:
    """Odd monomial extension: value(r) = sign(r) * |r|**degree."""

    degree: int

    def __post_init__(self) -> None:
        if not isinstance(self.degree, int) or self.degree < 1:
            raise ValueError(f"signed-power degree must be an integer >= 1, got {self.degree!r}")


@dataclass(frozen=True)
class PssfShift:
    """Shifted wrapper: value(r) = inner(r - rho) - inner(-rho)."""

    inner: "ClassKFn"
    rho: float

    def __post_init__(self) -> None:
        if not self.rho > 0.0:
            raise ValueError(f"pssf shift requires rho > 0, got {self.rho!r}")


Shape = Union[Linear, SignedPower, PssfShift]


def _shape_value(shape: Shape, r: float) -> float:
    if isinstance(shape, Linear):
        return r
    if isinstance(shape, SignedPower):
        return math.copysign(abs(r) ** shape.degree, r)
    return evaluate(shape.inner, r - shape.rho) - evaluate(shape.inner, -shape.rho)


@dataclass(frozen=True)
class ClassKFn:
    """Nonnegative combination of strictly increasing shapes anchored at 0.

    A well-formed instance has at least one effective term and evaluates to a
    strictly increasing function with f(0) = 0. Scaling by zero produces a
    degenerate instance (identically zero); it is tolerated only as a flagged
    summand, e.g. the zero residual bound of an untrained regression.
    """

    terms: tuple[tuple[float, Shape], ...]

    def __post_init__(self) -> None:
        for coeff, shape in self.terms:
            if not math.isfinite(coeff) or coeff < 0.0:
                raise ValueError(f"term coefficients must be finite and >= 0, got {coeff!r}")
            if not isinstance(shape, (Linear, SignedPower, PssfShift)):
                raise TypeError(f"unsupported shape {shape!r}")

    @property
    def is_degenerate(self) -> bool:
        """True when the function is identically zero (no effective term)."""
        for coeff, shape in self.terms:
            if coeff <= 0.0:
                continue
            if isinstance(shape, PssfShift) and shape.inner.is_degenerate:
                continue
            return False
        return True

    def __call__(self, r: float) -> float:
        return evaluate(self, r)


def linear(coeff: float = 1.0) -> ClassKFn:
    """coeff * r."""
    return ClassKFn(((float(coeff), Linear()),))


def signed_power(degree: int, coeff: float = 1.0) -> ClassKFn:
    """coeff * sign(r) * |r|**degree."""
    return ClassKFn(((float(coeff), SignedPower(degree)),))


def zero() -> ClassKFn:
    """The degenerate identically-zero instance."""
    return ClassKFn(((0.0, Linear()),))


def evaluate(fn: ClassKFn, r: float) -> float:
    """Evaluate fn at r. Total on the reals; fn(0) = 0 exactly."""
    return sum(coeff * _shape_value(shape, r) for coeff, shape in fn.terms)


def add(a: ClassKFn, b: ClassKFn) -> ClassKFn:
    """Pointwise sum; the class is closed under addition."""
    return ClassKFn(a.terms + b.terms)


def scale(fn: ClassKFn, c: float) -> ClassKFn:
    """Pointwise scaling by c >= 0. c = 0 yields a degenerate instance."""
    if not math.isfinite(c) or c < 0.0:
        raise ValueError(f"scale factor must be finite and >= 0, got {c!r}")
    return ClassKFn(tuple((c * coeff, shape) for coeff, shape in fn.terms))


def make_pssf(gamma: ClassKFn, rho: float) -> ClassKFn:
    """The robustified comparison function r -> gamma(r - rho) - gamma(-rho).

    Strictly increasing with value 0 at r = 0, so it is again extended class
    K-infinity whenever gamma is.
    """
    if not rho > 0.0:
        raise ValueError(f"rho must be > 0, got {rho!r}")
    if gamma.is_degenerate:
        raise ValueError("cannot build the shifted transform of a degenerate function")
    return ClassKFn(((1.0, PssfShift(gamma, float(rho))),))


@dataclass(frozen=True)
class RhoCondition:
    """Outcome of the disturbance-margin check rho <= -gamma(-rho).

    When the check fails, ``h0`` (negative) is the shift such that only
    {x : h(x) + h0 >= 0} can be certified invariant.
    """

    holds: bool
    h0: float | None = None


def check_rho_condition(gamma: ClassKFn, rho: float) -> RhoCondition:
    """Check rho <= -gamma(-rho); on failure report h0 = gamma^{-1}(-rho) + rho."""
    if not rho > 0.0:
        raise ValueError(f"rho must be > 0, got {rho!r}")
    if rho <= -evaluate(gamma, -rho):
        return RhoCondition(holds=True)
    h0 = inverse_at(gamma, -rho) + rho
    return RhoCondition(holds=False, h0=h0)


def inverse_at(
    gamma: ClassKFn,
    v: float,
    tol: float = INVERSION_TOL,
    max_iter: int = INVERSION_MAX_ITER,
) -> float:
    """Solve gamma(r) = v by bisection to |gamma(r) - v| <= tol.

    The initial bracket [-1, 1] is grown geometrically until it straddles v;
    strict monotonicity and surjectivity guarantee a unique root. Raises if
    the iteration cap is exceeded (the practical symptom of a degenerate or
    malformed gamma).
    """
    if gamma.is_degenerate:
        raise ValueError("degenerate function has no inverse")
    lo, hi = -1.0, 1.0
    grow = 0
    while evaluate(gamma, hi) < v:
        hi *= 2.0
        grow += 1
        if grow > max_iter:
            raise ValueError(f"bracket growth exceeded {max_iter} iterations at v={v!r}")
    while evaluate(gamma, lo) > v:
        lo *= 2.0
        grow += 1
        if grow > max_iter:
            raise ValueError(f"bracket growth exceeded {max_iter} iterations at v={v!r}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = evaluate(gamma, mid)
        if abs(val - v) <= tol:
            return mid
        if val < v:
            lo = mid
        else:
            hi = mid
    raise ValueError(f"bisection did not converge within {max_iter} iterations at v={v!r}")


def to_records(fn: ClassKFn) -> list[dict]:
    """Serialize to tagged records, e.g. {"kind": "linear", "coeff": 1.0}."""
    records = []
    for coeff, shape in fn.terms:
        if isinstance(shape, Linear):
            records.append({"kind": "linear", "coeff": coeff})
        elif isinstance(shape, SignedPower):
            records.append({"kind": "signed_power", "degree": shape.degree, "coeff": coeff})
        else:
            records.append(
                {
                    "kind": "pssf",
                    "rho": shape.rho,
                    "coeff": coeff,
                    "inner": to_records(shape.inner),
                }
            )
    return records


def from_records(obj) -> ClassKFn:
    """Parse one tagged record or a list of them into a ClassKFn."""
    if isinstance(obj, dict):
        obj = [obj]
    if not isinstance(obj, (list, tuple)) or not obj:
        raise ValueError(f"expected a tagged record or a nonempty list of them, got {obj!r}")
    terms: list[tuple[float, Shape]] = []
    for rec in obj:
        if not isinstance(rec, dict) or "kind" not in rec:
            raise ValueError(f"malformed record {rec!r}")
        kind = rec["kind"]
        coeff = float(rec.get("coeff", 1.0))
        if kind == "linear":
            terms.append((coeff, Linear()))
        elif kind == "signed_power":
            terms.append((coeff, SignedPower(int(rec["degree"]))))
        elif kind == "pssf":
            terms.append((coeff, PssfShift(from_records(rec["inner"]), float(rec["rho"]))))
        else:
            raise ValueError(f"unknown shape kind {kind!r}")
    return ClassKFn(tuple(terms))
