"""Streaming weighted central moments.

A MomentState is the compact accumulator: the weight sum Z, the weighted
mean, the record count, and the central moments on a configured ladder of
orders. It is the only thing that has to survive between updates; the raw
data may be discarded.

Two evaluation routes exist and are kept deliberately independent:

* ``from_batch`` is the reference path. It evaluates every ladder order
  directly as (1/Z) * sum_i w_i * (x_i - mean)**n over the full dataset.
* ``update_integer`` / ``update_fractional`` advance an existing state using
  only the appended batch, re-centering the stored moments onto the new mean
  through a binomial expansion. Cost is proportional to the batch size plus
  ladder work that does not depend on how much data the state has absorbed.

Every operation returns a new value; states are immutable and safe to share
across threads. Concurrent merges of disjoint states need no coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .binomial import MAX_EXACT_ORDER, binomial_row
from .elements import (
    ElementValue,
    Kind,
    Payload,
    WeightedDatum,
    norm_payload,
    one_payload,
    pow_payload,
    zero_payload,
)
from .errors import (
    BadLadderSpec,
    DomainError,
    EmptyBatch,
    KindMismatch,
    LadderMismatch,
    OrderNotInLadder,
    ValidationError,
    ZeroNormalizer,
)

# |Z| must stay above this fraction of the largest weight magnitude in play;
# every formula divides by it. Negative weights are otherwise fine.
EPS_Z_REL = 1e-12

# A deviation this close to zero (relative to sqrt(M2)) makes negative-order
# moments numerically meaningless: the summand has a pole at the mean.
NEG_ORDER_POLE_REL = 1e-9

DEFAULT_FRACTIONAL_CUTOFF = 12
DEFAULT_FRACTIONAL_TOL = 1e-10


def _is_integer_order(order: float) -> bool:
    return float(order).is_integer()


@dataclass(frozen=True)
class OrderLadder:
    """The sorted set of moment orders an accumulator maintains.

    Integer orders must be >= 2 and gap-free down to 2: the re-centering
    recurrence for order n consumes every stored integer order below it.
    Non-integer orders (including negative ones needed by fractional
    updates) are accepted as-is. Orders 0 and 1 are never stored; their
    moments are the exact constants 1 and 0.
    """

    orders: tuple[float, ...]

    def __init__(self, orders: Iterable[float]) -> None:
        normalized = sorted({float(o) for o in orders})
        if not normalized:
            raise BadLadderSpec("ladder must contain at least one order")
        for o in normalized:
            if not math.isfinite(o):
                raise BadLadderSpec(f"ladder order must be finite, got {o!r}")
            if _is_integer_order(o):
                if o < 2:
                    raise BadLadderSpec(
                        f"integer ladder order must be >= 2, got {int(o)} "
                        "(orders 0 and 1 are the exact constants 1 and 0)"
                    )
                if o > MAX_EXACT_ORDER:
                    raise BadLadderSpec(
                        f"integer ladder order {int(o)} exceeds {MAX_EXACT_ORDER}"
                    )
        ints = [int(o) for o in normalized if _is_integer_order(o)]
        if ints:
            expected = list(range(2, ints[-1] + 1))
            if ints != expected:
                missing = sorted(set(expected) - set(ints))
                raise BadLadderSpec(
                    f"integer orders must be gap-free from 2: missing {missing}"
                )
        object.__setattr__(self, "orders", tuple(normalized))

    @classmethod
    def integer_range(cls, lo: int, hi: int) -> "OrderLadder":
        if lo < 2 or hi < lo:
            raise BadLadderSpec(f"bad integer range {lo}..{hi}")
        return cls(range(lo, hi + 1))

    @property
    def integer_orders(self) -> tuple[int, ...]:
        return tuple(int(o) for o in self.orders if _is_integer_order(o))

    @property
    def fractional_orders(self) -> tuple[float, ...]:
        return tuple(o for o in self.orders if not _is_integer_order(o))

    @property
    def max_integer_order(self) -> int | None:
        ints = self.integer_orders
        return ints[-1] if ints else None

    def __contains__(self, order: float) -> bool:
        return float(order) in self.orders

    def __len__(self) -> int:
        return len(self.orders)


def fractional_chain(target: float, depth: int) -> tuple[float, ...]:
    """Orders target-k for k = 0..depth: what a fractional update consumes."""
    if _is_integer_order(target):
        raise BadLadderSpec(f"fractional chain needs a non-integer target, got {target}")
    if depth < 0:
        raise BadLadderSpec(f"chain depth must be >= 0, got {depth}")
    return tuple(float(target) - k for k in range(depth + 1))


def expand_fractional_targets(
    orders: Iterable[float], depth: int = DEFAULT_FRACTIONAL_CUTOFF
) -> tuple[float, ...]:
    """Close a requested order set over the chains its fractional targets need."""
    out = {float(o) for o in orders}
    for o in sorted(out):
        if not _is_integer_order(o):
            out.update(fractional_chain(o, depth))
    return tuple(sorted(out))


@dataclass(frozen=True)
class Batch:
    """An appended chunk of weighted records, all of one element kind."""

    kind: Kind
    dim: int | None
    values: tuple[Payload, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise EmptyBatch("batch must contain at least one record")
        if len(self.values) != len(self.weights):
            raise ValidationError("values and weights differ in length")
        for w in self.weights:
            if not math.isfinite(w):
                raise ValidationError(f"weight must be finite, got {w!r}")

    @property
    def size(self) -> int:
        return len(self.values)

    @classmethod
    def from_data(cls, data: Sequence[WeightedDatum]) -> "Batch":
        if len(data) == 0:
            raise EmptyBatch("batch must contain at least one record")
        kind = data[0].x.kind
        dim = data[0].x.dim
        for d in data:
            if d.x.kind is not kind or d.x.dim != dim:
                raise KindMismatch("all records in a batch must share one kind")
        return cls(
            kind=kind,
            dim=dim,
            values=tuple(d.x.value for d in data),
            weights=tuple(float(d.weight) for d in data),
        )

    @classmethod
    def from_values(
        cls,
        kind: Kind,
        values: Iterable,
        weights: Iterable[float],
        dim: int | None = None,
    ) -> "Batch":
        if kind is Kind.SCALAR:
            payloads = tuple(float(v) for v in values)
        elif kind is Kind.COMPLEX:
            payloads = tuple(complex(v) for v in values)
        else:
            arrs = []
            for v in values:
                a = np.array(v, dtype=np.float64)
                if dim is None:
                    dim = a.size
                if a.shape != (dim,):
                    raise KindMismatch(f"vector record has shape {a.shape}, want ({dim},)")
                a.flags.writeable = False
                arrs.append(a)
            payloads = tuple(arrs)
            if dim is None:
                raise EmptyBatch("vector batch needs at least one record")
        return cls(kind=kind, dim=dim, values=payloads, weights=tuple(float(w) for w in weights))


@dataclass(frozen=True)
class EmptyState:
    """A configured accumulator that has absorbed no data yet."""

    kind: Kind
    dim: int | None
    ladder: OrderLadder


@dataclass(frozen=True, eq=False)
class MomentState:
    """The compact accumulator; immutable, and all that persistence keeps."""

    kind: Kind
    dim: int | None
    ladder: OrderLadder
    z: float
    mean: Payload
    count: int
    moments: Mapping[float, Payload]

    def __post_init__(self) -> None:
        stored = dict(self.moments)
        if set(stored) != set(self.ladder.orders):
            raise LadderMismatch("stored moment orders do not match the ladder")
        object.__setattr__(self, "moments", MappingProxyType(stored))

    def moment_payload(self, order: float) -> Payload:
        o = float(order)
        if o == 0.0:
            return one_payload(self.kind, self.dim)
        if o == 1.0:
            return zero_payload(self.kind, self.dim)
        try:
            return self.moments[o]
        except KeyError:
            raise OrderNotInLadder(f"order {order} is not in the ladder") from None

    def moment(self, order: float) -> ElementValue:
        return ElementValue(self.kind, self.moment_payload(order))

    @property
    def mean_element(self) -> ElementValue:
        return ElementValue(self.kind, self.mean)


AnyState = Union[MomentState, EmptyState]


def _check_state_batch(state: AnyState, batch: Batch) -> None:
    if state.kind is not batch.kind or state.dim != batch.dim:
        raise KindMismatch(
            f"state holds {state.kind.value} (dim={state.dim}) but batch is "
            f"{batch.kind.value} (dim={batch.dim})"
        )


def _require_nonempty(state: AnyState) -> MomentState:
    if isinstance(state, EmptyState):
        raise ValidationError("operation requires a non-empty state")
    return state


def _guard_normalizer(z: float, scale: float) -> None:
    if abs(z) <= EPS_Z_REL * scale:
        raise ZeroNormalizer(
            f"weight sum {z!r} vanished relative to weight scale {scale!r}"
        )


def _weighted_value_sum(values: Sequence[Payload], weights: Sequence[float]) -> Payload:
    acc = None
    for x, w in zip(values, weights):
        wx = w * x
        acc = wx if acc is None else acc + wx
    return acc


def _integer_power_sums(
    values: Sequence[Payload],
    weights: Sequence[float],
    center: Payload,
    max_order: int,
) -> list[Payload]:
    """sum_i w_i * (x_i - center)**n for n = 2..max_order, by index n-2.

    Deviation powers are accumulated by repeated multiplication, one multiply
    per element per order.
    """
    sums: list = [None] * (max_order - 1)
    for x, w in zip(values, weights):
        d = x - center
        p = d
        for j in range(max_order - 1):
            p = p * d
            wp = w * p
            sums[j] = wp if sums[j] is None else sums[j] + wp
    return sums


def _pole_guard(
    kind: Kind,
    devs: Sequence[Payload],
    weights: Sequence[float],
    z: float,
) -> None:
    """Refuse negative-order moments when any deviation sits on the pole."""
    if kind is Kind.VECTOR:
        m2 = None
        for d, w in zip(devs, weights):
            t = w * (d * d)
            m2 = t if m2 is None else m2 + t
        thr = NEG_ORDER_POLE_REL * np.sqrt(np.abs(m2 / z))
        for d in devs:
            if np.any(np.abs(d) <= thr):
                raise DomainError(
                    "negative-order moment requested but a deviation component "
                    "is on (or numerically at) the pole at the mean"
                )
        return
    m2 = 0.0
    for d, w in zip(devs, weights):
        ad = abs(d)
        m2 += w * ad * ad
    thr = NEG_ORDER_POLE_REL * math.sqrt(abs(m2 / z))
    for d in devs:
        if abs(d) <= thr:
            raise DomainError(
                "negative-order moment requested but a deviation is on "
                "(or numerically at) the pole at the mean"
            )


def from_batch(batch: Batch, ladder: OrderLadder) -> MomentState:
    """Compute a full moment state from scratch over one batch.

    This is the reference evaluation used to validate every incremental
    path: each ladder order is a direct weighted power sum over the data.
    """
    values, weights = batch.values, batch.weights
    z = sum(weights)
    scale = max(abs(w) for w in weights)
    _guard_normalizer(z, scale)
    mean = _weighted_value_sum(values, weights) / z

    moments: dict[float, Payload] = {}
    ints = ladder.integer_orders
    if ints:
        sums = _integer_power_sums(values, weights, mean, ints[-1])
        for n in ints:
            moments[float(n)] = sums[n - 2] / z
    fracs = ladder.fractional_orders
    if fracs:
        devs = [x - mean for x in values]
        if any(q < 0 for q in fracs):
            _pole_guard(batch.kind, devs, weights, z)
        for q in fracs:
            acc = None
            for d, w in zip(devs, weights):
                t = w * pow_payload(batch.kind, d, q)
                acc = t if acc is None else acc + t
            moments[q] = acc / z

    return MomentState(
        kind=batch.kind,
        dim=batch.dim,
        ladder=ladder,
        z=z,
        mean=mean,
        count=batch.size,
        moments=moments,
    )


def update_normalizer(state: MomentState, batch: Batch) -> float:
    """New weight sum Z' = Z + sum of batch weights; touches only the batch."""
    _require_nonempty(state)
    _check_state_batch(state, batch)
    zp = state.z + sum(batch.weights)
    scale = max(abs(state.z), max(abs(w) for w in batch.weights))
    _guard_normalizer(zp, scale)
    return zp


def _advance_mean(state: MomentState, batch: Batch, zp: float) -> Payload:
    swx = _weighted_value_sum(batch.values, batch.weights)
    return (state.z / zp) * state.mean + swx / zp


def update_mean(state: MomentState, batch: Batch, zp: float) -> ElementValue:
    """New mean from the old mean and the batch alone."""
    _require_nonempty(state)
    _check_state_batch(state, batch)
    return ElementValue(state.kind, _advance_mean(state, batch, zp))


def _shift_powers(kind: Kind, dim: int | None, shift: Payload, max_k: int) -> list[Payload]:
    powers: list[Payload] = [one_payload(kind, dim)]
    p = powers[0]
    for _ in range(max_k):
        p = p * shift
        powers.append(p)
    return powers


def _recenter_bracket(
    moments: Mapping[float, Payload], n: int, spow: Sequence[Payload]
) -> Payload:
    """shift**n + sum_{k=0}^{n-2} C(n,k) * M_{n-k} * shift**k.

    Evaluated in descending k so the smallest terms accumulate first; the
    identity is exact but floating-point cancellation grows with n.
    """
    row = binomial_row(n)
    acc = spow[n]
    for k in range(n - 2, -1, -1):
        acc = acc + row[k] * (moments[float(n - k)] * spow[k])
    return acc


def update_integer(state: MomentState, batch: Batch) -> MomentState:
    """Advance every integer ladder order using only the batch.

    Each new moment combines (a) the old moments re-centered onto the new
    mean through a binomial expansion and (b) one weighted power sum over
    the appended records. All orders read a snapshot of the old state:
    the recurrence consumes old moments throughout, so orders are filled
    highest-first into a fresh map. Runtime is O((n_max - 1) * batch) plus
    ladder work independent of the absorbed count.
    """
    _require_nonempty(state)
    _check_state_batch(state, batch)
    if state.ladder.fractional_orders:
        raise LadderMismatch(
            "ladder carries fractional orders; advance them with update_fractional"
        )
    zp = update_normalizer(state, batch)
    meanp = _advance_mean(state, batch, zp)
    shift = state.mean - meanp

    ints = state.ladder.integer_orders
    imax = ints[-1]
    spow = _shift_powers(state.kind, state.dim, shift, imax)
    bsums = _integer_power_sums(batch.values, batch.weights, meanp, imax)
    ratio = state.z / zp

    new_moments: dict[float, Payload] = {}
    old = state.moments
    for n in reversed(ints):
        bracket = _recenter_bracket(old, n, spow)
        new_moments[float(n)] = ratio * bracket + bsums[n - 2] / zp

    return MomentState(
        kind=state.kind,
        dim=state.dim,
        ladder=state.ladder,
        z=zp,
        mean=meanp,
        count=state.count + batch.size,
        moments=new_moments,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Runtime convergence monitor for one truncated series evaluation.

    ``converged`` is set when the last three series terms are each within
    ``tol`` of the running partial-sum norm. Non-convergence is reported,
    never raised: the caller decides what a divergent tail means.
    """

    order: float
    cutoff: int
    tol: float
    term_norms: tuple[float, ...]
    converged: bool


def _required_chain_orders(order: float, cutoff: int) -> list[float]:
    needed = []
    is_int = _is_integer_order(order)
    for k in range(cutoff + 1):
        q = float(order) - k
        if q == 0.0 or q == 1.0:
            continue  # exact implicit constants
        if is_int and k > order:
            break  # generalized coefficients vanish from here on
        needed.append(q)
    return needed


def update_fractional(
    state: MomentState,
    batch: Batch,
    order: float,
    cutoff: int = DEFAULT_FRACTIONAL_CUTOFF,
    tol: float = DEFAULT_FRACTIONAL_TOL,
) -> tuple[ElementValue, ConvergenceReport]:
    """Advance one (typically non-integer) moment order using only the batch.

    The re-centering expansion becomes an infinite series under a
    non-integer order; it is truncated at ``cutoff`` terms with generalized
    binomial coefficients, and a continuation term shift**order stands in
    for the order-0 slot the integer expansion would have reached. Passing
    an integer-valued order reproduces the integer update: the generalized
    coefficients beyond it vanish exactly.

    A mean shift of exactly zero collapses the series to its k=0 term; no
    power of zero is ever formed in that case.
    """
    _require_nonempty(state)
    _check_state_batch(state, batch)
    if cutoff < 0:
        raise ValidationError(f"cutoff must be >= 0, got {cutoff}")
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    forder = float(order)
    for q in _required_chain_orders(forder, cutoff):
        if q not in state.ladder:
            raise LadderMismatch(
                f"updating order {forder} at cutoff {cutoff} needs ladder order {q}"
            )

    zp = update_normalizer(state, batch)
    meanp = _advance_mean(state, batch, zp)
    shift = state.mean - meanp
    kind, dim = state.kind, state.dim
    is_int = _is_integer_order(forder)

    term_norms: list[float] = []
    if norm_payload(kind, shift) == 0.0:
        # Exact collapse: every k >= 1 term carries a factor shift**k = 0.
        partial = state.moments[forder]
        term_norms.append(norm_payload(kind, partial))
        term_norms.extend(0.0 for _ in range(cutoff))
        converged = True
    else:
        if is_int:
            partial = zero_payload(kind, dim)
        else:
            # Continuation of the order-0 slot of the integer expansion.
            partial = pow_payload(kind, shift, forder)
        running = []
        coeff = 1.0
        sp = one_payload(kind, dim)
        for k in range(cutoff + 1):
            if k:
                coeff *= (forder - (k - 1)) / k
                sp = sp * shift
            q = forder - k
            if q == 1.0 or coeff == 0.0:
                term_norms.append(0.0)
                running.append(norm_payload(kind, partial))
                continue
            mq = one_payload(kind, dim) if q == 0.0 else state.moments[q]
            term = coeff * (mq * sp)
            partial = partial + term
            term_norms.append(norm_payload(kind, term))
            running.append(norm_payload(kind, partial))
        window = min(3, len(term_norms))
        converged = all(
            term_norms[-1 - i] <= tol * running[-1 - i] for i in range(window)
        )

    bacc = None
    for x, w in zip(batch.values, batch.weights):
        t = w * pow_payload(kind, x - meanp, forder)
        bacc = t if bacc is None else bacc + t
    value = (state.z / zp) * partial + bacc / zp

    report = ConvergenceReport(
        order=forder,
        cutoff=cutoff,
        tol=tol,
        term_norms=tuple(term_norms),
        converged=converged,
    )
    return ElementValue(kind, value), report


def merge_states(a: AnyState, b: AnyState) -> AnyState:
    """Combine two accumulators as if their datasets were concatenated.

    Each side's moments are re-centered onto the merged mean with the same
    binomial bracket the append update uses; only integer ladders merge.
    Commutative bit-for-bit.
    """
    if isinstance(a, EmptyState) or isinstance(b, EmptyState):
        sa, sb = (a, b) if isinstance(a, EmptyState) else (b, a)
        if a.kind is not b.kind or a.dim != b.dim:
            raise KindMismatch("merging states of different kinds")
        if a.ladder.orders != b.ladder.orders:
            raise LadderMismatch("merging states with different ladders")
        return sb

    if a.kind is not b.kind or a.dim != b.dim:
        raise KindMismatch("merging states of different kinds")
    if a.ladder.orders != b.ladder.orders:
        raise LadderMismatch("merging states with different ladders")
    if a.ladder.fractional_orders:
        raise LadderMismatch("only integer ladders can be merged")

    zp = a.z + b.z
    _guard_normalizer(zp, max(abs(a.z), abs(b.z)))
    wa, wb = a.z / zp, b.z / zp
    meanp = wa * a.mean + wb * b.mean

    ints = a.ladder.integer_orders
    imax = ints[-1]
    spow_a = _shift_powers(a.kind, a.dim, a.mean - meanp, imax)
    spow_b = _shift_powers(b.kind, b.dim, b.mean - meanp, imax)

    moments: dict[float, Payload] = {}
    for n in reversed(ints):
        moments[float(n)] = wa * _recenter_bracket(a.moments, n, spow_a) + (
            wb * _recenter_bracket(b.moments, n, spow_b)
        )

    return MomentState(
        kind=a.kind,
        dim=a.dim,
        ladder=a.ladder,
        z=zp,
        mean=meanp,
        count=a.count + b.count,
        moments=moments,
    )


def _integer_projection(state: MomentState) -> MomentState:
    ints = state.ladder.integer_orders
    ladder = OrderLadder(ints)
    return MomentState(
        kind=state.kind,
        dim=state.dim,
        ladder=ladder,
        z=state.z,
        mean=state.mean,
        count=state.count,
        moments={float(n): state.moments[float(n)] for n in ints},
    )


def _available_depth(ladder: OrderLadder, order: float, cap: int) -> int:
    depth = 0
    while depth < cap:
        q = float(order) - (depth + 1)
        if q == 0.0 or q == 1.0 or q in ladder:
            depth += 1
        else:
            break
    return depth


def append_batch(
    state: AnyState,
    batch: Batch,
    cutoff: int = DEFAULT_FRACTIONAL_CUTOFF,
    tol: float = DEFAULT_FRACTIONAL_TOL,
) -> tuple[MomentState, dict[float, ConvergenceReport]]:
    """Absorb a batch into a state of any ladder shape.

    Empty states are filled from scratch. Integer orders advance through
    the exact recurrence; each fractional order advances through its
    truncated series at the deepest cutoff its chain of stored orders
    supports (at most ``cutoff``).
    """
    if isinstance(state, EmptyState):
        _check_state_batch(state, batch)
        return from_batch(batch, state.ladder), {}

    ladder = state.ladder
    fracs = ladder.fractional_orders
    if not fracs:
        return update_integer(state, batch), {}

    reports: dict[float, ConvergenceReport] = {}
    frac_moments: dict[float, Payload] = {}
    for q in fracs:
        depth = _available_depth(ladder, q, cutoff)
        val, rep = update_fractional(state, batch, q, depth, tol)
        frac_moments[q] = val.value
        reports[q] = rep

    if ladder.integer_orders:
        advanced = update_integer(_integer_projection(state), batch)
        zp, meanp, count = advanced.z, advanced.mean, advanced.count
        moments = dict(advanced.moments)
    else:
        zp = update_normalizer(state, batch)
        meanp = _advance_mean(state, batch, zp)
        count = state.count + batch.size
        moments = {}
    moments.update(frac_moments)

    new_state = MomentState(
        kind=state.kind,
        dim=state.dim,
        ladder=ladder,
        z=zp,
        mean=meanp,
        count=count,
        moments=moments,
    )
    return new_state, reports
