import numpy as np
import pytest

from momentflow import (
    Batch,
    Kind,
    OrderLadder,
    fractional_chain,
    from_batch,
    update_fractional,
    update_integer,
)
from momentflow.errors import DomainError, LadderMismatch

from conftest import random_batch


def _complex_corpus(rng, n=12, base=100.0, spread=0.05, min_gap=0.15):
    """Positive-shifted complex data whose deviations stay off the mean and
    off the principal-branch cut (the negative real axis)."""
    while True:
        u = rng.uniform(-1.0, 1.0, size=n) + 1j * rng.uniform(-1.0, 1.0, size=n)
        weights = (0.5 + 0.5 * rng.random(n)).tolist()
        d = u - sum(w * x for w, x in zip(weights, u)) / sum(weights)
        if np.min(np.abs(d)) <= min_gap:
            continue
        cut = min((abs(x.imag) for x in d if x.real < 0), default=np.inf)
        if cut > min_gap:
            break
    values = [complex(base + spread * x) for x in u]
    return values, weights


def test_integer_valued_order_reproduces_integer_update(rng):
    ladder = OrderLadder.integer_range(2, 8)
    for _ in range(25):
        base = random_batch(rng, Kind.SCALAR, 16)
        extra = random_batch(rng, Kind.SCALAR, 3)
        state = from_batch(base, ladder)
        advanced = update_integer(state, extra)
        for order in (2.0, 3.0, 5.0, 8.0):
            value, report = update_fractional(state, extra, order, cutoff=12)
            want = advanced.moments[order]
            assert value.value == pytest.approx(want, rel=1e-12, abs=1e-300)
            assert report.converged


def test_small_spread_complex_matches_oracle(rng):
    order, cutoff = 2.5, 12
    ladder = OrderLadder(fractional_chain(order, cutoff))
    for _ in range(20):
        values, weights = _complex_corpus(rng)
        state = from_batch(Batch.from_values(Kind.COMPLEX, values, weights), ladder)
        new_value = complex(state.mean) + complex(rng.normal(), rng.normal()) * 1e-6
        extra = Batch.from_values(Kind.COMPLEX, [new_value], [1.0])
        got, report = update_fractional(state, extra, order, cutoff)
        oracle = from_batch(
            Batch.from_values(Kind.COMPLEX, values + [new_value], weights + [1.0]),
            OrderLadder([order]),
        ).moments[order]
        assert abs(got.value - oracle) / abs(oracle) < 1e-4
        assert report.converged


def test_zero_shift_collapses_exactly():
    # Unit weights, batch exactly on the mean, Z/Z' dyadic: shift is exactly 0.
    ladder = OrderLadder(fractional_chain(2.5, 6))
    values = [complex(v) for v in (99.0, 99.5, 100.5, 101.0)]
    state = from_batch(Batch.from_values(Kind.COMPLEX, values, [1.0] * 4), ladder)
    assert state.mean == 100.0 + 0j
    extra = Batch.from_values(Kind.COMPLEX, [state.mean], [4.0])
    value, report = update_fractional(state, extra, 2.5, 6)
    assert report.converged
    assert report.term_norms[1:] == (0.0,) * 6
    # pure renormalization: (Z/Z') * M + batch contribution of zero deviation
    assert value.value == 0.5 * state.moments[2.5]


def test_large_shift_reports_divergence(rng):
    order, cutoff = 2.5, 12
    ladder = OrderLadder(fractional_chain(order, cutoff))
    values, weights = _complex_corpus(rng, spread=0.05)
    state = from_batch(Batch.from_values(Kind.COMPLEX, values, weights), ladder)
    # push the mean well past the smallest deviation magnitude
    extra = Batch.from_values(Kind.COMPLEX, [complex(state.mean) + 5.0], [state.z])
    _, report = update_fractional(state, extra, order, cutoff)
    assert not report.converged


def test_missing_chain_orders_rejected(rng):
    ladder = OrderLadder(fractional_chain(2.5, 3))
    values, weights = _complex_corpus(rng)
    state = from_batch(Batch.from_values(Kind.COMPLEX, values, weights), ladder)
    extra = random_batch(rng, Kind.COMPLEX, 1)
    with pytest.raises(LadderMismatch):
        update_fractional(state, extra, 2.5, cutoff=8)


def test_real_kind_fractional_needs_positive_deviations():
    # around a weighted mean, deviations of plain positive-weight data take
    # both signs, so real-kind fractional moments refuse at construction
    with pytest.raises(DomainError):
        from_batch(
            Batch.from_values(Kind.SCALAR, [1.0, 2.0, 3.0], [1, 1, 1]),
            OrderLadder([2.5]),
        )
    # a negative weight can pin the mean below the data: construction works,
    # but a batch record below the new mean still fails in the update
    state = from_batch(
        Batch.from_values(Kind.SCALAR, [1.0, 2.0], [3.0, -1.0]),
        OrderLadder([2.5]),
    )
    assert state.mean == 0.5
    with pytest.raises(DomainError):
        update_fractional(state, Batch.from_values(Kind.SCALAR, [0.0], [1.0]), 2.5, cutoff=0)


def test_negative_order_pole_guard():
    # 3.0 sits exactly on the mean of {2,3,4}: the pole.
    with pytest.raises(DomainError):
        from_batch(
            Batch.from_values(Kind.COMPLEX, [2, 3, 4], [1, 1, 1]),
            OrderLadder([-0.5]),
        )
    # off-mean data is fine
    from_batch(
        Batch.from_values(Kind.COMPLEX, [2, 3, 4, 6], [1, 1, 1, 1]),
        OrderLadder([-0.5]),
    )


def test_report_shape(rng):
    ladder = OrderLadder(fractional_chain(2.5, 5))
    values, weights = _complex_corpus(rng)
    state = from_batch(Batch.from_values(Kind.COMPLEX, values, weights), ladder)
    extra = Batch.from_values(Kind.COMPLEX, [complex(state.mean) + 1e-3], [1.0])
    _, report = update_fractional(state, extra, 2.5, 5, tol=1e-9)
    assert report.order == 2.5
    assert report.cutoff == 5
    assert report.tol == 1e-9
    assert len(report.term_norms) == 6


def test_fractional_from_batch_oracle_consistency(rng):
    # the reference path itself: principal-branch powers, direct sum
    values, weights = _complex_corpus(rng, n=6)
    state = from_batch(Batch.from_values(Kind.COMPLEX, values, weights), OrderLadder([2.5]))
    z = sum(weights)
    mean = sum(w * v for w, v in zip(weights, values)) / z
    direct = sum(w * (v - mean) ** 2.5 for w, v in zip(weights, values)) / z
    assert state.moments[2.5] == pytest.approx(direct, rel=1e-12)
