"""Valuations, p-adic absolute values, unit characters, cell certificates."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpadic.errors import DomainError
from qpadic.padic_core import (
    Prime,
    UnitCharacter,
    abs_p,
    character_by_descriptor,
    enumerate_characters,
    is_prime,
    poly_abs_on_cell,
    trivial_character,
    valuation,
)

PRIMES = st.sampled_from([2, 3, 5, 7, 11, 13])
ODD_PRIMES = st.sampled_from([3, 5, 7, 11, 13])

nonzero_fractions = st.fractions(
    min_value=Fraction(-10**6), max_value=Fraction(10**6),
    max_denominator=10**6).filter(lambda x: x != 0)


def test_is_prime_small_values():
    assert [n for n in range(2, 30) if is_prime(n)] == \
        [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert not is_prime(1) and not is_prime(0) and not is_prime(-7)


def test_prime_type_rejects_composites():
    assert int(Prime(13)) == 13
    for bad in (1, 4, 9, -3, 15):
        with pytest.raises(DomainError):
            Prime(bad)


@given(x=nonzero_fractions, y=nonzero_fractions, p=PRIMES)
def test_valuation_is_additive(x, y, p):
    assert valuation(x * y, p) == valuation(x, p) + valuation(y, p)


@given(x=nonzero_fractions, y=nonzero_fractions, p=PRIMES)
def test_absolute_value_is_ultrametric(x, y, p):
    if x + y == 0:
        return
    ax, ay = abs_p(x, p), abs_p(y, p)
    assert abs_p(x + y, p) <= max(ax, ay)
    if ax != ay:
        assert abs_p(x + y, p) == max(ax, ay)


def test_valuation_examples():
    assert valuation(12, 2) == 2
    assert valuation(Fraction(9, 4), 3) == 2
    assert valuation(Fraction(1, 27), 3) == -3
    assert math.isinf(valuation(0, 5))
    assert abs_p(Fraction(50), 5) == Fraction(1, 25)
    assert abs_p(0, 5) == 0


@given(p=ODD_PRIMES, data=st.data())
def test_character_is_multiplicative(p, data):
    K = data.draw(st.integers(min_value=1, max_value=2))
    chars = enumerate_characters(p, K)
    chi = data.draw(st.sampled_from(chars))
    modulus = p**K
    units = [u for u in range(1, modulus) if u % p]
    u = data.draw(st.sampled_from(units))
    v = data.draw(st.sampled_from(units))
    assert chi(u * v) == pytest.approx(chi(u) * chi(v), abs=1e-12)
    assert chi(1) == 1


def test_character_group_enumeration():
    for p, K in ((3, 1), (3, 2), (5, 2), (7, 1)):
        chars = enumerate_characters(p, K)
        assert len(chars) == (p - 1) * p ** (K - 1)
        assert chars[0].is_trivial
        assert len(set(chars)) == len(chars)


def test_character_orthogonality():
    p, K = 5, 2
    modulus = p**K
    units = [u for u in range(1, modulus) if u % p]
    for chi in enumerate_characters(p, K):
        total = sum(chi(u) for u in units)
        if chi.is_trivial:
            assert total == pytest.approx(len(units))
        else:
            assert abs(total) < 1e-10
    # dual orthogonality: summing over the character group isolates u = 1
    for u in units:
        total = sum(chi(u) for chi in enumerate_characters(p, K))
        expected = len(units) if u == 1 else 0.0
        assert abs(total - expected) < 1e-10


def test_character_trivial_on_conductor_neighbourhood():
    p = 3
    chi = character_by_descriptor(p, 2, 0)
    assert chi.conductor_exponent == 2
    modulus = p**2
    for k in range(3):
        assert chi(1 + modulus * k + 0) == pytest.approx(1.0)
    # not trivial one level down
    assert any(abs(chi(1 + p * k) - 1) > 0.1 for k in range(1, 3))


def test_character_descriptor_round_trip():
    for p, K in ((3, 2), (5, 1), (5, 2)):
        for chi in enumerate_characters(p, K):
            _, ell, index = chi.descriptor()
            again = character_by_descriptor(p, ell, index)
            assert again == chi


def test_character_rejects_non_units():
    chi = trivial_character(3)
    with pytest.raises(DomainError):
        chi(3)
    with pytest.raises(DomainError):
        chi(0)
    with pytest.raises(DomainError):
        chi(Fraction(1, 3))


def test_character_by_descriptor_validation():
    with pytest.raises(DomainError):
        character_by_descriptor(3, 0, 1)
    with pytest.raises(DomainError):
        character_by_descriptor(3, 1, 99)
    with pytest.raises(DomainError):
        character_by_descriptor(3, -1, 0)


def test_cell_certificate_constant_absolute_value():
    # Q = 1 + x^2 has no root mod 3; every unit cell is constant
    out = poly_abs_on_cell((1, 0, 1), 1, 1, 3)
    assert out.kind == "constant_abs"
    assert out.value_valuation == 0


def test_cell_certificate_simple_root():
    out = poly_abs_on_cell((1, -1), 1, 1, 5)
    assert out.kind == "simple_root"
    assert out.root % 5 == 1
    assert out.derivative_valuation == 0
    # |Q(x)| = |Q'(z)| |x - z| on the cell: check against direct valuations
    K, p = 1, 5
    for t in range(1, 4):
        x = 1 + p**K * t
        lhs = valuation(Fraction(1 - x), p)
        rhs = out.derivative_valuation + valuation(x - out.root, p)
        assert lhs == rhs


@settings(max_examples=60)
@given(a=st.integers(min_value=0, max_value=24))
def test_cell_certificates_match_sampled_valuations(a):
    # degree-2 polynomial with a simple unit root at x = 2 (mod 5)
    Q = (Fraction(-2), Fraction(0), Fraction(1, 2))  # (x^2 - 4)/2
    p, K = 5, 2
    if a % p == 0:
        return
    out = poly_abs_on_cell(Q, a, K, p)
    for t in (0, 1, 7):
        x = Fraction(a + p**K * t)
        v = valuation(Fraction(-2) + Fraction(1, 2) * x * x, p)
        if out.kind == "constant_abs":
            assert v == out.value_valuation
        elif out.kind == "simple_root":
            assert v == out.derivative_valuation + valuation(x - out.root, p)
