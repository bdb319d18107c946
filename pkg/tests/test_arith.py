import math

import pytest
from gmpy2 import mpq

from spincount.arith import exact_sqrt, format_number, harmonic, harmonic_upper, parse_number, to_exact


def test_harmonic_examples():
    assert harmonic(0) == 0
    assert harmonic(1) == 1
    assert harmonic(3) == mpq(11, 6)


def test_harmonic_upper_is_an_upper_bound():
    for m in (1, 5, 100, 3 ** 9):
        assert harmonic_upper(m) >= float(harmonic(m)) - 1e-12
    assert harmonic_upper(10 ** 12) >= math.log(10 ** 12) + 0.5772


@pytest.mark.parametrize("text,val", [("3", mpq(3)), ("2/4", mpq(1, 2)), ("0.25", mpq(1, 4)),
                                      ("-1.5", mpq(-3, 2)), ("1e-3", mpq(1, 1000))])
def test_parse_number(text, val):
    assert parse_number(text) == val
    assert parse_number(format_number(val)) == val


def test_parse_number_rejects_garbage():
    with pytest.raises(ValueError):
        parse_number("abc")
    with pytest.raises(ValueError):
        parse_number("1/0")


def test_exact_sqrt():
    assert exact_sqrt(mpq(9, 4)) == mpq(3, 2)
    r = exact_sqrt(mpq(2))
    assert abs(float(r) - math.sqrt(2)) < 1e-15
    assert to_exact(0.5) == mpq(1, 2)
