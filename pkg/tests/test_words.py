import warnings

import pytest

from neutral_pressure.systems import SymbolicPoint, circle_maps, full_shift
from neutral_pressure.words import iter_orbit, iter_words, level_size, orbit_images


@pytest.mark.parametrize("k,n,size", [(2, 3, 7), (1, 5, 5), (3, 1, 1), (3, 4, 40)])
def test_level_size(k, n, size):
    assert level_size(k, n) == size
    assert len(list(iter_words(k, n))) == size


def test_level_size_errors():
    with pytest.raises(ValueError):
        level_size(0, 3)
    with pytest.raises(ValueError):
        level_size(2, 0)
    with pytest.raises(OverflowError):
        level_size(2, 64)
    with pytest.raises(OverflowError):
        level_size(3, 10, limit=1000)


def test_words_are_length_then_lex():
    assert list(iter_words(2, 3)) == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]


def test_orbit_images_doubling():
    table = orbit_images(circle_maps(2), (0.3,), 3)
    assert set(table) == {(), (1,), (1, 1)}
    assert table[()][0] == pytest.approx(0.3)
    assert table[(1,)][0] == pytest.approx(0.6)
    assert table[(1, 1)][0] == pytest.approx(0.2)


def test_orbit_images_two_generators():
    table = orbit_images(circle_maps(2, 3), (0.1,), 2)
    assert {w: pytest.approx(v[0]) for w, v in table.items()} == {(): 0.1, (1,): 0.2, (2,): 0.3}


def test_orbit_words_compose_left_to_right():
    sysm = circle_maps(2, 3)
    table = orbit_images(sysm, (0.05,), 3)
    assert table[(1, 2)][0] == pytest.approx(0.3)
    assert table[(2, 1)][0] == pytest.approx(0.3)
    assert len(table) == level_size(2, 3)


def test_orbit_table_cap_and_underflow():
    with pytest.raises(MemoryError):
        orbit_images(circle_maps(2, 3), (0.1,), 12, cap=1000)
    with pytest.raises(Exception):
        orbit_images(full_shift(2), SymbolicPoint((0, 1), ()), 4)


def test_identical_generators_warn_and_count_formally():
    from neutral_pressure.systems import build_system
    sysm = build_system({"space": {"kind": "symbolic", "alphabet": 2},
                         "generators": ["shift", "shift"]})
    with pytest.warns(UserWarning):
        table = orbit_images(sysm, SymbolicPoint((), (0, 1)), 3)
    assert len(table) == 7


def test_iter_orbit_matches_table():
    sysm = circle_maps(2, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert dict(iter_orbit(sysm, (0.2,), 4)) == orbit_images(sysm, (0.2,), 4)
