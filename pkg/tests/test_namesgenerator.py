import hypothesis.strategies as st
from hypothesis import given

from lamina.namesgenerator import get_random_name, left, right


@given(st.integers(min_value=0, max_value=2**64))
def test_names_are_stable(seed):
    name = get_random_name(seed)
    assert name == get_random_name(seed)
    adjective, noun = name.split("_")
    assert adjective in left
    assert noun in right
