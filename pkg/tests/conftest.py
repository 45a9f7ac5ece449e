import pytest

from hopfzero.fields import bundled_field
from hopfzero.normalform import reduce_to_normal_form
from hopfzero.precision import working_precision


@pytest.fixture(scope="session")
def nf_standard():
    with working_precision(48):
        return reduce_to_normal_form(bundled_field("standard"))


@pytest.fixture(scope="session")
def nf_vp():
    with working_precision(48):
        return reduce_to_normal_form(bundled_field("volume_preserving"))


@pytest.fixture(scope="session")
def nf_unfolding():
    with working_precision(48):
        return reduce_to_normal_form(bundled_field("unfolding"))
