"""Independent oracles for the dimension-6 Q operators on the conformally flat torus.

Both sides of each check are built from different data: the left from the curved
collar series, the right from flat-torus operators and the conformal factor only.
"""

import numpy as np
import pytest

from bgforms.exterior import exterior_derivative
from bgforms.fields import FormField, ScalarField, random_lowfreq_form
from bgforms.solver import Geometry, operator_Lk, operator_Qk
from bgforms.verification import GEOMETRIES

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def conf6():
    spec = GEOMETRIES["conf6_fine"]
    return spec.build(), Geometry.flat(spec.grid), spec.phi.sample(spec.grid)


def _rel(a, b):
    return (a - b).max_abs() / max(a.max_abs(), b.max_abs())


def test_Q1_matches_change_law_oracle(conf6):
    conf, flat, phi = conf6
    c = exterior_derivative(random_lowfreq_form(conf.grid, 0, 2, 3))
    rhs = (operator_Qk(c, flat) + operator_Lk(c * phi, flat) * 4.0) * ScalarField(conf.grid, np.exp(-4 * phi.values))
    assert _rel(operator_Qk(c, conf), rhs) <= 1e-6


def test_Q0_matches_change_law_oracle(conf6):
    conf, flat, phi = conf6
    one = FormField(conf.grid, 0, np.ones((1,) + (1,) * 6))
    rhs = operator_Lk(FormField(conf.grid, 0, phi.values[None]), flat) * ScalarField(conf.grid, 6 * np.exp(-6 * phi.values))
    assert _rel(operator_Qk(one, conf), rhs) <= 1e-6
