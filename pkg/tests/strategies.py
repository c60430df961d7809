"""Hypothesis strategies shared by the unit tests.

Coefficients live on the grid k/16 so sums and products stay exact.
"""

import numpy as np
from hypothesis import strategies as st

from fermirg.norm_domain import NormElement, SaturatedSet

GRID = 16


def grid_floats(high=2.0):
    return st.integers(0, int(high * GRID)).map(lambda k: k / GRID)


@st.composite
def saturated_sets(draw, max_d=2, max_r0=2, max_r=2):
    d = draw(st.integers(1, max_d))
    if draw(st.booleans()):
        return SaturatedSet.box(d, draw(st.integers(0, max_r0)), draw(st.integers(0, max_r)))
    return SaturatedSet.total_degree(d, draw(st.integers(0, max_r0 + max_r)))


@st.composite
def norm_elements(draw, domain, high=2.0, body=None):
    coeffs = draw(st.lists(grid_floats(high), min_size=len(domain), max_size=len(domain)))
    if body is not None:
        coeffs[0] = body
    return NormElement(domain, np.array(coeffs))


@st.composite
def domain_with_elements(draw, count=2, high=2.0):
    domain = draw(saturated_sets())
    return (domain, *(draw(norm_elements(domain, high)) for _ in range(count)))


def seeds():
    return st.integers(0, 2**32 - 1)
