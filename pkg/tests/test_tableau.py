"""Tests for Butcher tableaux, the DeC rewrite and the Shu-Osher form."""

import numpy as np
import pytest

from rdec.coeffs import NodeFamily
from rdec.tableau import (
    ButcherTableau,
    TableauError,
    dec_to_butcher,
    format_tableau,
    named_tableau,
    rk_step,
    shu_osher_step,
    ssprk22,
    to_shu_osher,
)


def test_dec3_tableau():
    tableau = dec_to_butcher(2, 3)
    assert tableau.stages == 5
    np.testing.assert_allclose(tableau.b, [1 / 6, 0, 0, 4 / 6, 1 / 6], atol=1e-15)
    np.testing.assert_allclose(tableau.c, [0, 0.5, 1, 0.5, 1], atol=1e-15)
    np.testing.assert_allclose(tableau.A[1, 0], 0.5)
    np.testing.assert_allclose(tableau.A[2, 0], 1.0)
    np.testing.assert_allclose(tableau.A[3, :3], [5 / 24, 8 / 24, -1 / 24], atol=1e-15)
    np.testing.assert_allclose(tableau.A[4, :3], [1 / 6, 4 / 6, 1 / 6], atol=1e-15)
    assert tableau.name == "DeC3"


@pytest.mark.parametrize("family", list(NodeFamily))
@pytest.mark.parametrize("d", range(2, 7))
def test_stage_count(family, d):
    tableau = dec_to_butcher(d - 1, d, family)
    assert tableau.stages == (d - 1) ** 2 + 1
    assert tableau.order == d


def test_single_correction_is_explicit_euler():
    tableau = dec_to_butcher(3, 1)
    assert tableau.stages == 1
    np.testing.assert_array_equal(tableau.b, [1.0])


def test_dec2_is_ssprk22():
    dec2, heun = dec_to_butcher(1, 2), ssprk22()
    np.testing.assert_allclose(dec2.A, heun.A)
    np.testing.assert_allclose(dec2.b, heun.b)


def test_zero_corrections_rejected():
    with pytest.raises(TableauError):
        dec_to_butcher(2, 0)


@pytest.mark.parametrize("name,order", [("ssprk22", 2), ("SSPRK33", 3), ("rk44", 4)])
def test_named_order_conditions(name, order):
    t = named_tableau(name)
    A, b, c = t.A, t.b, t.c
    conditions = [b.sum() - 1.0, b @ c - 1 / 2]
    if order >= 3:
        conditions += [b @ c**2 - 1 / 3, b @ A @ c - 1 / 6]
    if order >= 4:
        conditions += [b @ c**3 - 1 / 4, b @ (c * (A @ c)) - 1 / 8]
        conditions += [b @ A @ c**2 - 1 / 12, b @ A @ A @ c - 1 / 24]
    np.testing.assert_allclose(conditions, 0.0, atol=1e-15)


def test_unknown_method():
    with pytest.raises(TableauError, match="Unknown"):
        named_tableau("rk99")


def test_malformed_tableaux():
    with pytest.raises(TableauError):
        ButcherTableau(A=np.ones((2, 2)), b=[0.5, 0.5], c=[0.0, 1.0])
    with pytest.raises(TableauError):
        ButcherTableau(A=[[0, 0], [1, 0]], b=[0.5, 0.6], c=[0.0, 1.0])
    with pytest.raises(TableauError):
        ButcherTableau(A=[[0, 0], [1, 0]], b=[0.5, 0.5], c=[0.0, 0.5])


@pytest.mark.parametrize("tableau", [dec_to_butcher(3, 4), named_tableau("rk44")])
def test_shu_osher_matches_butcher(tableau):
    rng = np.random.default_rng(7)
    L = rng.normal(size=(3, 3))

    def rhs(t, y):
        return np.sin(L @ y) + t

    form = to_shu_osher(tableau)
    assert form.alpha.shape == form.beta.shape == (tableau.stages + 1, tableau.stages)
    np.testing.assert_allclose(form.alpha.sum(axis=1)[1:], 1.0)
    for _ in range(5):
        y0 = rng.normal(size=3)
        expected = rk_step(tableau, rhs, 0.3, y0, 0.1).y_next
        got = shu_osher_step(form, rhs, 0.3, y0, 0.1, c=tableau.c)
        np.testing.assert_allclose(got, expected, rtol=1e-14, atol=1e-15)


def test_rk_step_on_exponential():
    tableau = named_tableau("rk44")
    step = rk_step(tableau, lambda t, y: -y, 0.0, np.array([1.0]), 0.1)
    assert step.stages.shape == (4, 1)
    taylor = 1 - 0.1 + 0.1**2 / 2 - 0.1**3 / 6 + 0.1**4 / 24
    np.testing.assert_allclose(step.y_next, [taylor], rtol=1e-14)


def test_format_tableau():
    text = format_tableau(dec_to_butcher(2, 3))
    assert text.splitlines()[0] == "DeC3 (5 stages)"
    assert "0.166667" in text
