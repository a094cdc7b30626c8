import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffnets import (
    FluxFunction,
    FluxKind,
    Penaliser,
    UnsupportedKindError,
    diffusivity_eval,
    flux_derivative,
    flux_eval,
    lipschitz_constant,
    penaliser_eval,
)

DIFFUSIVE = [FluxKind.LINEAR, FluxKind.CHARBONNIER, FluxKind.PERONA_MALIK]
lams = st.floats(0.05, 50)


def central(fn, x, h=1e-6):
    return (fn(x + h) - fn(x - h)) / (2 * h)


def test_kind_names_match_cli_spelling():
    assert [k.value for k in FluxKind] == ["linear", "charbonnier", "pm", "relu"]


def test_contrast_must_be_positive():
    with pytest.raises(ValueError):
        FluxFunction(FluxKind.PERONA_MALIK, 0.0)
    FluxFunction(FluxKind.LINEAR, 0.0)


# ---------------------------------------------------------------- diffusivity

def test_pm_diffusivity_values():
    pm = FluxFunction(FluxKind.PERONA_MALIK, 1.0)
    assert diffusivity_eval(pm, 0.0) == 1.0
    assert diffusivity_eval(pm, 1.0) == 0.5


def test_charbonnier_diffusivity_value():
    assert diffusivity_eval(FluxFunction(FluxKind.CHARBONNIER, 2.0), 4.0) == pytest.approx(
        1 / math.sqrt(2), rel=1e-15)


def test_linear_diffusivity_is_one():
    assert diffusivity_eval(FluxFunction(FluxKind.LINEAR), 123.0) == 1.0


def test_relu_has_no_diffusivity():
    with pytest.raises(UnsupportedKindError):
        diffusivity_eval(FluxFunction(FluxKind.RELU), 1.0)


def test_diffusivity_rejects_negative_argument():
    with pytest.raises(ValueError):
        diffusivity_eval(FluxFunction(FluxKind.PERONA_MALIK), -1.0)


@given(st.sampled_from(DIFFUSIVE), lams, st.floats(0, 1e6))
def test_diffusivity_in_unit_interval(kind, lam, s2):
    g = diffusivity_eval(FluxFunction(kind, lam), s2)
    assert 0 < g <= 1


# ---------------------------------------------------------------- flux

def test_flux_reference_values():
    assert flux_eval(FluxFunction(FluxKind.PERONA_MALIK, 3.0), 3.0) == pytest.approx(1.5, rel=1e-15)
    assert flux_eval(FluxFunction(FluxKind.CHARBONNIER, 3.0), 3.0) == pytest.approx(
        3 / math.sqrt(2), rel=1e-15)


@pytest.mark.parametrize("kind", list(FluxKind))
def test_flux_vanishes_at_zero(kind):
    assert flux_eval(FluxFunction(kind, 2.0), 0.0) == 0.0


def test_flux_oddness():
    s = np.random.default_rng(0).normal(scale=30, size=10_000)
    for kind in DIFFUSIVE:
        f = FluxFunction(kind, 7.0)
        np.testing.assert_array_equal(f.phi(-s), -f.phi(s))


def test_relu_flux():
    f = FluxFunction(FluxKind.RELU)
    assert flux_eval(f, -3.0) == 0.0 and flux_eval(f, 2.5) == 2.5


# ---------------------------------------------------------------- derivative

@pytest.mark.parametrize("kind", DIFFUSIVE)
def test_derivative_at_zero_is_one(kind):
    assert flux_derivative(FluxFunction(kind, 4.0), 0.0) == 1.0


def test_pm_derivative_value():
    pm = FluxFunction(FluxKind.PERONA_MALIK, 1.0)
    s = math.sqrt(3)
    assert flux_derivative(pm, s) == pytest.approx(-1 / 8, rel=1e-14)
    assert central(lambda x: flux_eval(pm, x), s) == pytest.approx(-1 / 8, abs=1e-6)


def test_relu_derivative():
    f = FluxFunction(FluxKind.RELU)
    assert flux_derivative(f, 2.0) == 1.0
    assert flux_derivative(f, -2.0) == 0.0
    assert flux_derivative(f, 0.0) == 0.0


@given(st.sampled_from(DIFFUSIVE), lams, st.floats(-100, 100))
def test_derivative_matches_finite_difference(kind, lam, s):
    f = FluxFunction(kind, lam)
    fd = central(lambda x: flux_eval(f, x), s)
    d = flux_derivative(f, s)
    assert abs(d - fd) <= 1e-6 * (1 + abs(d))


@given(st.sampled_from([FluxKind.CHARBONNIER, FluxKind.PERONA_MALIK]), lams, st.floats(-100, 100))
def test_lambda_derivative_matches_finite_difference(kind, lam, s):
    f = FluxFunction(kind, lam)
    h = 1e-6 * lam
    fd = (f.with_lambda(lam + h).phi(s) - f.with_lambda(lam - h).phi(s)) / (2 * h)
    assert float(f.dphi_dlam(s)) == pytest.approx(float(fd), rel=1e-5, abs=1e-7)


# ---------------------------------------------------------------- Lipschitz

@pytest.mark.parametrize("kind", list(FluxKind))
@pytest.mark.parametrize("lam", [0.1, 1.0, 15.0])
def test_lipschitz_constant_is_numeric_sup(kind, lam):
    f = FluxFunction(kind, lam)
    s = np.linspace(-100 * lam, 100 * lam, 400_001)
    sup = np.max(np.abs(f.dphi(s)))
    assert lipschitz_constant(f) == 1.0
    assert sup == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind", DIFFUSIVE)
def test_diffusivity_bounded_by_lipschitz(kind):
    f = FluxFunction(kind, 2.0)
    z = np.linspace(0, 1e4, 100_001)
    assert np.all(f.g(z) <= lipschitz_constant(f))


# ---------------------------------------------------------------- penaliser

@pytest.mark.parametrize("kind", DIFFUSIVE)
def test_penaliser_vanishes_at_zero(kind):
    assert penaliser_eval(Penaliser(kind, 3.0), 0.0) == 0.0


def test_penaliser_reference_values():
    assert penaliser_eval(Penaliser(FluxKind.PERONA_MALIK, 1.0), math.e - 1) == pytest.approx(1.0, rel=1e-15)
    assert penaliser_eval(Penaliser(FluxKind.CHARBONNIER, 1.0), 3.0) == pytest.approx(2.0, rel=1e-15)
    assert penaliser_eval(Penaliser(FluxKind.LINEAR), 3.0) == 3.0


def test_penaliser_domain():
    with pytest.raises(ValueError):
        penaliser_eval(Penaliser(FluxKind.LINEAR), -0.1)
    with pytest.raises(UnsupportedKindError):
        Penaliser(FluxKind.RELU)


@given(st.sampled_from(DIFFUSIVE), lams, st.floats(0, 100))
def test_penaliser_derivative_is_diffusivity(kind, lam, frac):
    p = Penaliser(kind, lam)
    f = FluxFunction(kind, lam)
    h = 1e-6 * max(lam * lam, 1.0)
    z = max(frac * lam * lam, h)
    fd = (penaliser_eval(p, z + h) - penaliser_eval(p, z - h)) / (2 * h)
    assert abs(fd - diffusivity_eval(f, z)) <= 1e-6


@given(st.sampled_from(DIFFUSIVE), lams, st.floats(0, 1e4), st.floats(1e-3, 1e3))
def test_penaliser_increasing(kind, lam, z, dz):
    p = Penaliser(kind, lam)
    assert penaliser_eval(p, z + dz) > penaliser_eval(p, z)
