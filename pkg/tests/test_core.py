import math

import numpy as np
import pytest

from basinwave.core import (
    BasinState,
    RunConfig,
    derive_params,
    permeability_factor,
    reaction_rate,
    rederive,
)
from basinwave.errors import ValidationError


class TestDeriveParams:
    def test_phistar_direct_evaluation(self):
        p = derive_params(m=7, phi0=0.5)
        assert p.phistar == pytest.approx(0.5 * 7 ** (-1.0 / 7.0), rel=1e-14)
        assert p.phistar == pytest.approx(0.37865327106227658, rel=1e-14)

    def test_A_is_direct_ratio(self):
        p = derive_params(beta=21.0, m=7)
        assert p.A == 3.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"phi0": 1.2},
            {"phi0": 0.0},
            {"m": 5},
            {"m": 6},
            {"phi0": 0.7, "psi0": 0.4},
            {"psi0": -0.1},
            {"a0": -1.0},
            {"zstar": -0.5},
            {"sdot": -2.0},
            {"lam": 0.0},
            {"m": 7.5},
        ],
    )
    def test_invalid_inputs_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            derive_params(**kwargs)

    def test_low_beta_warns(self):
        with pytest.warns(UserWarning, match="beta"):
            derive_params(beta=5.0)

    def test_rederive_is_bit_identical(self):
        p = derive_params(lam=1.3, beta=25.0, m=9, phi0=0.42, psi0=0.17)
        q = rederive(p)
        assert q.phistar == p.phistar
        assert q.A == p.A
        assert q == p

    def test_phistar_below_phi0_and_A_positive(self):
        for m in (7, 11, 40):
            p = derive_params(m=m, beta=4.0 * m)
            assert p.phistar < p.phi0
            assert p.A > 0.0


class TestReactionRate:
    def test_unity_on_the_front(self, params_default):
        for h in (0.5, 1.0, 3.7, 12.0):
            assert reaction_rate(h - params_default.zstar, h, params_default) == 1.0

    def test_direct_evaluation(self):
        p = derive_params(beta=20.0)
        h = 1.0
        z = h - p.zstar + 1.0  # exponent argument beta * (-1)
        assert reaction_rate(z, h, p) == pytest.approx(2.0611536224385578e-9, rel=1e-12)

    def test_clamp_contract(self):
        p = derive_params(beta=1000.0, zstar=0.0)
        # exponent argument beta*(h - z) = 1000
        assert reaction_rate(0.0, 1.0, p, exp_clamp=50.0) == math.exp(50.0)
        assert reaction_rate(2.0, 1.0, p, exp_clamp=50.0) == math.exp(-50.0)

    def test_monotone_in_depth_and_boundary(self, params_default):
        z = np.linspace(0.0, 1.0, 50)
        rate = reaction_rate(z, 1.0, params_default, exp_clamp=700.0)
        assert np.all(np.diff(rate) < 0.0)
        h = np.linspace(0.5, 2.0, 50)
        rate_h = reaction_rate(0.3, h, params_default, exp_clamp=700.0)
        assert np.all(np.diff(rate_h) > 0.0)


class TestPermeabilityFactor:
    def test_unity_at_phi0(self, params_default):
        assert permeability_factor(params_default.phi0, params_default) == 1.0

    def test_matches_integer_power(self, params_default):
        phi = np.array([0.3, 0.45, 0.5])
        expected = (phi / params_default.phi0) ** params_default.m
        assert permeability_factor(phi, params_default) == pytest.approx(expected, rel=1e-12)


class TestBasinState:
    def _state(self, n=16, **overrides):
        fields = dict(
            t=0.0,
            h=1.0,
            x=np.linspace(0.0, 1.0, n),
            phi=np.full(n, 0.5),
            psi=np.full(n, 0.3),
        )
        fields.update(overrides)
        return BasinState(**fields)

    def test_valid_state_passes(self, params_default):
        self._state().validate(params_default)

    def test_rejects_bad_grid(self):
        x = np.linspace(0.0, 1.0, 16)
        x[3] = x[4]
        with pytest.raises(ValidationError):
            self._state(x=x).validate()
        with pytest.raises(ValidationError):
            self._state(x=np.linspace(0.1, 1.0, 16)).validate()

    def test_rejects_negative_fields_and_bad_top(self, params_default):
        phi = np.full(16, 0.5)
        phi[5] = -1e-9
        with pytest.raises(ValidationError):
            self._state(phi=phi).validate()
        phi2 = np.full(16, 0.5)
        phi2[-1] = 0.4
        with pytest.raises(ValidationError):
            self._state(phi=phi2).validate(params_default)

    def test_overfill_diagnostic(self):
        state = self._state(phi=np.full(16, 0.8), psi=np.full(16, 0.3))
        assert state.solid_overfill() == pytest.approx(0.1)


class TestRunConfig:
    def test_defaults_valid(self):
        RunConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_nodes": 8},
            {"dt": 0.0},
            {"t_end": -1.0},
            {"exp_clamp": 701.0},
            {"output_every": 0.0},
            {"h0": -0.1},
            {"corrector_iters": 30, "newton_max": 25},
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            RunConfig(**kwargs)
