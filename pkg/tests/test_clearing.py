import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import gaussian_imbalance, scan_root

from qmg.clearing import (
    EMPTY_SIDE,
    NO_CROSSING,
    Division,
    apply_scattering,
    best_division,
    clear_price,
    rescale,
    settle,
    turnover,
    uniform_price_check,
)
from qmg.errors import ValidationError
from qmg.strategy import (
    PriceEigenstate,
    TraderDeclaration,
    make_gaussian,
    make_uniform,
    make_uniform_supply,
)

SIGMA0 = 1 / math.sqrt(2)


def _pair(buyer, seller):
    b = TraderDeclaration(0, make_gaussian(buyer[0], buyer[1]), 0.0, buyer[2])
    s = TraderDeclaration(1, make_gaussian(seller[0], seller[1]), seller[2], 0.0)
    return [b, s]


class TestDivision:
    def test_mask_roundtrip(self):
        ids = [3, 7, 11, 20]
        for mask in range(1, 15):
            d = Division.from_mask(mask, ids)
            assert d.mask == mask
            assert sorted(d.ids) == ids

    def test_disjoint_sides(self):
        with pytest.raises(ValidationError):
            Division((1, 2), (2, 3))


class TestPrice:
    def test_symmetric_pair(self):
        g = make_gaussian(0.0, SIGMA0)
        decls = [TraderDeclaration(0, g, 1.0, 1.0), TraderDeclaration(1, g, 1.0, 1.0)]
        out = best_division(decls)
        assert out.traded
        assert out.ln_c_star == pytest.approx(0.0, abs=1e-9)
        assert sorted(out.delta_money.values()) == pytest.approx([-0.5, 0.5], abs=1e-9)
        assert out.division.mask == 1

    @pytest.mark.parametrize("buyer,seller", [
        ((0.0, 0.8, 1.0), (0.0, 0.8, 1.0)),
        ((0.5, 1.0, 2.0), (-0.3, 0.6, 1.0)),
        ((-1.0, 0.5, 1.0), (2.0, 1.2, 3.0)),
    ])
    def test_against_scan(self, buyer, seller):
        profile = rescale(_pair(buyer, seller), Division((0,), (1,)))
        root = clear_price(profile)
        ref, step = scan_root(lambda x: gaussian_imbalance(x, buyer, seller))
        assert abs(root - ref) <= step

    def test_uniform_pair_clears_at_zero(self):
        b = TraderDeclaration(0, make_uniform(-1.0, 1.0), 0.0, 1.0)
        s = TraderDeclaration(1, make_uniform_supply(-1.0, 1.0), 1.0, 0.0)
        root = clear_price(rescale([b, s], Division((0,), (1,))))
        assert root == pytest.approx(0.0, abs=5e-3)

    def test_no_overlap_is_no_trade(self):
        b = TraderDeclaration(0, make_uniform(2.0, 3.0), 0.0, 1.0)
        s = TraderDeclaration(1, make_uniform_supply(2.0, 3.0), 1.0, 0.0)
        profile = rescale([b, s], Division((0,), (1,)))
        assert clear_price(profile) is None
        out = best_division([b, s])
        assert not out.traded and out.reason == NO_CROSSING
        assert out.turnover == 0.0

    def test_one_sided_market(self):
        out = best_division([TraderDeclaration(0, PriceEigenstate("demand", 0.0), 0.0, 1.0)])
        assert out.reason == EMPTY_SIDE

    def test_probability_mode_ignores_scale(self):
        decls = _pair((0.2, 0.9, 5.0), (-0.1, 0.7, 2.0))
        a = clear_price(rescale(decls, Division((0,), (1,)), "probability"))
        decls2 = _pair((0.2, 0.9, 1.0), (-0.1, 0.7, 1.0))
        b = clear_price(rescale(decls2, Division((0,), (1,)), "capital"))
        assert a == pytest.approx(b, abs=1e-10)


class TestSettlement:
    @settings(max_examples=25, deadline=None)
    @given(
        q=st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=4),
        caps=st.lists(st.floats(0.1, 3.0), min_size=8, max_size=8),
    )
    def test_zero_sum(self, q, caps):
        decls = [
            TraderDeclaration(i, make_gaussian(q0, 0.5 + 0.2 * i), caps[2 * i], caps[2 * i + 1])
            for i, q0 in enumerate(q)
        ]
        out = best_division(decls)
        assert out.traded
        c = math.exp(out.ln_c_star)
        j = out.turnover
        assert abs(sum(out.delta_money.values())) <= 1e-9 * j
        assert abs(sum(out.delta_G.values())) <= 1e-9 * j / min(c, 1.0)
        for d in decls:
            # nobody pays more money or delivers more asset than declared
            assert -out.delta_money[d.trader_id] <= d.d + 1e-9
            assert -out.delta_G[d.trader_id] <= d.s + 1e-9
        assert uniform_price_check(out)

    def test_settle_none_is_no_trade(self):
        profile = rescale(_pair((0, 1, 1), (0, 1, 1)), Division((0,), (1,)))
        assert settle(profile, None).reason == NO_CROSSING

    def test_best_division_maximizes_turnover(self):
        decls = _pair((0.3, 0.8, 1.0), (-0.2, 0.6, 1.0))
        decls = [TraderDeclaration(d.trader_id, d.strategy, 1.0, 1.0) for d in decls]
        out = best_division(decls)
        for mask in (1, 2):
            profile = rescale(decls, Division.from_mask(mask, [0, 1]))
            root = clear_price(profile)
            assert turnover(profile, root) <= out.turnover + 1e-12


class TestEigenstates:
    def test_side_constraints(self):
        dem = TraderDeclaration(0, PriceEigenstate("demand", 0.3), 1.0, 1.0)
        g = TraderDeclaration(1, make_gaussian(0.0, 0.7), 1.0, 1.0)
        with pytest.raises(ValidationError):
            rescale([dem, g], Division((1,), (0,)))
        out = best_division([dem, g])
        assert out.division.buyers == (0,)

    def test_demand_eigenstate_step_is_rationed(self):
        # the crossing sits on the eigenstate's step; settlement rations the long side
        dem = TraderDeclaration(0, PriceEigenstate("demand", 0.0), 0.0, 1.0)
        sel = TraderDeclaration(1, make_gaussian(0.0, 0.5), 5.0, 0.0)
        out = best_division([dem, sel])
        assert out.traded
        assert abs(sum(out.delta_money.values())) <= 1e-12


class TestLimits:
    def test_too_many_traders(self):
        g = make_gaussian(0.0, 1.0)
        decls = [TraderDeclaration(i, g, 1.0, 1.0) for i in range(21)]
        with pytest.raises(ValidationError, match="exhaustive"):
            best_division(decls)

    def test_duplicate_ids(self):
        g = make_gaussian(0.0, 1.0)
        with pytest.raises(ValidationError):
            best_division([TraderDeclaration(1, g, 1.0, 1.0), TraderDeclaration(1, g, 1.0, 1.0)])


class TestScattering:
    def test_shifts_mass_and_keeps_norm(self):
        decls = _pair((0.0, 0.7, 1.0), (0.0, 0.7, 1.0))
        out = apply_scattering(decls, Division((0,), (1,)), 0.5, 0.5)
        assert all(s.norm2 == pytest.approx(1.0, rel=1e-10) for s in out)
        # buyer gains weight below ln c = 0, seller gains weight below p = 0
        assert out[0].demand_cdf(0.0) > decls[0].strategy.demand_cdf(0.0) + 0.1
        assert out[1].supply_cdf(0.0) > decls[1].strategy.supply_cdf(0.0) + 0.1

    def test_identity_when_weights_vanish(self):
        decls = _pair((0.0, 0.7, 1.0), (0.0, 0.7, 1.0))
        out = apply_scattering(decls, Division((0,), (1,)), 0.0, 0.0)
        assert out[0] is decls[0].strategy and out[1] is decls[1].strategy
        with pytest.raises(ValidationError):
            apply_scattering(decls, Division((0,), (1,)), -0.1, 0.0)
