import itertools
import math

import pytest

from toolverify.units import (
    DimensionMismatch,
    Quantity,
    UnitConversionRequest,
    UnknownUnit,
    convert,
    parse_unit,
    render_tool_response,
)


class TestParseUnit:
    def test_kj_per_mol(self):
        u = parse_unit("kJ/mol")
        assert u.terms == (("kilojoule", 1), ("mole", -1))
        assert u.factor == pytest.approx(1000.0)

    def test_ev_per_mole_alias(self):
        u = parse_unit("eV/mole")
        assert u.terms == (("electron_volt", 1), ("mole", -1))

    def test_bare_metre(self):
        u = parse_unit("m")
        assert u.terms == (("meter", 1),)
        assert u.factor == 1.0

    def test_backslash_separator(self):
        assert parse_unit(r"eV\mole").dims == parse_unit("eV/mole").dims

    def test_exponent(self):
        u = parse_unit("m^2")
        assert u.dims[0] == 2

    def test_compound_product(self):
        u = parse_unit("N*m")
        assert u.dims == parse_unit("J").dims

    def test_unknown_unit(self):
        with pytest.raises(UnknownUnit):
            parse_unit("flibbles")


class TestConvert:
    def test_kj_mol_to_ev_mole_reference_value(self):
        q = convert(UnitConversionRequest(7.0, "kJ/mol", "eV/mole"))
        assert q.value == 4.369056352122534e22

    def test_identity(self):
        assert convert(UnitConversionRequest(1.0, "m", "m")).value == 1.0

    def test_ev_to_joule_defined_constant(self):
        assert convert(UnitConversionRequest(1.0, "eV", "J")).value == 1.602176634e-19

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            convert(UnitConversionRequest(1.0, "kg", "s"))

    @pytest.mark.parametrize(
        "u,w",
        list(itertools.combinations(["J", "kJ", "eV", "cal", "Wh", "Ha"], 2))
        + list(itertools.combinations(["m", "km", "cm", "mi", "ft", "angstrom"], 2))
        + list(itertools.combinations(["s", "min", "hr", "day"], 2)),
    )
    def test_round_trip(self, u, w):
        v = 3.7
        there = convert(UnitConversionRequest(v, u, w)).value
        back = convert(UnitConversionRequest(there, w, u)).value
        assert back == pytest.approx(v, rel=1e-12)

    def test_composition(self):
        direct = convert(UnitConversionRequest(2.5, "kJ", "eV")).value
        via_j = convert(
            UnitConversionRequest(convert(UnitConversionRequest(2.5, "kJ", "J")).value, "J", "eV")
        ).value
        assert via_j == pytest.approx(direct, rel=1e-12)

    def test_linearity(self):
        one = convert(UnitConversionRequest(1.0, "mi", "km")).value
        five = convert(UnitConversionRequest(5.0, "mi", "km")).value
        assert five == pytest.approx(5.0 * one, rel=1e-12)


class TestRenderToolResponse:
    def test_reference_string_bit_exact(self):
        q = convert(UnitConversionRequest(7.0, "kJ/mol", "eV/mole"))
        assert (
            render_tool_response(q)
            == "Unit parsed value: 4.369056352122534e+22 electron_volt / mole"
        )

    def test_simple_meter(self):
        q = convert(UnitConversionRequest(1.0, "m", "m"))
        assert render_tool_response(q) == "Unit parsed value: 1.0 meter"

    def test_zero_joule(self):
        q = convert(UnitConversionRequest(0.0, "J", "J"))
        assert render_tool_response(q) == "Unit parsed value: 0.0 joule"
