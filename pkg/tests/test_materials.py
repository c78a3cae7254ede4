import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casimir_torque.constants import HBAR, K_B
from casimir_torque.materials import (
    DuplicateMaterialError, MaterialDatabase, MaterialParseError, MissingFieldError, Oscillator, OscillatorModel,
    UniaxialMaterial, UnknownMaterialError, default_database, dump_material_db, eval_epsilon,
    load_material_db, matsubara_xi,
)

DB = default_database()


def test_quartz_parallel_static_value():
    assert eval_epsilon(DB["quartz"].eps_parallel, 0.0) == pytest.approx(4.270, abs=1e-12)


def test_quartz_parallel_at_uv_resonance():
    expected = 1 + 1.920 / (1 + (2.040e16 / 2.093e14) ** 2) + 1.350 / 2
    assert eval_epsilon(DB["quartz"].eps_parallel, 2.040e16) == pytest.approx(expected, rel=1e-14)
    assert eval_epsilon(DB["quartz"].eps_parallel, 2.040e16) == pytest.approx(1.67520, abs=5e-6)


def test_high_frequency_limit_is_one():
    for mat in DB.values():
        par, perp = mat.eps(1e30)
        assert abs(par - 1) < 1e-9 and abs(perp - 1) < 1e-9


def test_vectorized_and_scalar_agree():
    xi = np.geomspace(1e12, 1e18, 7)
    model = DB["calcite"].eps_perp
    vec = eval_epsilon(model, xi)
    assert isinstance(eval_epsilon(model, 1e15), float)
    assert np.allclose(vec, [eval_epsilon(model, x) for x in xi], rtol=0, atol=0)


def test_negative_frequency_rejected():
    with pytest.raises(ValueError):
        eval_epsilon(DB["quartz"].eps_parallel, -1.0)


def test_oscillator_validation():
    with pytest.raises(ValueError):
        Oscillator(0.0, 1e14)
    with pytest.raises(ValueError):
        Oscillator(1.0, -1e14)
    with pytest.raises(ValueError):
        Oscillator(1.0, 1e14, -0.1)


def test_damping_term_enters_denominator():
    model = OscillatorModel.from_pairs([(2.0, 1e15, 0.5)])
    assert eval_epsilon(model, 1e15) == pytest.approx(1 + 2.0 / 2.5)


def test_matsubara_frequencies():
    assert matsubara_xi(0, 300.0) == 0.0
    xi1 = matsubara_xi(1, 300.0)
    assert xi1 == pytest.approx(2 * math.pi * K_B * 300 / HBAR)
    assert xi1 == pytest.approx(2.468e14, rel=1e-3)
    assert matsubara_xi(10, 300.0) == pytest.approx(10 * xi1, rel=1e-15)
    with pytest.raises(ValueError):
        matsubara_xi(1, 0.0)
    with pytest.raises(ValueError):
        matsubara_xi(-1, 300.0)


def test_bundled_table_values():
    ba = DB["BaTiO3"].eps_parallel.oscillators
    assert (ba[0].C, ba[0].omega) == (3595.0, 0.850e14)
    eth = DB["ethanol"]
    assert eth.is_isotropic
    (ir, uv) = eth.eps_parallel.oscillators
    assert (ir.C, uv.C, ir.omega, uv.omega) == (23.84, 0.852, 6.600e14, 1.140e16)
    assert DB["quartz"].density == 2643.0 and DB["calcite"].density == 2760.0
    assert DB["ethanol"].density == 789.0


def test_static_permittivities():
    assert DB["quartz"].eps(0.0) == pytest.approx((4.270, 4.337), abs=1e-12)
    assert DB["BaTiO3"].eps(0.0) == pytest.approx((3600.128, 150.064), abs=1e-9)


def test_batio3_variants_differ_only_in_ir_frequency():
    base = DB["BaTiO3"]
    for name, w in (("BaTiO3-wIR-0.7e14", 0.7e14), ("BaTiO3-wIR-1.0e14", 1.0e14)):
        var = DB[name]
        for b_model, v_model in ((base.eps_parallel, var.eps_parallel),
                                 (base.eps_perp, var.eps_perp)):
            assert v_model.oscillators[0].omega == w
            assert v_model.oscillators[0].C == b_model.oscillators[0].C
            assert v_model.oscillators[1] == b_model.oscillators[1]


def test_vacuum_is_unity():
    assert DB["vacuum"].eps(np.array([0.0, 1e15])) == pytest.approx((1.0, 1.0))


def test_unknown_name():
    with pytest.raises(UnknownMaterialError):
        DB["unobtainium"]
    with pytest.raises(UnknownMaterialError):
        DB.with_overrides({"unobtainium": DB["quartz"]})


def test_empty_document():
    assert len(load_material_db(b"[]")) == 0
    assert len(load_material_db(b"")) == 0


def test_distinct_load_errors():
    with pytest.raises(MaterialParseError):
        load_material_db(b"{not json")
    entry = {"name": "x", "isotropic": {"oscillators": [{"C": 1.0, "omega_rad_s": 1e15}]}}
    with pytest.raises(DuplicateMaterialError):
        load_material_db(json.dumps([entry, entry]))
    with pytest.raises(MissingFieldError):
        load_material_db(json.dumps([{"name": "x", "isotropic": {"oscillators": [{"C": 1.0}]}}]))
    assert not issubclass(DuplicateMaterialError, MissingFieldError)


def test_round_trip_is_bit_exact():
    again = load_material_db(dump_material_db(DB))
    assert dict(again.entries) == dict(DB.entries)


positive = st.floats(1e-3, 1e4, allow_nan=False)
freqs = st.floats(1e11, 1e18, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(positive, freqs), min_size=0, max_size=4))
def test_round_trip_property(pairs):
    mat = UniaxialMaterial("m", OscillatorModel.from_pairs(pairs),
                           OscillatorModel.from_pairs(pairs[::-1]), 1234.5)
    db = MaterialDatabase({"m": mat})
    assert load_material_db(dump_material_db(db))["m"] == mat


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(positive, freqs), min_size=1, max_size=4))
def test_permittivity_at_least_one_and_non_increasing(pairs):
    model = OscillatorModel.from_pairs(pairs)
    xi = np.concatenate([[0.0], np.geomspace(1e10, 1e18, 200)])
    eps = eval_epsilon(model, xi)
    assert np.all(eps >= 1.0)
    assert np.all(np.diff(eps) <= 1e-12 * eps[:-1])


@given(positive, freqs)
def test_single_oscillator_at_resonance(c, w):
    assert eval_epsilon(OscillatorModel.from_pairs([(c, w)]), w) == pytest.approx(1 + c / 2, rel=1e-15)


def test_bundled_materials_monotone():
    xi = np.concatenate([[0.0], np.geomspace(1.0, 1e18, 400)])
    for mat in DB.values():
        for eps in mat.eps(xi):
            assert np.all(eps >= 1.0) and np.all(np.diff(eps) <= 0)
