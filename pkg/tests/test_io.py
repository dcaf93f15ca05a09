import json

import numpy as np
import pytest

from gluedgames import games as gm
from gluedgames import io as gio
from gluedgames import linalg as la
from gluedgames import strategies as st


def test_game_round_trip():
    for g in (gm.magic_square(), gm.magic_pentagram(), gm.glued_magic_square()):
        back = gio.game_from_json(json.loads(gio.dumps(gio.game_to_json(g))))
        assert np.array_equal(back.system.coeffs, g.system.coeffs)
        assert np.array_equal(back.system.rhs, g.system.rhs)


def test_game_errors_name_the_field():
    obj = gio.game_to_json(gm.magic_square())
    obj["equations"][3]["coeffs"][1] = 5
    with pytest.raises(gio.FormatError, match="equation 3"):
        gio.game_from_json(obj, "ms.json")
    obj = gio.game_to_json(gm.magic_square())
    del obj["equations"][2]["rhs"]
    with pytest.raises(gio.FormatError, match=r"ms.json: equations\[2\]: missing field 'rhs'"):
        gio.game_from_json(obj, "ms.json")
    obj = gio.game_to_json(gm.magic_square())
    obj["equations"][0]["coeffs"] = [1, 1]
    with pytest.raises(gio.FormatError, match=r"equations\[0\]\.coeffs"):
        gio.game_from_json(obj, "ms.json")


def test_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "modulus": 2,\n  "num_vars": \n}')
    with pytest.raises(gio.FormatError, match="line 4"):
        gio.load_game(p)


def test_strategy_round_trip_bit_exact():
    rng = np.random.default_rng(0)
    s = st.conjugate_local(st.example_strategy(0.6, 0.8, la.random_state(5, 5, rng)),
                           la.random_unitary(24, rng), la.random_unitary(24, rng))
    per = {(0, 1): s.alice[1]}
    s = st.BipartiteStrategy(s.state, s.alice, s.bob, per)
    back = gio.strategy_from_json(json.loads(gio.dumps(gio.strategy_to_json(s))))
    assert np.array_equal(back.state.amplitudes, s.state.amplitudes)
    assert all(np.array_equal(a, b) for a, b in zip(back.alice, s.alice))
    assert all(np.array_equal(a, b) for a, b in zip(back.bob, s.bob))
    assert np.array_equal(back.alice_per_equation[(0, 1)], per[(0, 1)])


def test_strategy_errors():
    obj = gio.strategy_to_json(st.ideal_magic_square())
    obj["alice"][4][1][2] = [1.0]
    with pytest.raises(gio.FormatError, match=r"alice\[4\]\[1\]\[2\]"):
        gio.strategy_from_json(obj, "s.json")
    obj = gio.strategy_to_json(st.ideal_magic_square())
    obj["bob"][0] = [[[2, 0]] * 4] * 4
    with pytest.raises(gio.FormatError, match="Bob observable 0"):
        gio.strategy_from_json(obj, "s.json")
    obj = gio.strategy_to_json(st.ideal_magic_square())
    obj["state"] = obj["state"][:-1]
    with pytest.raises(gio.FormatError, match="16 amplitudes"):
        gio.strategy_from_json(obj, "s.json")


def test_witness_round_trip():
    w = st.DilationWitness(np.eye(4)[:, :2], np.eye(3), la.make_max_entangled(2))
    back = gio.witness_from_json(json.loads(gio.dumps(gio.witness_to_json(w))))
    assert np.array_equal(back.isometry_a, w.isometry_a)
    assert np.array_equal(back.aux_state.amplitudes, w.aux_state.amplitudes)


def test_csv_rows():
    text = gio.rows_to_csv([{"seed": 1, "epsilon": 0.001, "lemma": "lrmul", "bound": 0.5, "measured": 0.75, "slack": 0.25}])
    assert text.splitlines() == ["seed,epsilon,lemma,bound,measured,slack", "1,0.001,lrmul,0.5,0.75,0.25"]
