import numpy as np
import pytest
import tomli_w

from dgvf.engine import run
from dgvf.scenario import (
    ScenarioError,
    audit_assumptions,
    audit_curve,
    builtin_names,
    dump_scenario,
    load_scenario,
    scenario_from_dict,
    scenarios_equivalent,
    select_robots,
)
from dgvf.paths import ParametricCurve

MINIMAL = {
    "model": "integrator",
    "n": 3,
    "robots": 4,
    "topology": "ring",
    "speeds": {"w1dot_star": 1.0, "w2dot_star": 1.0},
    "paths": {"f": ["w", "0", "0"], "g": ["2*cos(w)", "2*sin(w)", "0"]},
    "offsets": {"w2_star": ["0", "pi/2", "pi", "3*pi/2"]},
}


def with_(**changes):
    d = {k: (dict(v) if isinstance(v, dict) else v) for k, v in MINIMAL.items()}
    for k, v in changes.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k].update(v)
        else:
            d[k] = v
    return d


def test_builtin_names():
    assert set(builtin_names()) >= {"sim1-formation", "sim2-enclose", "sim3-circumnav", "exp1-circle", "exp2-star"}


def test_sim2_loads_with_published_curves():
    sc = load_scenario("sim2-enclose")
    assert sc.N == 10 and sc.model == "integrator"
    assert sc.manifolds[0].g.strings()[2] == "10 * cos(w)"
    np.testing.assert_allclose(sc.offsets.w2_star, 2 * np.pi * np.arange(1, 11) / 10)
    assert (sc.speeds.w1dot_star, sc.speeds.w2dot_star) == (3.0, 3.0)


def test_sim1_groups_and_glyph():
    sc = load_scenario("sim1-formation")
    assert sc.N == 82
    w1 = sc.offsets.w1_star
    for (a, b), v in zip([(1, 13), (14, 20), (21, 38), (39, 48), (49, 65), (66, 82)], range(0, 60, 10)):
        assert np.all(w1[a - 1 : b] == v)
    assert np.all(sc.offsets.w2_star == 0)
    assert len({tuple(m.g.strings()) for m in sc.manifolds}) > 10


def test_sim3_orbit_families():
    sc = load_scenario("sim3-circumnav")
    assert sc.N == 27 and sc.model == "unicycle"
    families = [tuple(sc.manifolds[i].g.strings()) for i in (0, 9, 18)]
    assert len(set(families)) == 3
    assert all(tuple(sc.manifolds[i].g.strings()) == families[i // 9] for i in range(27))
    np.testing.assert_allclose(sc.offsets.w2_star, np.arange(27) * 6 * np.pi / 27)


@pytest.mark.parametrize("name", ["exp1-circle", "exp2-star"])
def test_experiments_track_live_target(name):
    sc = load_scenario(name)
    assert sc.N == 5 and sc.target is not None
    assert all(m.realtime for m in sc.manifolds)
    assert sc.speeds.w2dot_star == 0.02
    np.testing.assert_allclose(sc.offsets.w2_star, 2 * np.pi * np.arange(5) / 5)


@pytest.mark.parametrize(
    "bad, key",
    [
        (dict(gains={"k": -1.0}), "gains"),
        (dict(colour="red"), "colour"),
        (dict(speeds={"w3dot_star": 1.0}), "speeds.w3dot_star"),
        (dict(paths={"f": ["w", "0"]}), "paths.f"),
        (dict(paths={"f": ["w", "sin(", "0"]}), "paths.f[1]"),
        (dict(offsets={"w2_star": [0.0, 1.0]}), "offsets.w2_star"),
        (dict(topology=[[1, 1]]), "topology"),
        (dict(dt="w"), "dt"),
    ],
)
def test_invalid_files_name_the_key(bad, key):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(with_(**bad))
    assert info.value.key.startswith(key)


def test_missing_referenced_file(tmp_path):
    d = with_(paths={"g_offsets_file": "nope.csv"})
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(d, base=tmp_path)
    assert info.value.key == "paths.g_offsets_file"


def test_overrides_replace_top_level_values():
    sc = load_scenario("sim2-enclose", seed=11, duration=1.5)
    assert sc.seed == 11 and sc.duration == 1.5


@pytest.mark.parametrize("name", builtin_names())
def test_dump_load_round_trip(name, tmp_path):
    sc = load_scenario(name)
    path = dump_scenario(sc, tmp_path / f"{name}.toml")
    back = load_scenario(path)
    assert scenarios_equivalent(sc, back)


def test_equivalence_detects_changes(tmp_path):
    a = scenario_from_dict(MINIMAL)
    assert scenarios_equivalent(a, scenario_from_dict(MINIMAL))
    assert not scenarios_equivalent(a, scenario_from_dict(with_(seed=5)))
    assert not scenarios_equivalent(a, scenario_from_dict(with_(paths={"g": ["3*cos(w)", "2*sin(w)", "0"]})))


def test_select_robots_keeps_internal_edges():
    sc = load_scenario("sim3-circumnav")
    sub = select_robots(sc, range(9))
    assert sub.N == 9 and len(sub.topology.edges) == 36
    assert all(m.g.strings() == sc.manifolds[0].g.strings() for m in sub.manifolds)


def test_cubic_curve_fails_boundedness():
    rep = audit_curve(ParametricCurve.from_strings(["w^3", "0", "0"]), (-1e3, 1e3), 10.0)
    assert not rep["ok"] and rep["d1"] == pytest.approx(3e6)


def test_two_rings_fail_connectivity():
    edges = [[1, 2], [2, 3], [3, 1], [4, 5], [5, 6], [6, 4]]
    rep = audit_assumptions(scenario_from_dict(with_(robots=6, topology=edges, offsets={"w2_star": 0.0})))
    assert not rep.connected and rep.components == 2 and not rep.ok


@pytest.mark.parametrize("name", builtin_names())
def test_every_builtin_validates_and_runs_briefly(name):
    sc = load_scenario(name, duration=0.2)
    assert audit_assumptions(sc).ok
    res = run(sc)
    assert np.all(np.isfinite(res.trajectory))


def test_toml_parse_error_is_a_scenario_error(tmp_path):
    p = tmp_path / "broken.toml"
    p.write_text("robots = = 3")
    with pytest.raises(ScenarioError):
        load_scenario(p)
    q = tmp_path / "ok.toml"
    q.write_text(tomli_w.dumps(MINIMAL))
    assert load_scenario(q).name == "ok"
