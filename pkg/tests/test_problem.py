import numpy as np
import pytest

from treespec.problem import ProblemError, load_problem, parse_potential, parse_problem

BASE = """
[tree]
vertices = 0 1 2 3 11
edges = 11:1>11 12:11>0 2:2>0 3:3>0
bc = 1:D 2:N 3:N

[potentials]
11 = cos 0 0.2
12 = cos 0 -0.2
2 = sin 0.1
3 = zero

[split]
w = 0
known = 2 3

[problems]
L =
L1 = 2:D
"""


def test_fixtures_parse(problems_dir):
    for name in ("long_leg_star.ini", "double_fork.ini"):
        pf = load_problem(problems_dir / name, require_all=True)
        assert set(pf.pots) == set(pf.tree.edge_ids)
        assert pf.split.l in (2, 3)
        assert "L1" in pf.problems


def test_parse_basic():
    pf = parse_problem(BASE)
    assert pf.known == (2, 3) and pf.unknown == (11, 12)
    assert pf.problems == {"L": {}, "L1": {2: "D"}}
    assert pf.run["nmax"] == 40 and isinstance(pf.run["nmax"], int)
    x = pf.pots[11].nodes
    assert np.allclose(pf.pots[11].values, 0.2 * np.cos(x))
    assert pf.problem_tree("L1").bc[2] == "D"


def test_bad_edge_names_line():
    text = BASE.replace("12:11>0", "12:11-0")
    with pytest.raises(ProblemError, match=r"<problem>:4: bad edge '12:11-0'"):
        parse_problem(text)


def test_unknown_run_key():
    with pytest.raises(ProblemError, match="unknown run parameter 'nmx'"):
        parse_problem(BASE + "\n[run]\nnmx = 3\n")


def test_flip_of_internal_vertex_rejected():
    with pytest.raises(ProblemError, match="not a boundary vertex"):
        parse_problem(BASE.replace("L1 = 2:D", "L1 = 0:D"))


def test_base_problem_cannot_flip():
    with pytest.raises(ProblemError, match="base problem"):
        parse_problem(BASE.replace("L =", "L = 2:D"))


def test_missing_potential_in_forward_mode():
    text = BASE.replace("3 = zero\n", "")
    parse_problem(text)
    with pytest.raises(ProblemError, match=r"missing potentials for edges \[3\]"):
        parse_problem(text, require_all=True)


def test_invalid_split():
    with pytest.raises(ProblemError, match="straddles"):
        parse_problem(BASE.replace("known = 2 3", "known = 2 3 12"))


def test_potential_file_reference(tmp_path):
    (tmp_path / "p.txt").write_text("0 0.5\n3.141592653589793 0.5\n")
    pot = parse_potential("p.txt", tmp_path)
    assert np.allclose(pot.values, 0.5)
    text = BASE.replace("3 = zero", "3 = missing.txt")
    (tmp_path / "prob.ini").write_text(text)
    with pytest.raises(ProblemError, match="cannot read potential"):
        load_problem(tmp_path / "prob.ini")


def test_unreadable_file(tmp_path):
    with pytest.raises(ProblemError, match="cannot read"):
        load_problem(tmp_path / "nope.ini")
