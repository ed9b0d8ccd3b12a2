from crnplan.cli import main
from crnplan.fixtures import check_tiny_cases, tiny_cases, verify_fixtures
from crnplan.ludo import BOARD
from importlib import resources


def test_tiny_cases_cover_every_depth():
    cases = tiny_cases(pairs_per_depth=1)
    assert any(c.name == "counterexample" for c in cases)
    assert all(c.mdp.num_states <= 3 and c.mdp.horizon <= 3 for c in cases)
    depths = {(c.mdp.horizon, c.d) for c in cases}
    assert {(3, d) for d in range(4)} <= depths


def test_tiny_oracle_subset():
    out = check_tiny_cases(tiny_cases(pairs_per_depth=1)[:40])
    assert all(o.var_xdd <= o.var_xi + 1e-12 for o in out)
    assert any(o.brute_force_checked for o in out)


def board_text():
    return resources.files("crnplan.data").joinpath("ludo_board.txt").read_text()


def test_corrupted_board_map_fails(tmp_path, capsys):
    bad = tmp_path / "board.txt"
    # move the opponent entry off a safe square
    bad.write_text(board_text().replace("entry opponent 26", "entry opponent 27"))
    report = verify_fixtures(board_map=str(bad))
    assert not report.ok
    assert main(["verify-fixtures", "--board-map", str(bad)]) == 1


def test_shifted_safe_squares_fail_rule_fixture(tmp_path):
    bad = tmp_path / "board.txt"
    bad.write_text(board_text().replace("safe 0 8 13", "safe 0 9 13"))
    report = verify_fixtures(board_map=str(bad))
    failed = {r.name for r in report.results if not r.ok}
    assert "ludo-rules" in failed


def test_default_fixtures_pass():
    report = verify_fixtures()
    assert report.ok, "\n".join(report.lines())
    assert BOARD.home == 57
