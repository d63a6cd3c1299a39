import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wickscft.cli import main
from wickscft.grid import ComplexField, Grid1D, RealField
from wickscft.io import export_field, import_field
from wickscft.scenario import (
    ScenarioError,
    load_scenario,
    parse_scenario,
    run_scenario,
    serialize_scenario,
    sha256_file,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """\
run.kind = scft
grid.n_points = 64
grid.length = 10
potential.kind = harmonic
contour.beta = 4
contour.ds = 0.02
"""


def diagnostics(text):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    return info.value.diagnostics


class TestParse:
    def test_minimal_defaults(self):
        s = parse_scenario(MINIMAL)
        assert s.kind == "scft"
        assert s.grid == Grid1D(64, 10.0)
        assert s.n_particles == 1.0
        assert s.scft_config().mixing_alpha == 0.1
        assert s.get("output", "formats") == ("csv",)

    def test_comments_and_blank_lines(self):
        s = parse_scenario("# header\n\n" + MINIMAL.replace("grid.length = 10", "grid.length = 10  # box"))
        assert s.grid.length == 10.0

    def test_negative_n_steps_located(self):
        text = "run.kind = tdks\n" + MINIMAL.split("\n", 1)[1] + "time.tau = 1\ntime.n_steps = -5\n"
        (d,) = diagnostics(text)
        assert d.line == 8
        assert d.column == len("time.n_steps = ") + 1
        assert "positive integer required" in d.message

    @pytest.mark.parametrize(
        "line, fragment",
        [
            ("grid.n_points = 100", "power of two"),
            ("potential.kind = quartic", "expected one of"),
            ("bogus.key = 1", "unknown section"),
            ("grid.size = 3", "unknown key"),
            ("grid.n_points 64", "section.key = value"),
            ("scft.mixing = 1.5", "(0, 1]"),
            ("scft.tolerance = 1e-20", ">= 1e-14"),
            ("contour.beta = nan", "finite real"),
        ],
    )
    def test_bad_values(self, line, fragment):
        key = line.split("=")[0].strip()
        text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith(key + " ")) + "\n" + line + "\n"
        msgs = [d.message for d in diagnostics(text)]
        assert any(fragment in m for m in msgs), msgs

    def test_duplicate_key(self):
        msgs = [d.message for d in diagnostics(MINIMAL + "grid.length = 11\n")]
        assert any("duplicate" in m for m in msgs)

    def test_missing_blocks(self):
        msgs = [d.message for d in diagnostics("run.kind = weak-value\ngrid.n_points = 64\ngrid.length = 1\n")]
        assert any("'potential'" in m for m in msgs)
        assert any("'selection'" in m for m in msgs)
        assert any("'time'" in m for m in msgs)

    def test_missing_run_kind(self):
        msgs = [d.message for d in diagnostics(MINIMAL.replace("run.kind = scft\n", ""))]
        assert any("run.kind" in m for m in msgs)

    def test_ladder_requirements(self):
        text = MINIMAL.replace("run.kind = scft", "run.kind = ground-state")
        assert any("ladder" in d.message for d in diagnostics(text))
        assert any("increasing" in d.message for d in diagnostics(text + "contour.ladder = 5, 3\n"))

    def test_selection_shapes(self):
        base = MINIMAL.replace("run.kind = scft", "run.kind = weak-value") + "time.tau = 1\ntime.n_steps = 10\n"
        s = parse_scenario(base + "selection.pre = gaussian, 5, 1, 0\nselection.post = eigenstate, 2\n")
        assert s["selection"]["pre"] == ("gaussian", 5.0, 1.0, 0.0)
        assert s["selection"]["post"] == ("eigenstate", 2)
        msgs = [d.message for d in diagnostics(base + "selection.pre = gaussian, 5\nselection.post = uniform\n")]
        assert any("takes 3 parameters" in m for m in msgs)

    def test_time_after_tau(self):
        text = MINIMAL.replace("run.kind = scft", "run.kind = tdks") + "time.tau = 1\ntime.n_steps = 10\ntime.t = 2\n"
        assert any("exceed" in d.message for d in diagnostics(text))


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.scn")), ids=lambda p: p.stem)
def test_shipped_round_trip(path):
    s = load_scenario(path)
    again = parse_scenario(serialize_scenario(s), base_dir=path.parent)
    assert again == s
    assert serialize_scenario(again) == serialize_scenario(s)


@given(
    n=st.sampled_from([8, 16, 64, 512]),
    length=st.floats(0.1, 1e3, allow_nan=False),
    beta=st.floats(1e-3, 1e3),
    g=st.floats(0, 10),
    formats=st.sampled_from([("csv",), ("json",), ("csv", "json")]),
)
def test_round_trip_property(n, length, beta, g, formats):
    text = (
        f"run.kind = scft\ngrid.n_points = {n}\ngrid.length = {length!r}\npotential.kind = uniform\n"
        f"contour.beta = {beta!r}\nfunctional.g = {g!r}\noutput.formats = {', '.join(formats)}\n"
    )
    s = parse_scenario(text)
    assert parse_scenario(serialize_scenario(s)) == s


class TestExport:
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_real_round_trip(self, tmp_path, fmt, rng):
        g = Grid1D(32, 3.7)
        f = RealField(g, rng.normal(size=32))
        back = import_field(export_field(f, tmp_path / f"f.{fmt}", fmt), g)
        np.testing.assert_array_equal(back.values, f.values)

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_complex_round_trip(self, tmp_path, fmt, rng):
        g = Grid1D(16, 2.0)
        f = ComplexField(g, rng.normal(size=16) + 1j * rng.normal(size=16))
        back = import_field(export_field(f, tmp_path / f"f.{fmt}", fmt))
        assert isinstance(back, ComplexField)
        np.testing.assert_array_equal(back.values, f.values)
        assert back.grid.n_points == 16

    def test_csv_header(self, tmp_path):
        g = Grid1D(8, 1.0)
        p = export_field(RealField.constant(g, 1.0), tmp_path / "a.csv")
        assert p.read_text().splitlines()[0] == "r,value"

    def test_empty_path(self):
        with pytest.raises(OSError, match="empty path"):
            export_field(RealField.constant(Grid1D(8, 1.0), 1.0), "")

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            export_field(RealField.constant(Grid1D(8, 1.0), 1.0), tmp_path / "missing" / "a.csv")


class TestRun:
    def test_manifest_inventory(self, tmp_path):
        s = parse_scenario(MINIMAL + "output.formats = csv, json\n")
        manifest = run_scenario(s, tmp_path)
        assert manifest.exit_code == 0
        doc = json.loads((tmp_path / "manifest.json").read_text())
        names = {f["path"] for f in doc["files"]}
        assert {"density.csv", "density.json", "field.csv", "convergence.csv", "results.json"} <= names
        for entry in doc["files"]:
            assert sha256_file(tmp_path / entry["path"]) == entry["sha256"]
        assert doc["versions"]["numpy"] == np.__version__
        assert parse_scenario(doc["scenario"]) == s

    def test_nonconvergence_exit_code(self, tmp_path):
        text = MINIMAL + "functional.g = 2\nparticles.n = 2\nscft.max_iterations = 2\n"
        manifest = run_scenario(parse_scenario(text), tmp_path)
        assert manifest.exit_code == 3
        assert (tmp_path / "density.csv").exists()

    def test_tabulated_potential(self, tmp_path):
        g = Grid1D(64, 10.0)
        export_field(RealField(g, 0.5 * (g.r - 5.0) ** 2), tmp_path / "v.csv")
        text = MINIMAL.replace("potential.kind = harmonic", "potential.kind = tabulated\npotential.file = v.csv")
        (tmp_path / "s.scn").write_text(text)
        ref = run_scenario(parse_scenario(MINIMAL), tmp_path / "a")
        tab = run_scenario(load_scenario(tmp_path / "s.scn"), tmp_path / "b")
        assert ref.exit_code == tab.exit_code == 0
        a = import_field(tmp_path / "a" / "density.csv").values
        b = import_field(tmp_path / "b" / "density.csv").values
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_orthogonal_selection_is_runtime_error(self, tmp_path):
        manifest = run_scenario(load_scenario(SCENARIOS / "weak_value_orthogonal.scn"), tmp_path)
        assert manifest.exit_code == 4
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["stages"][0]["error"] == "OrthogonalPostSelectionError"


class TestCli:
    def test_version(self, capsys):
        from wickscft import __version__

        assert main(["version"]) == 0
        assert capsys.readouterr().out.strip() == __version__

    def test_validate(self, tmp_path, capsys):
        good = tmp_path / "good.scn"
        good.write_text(MINIMAL)
        assert main(["validate", str(good)]) == 0
        bad = tmp_path / "bad.scn"
        bad.write_text(MINIMAL + "time.n_steps = -5\n")
        assert main(["validate", str(bad)]) == 2
        assert "line 7" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.scn")]) == 2

    def test_run(self, tmp_path, capsys):
        p = tmp_path / "s.scn"
        p.write_text(MINIMAL)
        assert main(["run", str(p), "--output-dir", str(tmp_path / "out"), "--threads", "1"]) == 0
        assert "scft: ok" in capsys.readouterr().out
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_bad_threads(self, tmp_path):
        p = tmp_path / "s.scn"
        p.write_text(MINIMAL)
        assert main(["run", str(p), "--threads", "0"]) == 2
