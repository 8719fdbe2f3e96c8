import glob
import math
import os

import numpy as np
import pytest

from components import chain_engine as ce
from components.cli_report import PropertyRecord, PropertyReport, RunConfig
from components.systems_catalog import SystemSpec
from database import report_store
from database.config_parser import ConfigParser
from exceptions import InvalidSpec, IoError, ParseError

CONFIGS = sorted(glob.glob(os.path.join(os.path.dirname(__file__), "..", "configs", "*.ini")))


# ========= PARSING =========

@pytest.mark.parametrize("path", CONFIGS, ids=os.path.basename)
def test_shipped_configs_round_trip(path):
    cfg = ConfigParser.read_config(path)
    assert ConfigParser.parse_config(ConfigParser.serialize_config(cfg)) == cfg


def test_parse_minimal_config_uses_defaults():
    cfg = ConfigParser.parse_config("[system]\nkind = cat_map\n")
    assert cfg.tasks == ["analyze"]
    assert cfg.mesh == 0.02
    assert cfg.seed == 0
    assert cfg.chain is None


def test_parse_glue_segments():
    cfg = ConfigParser.read_config(next(p for p in CONFIGS if p.endswith("full_shift.ini")))
    assert cfg.glue.segments == [("(0)^inf", 6), ("(1)^inf", 6), ("(01)^inf", 4)]
    assert cfg.glue.epsilon == 0.125


def test_parse_toral_matrix():
    cfg = ConfigParser.parse_config("[system]\nkind = toral\nmatrix = 3 1; 2 1\n")
    assert cfg.system.matrix == [[3, 1], [2, 1]]
    assert ConfigParser.parse_config(ConfigParser.serialize_config(cfg)) == cfg


def test_duplicate_key_reports_line():
    with pytest.raises(ParseError) as exc:
        ConfigParser.parse_config("seed = 0\nseed = 1\n[system]\nkind = cat_map\n")
    assert exc.value.line == 2


@pytest.mark.parametrize("text", [
    "colour = red\n[system]\nkind = cat_map\n",
    "seed = 0\n",
    "tasks = analyze, paint\n[system]\nkind = cat_map\n",
    "seed = many\n[system]\nkind = cat_map\n",
    "tasks = chain\n[system]\nkind = cat_map\n",
    "[system]\nkind = cat_map\n[extras]\nx = 1\n",
])
def test_invalid_configs(text):
    with pytest.raises(InvalidSpec):
        ConfigParser.parse_config(text)


def test_parse_matrix_forms():
    assert ConfigParser.parse_matrix("2 1; 1 1") == [[2, 1], [1, 1]]
    assert ConfigParser.parse_matrix(["2", "1;1", "1"]) == [[2, 1], [1, 1]]
    with pytest.raises(InvalidSpec):
        ConfigParser.parse_matrix("2 x; 1 1")


def test_parse_segment():
    assert ConfigParser.parse_segment("(0)^inf ; 6") == ("(0)^inf", 6)
    with pytest.raises(InvalidSpec):
        ConfigParser.parse_segment("(0)^inf")
    with pytest.raises(InvalidSpec):
        ConfigParser.parse_segment("(0)^inf ; six")


def test_read_missing_config():
    with pytest.raises(IoError) as exc:
        ConfigParser.read_config("/nonexistent/run.ini")
    assert exc.value.exit_code == 4


# ========= REPORT STORE =========

def _report() -> PropertyReport:
    return PropertyReport(
        generated_at="2024-01-01T00:00:00+00:00",
        system="example3_sft",
        spec=SystemSpec(kind="example3_sft"),
        seed=0,
        verdicts=[PropertyRecord(task="chain", property="chain", verdict="holds", parameters={"delta": 0.25},
                                 payload={"chain": ["(12)^inf", "(34)^inf"], "step_errors": [0.125]}),
                  PropertyRecord(task="shadow", property="shadowing", verdict="holds",
                                 payload={"orbit": [[0.1, 0.2], [0.4, 0.5]], "orbit_step_errors": [0.0]})],
    )


def test_chain_frame_columns():
    symbolic = report_store.chain_frame(["(12)^inf", "(34)^inf"], [0.125])
    assert list(symbolic.columns) == ["step", "point", "step_error"]
    assert math.isnan(symbolic["step_error"].iloc[-1])
    numeric = report_store.chain_frame([[0.1], [0.2], [0.3]], [0.01, 0.02])
    assert list(numeric.columns) == ["step", "x0", "step_error"]
    assert numeric["step_error"].iloc[1] == 0.02


def test_orbit_frame_round_trip(tmp_path):
    frame = report_store.orbit_frame([[0.1, 0.2], [0.3, 0.4]], [0.5])
    assert list(frame.columns) == ["n", "x0", "x1", "step_error"]
    path = str(tmp_path / "orbit.csv")
    frame.to_csv(path, index=False)
    assert np.allclose(report_store.read_orbit_csv(path), [[0.1, 0.2], [0.3, 0.4]])


def test_read_orbit_csv_errors(tmp_path):
    with pytest.raises(IoError):
        report_store.read_orbit_csv(str(tmp_path / "absent.csv"))
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(IoError):
        report_store.read_orbit_csv(str(path))


def test_write_edge_list(tmp_path):
    points = np.array([[0.0], [0.25], [0.5], [0.75]])
    grid = ce.GridSystem.from_map(points, lambda p: np.mod(p + 0.25, 1.0), "circle", 0.25)
    path = report_store.write_edge_list(ce.build_chain_graph(grid, 0.1), str(tmp_path / "edges.txt"))
    with open(path, encoding="utf-8") as f:
        assert f.read().split("\n")[:4] == ["0 1", "1 2", "2 3", "3 0"]


def test_emit_outputs_with_dump(tmp_path):
    cfg = RunConfig(system=SystemSpec(kind="example3_sft"))
    written = report_store.emit_outputs(_report(), cfg, dump=True, output_dir=str(tmp_path))
    names = sorted(os.path.basename(p) for p in written)
    assert names == ["00_chain_chain.csv", "01_shadow_orbit.csv", "report.json"]
    assert report_store.load_report(str(tmp_path / "report.json")) == _report()


def test_output_dir_precedence():
    cfg = RunConfig(system=SystemSpec(kind="cat_map"), output_dir="from_config")
    assert report_store.resolve_output_dir(cfg, "from_flag") == "from_flag"
    assert report_store.resolve_output_dir(cfg) == "from_config"


def test_load_report_rejects_garbage(tmp_path):
    path = tmp_path / "report.json"
    path.write_text("{\"schema_version\": 1}", encoding="utf-8")
    with pytest.raises(IoError):
        report_store.load_report(str(path))
