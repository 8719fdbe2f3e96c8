import logging
from typing import Any, Dict, List, Tuple

from configobj import ConfigObj, ConfigObjError
from pydantic import ValidationError

from components.cli_report import TASKS, RunConfig, validate_config
from exceptions import InvalidSpec, ParseError

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = ("tasks", "seed", "mesh", "delta", "epsilon", "horizon", "cap", "output_dir")
SECTIONS = ("system", "chain", "shadow", "barycenter", "glue")


class ConfigParser:
    @staticmethod
    def as_list(value: Any) -> List[str]:
        """configobj yields a str for one item and a list for comma-separated items."""
        if value is None:
            return []
        if isinstance(value, str):
            return [value.strip()] if value.strip() else []
        return [str(v).strip() for v in value if str(v).strip()]

    @staticmethod
    def parse_matrix(text: Any) -> List[List[int]]:
        """'2 1; 1 1' -> [[2, 1], [1, 1]]"""
        if not isinstance(text, str):
            text = ",".join(text)
        try:
            return [[int(v) for v in row.replace(",", " ").split()] for row in text.split(";") if row.strip()]
        except ValueError:
            raise InvalidSpec(f"matrix rows must hold integers: {text!r}")

    @staticmethod
    def format_matrix(matrix: List[List[int]]) -> str:
        return "; ".join(" ".join(str(v) for v in row) for row in matrix)

    @staticmethod
    def parse_segment(text: str) -> Tuple[str, int]:
        """'<point> ; <length>'"""
        point, sep, length = text.rpartition(";")
        if not sep:
            raise InvalidSpec(f"segment must read '<point> ; <length>', got {text!r}")
        try:
            return point.strip(), int(length)
        except ValueError:
            raise InvalidSpec(f"segment length is not an integer: {length!r}")

    @staticmethod
    def load(text: str) -> ConfigObj:
        try:
            return ConfigObj(text.splitlines(), raise_errors=True, list_values=True, interpolation=False)
        except ConfigObjError as e:
            line = getattr(e, "line_number", 0) or 0
            raise ParseError(line, str(e).split(" at line")[0])

    @staticmethod
    def parse_config(text: str) -> RunConfig:
        """
        Reads an INI-style run description: top-level run parameters, a
        [system] section and optional task sections.
        """
        raw = ConfigParser.load(text)
        unknown = [k for k in raw.scalars if k not in TOP_LEVEL_KEYS] + [k for k in raw.sections if k not in SECTIONS]
        if unknown:
            raise InvalidSpec(f"unknown keys: {', '.join(unknown)}")
        if "system" not in raw.sections:
            raise InvalidSpec("a [system] section is required")

        data: Dict[str, Any] = {k: raw[k] for k in raw.scalars}
        data["tasks"] = ConfigParser.as_list(raw.get("tasks", "analyze"))
        for task in data["tasks"]:
            if task not in TASKS:
                raise InvalidSpec(f"unknown task '{task}'")

        system = dict(raw["system"])
        if "matrix" in system:
            system["matrix"] = ConfigParser.parse_matrix(system["matrix"])
        data["system"] = system
        for name in ("chain", "shadow", "barycenter"):
            if name in raw.sections:
                data[name] = dict(raw[name])
        if "glue" in raw.sections:
            glue = dict(raw["glue"])
            glue["segments"] = [ConfigParser.parse_segment(s) for s in ConfigParser.as_list(glue.get("segments"))]
            data["glue"] = glue

        try:
            cfg = RunConfig.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"])
            raise InvalidSpec(f"{where}: {first['msg']}")
        logger.debug("[Config] parsed %s with tasks %s", cfg.system.kind, cfg.tasks)
        return validate_config(cfg)

    @staticmethod
    def serialize_config(cfg: RunConfig) -> str:
        """Inverse of parse_config: parse_config(serialize_config(c)) == c."""
        out = ConfigObj(list_values=True, interpolation=False)
        dumped = cfg.model_dump(exclude_none=True)
        for key in TOP_LEVEL_KEYS:
            if key == "tasks":
                out[key] = list(cfg.tasks)
            elif key in dumped:
                out[key] = str(dumped[key])

        system = {k: str(v) for k, v in dumped["system"].items() if k != "matrix"}
        if cfg.system.matrix is not None:
            system["matrix"] = ConfigParser.format_matrix(cfg.system.matrix)
        out["system"] = system
        for name in ("chain", "shadow", "barycenter"):
            if name in dumped:
                out[name] = {k: str(v) for k, v in dumped[name].items()}
        if cfg.glue is not None:
            glue: Dict[str, Any] = {"segments": [f"{p} ; {n}" for p, n in cfg.glue.segments]}
            if cfg.glue.epsilon is not None:
                glue["epsilon"] = str(cfg.glue.epsilon)
            out["glue"] = glue
        return "\n".join(out.write()) + "\n"

    @staticmethod
    def read_config(path: str) -> RunConfig:
        from database.report_store import read_text

        return ConfigParser.parse_config(read_text(path))
