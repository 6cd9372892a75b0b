"""Run configuration: a JSON document validated into typed objects.

Every key is optional; missing keys take the values in ``DEFAULTS``.
Unknown keys are rejected with the offending key and its line.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field

from .defaults import DEFAULTS
from .errors import ParseError, ValidationError
from .model import PhysConsts, PiecewiseConstantPotential, TestFunction, make_test_function
from .numerics import QuadratureSettings, Region

TOP_KEYS = {"hbar", "mass", "geometry", "boundaries", "heights", "region", "quad", "testfn", "output"}
REGION_KEYS = {"re_min", "re_max", "im_min", "im_max"}
QUAD_KEYS = {"abs_tol", "rel_tol", "max_subdiv"}
TESTFN_KEYS = {"p", "c", "sigma", "origin"}
OUTPUT_KEYS = {"path", "format"}
FORMATS = ("csv", "json")


@dataclass
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass
class RunConfig:
    consts: PhysConsts
    potential: PiecewiseConstantPotential
    numerics: QuadratureSettings
    search_region: Region
    test_functions: list[TestFunction]
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> dict:
        return {
            "hbar": self.consts.hbar,
            "mass": self.consts.mass,
            "geometry": self.potential.geometry,
            "boundaries": list(self.potential.boundaries),
            "heights": list(self.potential.heights),
            "region": self.search_region.to_dict(),
            "quad": {"abs_tol": self.numerics.abs_tol, "rel_tol": self.numerics.rel_tol,
                     "max_subdiv": self.numerics.max_subdivisions},
            "testfn": [_testfn_dict(tf) for tf in self.test_functions],
            "output": {"path": self.output.path, "format": self.output.format},
        }


def _testfn_dict(tf: TestFunction) -> dict:
    d = {"p": tf.p, "c": tf.c, "sigma": tf.sigma}
    if tf.origin != 0.0:
        d["origin"] = tf.origin
    return d


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _check_keys(obj, allowed: set[str], where: str, text: str) -> None:
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object", key=where)
    for k in obj:
        if k not in allowed:
            raise ParseError(f"unknown key in {where}", line=_line_of(text, k), key=k)


def _number(d: dict, key: str, text: str, integer: bool = False):
    v = d[key]
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise ParseError(f"value must be {kind}", line=_line_of(text, key), key=key)
    return v


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises
    ------
    ParseError
        Malformed JSON, unknown keys or wrongly typed values (line and key named).
    ValidationError
        A model invariant fails (boundary ordering, test-function domain, ...).
    """
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed document: {exc.msg}", line=exc.lineno) from None
    _check_keys(doc, TOP_KEYS, "document", text)
    cfg = copy.deepcopy(DEFAULTS)
    cfg.update({k: v for k, v in doc.items() if k not in ("region", "quad")})
    for sub, keys in (("region", REGION_KEYS), ("quad", QUAD_KEYS)):
        if sub in doc:
            _check_keys(doc[sub], keys, sub, text)
            cfg[sub].update(doc[sub])
    if "testfn" in doc:
        if not isinstance(doc["testfn"], list):
            raise ParseError("testfn must be a list", line=_line_of(text, "testfn"), key="testfn")
        for item in doc["testfn"]:
            _check_keys(item, TESTFN_KEYS, "testfn", text)
            missing = {"p", "c", "sigma"} - set(item)
            if missing:
                raise ParseError(f"testfn entry lacks {sorted(missing)}", line=_line_of(text, "testfn"),
                                 key=sorted(missing)[0])
    output = doc.get("output", {})
    _check_keys(output, OUTPUT_KEYS, "output", text)

    for key in ("hbar", "mass"):
        _number(cfg, key, text)
    for key in ("boundaries", "heights"):
        if not isinstance(cfg[key], list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in cfg[key]):
            raise ParseError("value must be a list of numbers", line=_line_of(text, key), key=key)
    for key in REGION_KEYS:
        _number(cfg["region"], key, text)
    _number(cfg["quad"], "abs_tol", text)
    _number(cfg["quad"], "rel_tol", text)
    _number(cfg["quad"], "max_subdiv", text, integer=True)

    consts = PhysConsts(float(cfg["hbar"]), float(cfg["mass"]))
    pot = PiecewiseConstantPotential(tuple(cfg["boundaries"]), tuple(cfg["heights"]), cfg["geometry"])
    q = cfg["quad"]
    settings = QuadratureSettings(abs_tol=float(q["abs_tol"]), rel_tol=float(q["rel_tol"]),
                                  max_subdivisions=int(q["max_subdiv"]))
    region = Region(**{k: float(v) for k, v in cfg["region"].items()})
    tfs = []
    for item in cfg["testfn"]:
        for key in ("p", "c", "sigma"):
            _number(item, key, text, integer=(key == "p"))
        tfs.append(make_test_function(int(item["p"]), float(item["c"]), float(item["sigma"]), pot,
                                      origin=float(item.get("origin", 0.0))))
    fmt = output.get("format", "csv")
    if fmt not in FORMATS:
        raise ParseError(f"output format must be one of {FORMATS}", line=_line_of(text, "format"), key="format")
    return RunConfig(consts, pot, settings, region, tfs, OutputSpec(output.get("path"), fmt))


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read configuration {path!r}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2)
