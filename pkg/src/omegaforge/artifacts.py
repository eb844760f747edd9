"""JSON schemas for run configs, scripts and machine artifacts, and the
registry that turns a validated config into a machine.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Callable

import jsonschema

from .bits import EMPTY_TOKEN, fmt_bits, parse_bits
from .constructions import (
    ASCENDING,
    DESCENDING,
    MonotoneStageFamily,
    PrescribedTarget,
    cof_machine_from_sigma3,
    infsd_from_sigma2,
    monotone_from_tot,
    prescribed_cof_machine,
    prescribed_com_machine,
    prescribed_domain_infsd,
    prescribed_tot_machine,
    prescribed_universal_tot,
    tot_machine_from_sigma2,
)
from .machines import (
    ConstantOnRegion,
    EmptyOracleMachine,
    Horizons,
    StagedOracleMachine,
    splice,
    universal_from_family,
)
from .stagewise import (
    SIGMA1,
    TOY,
    AllocationSet,
    CeOperator,
    EmptyOracle,
    HaltingOracle,
    ScriptedOracle,
    ScriptedSet,
    hat_trick,
)

ARTIFACT_FORMAT = "omegaforge-machine/1"


class InputError(ValueError):
    """Malformed input: exit code 2."""


_BITS = {"type": "string", "pattern": "^(ε|[01]*)$"}
_NAT = {"type": "integer", "minimum": 0}
_RATIONAL = {
    "oneOf": [
        {"type": "integer"},
        {"type": "string", "pattern": r"^-?[0-9]+(/[0-9]+)?$"},
    ]
}

CONSTRUCTIONS = [
    "empty",
    "constant-on-region",
    "tot-from-sigma2",
    "monotone-from-tot",
    "prescribed-tot",
    "prescribed-universal-tot",
    "cof-from-sigma3",
    "prescribed-cof",
    "prescribed-com",
    "infsd-from-sigma2",
    "prescribed-domain-infsd",
    "splice",
    "universal",
]

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {
        "bits": _BITS,
        "nat": _NAT,
        "rational": _RATIONAL,
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["ce-monotone", "known-limit-toy", "halting", "empty"]},
                "events": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [_NAT, _NAT, _NAT], "minItems": 2, "maxItems": 3},
                },
                "limit": {"type": "array", "items": _NAT},
            },
        },
        "set": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["toy-known-limit", "sigma1-monotone", "hat-trick", "kraft-chaitin"]},
                "events": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [_BITS, _NAT, _NAT], "minItems": 2, "maxItems": 3},
                },
                "axioms": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [_BITS, _NAT, _NAT, {"type": "array", "items": _NAT}],
                        "minItems": 3,
                        "maxItems": 4,
                    },
                },
                "oracle": {"$ref": "#/$defs/oracle"},
                "requests": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [_NAT, _NAT], "minItems": 2, "maxItems": 2},
                },
            },
            "allOf": [
                {"if": {"properties": {"kind": {"enum": ["toy-known-limit", "sigma1-monotone"]}}},
                 "then": {"required": ["events"]}},
                {"if": {"properties": {"kind": {"const": "hat-trick"}}}, "then": {"required": ["axioms", "oracle"]}},
                {"if": {"properties": {"kind": {"const": "kraft-chaitin"}}}, "then": {"required": ["requests"]}},
            ],
        },
        "target": {
            "type": "object",
            "additionalProperties": False,
            "required": ["values", "c"],
            "properties": {
                "values": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/rational"}},
                "c": {"type": "integer", "minimum": 1},
                "precision": {"type": "integer", "minimum": 1, "maximum": 4096},
            },
        },
        "family": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "infinite": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [_BITS, _NAT, _NAT], "minItems": 3, "maxItems": 3},
                },
                "bursts": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [_NAT, _BITS, _NAT], "minItems": 3, "maxItems": 3},
                },
            },
        },
        "machine": {
            "type": "object",
            "additionalProperties": False,
            "required": ["construction"],
            "properties": {
                "construction": {"enum": CONSTRUCTIONS},
                "params": {"type": "object"},
            },
        },
    },
    "type": "object",
    "additionalProperties": False,
    "required": ["construction"],
    "properties": {
        "construction": {"enum": CONSTRUCTIONS},
        "params": {"type": "object"},
        "schedule": {
            "type": "array",
            "items": {"type": "array", "items": _NAT, "minItems": 3, "maxItems": 3},
        },
        "tag": {"type": "string"},
        "output": {"type": "string"},
        "seed": {"type": "integer"},
    },
}

# parameter blocks per construction
PARAMS: dict[str, dict] = {
    "empty": {"properties": {"frozen_from": _NAT}},
    "constant-on-region": {
        "required": ["region"],
        "properties": {"region": {"type": "array", "items": _BITS}, "value": _NAT, "from_stage": _NAT},
    },
    "tot-from-sigma2": {"required": ["set"], "properties": {"set": {"$ref": "#/$defs/set"}}},
    "monotone-from-tot": {"required": ["set"], "properties": {"set": {"$ref": "#/$defs/set"}}},
    "prescribed-tot": {"required": ["target"], "properties": {"target": {"$ref": "#/$defs/target"}}},
    "prescribed-universal-tot": {
        "required": ["target", "family", "gamma"],
        "properties": {
            "target": {"$ref": "#/$defs/target"},
            "family": {"type": "array", "items": {"$ref": "#/$defs/machine"}},
            "gamma": {"type": "array", "items": {"$ref": "#/$defs/rational"}},
            "c": {"type": "integer", "minimum": 1},
        },
    },
    "cof-from-sigma3": {
        "required": ["family"],
        "properties": {
            "family": {"$ref": "#/$defs/family"},
            "oracle": {"$ref": "#/$defs/oracle"},
            "rho": _BITS,
        },
    },
    "prescribed-cof": {
        "required": ["target"],
        "properties": {"target": {"$ref": "#/$defs/target"}, "oracle": {"$ref": "#/$defs/oracle"}},
    },
    "prescribed-com": {
        "required": ["target"],
        "properties": {"target": {"$ref": "#/$defs/target"}, "oracle": {"$ref": "#/$defs/oracle"}},
    },
    "infsd-from-sigma2": {"required": ["set"], "properties": {"set": {"$ref": "#/$defs/set"}}},
    "prescribed-domain-infsd": {"required": ["target"], "properties": {"target": {"$ref": "#/$defs/target"}}},
    "splice": {
        "required": ["v", "n", "rho"],
        "properties": {
            "v": {"$ref": "#/$defs/machine"},
            "n": {"$ref": "#/$defs/machine"},
            "rho": _BITS,
            "horizons": {
                "type": "object",
                "additionalProperties": False,
                "properties": {"depth": _NAT, "n_max": _NAT, "stage": _NAT},
            },
        },
    },
    "universal": {
        "required": ["family"],
        "properties": {"family": {"type": "array", "items": {"$ref": "#/$defs/machine"}}},
    },
}

MLTEST_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["S", "V"],
    "properties": {
        "S": {"type": "array", "items": _BITS},
        "V": {"type": "array", "items": _BITS},
        "levels": {"type": "integer", "minimum": 0, "maximum": 64},
        "margins": {"type": "object", "patternProperties": {"^[0-9]+$": _RATIONAL}, "additionalProperties": False},
        "delta_overrides": {
            "type": "object", "patternProperties": {"^[0-9]+$": _RATIONAL}, "additionalProperties": False,
        },
        "check_preconditions": {"type": "boolean"},
        "horizon": _NAT,
    },
}


def _params_schema(name: str) -> dict:
    block = dict(PARAMS[name])
    block.setdefault("properties", {})
    return {
        "$defs": SCHEMA["$defs"],
        "type": "object",
        "additionalProperties": False,
        **block,
    }


def _validate(instance, schema, where: str) -> None:
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise InputError(f"{where}{'/' + path if path else ''}: {exc.message}") from None


def validate_machine_config(cfg: dict, where: str = "config") -> None:
    _validate(cfg, {"$defs": SCHEMA["$defs"], "$ref": "#/$defs/machine"}, where)
    name = cfg["construction"]
    params = cfg.get("params", {})
    _validate(params, _params_schema(name), f"{where}/params")
    for key in ("v", "n"):
        if key in params:
            validate_machine_config(params[key], f"{where}/params/{key}")
    for i, sub in enumerate(params.get("family", []) if isinstance(params.get("family"), list) else []):
        validate_machine_config(sub, f"{where}/params/family/{i}")


def validate_run_config(cfg: dict) -> None:
    _validate(cfg, SCHEMA, "config")
    validate_machine_config({"construction": cfg["construction"], "params": cfg.get("params", {})})


def load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


# ---------------------------------------------------------------- builders


def rational(x) -> Fraction:
    return Fraction(x)


def fmt_rational(q: Fraction) -> str:
    return str(Fraction(q))


def _bits(x: str) -> str:
    return parse_bits(x)


def build_oracle(doc: dict | None):
    if doc is None:
        return None
    kind = doc["kind"]
    if kind == "halting":
        return HaltingOracle()
    if kind == "empty":
        return EmptyOracle()
    limit = doc.get("limit")
    if kind == "known-limit-toy" and limit is None:
        # the limit of a finite script is what remains at its end
        oracle = ScriptedOracle(doc.get("events", []))
        return ScriptedOracle(doc.get("events", []), limit=oracle.enumerate(oracle.stabilization))
    if kind == "ce-monotone" and any(len(ev) == 3 for ev in doc.get("events", [])):
        raise InputError("a ce-monotone oracle script cannot remove elements")
    return ScriptedOracle(doc.get("events", []), limit=limit)


def build_set(doc: dict):
    kind = doc["kind"]
    if kind in ("toy-known-limit", "sigma1-monotone"):
        events = [[_bits(ev[0]), *ev[1:]] for ev in doc["events"]]
        return ScriptedSet(events, semantics=TOY if kind == "toy-known-limit" else SIGMA1)
    if kind == "hat-trick":
        axioms = [[_bits(ax[0]), *ax[1:]] for ax in doc["axioms"]]
        return hat_trick(CeOperator(axioms), build_oracle(doc["oracle"]))
    return AllocationSet([tuple(r) for r in doc["requests"]])


def _target(doc: dict, direction: str) -> PrescribedTarget:
    return PrescribedTarget(
        [rational(v) for v in doc["values"]], direction, doc["c"], doc.get("precision", 64),
    )


def _allocation_log(machine) -> dict:
    alloc = getattr(machine, "allocation", None)
    return alloc.to_json() if alloc is not None else {}


def build_machine(cfg: dict) -> tuple[Any, dict]:
    """Build from a validated machine config; returns (machine, build log)."""
    name = cfg["construction"]
    p = cfg.get("params", {})
    log: dict[str, Any] = {"construction": name}
    if name == "empty":
        return EmptyOracleMachine(p.get("frozen_from", 0)), log
    if name == "constant-on-region":
        return ConstantOnRegion([_bits(r) for r in p["region"]], p.get("value", 0), p.get("from_stage", 0)), log
    if name in ("tot-from-sigma2", "monotone-from-tot", "infsd-from-sigma2"):
        v = build_set(p["set"])
        if isinstance(v, AllocationSet):
            log["allocation"] = [[fmt_bits(s), st] for s, st in v.entries]
        if name == "infsd-from-sigma2":
            return infsd_from_sigma2(v), log
        m = tot_machine_from_sigma2(v)
        return (m if name == "tot-from-sigma2" else monotone_from_tot(m)), log
    if name == "prescribed-tot":
        m, rho = prescribed_tot_machine(_target(p["target"], DESCENDING))
        log.update(_allocation_log(m))
        return m, log
    if name == "prescribed-universal-tot":
        family = []
        for i, sub in enumerate(p["family"]):
            machine, sublog = build_machine(sub)
            _require_oracle(machine, f"family member {i}")
            family.append(machine)
        v = universal_from_family(family)
        res = prescribed_universal_tot(
            _target(p["target"], DESCENDING), v, [rational(g) for g in p["gamma"]], p.get("c"),
        )
        log.update(_allocation_log(res.inner))
        log["c"] = res.c
        log["beta"] = [fmt_rational(b) for b in res.beta]
        return res.machine, log
    if name == "cof-from-sigma3":
        fam = p["family"]
        family = MonotoneStageFamily(
            [(_bits(a), t, s) for a, t, s in fam.get("infinite", [])],
            [(t, _bits(a), s) for t, a, s in fam.get("bursts", [])],
        )
        oracle = build_oracle(p.get("oracle")) or HaltingOracle()
        rho = _bits(p["rho"]) if "rho" in p else None
        return cof_machine_from_sigma3(family, oracle, rho=rho), log
    if name in ("prescribed-cof", "prescribed-com"):
        builder = prescribed_cof_machine if name == "prescribed-cof" else prescribed_com_machine
        m, _ = builder(_target(p["target"], ASCENDING), build_oracle(p.get("oracle")))
        log.update(_allocation_log(m))
        return m, log
    if name == "prescribed-domain-infsd":
        m, _ = prescribed_domain_infsd(_target(p["target"], ASCENDING))
        log.update(_allocation_log(m))
        return m, log
    if name == "splice":
        v, vlog = build_machine(p["v"])
        n, nlog = build_machine(p["n"])
        _require_oracle(v, "v")
        _require_oracle(n, "n")
        hz = p.get("horizons", {})
        horizons = Horizons(hz.get("depth", 6), hz.get("n_max", 6), hz.get("stage", 12))
        log["v"], log["n"] = vlog, nlog
        return splice(v, n, _bits(p["rho"]), horizons), log
    if name == "universal":
        family = []
        logs = []
        for i, sub in enumerate(p["family"]):
            machine, sublog = build_machine(sub)
            _require_oracle(machine, f"family member {i}")
            family.append(machine)
            logs.append(sublog)
        log["family"] = logs
        log["codes"] = ["0" * e + "1" for e in range(len(family))]
        return universal_from_family(family), log
    raise InputError(f"unknown construction {name!r}")  # pragma: no cover - schema enum


def _require_oracle(machine, what: str) -> None:
    if not isinstance(machine, StagedOracleMachine):
        raise InputError(f"{what} must be an oracle machine")


def make_artifact(cfg: dict) -> tuple[Any, str]:
    """Validate, build, and render the artifact text (deterministic)."""
    machine_cfg = {"construction": cfg["construction"], "params": cfg.get("params", {})}
    machine, log = build_machine(machine_cfg)
    doc = {"format": ARTIFACT_FORMAT, "machine": machine_cfg, "model": machine.model, "build_log": log}
    return machine, json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


ARTIFACT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format", "machine", "model", "build_log"],
    "properties": {
        "format": {"const": ARTIFACT_FORMAT},
        "machine": {"type": "object"},
        "model": {"enum": ["oracle", "monotone", "infsd"]},
        "build_log": {"type": "object"},
    },
}


def load_artifact(path: str):
    doc = load_json(path)
    _validate(doc, ARTIFACT_SCHEMA, path)
    validate_machine_config(doc["machine"], f"{path}/machine")
    machine, _ = build_machine(doc["machine"])
    return machine, doc


__all__ = [
    "EMPTY_TOKEN",
    "InputError",
    "SCHEMA",
    "MLTEST_SCHEMA",
    "build_machine",
    "build_set",
    "build_oracle",
    "load_artifact",
    "load_json",
    "make_artifact",
    "validate_run_config",
    "validate_machine_config",
]
