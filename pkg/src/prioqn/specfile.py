"""YAML network files.

Classes are addressed by ``(type, station)``; types are numbered from 1
(highest priority) and stations by their ``id``.  Example::

    stations:
      - {id: 1, servers: 2}
    types: 2
    classes:
      - {type: 1, station: 1, alpha: 0.5, mu: 1.0}
      - {type: 2, station: 1, alpha: 0.3, mu: 1.0}
    routing:
      - {from: [1, 1], to: [1, 1], prob: 0.1}
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError
from .model import NetworkSpec, validate_spec
from .srbm import VariabilityParams

TOP_KEYS = {"name", "description", "stations", "types", "classes", "routing", "variability"}
REQUIRED = {"stations", "types", "classes"}


def bundled_names() -> list[str]:
    files = resources.files("prioqn") / "data"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def resolve(path_or_name: str) -> Path:
    """A filesystem path, or the name of a bundled example."""
    p = Path(path_or_name)
    if p.exists():
        return p
    name = path_or_name[:-5] if path_or_name.endswith(".yaml") else path_or_name
    bundled = resources.files("prioqn") / "data" / f"{name}.yaml"
    if bundled.is_file():
        return Path(str(bundled))
    raise ParseError(f"no such file or bundled example: {path_or_name!r}")


def _keys(where, obj, allowed, required=()):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected a mapping, got {type(obj).__name__}")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ParseError(f"{where}: unknown key(s) {sorted(map(str, unknown))}")
    missing = set(required) - set(obj)
    if missing:
        raise ParseError(f"{where}: missing key(s) {sorted(missing)}")


def _number(where, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return int(value) if integer else float(value)


def load_document(path_or_name: str) -> tuple[dict, str]:
    path = resolve(path_or_name)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if doc is None:
        raise ParseError(f"{path}: file is empty")
    return doc, path.stem


def parse_document(doc: dict, default_name: str = "") -> tuple[NetworkSpec, VariabilityParams | None]:
    _keys("top level", doc, TOP_KEYS, REQUIRED)
    stations = doc["stations"]
    if not isinstance(stations, list) or not stations:
        raise ParseError("stations: expected a non-empty list")
    station_ids: dict = {}
    servers = []
    for i, st in enumerate(stations):
        where = f"stations[{i}]"
        _keys(where, st, {"id", "servers"}, {"id", "servers"})
        if st["id"] in station_ids:
            raise ParseError(f"{where}: duplicate station id {st['id']!r}")
        station_ids[st["id"]] = i
        servers.append(_number(f"{where}.servers", st["servers"], integer=True))
    J = len(servers)
    I = _number("types", doc["types"], integer=True)
    if I < 1:
        raise ParseError("types: must be >= 1")
    K = I * J

    def class_of(where, t, s):
        t = _number(f"{where} type", t, integer=True)
        if not 1 <= t <= I:
            raise ParseError(f"{where}: type {t} outside 1..{I}")
        if s not in station_ids:
            raise ParseError(f"{where}: unknown station {s!r}")
        return (t - 1) * J + station_ids[s]

    alpha = np.full(K, np.nan)
    mu = np.full(K, np.nan)
    classes = doc["classes"]
    if not isinstance(classes, list):
        raise ParseError("classes: expected a list")
    for i, c in enumerate(classes):
        where = f"classes[{i}]"
        _keys(where, c, {"type", "station", "alpha", "mu"}, {"type", "station", "alpha", "mu"})
        k = class_of(where, c["type"], c["station"])
        if not np.isnan(alpha[k]):
            raise ParseError(f"{where}: class (type {c['type']}, station {c['station']}) listed twice")
        alpha[k] = _number(f"{where}.alpha", c["alpha"])
        mu[k] = _number(f"{where}.mu", c["mu"])
    if np.any(np.isnan(alpha)):
        missing = [(k // J + 1, list(station_ids)[k % J]) for k in np.flatnonzero(np.isnan(alpha))]
        raise ParseError(f"classes: missing (type, station) entries {missing}")

    P = np.zeros((K, K))
    for i, r in enumerate(doc.get("routing") or []):
        where = f"routing[{i}]"
        _keys(where, r, {"from", "to", "prob"}, {"from", "to", "prob"})
        ends = []
        for key in ("from", "to"):
            pair = r[key]
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ParseError(f"{where}.{key}: expected [type, station]")
            ends.append(class_of(f"{where}.{key}", pair[0], pair[1]))
        P[ends[0], ends[1]] += _number(f"{where}.prob", r["prob"])

    spec = NetworkSpec(J, I, servers, alpha, mu, P, str(doc.get("name", default_name)))
    validate_spec(spec).raise_for_problems()

    variability = None
    if doc.get("variability") is not None:
        exp = VariabilityParams.exponential(spec)
        a, b = exp.a.copy(), exp.b.copy()
        for i, v in enumerate(doc["variability"]):
            where = f"variability[{i}]"
            _keys(where, v, {"type", "station", "a", "b"}, {"type", "station", "a", "b"})
            k = class_of(where, v["type"], v["station"])
            a[k] = _number(f"{where}.a", v["a"])
            b[k] = _number(f"{where}.b", v["b"])
        variability = VariabilityParams(a, b)
    return spec, variability


def parse_spec(path_or_name: str) -> NetworkSpec:
    """Read and validate a network file.

    Raises:
        ParseError: unreadable, empty or malformed file.
        ValidationError: the network violates a structural invariant.
    """
    return load_spec(path_or_name)[0]


def load_spec(path_or_name: str) -> tuple[NetworkSpec, VariabilityParams | None]:
    doc, stem = load_document(path_or_name)
    return parse_document(doc, stem)


def dump_spec(spec: NetworkSpec, description: str = "") -> str:
    """Serialize a network back to the file format (station ids 1..J)."""
    J = spec.num_stations
    doc = {"name": spec.name or "network"}
    if description:
        doc["description"] = description
    doc["stations"] = [{"id": j + 1, "servers": int(spec.servers[j])} for j in range(J)]
    doc["types"] = spec.num_types
    doc["classes"] = [{"type": k // J + 1, "station": k % J + 1,
                       "alpha": float(spec.alpha[k]), "mu": float(spec.mu[k])}
                      for k in range(spec.num_classes)]
    routes = [{"from": [int(k) // J + 1, int(k) % J + 1], "to": [int(l) // J + 1, int(l) % J + 1],
               "prob": float(spec.routing[k, l])}
              for k, l in np.argwhere(spec.routing > 0)]
    if routes:
        doc["routing"] = routes
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
