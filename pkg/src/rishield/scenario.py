"""Scene description: walls, materials, devices and the RIS panel.

Scenarios are stored as TOML documents::

    name = "apartment"
    carrier_hz = 2.4e9
    noise_power_dbm = -90.0
    height_m = 2.7                      # optional, recorded only

    [[material]]
    name = "internal"
    transmission_loss_db = 5.0
    reflection_loss_db = 8.0

    [[wall]]
    x1 = 0.0
    y1 = 0.0
    x2 = 10.0
    y2 = 0.0
    material = "internal"
    thickness_m = 0.1

    [tx]
    x = 2.0
    y = 1.5
    antennas = 4
    power_dbm = 20.0

    [[rx]]
    x = 8.0
    y = 2.0
    zone = "protected"                  # or "served"
    name = "p1"                         # optional
    antennas = 1                        # optional, must be 1

    [[room]]                            # optional, for coverage statistics
    name = "shielded"
    xmin = 7.0
    ymin = 0.0
    xmax = 10.0
    ymax = 6.0

    [ris]
    x1 = 7.0
    y1 = 0.0
    x2 = 7.0
    y2 = 4.0
    rows = 2
    cols = 6
    element_spacing_m = 0.0625          # optional, defaults to half wavelength

Lengths are meters, powers dBm, frequencies Hz.  Unknown keys are rejected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli
import tomli_w

SPEED_OF_LIGHT = 299_792_458.0


class ScenarioError(ValueError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Zone(str, enum.Enum):
    PROTECTED = "protected"
    SERVED = "served"


def wavelength(carrier_hz):
    return SPEED_OF_LIGHT / carrier_hz


@dataclass(frozen=True)
class Material:
    name: str
    transmission_loss_db: float
    reflection_loss_db: float


@dataclass(frozen=True)
class Wall:
    x1: float
    y1: float
    x2: float
    y2: float
    material: Material
    thickness_m: float

    @property
    def length(self):
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)


@dataclass(frozen=True)
class RisPanel:
    """Mounting segment plus element grid.  Elements are indexed row-major,
    row 0 at the top of the panel, columns running from (x1, y1) to (x2, y2).
    """

    x1: float
    y1: float
    x2: float
    y2: float
    rows: int
    cols: int
    carrier_hz: float
    element_spacing_m: float | None = None

    @property
    def n_elements(self):
        return self.rows * self.cols

    @property
    def wavelength_m(self):
        return wavelength(self.carrier_hz)

    @property
    def spacing_m(self):
        if self.element_spacing_m is None:
            return self.wavelength_m / 2
        return self.element_spacing_m

    @property
    def center(self):
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    @property
    def axis(self):
        """Unit vector along the panel columns."""
        dx, dy = self.x2 - self.x1, self.y2 - self.y1
        norm = math.hypot(dx, dy)
        return (dx / norm, dy / norm)


@dataclass(frozen=True)
class Device:
    x: float
    y: float
    antennas: int = 1
    tx_power_dbm: float | None = None
    zone: Zone = Zone.SERVED
    name: str = ""

    @property
    def position(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class Room:
    """Axis-aligned rectangle used only for reporting coverage statistics."""

    name: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def region(self):
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class Scenario:
    walls: tuple[Wall, ...]
    transmitters: tuple[Device, ...]
    receivers: tuple[Device, ...]
    carrier_hz: float
    noise_power_dbm: float
    ris: RisPanel | None = None
    height_m: float | None = None
    name: str = ""
    rooms: tuple[Room, ...] = ()

    @property
    def tx(self):
        return self.transmitters[0]

    @property
    def wavelength_m(self):
        return wavelength(self.carrier_hz)

    @property
    def noise_power(self):
        """Noise power sigma_n^2 in mW."""
        return 10.0 ** (self.noise_power_dbm / 10.0)

    @property
    def n_elements(self):
        return 0 if self.ris is None else self.ris.n_elements

    def receiver_index(self, key):
        """Resolve a receiver by name or integer index."""
        if isinstance(key, int):
            if 0 <= key < len(self.receivers):
                return key
            raise KeyError(f"no receiver with index {key}")
        for i, rx in enumerate(self.receivers):
            if rx.name == key:
                return i
        if str(key).isdigit():
            return self.receiver_index(int(key))
        raise KeyError(f"no receiver named {key!r}")

    def room(self, name):
        for r in self.rooms:
            if r.name == name:
                return r
        raise KeyError(f"no room named {name!r}")

    def room_of(self, x, y):
        for r in self.rooms:
            if r.xmin <= x <= r.xmax and r.ymin <= y <= r.ymax:
                return r
        return None

    def protected_indices(self):
        return [i for i, rx in enumerate(self.receivers) if rx.zone == Zone.PROTECTED]

    def bounding_box(self):
        """(xmin, ymin, xmax, ymax) of the walls, or None for free space."""
        if not self.walls:
            return None
        xs = [w.x1 for w in self.walls] + [w.x2 for w in self.walls]
        ys = [w.y1 for w in self.walls] + [w.y2 for w in self.walls]
        return (min(xs), min(ys), max(xs), max(ys))


def _finite_nonneg(x):
    return isinstance(x, (int, float)) and math.isfinite(x) and x >= 0


def validate(s: Scenario) -> list[str]:
    """Return the list of violated invariants; empty means valid."""
    out = []
    if not (s.carrier_hz > 0 and math.isfinite(s.carrier_hz)):
        out.append("carrier_hz must be positive")
    if not math.isfinite(s.noise_power_dbm):
        out.append("noise_power_dbm must be finite")
    if len(s.transmitters) != 1:
        out.append("exactly one transmitter")
    for i, tx in enumerate(s.transmitters):
        if tx.antennas < 1:
            out.append(f"tx[{i}].antennas must be >= 1")
        if tx.tx_power_dbm is None or not math.isfinite(tx.tx_power_dbm):
            out.append(f"tx[{i}].power_dbm must be finite")
    seen_materials = {}
    for i, w in enumerate(s.walls):
        m = w.material
        if not (_finite_nonneg(m.transmission_loss_db) and _finite_nonneg(m.reflection_loss_db)):
            out.append(f"material {m.name!r}: losses must be finite and non-negative")
        if m.name in seen_materials and seen_materials[m.name] != m:
            out.append(f"material {m.name!r} defined twice with different values")
        seen_materials[m.name] = m
        if w.x1 == w.x2 and w.y1 == w.y2:
            out.append(f"wall[{i}]: endpoints must be distinct")
        if not (w.thickness_m > 0):
            out.append(f"wall[{i}].thickness_m must be > 0")
    bbox = s.bounding_box()
    for i, rx in enumerate(s.receivers):
        if rx.antennas != 1:
            out.append(f"receiver must be single-antenna (rx[{i}])")
        if not isinstance(rx.zone, Zone):
            out.append(f"rx[{i}].zone must be protected or served")
        if bbox is not None:
            xmin, ymin, xmax, ymax = bbox
            if not (xmin <= rx.x <= xmax and ymin <= rx.y <= ymax):
                out.append(f"rx[{i}] lies outside the scenario bounds")
    for r in s.rooms:
        if not (r.xmin < r.xmax and r.ymin < r.ymax):
            out.append(f"room {r.name!r}: needs xmin < xmax and ymin < ymax")
    names = [rx.name for rx in s.receivers if rx.name]
    if len(names) != len(set(names)):
        out.append("receiver names must be unique")
    if s.ris is not None:
        r = s.ris
        if r.rows < 1 or r.cols < 1:
            out.append("ris rows and cols must be >= 1")
        if r.x1 == r.x2 and r.y1 == r.y2:
            out.append("ris: endpoints must be distinct")
        if r.carrier_hz != s.carrier_hz:
            out.append("ris carrier must match scenario carrier")
        if r.carrier_hz > 0 and not math.isclose(r.spacing_m, r.wavelength_m / 2, rel_tol=1e-9):
            out.append("element spacing must equal half wavelength")
    return out


# -- file IO ---------------------------------------------------------------

_TOP_KEYS = {"name", "carrier_hz", "noise_power_dbm", "height_m", "material", "wall", "tx", "rx", "ris", "room"}
_ROOM_KEYS = {"name", "xmin", "ymin", "xmax", "ymax"}
_MATERIAL_KEYS = {"name", "transmission_loss_db", "reflection_loss_db"}
_WALL_KEYS = {"x1", "y1", "x2", "y2", "material", "thickness_m"}
_TX_KEYS = {"x", "y", "antennas", "power_dbm", "name"}
_RX_KEYS = {"x", "y", "zone", "name", "antennas"}
_RIS_KEYS = {"x1", "y1", "x2", "y2", "rows", "cols", "element_spacing_m"}


def _check_keys(table, allowed, where, required=()):
    if not isinstance(table, dict):
        raise ScenarioParseError(f"{where}: expected a table")
    unknown = set(table) - allowed
    if unknown:
        raise ScenarioParseError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in table]
    if missing:
        raise ScenarioParseError(f"{where}: missing keys {missing}")


def _num(table, key, where, default=None):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioParseError(f"{where}.{key}: expected a number")
    return float(val)


def _int(table, key, where, default=None):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ScenarioParseError(f"{where}.{key}: expected an integer")
    return val


def scenario_from_dict(doc: dict) -> Scenario:
    _check_keys(doc, _TOP_KEYS, "scenario", required=("carrier_hz", "tx"))
    carrier = _num(doc, "carrier_hz", "scenario")
    materials = {}
    for i, m in enumerate(doc.get("material", [])):
        where = f"material[{i}]"
        _check_keys(m, _MATERIAL_KEYS, where, required=_MATERIAL_KEYS)
        materials[m["name"]] = Material(
            str(m["name"]),
            _num(m, "transmission_loss_db", where),
            _num(m, "reflection_loss_db", where),
        )
    walls = []
    for i, w in enumerate(doc.get("wall", [])):
        where = f"wall[{i}]"
        _check_keys(w, _WALL_KEYS, where, required=_WALL_KEYS)
        if w["material"] not in materials:
            raise ScenarioParseError(f"{where}: undefined material {w['material']!r}")
        walls.append(Wall(
            _num(w, "x1", where), _num(w, "y1", where), _num(w, "x2", where), _num(w, "y2", where),
            materials[w["material"]], _num(w, "thickness_m", where),
        ))
    tx_tables = doc["tx"] if isinstance(doc["tx"], list) else [doc["tx"]]
    transmitters = []
    for i, t in enumerate(tx_tables):
        where = f"tx[{i}]"
        _check_keys(t, _TX_KEYS, where, required=("x", "y", "power_dbm"))
        transmitters.append(Device(
            _num(t, "x", where), _num(t, "y", where),
            antennas=_int(t, "antennas", where, 1),
            tx_power_dbm=_num(t, "power_dbm", where),
            name=str(t.get("name", "")),
        ))
    receivers = []
    for i, r in enumerate(doc.get("rx", [])):
        where = f"rx[{i}]"
        _check_keys(r, _RX_KEYS, where, required=("x", "y"))
        try:
            zone = Zone(str(r.get("zone", "served")).lower())
        except ValueError:
            raise ScenarioParseError(f"{where}.zone: expected 'protected' or 'served'") from None
        receivers.append(Device(
            _num(r, "x", where), _num(r, "y", where),
            antennas=_int(r, "antennas", where, 1),
            zone=zone,
            name=str(r.get("name", "")),
        ))
    rooms = []
    for i, r in enumerate(doc.get("room", [])):
        where = f"room[{i}]"
        _check_keys(r, _ROOM_KEYS, where, required=_ROOM_KEYS)
        rooms.append(Room(str(r["name"]), _num(r, "xmin", where), _num(r, "ymin", where),
                          _num(r, "xmax", where), _num(r, "ymax", where)))
    ris = None
    if "ris" in doc:
        r = doc["ris"]
        _check_keys(r, _RIS_KEYS, "ris", required=("x1", "y1", "x2", "y2", "rows", "cols"))
        ris = RisPanel(
            _num(r, "x1", "ris"), _num(r, "y1", "ris"), _num(r, "x2", "ris"), _num(r, "y2", "ris"),
            _int(r, "rows", "ris"), _int(r, "cols", "ris"), carrier,
            _num(r, "element_spacing_m", "ris"),
        )
    return Scenario(
        walls=tuple(walls),
        transmitters=tuple(transmitters),
        receivers=tuple(receivers),
        carrier_hz=carrier,
        noise_power_dbm=_num(doc, "noise_power_dbm", "scenario", -90.0),
        ris=ris,
        height_m=_num(doc, "height_m", "scenario"),
        name=str(doc.get("name", "")),
        rooms=tuple(rooms),
    )


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file.

    Raises ScenarioParseError for malformed documents and
    ScenarioValidationError when the parsed scene breaks an invariant.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    s = scenario_from_dict(doc)
    violations = validate(s)
    if violations:
        raise ScenarioValidationError(violations)
    return s


def scenario_to_dict(s: Scenario) -> dict:
    doc = {}
    if s.name:
        doc["name"] = s.name
    doc["carrier_hz"] = float(s.carrier_hz)
    doc["noise_power_dbm"] = float(s.noise_power_dbm)
    if s.height_m is not None:
        doc["height_m"] = float(s.height_m)
    materials = {}
    for w in s.walls:
        materials.setdefault(w.material.name, w.material)
    if materials:
        doc["material"] = [
            {"name": m.name, "transmission_loss_db": m.transmission_loss_db,
             "reflection_loss_db": m.reflection_loss_db}
            for m in materials.values()
        ]
    if s.walls:
        doc["wall"] = [
            {"x1": w.x1, "y1": w.y1, "x2": w.x2, "y2": w.y2,
             "material": w.material.name, "thickness_m": w.thickness_m}
            for w in s.walls
        ]
    txs = []
    for t in s.transmitters:
        d = {"x": t.x, "y": t.y, "antennas": t.antennas, "power_dbm": t.tx_power_dbm}
        if t.name:
            d["name"] = t.name
        txs.append(d)
    doc["tx"] = txs[0] if len(txs) == 1 else txs
    if s.receivers:
        doc["rx"] = []
        for r in s.receivers:
            d = {"x": r.x, "y": r.y, "zone": r.zone.value}
            if r.name:
                d["name"] = r.name
            if r.antennas != 1:
                d["antennas"] = r.antennas
            doc["rx"].append(d)
    if s.ris is not None:
        r = s.ris
        doc["ris"] = {"x1": r.x1, "y1": r.y1, "x2": r.x2, "y2": r.y2, "rows": r.rows, "cols": r.cols}
        if r.element_spacing_m is not None:
            doc["ris"]["element_spacing_m"] = r.element_spacing_m
    if s.rooms:
        doc["room"] = [{"name": r.name, "xmin": r.xmin, "ymin": r.ymin, "xmax": r.xmax, "ymax": r.ymax}
                       for r in s.rooms]
    return doc


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(tomli_w.dumps(scenario_to_dict(s)))


# -- the reference apartment ------------------------------------------------

EXTERNAL = Material("external", 12.0, 8.0)
INTERNAL = Material("internal", 5.0, 8.0)


def build_default_apartment(external=EXTERNAL, internal=INTERNAL) -> Scenario:
    """Four-room, 60 m^2 apartment with an AP in the living room.

    Layout (meters, 10 x 6 footprint)::

        y=6 +-----------+-----------+-----------+
            |  bedroom  |  study    D  shielded |
        y=4 +--D--------+--------D--+           |
            |                       R   room    |
            |   living (tx)         R           |
        y=0 +-----------------------+-----------+
           x=0        3.5          7          10

    D marks 0.9 m door gaps, R the RIS covering the shared living/shielded
    wall.  The shielded room's door opens onto the study, away from the AP.
    """
    ext, intl = external, internal
    walls = [
        Wall(0.0, 0.0, 10.0, 0.0, ext, 0.41),
        Wall(10.0, 0.0, 10.0, 6.0, ext, 0.41),
        Wall(10.0, 6.0, 0.0, 6.0, ext, 0.41),
        Wall(0.0, 6.0, 0.0, 0.0, ext, 0.41),
        # living / bedroom + study, doors at x in [1.2, 2.1] and [5.9, 6.8]
        Wall(0.0, 4.0, 1.2, 4.0, intl, 0.12),
        Wall(2.1, 4.0, 5.9, 4.0, intl, 0.12),
        Wall(6.8, 4.0, 7.0, 4.0, intl, 0.12),
        # bedroom / study
        Wall(3.5, 4.0, 3.5, 6.0, intl, 0.10),
        # shielded room: RIS-covered wall to the living room, door into the study
        Wall(7.0, 0.0, 7.0, 4.0, intl, 0.15),
        Wall(7.0, 4.0, 7.0, 5.0, intl, 0.15),
        Wall(7.0, 5.9, 7.0, 6.0, intl, 0.15),
    ]
    carrier = 2.4e9
    tx = Device(1.83, 2.37, antennas=4, tx_power_dbm=20.0, name="ap")
    receivers = (
        Device(8.43, 1.61, zone=Zone.PROTECTED, name="p1"),
        Device(8.81, 3.27, zone=Zone.PROTECTED, name="p2"),
        Device(4.93, 2.58, zone=Zone.SERVED, name="s1"),
        Device(5.27, 5.13, zone=Zone.SERVED, name="s2"),
    )
    ris = RisPanel(7.0, 0.0, 7.0, 4.0, rows=2, cols=6, carrier_hz=carrier)
    return Scenario(
        walls=tuple(walls),
        transmitters=(tx,),
        receivers=receivers,
        carrier_hz=carrier,
        noise_power_dbm=-90.0,
        ris=ris,
        height_m=2.7,
        name="apartment",
        rooms=(
            Room("living", 0.0, 0.0, 7.0, 4.0),
            Room("bedroom", 0.0, 4.0, 3.5, 6.0),
            Room("study", 3.5, 4.0, 7.0, 6.0),
            Room("shielded", 7.0, 0.0, 10.0, 6.0),
        ),
    )
