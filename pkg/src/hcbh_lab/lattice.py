"""Rectangular lattice geometry, couplings, subsystems, and tomography colorings.

Site indexing is row-major and 0-based: site = row * cols + col.  Basis states
of the simulator use the convention that bit ``i`` of a computational-basis
index is the occupation of site ``i``.  Couplings are restricted to Manhattan
distance 1 (nearest neighbor) and 2 (next-nearest neighbor, both diagonal and
straight-line pairs).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError

# Largest supported lattice.  State vectors at this size take 2^25 complex
# amplitudes (~0.5 GB); evolution and ground-state solves near the limit are
# memory-bound but supported.
MAX_SITES = 25


def _site_rc(site: int, cols: int) -> tuple[int, int]:
    return divmod(site, cols)


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """Geometry and Hamiltonian parameters of a rectangular hard-core lattice.

    Attributes:
        rows, cols: grid dimensions; ``rows == 1`` gives a 1D chain.
        couplings: exchange couplings, keyed by site pairs ``(i, j)`` with
            ``i < j``, in units of the reference rate J.
        drive_couplings: per-site complex drive coefficients; magnitudes must
            lie in [0, 1].
        site_detunings: per-site energy offset of an occupied site, units of J.
    """

    rows: int
    cols: int
    couplings: dict[tuple[int, int], float]
    drive_couplings: np.ndarray
    site_detunings: np.ndarray

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("lattice dimensions must be positive")
        n = self.rows * self.cols
        if n > MAX_SITES:
            raise ValueError(f"lattice has {n} sites; supported maximum is {MAX_SITES}")
        for (i, j), value in self.couplings.items():
            if not (0 <= i < j < n):
                raise ValueError(f"coupling key ({i}, {j}) is not an ordered in-range pair")
            if self.manhattan_distance(i, j) > 2:
                raise ValueError(f"coupling ({i}, {j}) spans Manhattan distance > 2")
            float(value)
        alpha = np.asarray(self.drive_couplings, dtype=complex)
        eps = np.asarray(self.site_detunings, dtype=float)
        if alpha.shape != (n,) or eps.shape != (n,):
            raise ValueError("drive_couplings and site_detunings must have one entry per site")
        if np.any(np.abs(alpha) > 1.0 + 1e-12):
            raise ValueError("drive coupling magnitudes must lie in [0, 1]")
        object.__setattr__(self, "drive_couplings", alpha)
        object.__setattr__(self, "site_detunings", eps)

    @property
    def sites(self) -> int:
        return self.rows * self.cols

    @property
    def dim(self) -> int:
        return 1 << self.sites

    def site_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ValueError(f"grid position ({row}, {col}) out of range")
        return row * self.cols + col

    def manhattan_distance(self, a: int, b: int) -> int:
        n = self.sites
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"site index out of range: {(a, b)}")
        ra, ca = _site_rc(a, self.cols)
        rb, cb = _site_rc(b, self.cols)
        return abs(ra - rb) + abs(ca - cb)

    @cached_property
    def nn_bonds(self) -> tuple[tuple[int, int], ...]:
        """All grid edges (Manhattan distance 1), independent of couplings."""
        bonds = []
        for r in range(self.rows):
            for c in range(self.cols):
                s = r * self.cols + c
                if c + 1 < self.cols:
                    bonds.append((s, s + 1))
                if r + 1 < self.rows:
                    bonds.append((s, s + self.cols))
        return tuple(bonds)

    @cached_property
    def nnn_pairs(self) -> tuple[tuple[int, int], ...]:
        """All Manhattan-distance-2 pairs (diagonal and straight-line)."""
        n = self.sites
        return tuple(
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if self.manhattan_distance(i, j) == 2
        )

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.sites)]
        for i, j in self.nn_bonds:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def occupation_counts(self) -> np.ndarray:
        """Particle number of every computational-basis index (int8)."""
        idx = np.arange(self.dim, dtype=np.uint64)
        return np.bitwise_count(idx).astype(np.int8)


def manhattan_distance(spec: LatticeSpec, a: int, b: int) -> int:
    return spec.manhattan_distance(a, b)


def _check_connected(spec: LatticeSpec, sites: tuple[int, ...]) -> bool:
    members = set(sites)
    stack = [sites[0]]
    seen = {sites[0]}
    while stack:
        cur = stack.pop()
        for nb in spec.neighbors[cur]:
            if nb in members and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(members)


def subsystem_area(spec: LatticeSpec, sites) -> int:
    """Number of nearest-neighbor bonds with exactly one endpoint in ``sites``."""
    listed = [int(s) for s in sites]
    if not listed:
        raise ValueError("subsystem must contain at least one site")
    members = set(listed)
    for s in members:
        if not (0 <= s < spec.sites):
            raise ValueError(f"site index out of range: {s}")
    if len(members) != len(listed):
        raise ValueError("duplicate sites in subsystem")
    ordered = tuple(sorted(members))
    if not _check_connected(spec, ordered):
        raise ValueError(f"subsystem {ordered} is not nearest-neighbor connected")
    return sum(1 for i, j in spec.nn_bonds if (i in members) != (j in members))


@dataclass(frozen=True)
class Subsystem:
    """An NN-connected set of sites with its derived volume and boundary area."""

    sites: tuple[int, ...]
    volume: int
    area: int

    @classmethod
    def of(cls, spec: LatticeSpec, sites) -> "Subsystem":
        ordered = tuple(sorted(int(s) for s in sites))
        return cls(sites=ordered, volume=len(ordered), area=subsystem_area(spec, ordered))

    @property
    def label(self) -> str:
        return "-".join(str(s) for s in self.sites)


@dataclass(frozen=True, eq=False)
class TomographyColoring:
    """Assignment of measurement-basis colors to sites.

    A subsystem is reconstructable from one simultaneous measurement campaign
    iff all its sites carry pairwise-distinct colors and none is excluded.
    """

    assignment: dict[int, int]
    excluded_sites: frozenset[int] = field(default_factory=frozenset)

    @property
    def n_colors(self) -> int:
        return max(self.assignment.values()) + 1 if self.assignment else 0

    def is_reconstructable(self, sites) -> bool:
        colors = []
        for s in sites:
            if s in self.excluded_sites or s not in self.assignment:
                return False
            colors.append(self.assignment[s])
        return len(set(colors)) == len(colors)


def build_lattice(
    rows: int,
    cols: int,
    j_nn: float,
    j_nnn: float = 0.0,
    drive_couplings=None,
    site_detunings=None,
    coupling_overrides: dict[tuple[int, int], float] | None = None,
) -> LatticeSpec:
    """Build a uniform rectangular lattice spec.

    Every grid edge gets coupling ``j_nn`` and every Manhattan-distance-2 pair
    gets ``j_nnn`` (dropped when zero).  ``coupling_overrides`` replaces
    individual bond values and may also introduce distance-2 bonds not covered
    by ``j_nnn``.
    """
    if rows < 1 or cols < 1:
        raise ValueError("lattice dimensions must be positive")
    if j_nn == 0:
        raise ValueError("nearest-neighbor coupling must be nonzero")
    n = rows * cols
    if drive_couplings is None:
        drive_couplings = np.ones(n, dtype=complex)
    if site_detunings is None:
        site_detunings = np.zeros(n)

    probe = LatticeSpec(rows, cols, {}, drive_couplings, site_detunings)
    couplings = {bond: float(j_nn) for bond in probe.nn_bonds}
    if j_nnn != 0.0:
        couplings.update({pair: float(j_nnn) for pair in probe.nnn_pairs})
    if coupling_overrides:
        for (i, j), value in coupling_overrides.items():
            key = (min(i, j), max(i, j))
            couplings[key] = float(value)
    return LatticeSpec(rows, cols, couplings, drive_couplings, site_detunings)


def enumerate_connected_subsystems(
    spec: LatticeSpec, max_volume: int, excluded=()
) -> list[tuple[int, ...]]:
    """All NN-connected site sets of volume 1..max_volume avoiding ``excluded``.

    Grows sets site by site, only ever adding a neighbor larger than the
    anchor (smallest) site or any neighbor of an already-added site, which
    enumerates each connected set exactly once.
    """
    excluded = set(excluded)
    usable = [s for s in range(spec.sites) if s not in excluded]
    found: list[tuple[int, ...]] = []

    def grow(anchor: int, members: set[int], frontier: set[int], banned: set[int]) -> None:
        found.append(tuple(sorted(members)))
        if len(members) >= max_volume:
            return
        # Each branch bans the candidates tried before it, so every connected
        # set is produced exactly once (rooted at its minimum site = anchor).
        local_banned = set(banned)
        for cand in sorted(frontier - banned):
            new_frontier = frontier | {
                nb
                for nb in spec.neighbors[cand]
                if nb > anchor and nb not in excluded and nb not in members
            }
            grow(anchor, members | {cand}, new_frontier - {cand}, set(local_banned))
            local_banned.add(cand)

    for anchor in usable:
        frontier = {nb for nb in spec.neighbors[anchor] if nb > anchor and nb not in excluded}
        grow(anchor, {anchor}, frontier, set())
    found.sort(key=lambda s: (len(s), s))
    return found


def enumerate_subsystems(
    spec: LatticeSpec, coloring: TomographyColoring, max_volume: int
) -> list[Subsystem]:
    """All reconstructable subsystems of volume 1..max_volume, sorted by
    volume then lexicographically by site list."""
    if max_volume > coloring.n_colors:
        raise ValueError(
            f"max_volume {max_volume} exceeds the number of colors {coloring.n_colors}"
        )
    out = []
    for sites in enumerate_connected_subsystems(spec, max_volume, coloring.excluded_sites):
        if coloring.is_reconstructable(sites):
            out.append(Subsystem.of(spec, sites))
    return out


# ---------------------------------------------------------------------------
# Device configuration files
# ---------------------------------------------------------------------------

DEVICE_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class DeviceConfig:
    """A lattice spec plus the measurement coloring and annotation metadata."""

    spec: LatticeSpec
    coloring: TomographyColoring
    metadata: dict


def _parse_device_dict(raw: dict, source: str) -> DeviceConfig:
    try:
        version = raw["schema_version"]
        if version != DEVICE_SCHEMA_VERSION:
            raise ConfigError(f"{source}: unsupported schema_version {version}")
        rows = int(raw["rows"])
        cols = int(raw["cols"])
        n = rows * cols
        j_nn = float(raw["j_nn"])
        j_nnn = float(raw.get("j_nnn", 0.0))
        alpha = np.ones(n, dtype=complex)
        for entry in raw.get("drive_couplings", []):
            site = int(entry["site"])
            alpha[site] = entry["magnitude"] * np.exp(1j * entry["phase"])
        eps = np.zeros(n)
        for entry in raw.get("site_detunings", []):
            eps[int(entry["site"])] = float(entry["value"])
        overrides = {
            (int(e["i"]), int(e["j"])): float(e["value"])
            for e in raw.get("coupling_overrides", [])
        }
        spec = build_lattice(rows, cols, j_nn, j_nnn, alpha, eps, overrides or None)
        excluded = frozenset(int(s) for s in raw.get("excluded_sites", []))
        assignment = {int(k): int(v) for k, v in raw.get("coloring", {}).items()}
        coloring = TomographyColoring(assignment=assignment, excluded_sites=excluded)
        metadata = dict(raw.get("metadata", {}))
        return DeviceConfig(spec=spec, coloring=coloring, metadata=metadata)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from exc


def load_device_config(path) -> DeviceConfig:
    """Load a device config from a JSON file (see README for the schema)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return _parse_device_dict(raw, str(path))


def bundled_device(name: str = "device-16q") -> DeviceConfig:
    """Load a device config bundled with the package.

    ``device-16q`` is the characterized 16-qubit 4x4 device: uniform mean
    couplings, measured per-site drive coupling magnitudes/phases, two
    excluded sites, and the 6-color simultaneous-tomography assignment.
    """
    fname = f"{name}.json"
    ref = resources.files("hcbh_lab").joinpath("data", fname)
    if not ref.is_file():
        raise ConfigError(f"no bundled device named {name!r}")
    raw = json.loads(ref.read_text())
    return _parse_device_dict(raw, f"bundled:{name}")


def resolve_device(name_or_path: str) -> DeviceConfig:
    """Resolve a device reference: a bundled name or a path to a JSON file."""
    if name_or_path.endswith(".json") or "/" in name_or_path:
        return load_device_config(name_or_path)
    try:
        return bundled_device(name_or_path)
    except ConfigError:
        return load_device_config(name_or_path)
