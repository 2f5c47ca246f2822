"""Dataset ingestion, synthetic federations, query workloads and results CSV."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from fedgroup.core import Location, RangeQuery, substream
from fedgroup.silo import GridSpec, SpatialSilo

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["engine", "m", "epsilon", "lambda_or_m", "mre", "mae", "var_emp", "var_theory",
                  "wall_ms", "mpc_rounds", "mpc_bytes", "seed"]


@dataclass(frozen=True)
class CheckinRecord:
    user_id: int
    timestamp: str
    latitude: float
    longitude: float
    location_id: int

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0 and -180.0 <= self.longitude <= 180.0):
            raise ValueError(f"coordinates out of range: {self.latitude}, {self.longitude}")


@dataclass
class LoadedDataset:
    silos: list[SpatialSilo]
    grid: GridSpec
    skipped: int = 0
    labels: np.ndarray | None = None


def parse_checkin(line: str) -> CheckinRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 5:
        raise ValueError(f"expected 5 tab-separated fields, got {len(parts)}")
    lat, lon = float(parts[2]), float(parts[3])
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError("non-finite coordinate")
    return CheckinRecord(int(parts[0]), parts[1], lat, lon, int(parts[4]))


def load_checkins(path, limit_owners: int | None = None, cells_per_axis: int = 16) -> LoadedDataset:
    """One silo per distinct user, in order of first appearance.

    Longitude becomes x and latitude y; the grid spans the data extent.
    Malformed lines are skipped and counted.
    """
    per_user: dict[int, list[tuple[float, float]]] = {}
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                rec = parse_checkin(line)
            except ValueError:
                skipped += 1
                continue
            if rec.user_id not in per_user:
                if limit_owners is not None and len(per_user) >= limit_owners:
                    continue
                per_user[rec.user_id] = []
            per_user[rec.user_id].append((rec.longitude, rec.latitude))
    if skipped:
        log.warning("%s: skipped %d malformed line(s)", path, skipped)
    if not per_user:
        raise ValueError(f"{path}: no valid check-in records")
    silos = [SpatialSilo(k, np.asarray(pts, dtype=np.float64))
             for k, pts in enumerate(per_user.values(), start=1)]
    grid = GridSpec.from_points(np.concatenate([s.records for s in silos]), cells_per_axis)
    return LoadedDataset(silos, grid, skipped)


@dataclass(frozen=True)
class SyntheticSpec:
    """Owners round-robin over Gaussian clusters inside ``box``."""

    m: int
    records_per_owner: int | tuple[int, int] = 50
    cluster_count: int = 10
    cluster_spread: float = 1.0
    box: tuple[float, float, float, float] = (0.0, 0.0, 100.0, 100.0)
    seed: int = 0
    cells_per_axis: int = 16
    attribute_scale: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 1 <= self.cluster_count <= self.m:
            raise ValueError(f"cluster_count must lie in [1, m], got {self.cluster_count}")
        if not self.cluster_spread > 0:
            raise ValueError("cluster_spread must be positive")
        lo, hi = self._record_range()
        if lo < 0 or hi < lo:
            raise ValueError(f"bad records_per_owner {self.records_per_owner}")
        if not (self.box[2] > self.box[0] and self.box[3] > self.box[1]):
            raise ValueError("degenerate domain box")
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be >= 1")

    def _record_range(self):
        r = self.records_per_owner
        return (int(r), int(r)) if isinstance(r, (int, np.integer)) else (int(r[0]), int(r[1]))


def generate_synthetic(spec: SyntheticSpec) -> LoadedDataset:
    """Clustered federation; ``labels[k]`` is the cluster of owner ``k + 1``."""
    rng = substream(spec.seed, "synthetic", spec.m)
    min_x, min_y, max_x, max_y = spec.box
    centres = np.column_stack([rng.uniform(min_x, max_x, spec.cluster_count),
                               rng.uniform(min_y, max_y, spec.cluster_count)])
    labels = np.arange(spec.m) % spec.cluster_count
    lo, hi = spec._record_range()
    sizes = rng.integers(lo, hi + 1, spec.m) if hi > lo else np.full(spec.m, lo)
    owner = np.repeat(np.arange(spec.m), sizes)
    pts = centres[labels[owner]] + rng.normal(0.0, spec.cluster_spread, (len(owner), 2))
    pts[:, 0] = np.clip(pts[:, 0], min_x, max_x)
    pts[:, 1] = np.clip(pts[:, 1], min_y, max_y)
    attrs = None
    if spec.attribute_scale is not None:
        attrs = rng.exponential(spec.attribute_scale, len(owner))
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    silos = [SpatialSilo(k + 1, pts[bounds[k]:bounds[k + 1]],
                         None if attrs is None else attrs[bounds[k]:bounds[k + 1]])
             for k in range(spec.m)]
    grid = GridSpec(min_x, min_y, max_x, max_y, spec.cells_per_axis)
    return LoadedDataset(silos, grid, 0, labels)


# -- silo text format ---------------------------------------------------------
# "# fedgroup-silos v1", "# grid min_x min_y max_x max_y cells", then
# "owner_id<TAB>x<TAB>y[<TAB>attribute]" per record.  Labels, when present,
# follow as "# label owner_id cluster" lines.

def write_silos(dataset: LoadedDataset, path) -> None:
    g = dataset.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# fedgroup-silos v1\n")
        fh.write(f"# grid {g.min_x!r} {g.min_y!r} {g.max_x!r} {g.max_y!r} {g.cells_per_axis}\n")
        fh.write(f"# m {len(dataset.silos)}\n")
        if dataset.labels is not None:
            for k, lab in enumerate(dataset.labels.tolist(), start=1):
                fh.write(f"# label {k} {lab}\n")
        for s in dataset.silos:
            for n, (x, y) in enumerate(s.records.tolist()):
                if s.attributes is None:
                    fh.write(f"{s.owner_id}\t{x!r}\t{y!r}\n")
                else:
                    fh.write(f"{s.owner_id}\t{x!r}\t{y!r}\t{float(s.attributes[n])!r}\n")


def read_silos(path) -> LoadedDataset:
    grid = None
    m = None
    labels = {}
    rows: dict[int, list] = {}
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# fedgroup-silos"):
            raise ValueError(f"{path}: not a fedgroup silo file")
        for lineno, line in enumerate(fh, start=2):
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "grid":
                    grid = GridSpec(*map(float, parts[1:5]), int(parts[5]))
                elif parts and parts[0] == "m":
                    m = int(parts[1])
                elif parts and parts[0] == "label":
                    labels[int(parts[1])] = int(parts[2])
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise ValueError(f"{path}:{lineno}: malformed silo row")
            rows.setdefault(int(parts[0]), []).append([float(p) for p in parts[1:]])
    if grid is None or m is None:
        raise ValueError(f"{path}: missing grid or m header")
    widths = {len(r) for recs in rows.values() for r in recs}
    if len(widths) > 1:
        raise ValueError(f"{path}: some rows carry an attribute and some do not")
    width = widths.pop() if widths else 2
    silos = []
    for k in range(1, m + 1):
        data = np.asarray(rows[k], dtype=np.float64) if k in rows else np.empty((0, width))
        silos.append(SpatialSilo(k, data[:, :2], data[:, 2] if width == 3 else None))
    lab = np.asarray([labels[k] for k in range(1, m + 1)]) if len(labels) == m else None
    return LoadedDataset(silos, grid, 0, lab)


# -- query workload -----------------------------------------------------------

def make_queries(dataset: LoadedDataset, n: int, radius_fraction: float = 0.05, seed: int = 0) -> list[RangeQuery]:
    """Centres at uniformly chosen data records; radius a fraction of the domain diagonal."""
    pts = np.concatenate([s.records for s in dataset.silos])
    if len(pts) == 0:
        raise ValueError("cannot place queries on an empty dataset")
    rng = substream(seed, "queries")
    idx = rng.integers(0, len(pts), n)
    radius = radius_fraction * dataset.grid.diagonal
    return [RangeQuery(Location(float(pts[i, 0]), float(pts[i, 1])), radius) for i in idx]


# -- metrics and CSV ------------------------------------------------------------

def mean_absolute_error(answers, truths) -> float:
    a, t = np.asarray(answers, dtype=float), np.asarray(truths, dtype=float)
    return float(np.mean(np.abs(a - t))) if a.size else float("nan")


def mean_relative_error(answers, truths) -> float:
    """Mean of |answer - true| / true over entries with true > 0."""
    a, t = np.asarray(answers, dtype=float), np.asarray(truths, dtype=float)
    keep = t > 0
    if not np.any(keep):
        return float("nan")
    return float(np.mean(np.abs(a[keep] - t[keep]) / t[keep]))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def results_csv(rows, path) -> None:
    """Write rows (mappings keyed by :data:`RESULT_COLUMNS`) in the order given."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in RESULT_COLUMNS])


def read_results_csv(path) -> list[dict]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                if k == "engine":
                    parsed[k] = v
                elif v == "":
                    parsed[k] = None
                else:
                    try:
                        parsed[k] = int(v) if k in ("m", "lambda_or_m", "mpc_rounds", "mpc_bytes", "seed") \
                            else float(v)
                    except ValueError:
                        parsed[k] = v
            out.append(parsed)
    return out
