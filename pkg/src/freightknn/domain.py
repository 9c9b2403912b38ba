"""Job records, CSV ingestion, load-size coding and dataset segmentation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

MIN_LOAD_SIZE = 0.001
DEFAULT_DATUM = date(2000, 1, 1)

CSV_COLUMNS = (
    "id", "date", "col_lat", "col_lng", "del_lat", "del_lng",
    "load_size", "cost_eur", "revenue_eur", "direction",
)
OPTIONAL_COLUMNS = ("col_country", "del_country")

# Units per standard shipping container.
CONTAINER_CAPACITY = {
    "standard_pallet": 26.0,
    "euro_pallet": 33.0,
    "loading_meter": 13.6,
    "kg": 24000.0,
    "container": 1.0,
}


class CsvFormatError(ValueError):
    """The input cannot be read as a job CSV at all."""


class UncodableLoadError(ValueError):
    pass


class Direction(str, Enum):
    IMPORT = "import"
    EXPORT = "export"
    DOMESTIC = "domestic"


def id_key(job_id: str):
    """Sort key for job ids: numeric ids in numeric order, then the rest lexically."""
    if job_id.isdigit():
        return (0, int(job_id), job_id)
    return (1, 0, job_id)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lng: float

    def __post_init__(self):
        if not math.isfinite(self.lat) or not -90.0 <= self.lat <= 90.0:
            raise ValueError("latitude out of range")
        if not math.isfinite(self.lng) or not -180.0 <= self.lng <= 180.0:
            raise ValueError("longitude out of range")


@dataclass(frozen=True)
class JobRecord:
    """One consignment.

    ``date`` is an integer day count from the dataset datum and ``load_size``
    is the fraction of one standard container the consignment occupies.
    """

    id: str
    date: int
    collection: GeoPoint
    delivery: GeoPoint
    load_size: float
    cost_eur: float
    revenue_eur: Optional[float] = None
    direction: Direction = Direction.EXPORT
    collection_country: Optional[str] = None
    delivery_country: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.load_size) or self.load_size < MIN_LOAD_SIZE:
            raise ValueError("load size out of range")
        if not math.isfinite(self.cost_eur) or self.cost_eur < 0:
            raise ValueError("cost out of range")
        if self.revenue_eur is not None and (
            not math.isfinite(self.revenue_eur) or self.revenue_eur < 0
        ):
            raise ValueError("revenue out of range")
        if isinstance(self.direction, str) and not isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", Direction(self.direction))


def normalized_cost(job: JobRecord) -> float:
    """Cost per container-equivalent (EUR/container)."""
    return job.cost_eur / job.load_size


def code_load_size(quantity: float, unit: str) -> float:
    """Express ``quantity`` of ``unit`` as a fraction of a standard container.

    >>> code_load_size(13, "standard_pallet")
    0.5
    """
    if unit not in CONTAINER_CAPACITY:
        raise UncodableLoadError(f"uncodable load: unknown unit {unit!r}")
    if not math.isfinite(quantity) or quantity <= 0:
        raise UncodableLoadError("uncodable load")
    return max(quantity / CONTAINER_CAPACITY[unit], MIN_LOAD_SIZE)


@dataclass(frozen=True)
class Dataset:
    """Immutable, id-ordered collection of jobs."""

    jobs: tuple
    datum_date: date = DEFAULT_DATUM

    def __post_init__(self):
        jobs = tuple(sorted(self.jobs, key=lambda j: id_key(j.id)))
        ids = [j.id for j in jobs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate job ids")
        object.__setattr__(self, "jobs", jobs)
        object.__setattr__(self, "_by_id", {j.id: j for j in jobs})

    def __len__(self):
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)

    def get(self, job_id: str) -> JobRecord:
        return self._by_id[job_id]

    def subset(self, ids: Iterable[str]) -> list:
        """Jobs with the given ids, in id order."""
        return sorted((self._by_id[i] for i in ids), key=lambda j: id_key(j.id))


@dataclass(frozen=True)
class Rejection:
    row: int
    reason: str

    def to_json(self) -> str:
        return json.dumps({"row": self.row, "reason": self.reason})


def _parse_float(text: str, missing: str, invalid: str) -> float:
    text = text.strip()
    if not text:
        raise ValueError(missing)
    try:
        value = float(text)
    except ValueError:
        raise ValueError(invalid) from None
    if not math.isfinite(value):
        raise ValueError(invalid)
    return value


def _parse_row(rec: dict, datum: date) -> JobRecord:
    job_id = (rec.get("id") or "").strip()
    if not job_id:
        raise ValueError("missing id")
    try:
        day = date.fromisoformat((rec.get("date") or "").strip())
    except ValueError:
        raise ValueError("invalid date") from None
    col_lat = _parse_float(rec["col_lat"], "missing collection latitude", "invalid collection latitude")
    col_lng = _parse_float(rec["col_lng"], "missing collection longitude", "invalid collection longitude")
    del_lat = _parse_float(rec["del_lat"], "missing delivery latitude", "invalid delivery latitude")
    del_lng = _parse_float(rec["del_lng"], "missing delivery longitude", "invalid delivery longitude")
    collection = GeoPoint(col_lat, col_lng)
    delivery = GeoPoint(del_lat, del_lng)
    load = _parse_float(rec["load_size"], "missing load size", "invalid load size")
    if load < MIN_LOAD_SIZE:
        raise ValueError("load size out of range")
    cost = _parse_float(rec["cost_eur"], "missing cost", "invalid cost")
    if cost <= 0:
        raise ValueError("non-positive cost")
    revenue_text = (rec.get("revenue_eur") or "").strip()
    revenue = None
    if revenue_text:
        revenue = _parse_float(revenue_text, "missing revenue", "invalid revenue")
        if revenue < 0:
            raise ValueError("negative revenue")
    try:
        direction = Direction((rec.get("direction") or "").strip())
    except ValueError:
        raise ValueError("unknown direction") from None
    return JobRecord(
        id=job_id,
        date=(day - datum).days,
        collection=collection,
        delivery=delivery,
        load_size=load,
        cost_eur=cost,
        revenue_eur=revenue,
        direction=direction,
        collection_country=(rec.get("col_country") or "").strip() or None,
        delivery_country=(rec.get("del_country") or "").strip() or None,
    )


def parse_jobs_csv(data, datum: date = DEFAULT_DATUM):
    """Parse job CSV text into a :class:`Dataset` plus per-row rejections.

    Parameters
    ----------
    data : bytes or str
        UTF-8 CSV with the header given by ``CSV_COLUMNS`` (optionally followed
        by ``col_country`` / ``del_country``).
    datum : date
        Calendar date mapped to day 0.

    Returns
    -------
    (Dataset, list of Rejection)
        Row numbers in rejections are physical line numbers (header is line 1).

    Raises
    ------
    CsvFormatError
        If the input is not valid UTF-8 or the header is malformed.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise CsvFormatError(f"unreadable input: {exc}") from None
    elif isinstance(data, str):
        text = data
    else:
        raise CsvFormatError("unreadable input: expected bytes or str")

    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CsvFormatError("malformed header: empty input") from None
    except csv.Error as exc:
        raise CsvFormatError(f"malformed header: {exc}") from None
    if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS or any(
        h not in OPTIONAL_COLUMNS for h in header[len(CSV_COLUMNS):]
    ) or len(set(header)) != len(header):
        raise CsvFormatError(f"malformed header: {','.join(header)}")

    jobs, rejections, seen = [], [], set()
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            rejections.append(Rejection(reader.line_num, f"unparseable row: {exc}"))
            continue
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            rejections.append(Rejection(line, "wrong number of fields"))
            continue
        try:
            job = _parse_row(dict(zip(header, row)), datum)
        except ValueError as exc:
            rejections.append(Rejection(line, str(exc)))
            continue
        if job.id in seen:
            rejections.append(Rejection(line, "duplicate id"))
            continue
        seen.add(job.id)
        jobs.append(job)
    return Dataset(tuple(jobs), datum), rejections


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_jobs_csv(dataset: Dataset) -> str:
    """Write a dataset back out in the ingest CSV schema.

    Country columns are emitted only when at least one job carries a label.
    Floats use their shortest round-trip representation.
    """
    with_countries = any(
        j.collection_country or j.delivery_country for j in dataset.jobs
    )
    header = list(CSV_COLUMNS) + (list(OPTIONAL_COLUMNS) if with_countries else [])
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for j in dataset.jobs:
        day = date.fromordinal(dataset.datum_date.toordinal() + j.date)
        row = [
            j.id, day.isoformat(),
            _fmt(j.collection.lat), _fmt(j.collection.lng),
            _fmt(j.delivery.lat), _fmt(j.delivery.lng),
            _fmt(j.load_size), _fmt(j.cost_eur),
            "" if j.revenue_eur is None else _fmt(j.revenue_eur),
            j.direction.value,
        ]
        if with_countries:
            row += [j.collection_country or "", j.delivery_country or ""]
        writer.writerow(row)
    return buf.getvalue()


@dataclass(frozen=True)
class Segmentation:
    """Disjoint test / historical / training id sets (each id-ordered)."""

    test: tuple
    historical: tuple
    training: tuple
    seed: int = 0
    historical_share: float = 0.6

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "historical_share": self.historical_share,
            "test": list(self.test),
            "historical": list(self.historical),
            "training": list(self.training),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Segmentation":
        return cls(
            test=tuple(d["test"]),
            historical=tuple(d["historical"]),
            training=tuple(d["training"]),
            seed=int(d.get("seed", 0)),
            historical_share=float(d.get("historical_share", 0.6)),
        )


def segment(dataset: Dataset, seed: int, historical_share: float = 0.6) -> Segmentation:
    """Split a dataset into test, historical and training sets.

    The most recent ``ceil(n/3)`` jobs by (date, id) form the test set. The
    rest are shuffled with ``seed`` and the first
    ``round(historical_share * remainder)`` become the historical set.
    """
    n = len(dataset)
    if n < 3:
        raise ValueError("segmentation needs at least 3 jobs")
    if not 0.0 <= historical_share <= 1.0:
        raise ValueError("historical_share must lie in [0, 1]")
    chrono = sorted(dataset.jobs, key=lambda j: (j.date, id_key(j.id)))
    n_test = math.ceil(n / 3)
    test = chrono[n - n_test:]
    rest = sorted(chrono[: n - n_test], key=lambda j: id_key(j.id))
    order = np.random.default_rng(seed).permutation(len(rest))
    n_hist = math.floor(historical_share * len(rest) + 0.5)
    hist = [rest[i] for i in order[:n_hist]]
    train = [rest[i] for i in order[n_hist:]]

    def ids(jobs: Sequence[JobRecord]) -> tuple:
        return tuple(j.id for j in sorted(jobs, key=lambda j: id_key(j.id)))

    return Segmentation(ids(test), ids(hist), ids(train), seed, historical_share)
