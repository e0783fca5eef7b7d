import hashlib
import heapq
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from src.common.enums import EventKind
from src.common.errors import DatasetError
from src.common.models import ImuSample, RadarScan, TruthState
from src.sim.montecarlo import SimulatedRun
from src.sim.trajectory import path_length
from .schemas import (
    FORMAT_VERSION,
    DatasetManifest,
    ImuRecord,
    NavRecord,
    PoseRecord,
    RadarRecord,
    TruthRecord,
)

logger = logging.getLogger(__name__)

Record = TypeVar("Record", bound=BaseModel)
PathLike = Union[str, Path]

IMU_FILE = "imu.jsonl"
RADAR_FILE = "radar.jsonl"
TRUTH_FILE = "truth.jsonl"
MANIFEST_FILE = "manifest.json"


def sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_jsonl(path: PathLike, records: Iterable[BaseModel]) -> None:
    with open(path, "w") as f:
        for record in records:
            f.write(record.model_dump_json())
            f.write("\n")


def read_jsonl(path: PathLike, model: Type[Record]) -> List[Record]:
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(model.model_validate_json(line))
            except ValidationError as e:
                raise DatasetError(f"{path}:{lineno}: corrupt {model.__name__} record: {e}") from e
    return out


@dataclass(eq=False)
class Dataset:
    path: Path
    manifest: DatasetManifest
    imu: List[ImuSample] = field(default_factory=list)
    radar: List[RadarScan] = field(default_factory=list)
    truth: List[TruthState] = field(default_factory=list)


def write_dataset(run: SimulatedRun, directory: PathLike) -> DatasetManifest:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_jsonl(directory / IMU_FILE, (ImuRecord.from_sample(s) for s in run.imu))
    write_jsonl(directory / RADAR_FILE, (RadarRecord.from_scan(s) for s in run.radar))
    write_jsonl(directory / TRUTH_FILE, (TruthRecord.from_truth(s) for s in run.truth))

    manifest = DatasetManifest(
        run_index=run.run_index,
        config=run.config.model_dump(mode="json"),
        initial_state=NavRecord.from_nav(run.initial_state),
        initial_time=run.truth[0].t if run.truth else 0.0,
        extrinsics=PoseRecord.from_pose(run.config.extrinsics.pose()),
        path_length=path_length([s.nav.p for s in run.truth]) if run.truth else 0.0,
        files={name: sha256(directory / name) for name in (IMU_FILE, RADAR_FILE, TRUTH_FILE)},
    )
    (directory / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2))
    logger.info("wrote dataset %s (%d IMU, %d radar)", directory, len(run.imu), len(run.radar))
    return manifest


def _check_monotone(name: str, times: List[float]) -> None:
    for a, b in zip(times, times[1:]):
        if not b > a:
            raise DatasetError(f"{name}: timestamps not strictly increasing ({a} then {b})")


def load_dataset(directory: PathLike, verify: bool = True) -> Dataset:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.is_file():
        raise DatasetError(f"no {MANIFEST_FILE} in {directory}")
    try:
        manifest = DatasetManifest.model_validate_json(manifest_path.read_text())
    except ValidationError as e:
        raise DatasetError(f"corrupt manifest {manifest_path}: {e}") from e
    if manifest.format_version != FORMAT_VERSION:
        raise DatasetError(
            f"dataset format version {manifest.format_version}, this build reads {FORMAT_VERSION}"
        )

    for name, digest in manifest.files.items():
        path = directory / name
        if not path.is_file():
            raise DatasetError(f"missing dataset file {path}")
        if verify and sha256(path) != digest:
            raise DatasetError(f"hash mismatch for {path}")

    def load(name: str, model):
        path = directory / name
        return read_jsonl(path, model) if path.is_file() else []

    imu = [r.to_sample() for r in load(IMU_FILE, ImuRecord)]
    radar = [r.to_scan() for r in load(RADAR_FILE, RadarRecord)]
    truth = [r.to_truth() for r in load(TRUTH_FILE, TruthRecord)]
    _check_monotone(IMU_FILE, [s.t for s in imu])
    _check_monotone(RADAR_FILE, [s.t for s in radar])
    _check_monotone(TRUTH_FILE, [s.t for s in truth])
    return Dataset(directory, manifest, imu, radar, truth)


Event = Tuple[EventKind, Union[ImuSample, RadarScan]]


def events(imu: Iterable[ImuSample], radar: Iterable[RadarScan]) -> Iterator[Event]:
    """Time-ordered merge of both streams; IMU first on equal timestamps."""
    tagged_imu = ((s.t, 0, k, EventKind.IMU, s) for k, s in enumerate(imu))
    tagged_radar = ((s.t, 1, k, EventKind.RADAR, s) for k, s in enumerate(radar))
    for _, _, _, kind, item in heapq.merge(tagged_imu, tagged_radar):
        yield kind, item
