"""
Metric DB：只追加的事件日志

每条记录为 <4 字节长度><4 字节 crc32><payload JSON>（大端），payload 为
{"seq", "ts", "kind", "data"}。打开时逐条校验：末尾不完整的记录被丢弃并截断，
完整记录的校验和不一致则视为损坏。

同一时间只有一个进程可以写（<db>.lock 上的 flock）；只读打开不加锁。
"""
import fcntl
import json
import logging
import os
import struct
import threading
import zlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

from pydantic import BaseModel, ValidationError

from utpada.config import settings
from utpada.core.exceptions import DanglingReference, DuplicateContribution, StoreCorrupt, StoreLocked
from utpada.models.metric_dto import CurationEvent, EventKind, MetricEvent, ValidationSummary
from utpada.models.metrics_dto import ContributionRecord
from utpada.models.rsi_dto import RsiScore, Scorecard

logger = logging.getLogger(__name__)

HEADER = struct.Struct(">II")
MEMORY = "<memory>"


def encode_record(event: MetricEvent) -> bytes:
    payload = json.dumps(event.model_dump(mode="json"), ensure_ascii=False,
                         sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HEADER.pack(len(payload), zlib.crc32(payload)) + payload


def decode_records(data: bytes, path: str = MEMORY) -> tuple:
    """
    解析日志字节流

    Returns:
        tuple: (事件列表, 完整记录的结束偏移)；结束偏移小于 len(data) 表示末尾有残缺记录

    Raises:
        StoreCorrupt: 校验和不一致、JSON 无法解析或序号不递增
    """
    events: List[MetricEvent] = []
    offset = 0
    while offset < len(data):
        if offset + HEADER.size > len(data):
            break
        length, checksum = HEADER.unpack_from(data, offset)
        start = offset + HEADER.size
        if start + length > len(data):
            break
        payload = data[start:start + length]
        if zlib.crc32(payload) != checksum:
            raise StoreCorrupt(path, offset, "校验和不一致")
        try:
            event = MetricEvent(**json.loads(payload.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError, ValidationError, TypeError) as e:
            raise StoreCorrupt(path, offset, f"记录无法解析: {e}")
        if events and event.seq <= events[-1].seq:
            raise StoreCorrupt(path, offset, f"序号未递增: {event.seq}")
        events.append(event)
        offset = start + length
    return events, offset


class MetricDb:
    """
    Metric DB 的读写入口

    用法:
        with MetricDb.open("metric.db") as db:
            db.append_contribution(record)

    聚合状态（贡献记录、最新评分卡、最新 RSI）在加载和追加时同步维护，
    因此从空日志重放得到的状态与原日志一致。
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, read_only: bool = False,
                 fsync: Optional[bool] = None):
        self.path = Path(path) if path is not None else None
        self.read_only = read_only
        self.fsync = settings.DB_FSYNC if fsync is None else fsync
        self._lock = threading.Lock()
        self._lock_handle = None
        self._events: List[MetricEvent] = []
        self.contributions: Dict[str, ContributionRecord] = {}
        self.scorecards: Dict[str, Scorecard] = {}
        self.rsi_scores: Dict[str, RsiScore] = {}

    # ==================== 打开 / 关闭 ====================

    @classmethod
    def open(cls, path: Optional[Union[str, Path]] = None, read_only: bool = False,
             fsync: Optional[bool] = None) -> "MetricDb":
        """
        打开（不存在则创建）日志文件

        Raises:
            StoreLocked: 已有其他进程在写
            StoreCorrupt: 日志损坏
        """
        db = cls(path or settings.DB, read_only=read_only, fsync=fsync)
        if not read_only:
            db._acquire_lock()
        try:
            db._load()
        except BaseException:
            db.close()
            raise
        return db

    @classmethod
    def from_bytes(cls, data: bytes) -> "MetricDb":
        """在内存中重放一份序列化的日志（不落盘）"""
        db = cls(None)
        events, end = decode_records(data)
        if end < len(data):
            logger.warning(f"丢弃末尾不完整的记录: {len(data) - end} 字节")
        for event in events:
            db._apply(event)
        return db

    def _acquire_lock(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lock_path = self.path.with_name(self.path.name + ".lock")
        handle = open(lock_path, "a+")
        try:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            handle.close()
            raise StoreLocked(f"Metric DB 正被其他进程写入: {self.path}")
        self._lock_handle = handle

    def _load(self) -> None:
        if not self.path.exists():
            logger.info(f"Metric DB 不存在，新建: {self.path}")
            return
        data = self.path.read_bytes()
        events, end = decode_records(data, str(self.path))
        if end < len(data):
            logger.warning(f"Metric DB 末尾有不完整的记录（{len(data) - end} 字节），已丢弃: {self.path}")
            if not self.read_only:
                os.truncate(self.path, end)
        for event in events:
            self._apply(event)
        logger.info(f"加载 Metric DB {self.path}: {len(events)} 条事件")

    def close(self) -> None:
        if self._lock_handle is not None:
            fcntl.flock(self._lock_handle.fileno(), fcntl.LOCK_UN)
            self._lock_handle.close()
            self._lock_handle = None

    def __enter__(self) -> "MetricDb":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # ==================== 读 ====================

    @property
    def events(self) -> List[MetricEvent]:
        return list(self._events)

    @property
    def last_seq(self) -> int:
        return self._events[-1].seq if self._events else 0

    def events_of(self, kind: EventKind) -> List[MetricEvent]:
        return [event for event in self._events if event.kind == kind]

    def validation_summaries(self) -> List[ValidationSummary]:
        return [ValidationSummary(**event.data) for event in self.events_of(EventKind.VALIDATION_SUMMARY)]

    def participants(self) -> List[str]:
        return sorted({record.participant_id for record in self.contributions.values()})

    def records_of(self, participant_id: str) -> List[ContributionRecord]:
        return sorted(
            (r for r in self.contributions.values() if r.participant_id == participant_id),
            key=lambda r: (r.submitted_at, r.contribution_id),
        )

    def serialize(self) -> bytes:
        return b"".join(encode_record(event) for event in self._events)

    # ==================== 写 ====================

    def _apply(self, event: MetricEvent) -> None:
        """把事件并入聚合状态；同一贡献的多张评分卡以最后一条为准"""
        if event.kind == EventKind.CONTRIBUTION:
            record = ContributionRecord(**event.data)
            self.contributions[record.contribution_id] = record
        elif event.kind == EventKind.SCORECARD:
            card = Scorecard(**event.data)
            self.scorecards[card.contribution_id] = card
        elif event.kind == EventKind.RSI_SCORE:
            score = RsiScore(**event.data)
            self.rsi_scores[score.contribution_id] = score
        self._events.append(event)

    def _check_references(self, kind: EventKind, data: dict) -> None:
        if kind == EventKind.CONTRIBUTION:
            if data["contribution_id"] in self.contributions:
                raise DuplicateContribution(data["contribution_id"])
        elif kind in (EventKind.SCORECARD, EventKind.RSI_SCORE):
            contribution_id = data.get("contribution_id")
            if contribution_id not in self.contributions:
                raise DanglingReference(kind.value, str(contribution_id))

    def append(self, kind: Union[EventKind, str], payload: Union[BaseModel, dict],
               now: Optional[datetime] = None) -> int:
        """
        追加一条事件，返回分配的序号

        Raises:
            DanglingReference: 评分卡 / RSI 引用了不存在的贡献记录
            DuplicateContribution: 贡献记录ID已存在
        """
        if self.read_only:
            raise PermissionError("Metric DB 以只读方式打开")
        kind = EventKind(kind)
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else dict(payload)
        with self._lock:
            self._check_references(kind, data)
            event = MetricEvent(seq=self.last_seq + 1, ts=now or datetime.now(timezone.utc),
                                kind=kind, data=data)
            if self.path is not None:
                with open(self.path, "ab") as handle:
                    start = handle.tell()
                    try:
                        handle.write(encode_record(event))
                        handle.flush()
                        if self.fsync:
                            os.fsync(handle.fileno())
                    except BaseException:
                        # 写失败时截回写之前的长度，后续追加不会接在半条记录后面
                        logger.error(f"追加事件失败，截断到 {start} 字节: {self.path}")
                        os.truncate(self.path, start)
                        raise
            self._apply(event)
        logger.debug(f"追加事件 seq={event.seq} kind={kind.value}")
        return event.seq

    def append_contribution(self, record: ContributionRecord) -> int:
        return self.append(EventKind.CONTRIBUTION, record)

    def append_scorecard(self, card: Scorecard) -> int:
        return self.append(EventKind.SCORECARD, card)

    def append_rsi(self, score: RsiScore) -> int:
        return self.append(EventKind.RSI_SCORE, score)

    def append_validation_summary(self, summary: ValidationSummary) -> int:
        return self.append(EventKind.VALIDATION_SUMMARY, summary)

    def append_curation(self, curation: CurationEvent) -> int:
        return self.append(EventKind.CURATION, curation)

    def rewrite(self, out_path: Union[str, Path], transform: Callable[[MetricEvent], MetricEvent]) -> int:
        """把每条事件经 transform 后写入新文件（序号和时间不变），返回写入条数"""
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        events = [transform(event) for event in self._events]
        with open(out_path, "wb") as handle:
            for event in events:
                handle.write(encode_record(event))
            handle.flush()
            os.fsync(handle.fileno())
        logger.info(f"写出 {len(events)} 条事件到 {out_path}")
        return len(events)
