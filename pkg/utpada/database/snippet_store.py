"""
代码片段库的目录存储

目录结构：
    SNIP-000001.snip   每个片段一个文件：头部 key: value，空行，然后是代码原文
    index.tsv          关键词倒排索引（派生数据，可随时重建）
    archive.log        被驳回片段的追加日志（JSON Lines）
    .lock              写锁（flock）

写操作在 .lock 上串行执行（跨进程）；读操作拿到的是不可变快照。
"""
import fcntl
import json
import logging
import os
import re
import tempfile
import threading
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

from utpada.core.exceptions import SnippetNotFound, StoreCorrupt
from utpada.models.snippet_dto import Snippet, SnippetDraft, SnippetStatus

logger = logging.getLogger(__name__)

SNIPPET_FILE_RE = re.compile(r"^SNIP-(\d{6})\.snip$")
INDEX_FILE = "index.tsv"
ARCHIVE_FILE = "archive.log"
LOCK_FILE = ".lock"

# (inode, mtime_ns, size)：原子替换会换 inode
FileStat = Tuple[int, int, int]

_HEADER_FIELDS = (
    ("id", "snippet_id"),
    ("title", "title"),
    ("language", "language_tag"),
    ("keywords", "keywords"),
    ("guidelines", "guideline_ids"),
    ("status", "status"),
    ("role", "submitted_by_role"),
    ("created_at", "created_at"),
    ("supersedes", "supersedes"),
)
_LIST_FIELDS = ("keywords", "guideline_ids")


def format_snippet_id(number: int) -> str:
    return f"SNIP-{number:06d}"


def render_snippet_file(snippet: Snippet) -> bytes:
    """头部 + 空行 + 原文；原文逐字节保留"""
    data = snippet.model_dump(mode="json")
    lines = []
    for key, attr in _HEADER_FIELDS:
        value = data[attr]
        if value is None:
            continue
        if attr in _LIST_FIELDS:
            value = ",".join(value)
        lines.append(f"{key}: {value}")
    return ("\n".join(lines) + "\n\n" + snippet.body).encode("utf-8")


def parse_snippet_file(data: bytes, path: str = "<bytes>") -> Snippet:
    text = data.decode("utf-8")
    header_text, sep, body = text.partition("\n\n")
    if not sep:
        raise StoreCorrupt(path, 0, "缺少头部与正文之间的空行")
    mapping = dict(_HEADER_FIELDS)
    fields: Dict[str, object] = {}
    for line in header_text.split("\n"):
        key, _, value = line.partition(":")
        attr = mapping.get(key.strip())
        if attr is None:
            continue
        value = value.strip()
        fields[attr] = [v for v in value.split(",") if v] if attr in _LIST_FIELDS else value
    fields["body"] = body
    return Snippet(**fields)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


class SnippetStore:
    """
    片段库目录的持久化层

    写操作在 <bank>/.lock 上加排他 flock，并在锁内先同步磁盘状态再分配ID，
    多个进程（CLI 与 API 服务）共用同一目录时ID不会重复。读操作按文件的
    (inode, mtime, size) 增量同步其他进程的改动，不在磁盘上创建或改写任何文件。
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.RLock()
        self._snapshot: Dict[str, Snippet] = {}
        self._stats: Dict[str, FileStat] = {}
        self._archived: Set[str] = set()
        self._archive_size = 0
        self._last_number = 0
        self.refresh()

    def _scan(self) -> Dict[str, FileStat]:
        stats: Dict[str, FileStat] = {}
        try:
            entries = list(os.scandir(self.root))
        except FileNotFoundError:
            return stats
        for entry in entries:
            if not SNIPPET_FILE_RE.match(entry.name):
                continue
            try:
                st = entry.stat()
            except FileNotFoundError:
                continue
            stats[entry.name] = (st.st_ino, st.st_mtime_ns, st.st_size)
        return stats

    def refresh(self) -> bool:
        """
        同步磁盘上的改动（可能来自其他进程）

        Returns:
            bool: 快照是否有变化
        """
        with self._lock:
            stats = self._scan()
            archive_path = self.root / ARCHIVE_FILE
            archive_size = archive_path.stat().st_size if archive_path.exists() else 0
            if stats == self._stats and archive_size == self._archive_size:
                return False

            snippets = {snippet_id: snippet for snippet_id, snippet in self._snapshot.items()
                        if f"{snippet_id}.snip" in stats}
            for name in sorted(stats):
                if self._stats.get(name) == stats[name]:
                    continue
                path = self.root / name
                try:
                    snippet = parse_snippet_file(path.read_bytes(), str(path))
                except FileNotFoundError:
                    continue
                snippets[snippet.snippet_id] = snippet

            if archive_size != self._archive_size:
                self._archived = {entry["snippet_id"] for entry in self._read_archive()}
                self._archive_size = archive_size

            numbers = [int(SNIPPET_FILE_RE.match(name).group(1)) for name in stats]
            numbers.extend(int(snippet_id.split("-")[1]) for snippet_id in self._archived)
            self._last_number = max(numbers, default=0)
            self._stats = stats
            self._snapshot = snippets
            logger.info(f"同步片段库 {self.root}: {len(snippets)} 个片段, {len(self._archived)} 个已归档")
            return True

    def _read_archive(self) -> List[dict]:
        path = self.root / ARCHIVE_FILE
        if not path.exists():
            return []
        entries = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    entries.append(json.loads(line))
        return entries

    # ==================== 读 ====================

    def snapshot(self) -> Dict[str, Snippet]:
        """当前快照（调用方不要修改）"""
        return self._snapshot

    def get(self, snippet_id: str) -> Snippet:
        snippet = self._snapshot.get(snippet_id)
        if snippet is None:
            raise SnippetNotFound(snippet_id, archived=snippet_id in self._archived)
        return snippet

    def exists(self, snippet_id: str) -> bool:
        return snippet_id in self._snapshot

    def find_body(self, body: str) -> Optional[str]:
        for snippet in self._snapshot.values():
            if snippet.body == body:
                return snippet.snippet_id
        return None

    def archived_entries(self) -> List[dict]:
        return self._read_archive()

    # ==================== 写 ====================

    @contextmanager
    def writing(self) -> Iterator["SnippetStore"]:
        """写事务：线程锁 + 跨进程 flock，进入时先同步磁盘状态"""
        with self._lock:
            self.root.mkdir(parents=True, exist_ok=True)
            with open(self.root / LOCK_FILE, "a+") as handle:
                fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
                try:
                    self.refresh()
                    yield self
                finally:
                    fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def insert(self, draft: SnippetDraft) -> Snippet:
        """分配下一个顺序ID并落盘（在 writing() 内调用）"""
        self._last_number += 1
        snippet = Snippet(
            **draft.model_dump(),
            snippet_id=format_snippet_id(self._last_number),
            status=SnippetStatus.CANDIDATE,
            created_at=datetime.now(timezone.utc),
        )
        self._write(snippet)
        return snippet

    def replace(self, snippet: Snippet) -> Snippet:
        self._write(snippet)
        return snippet

    def archive(self, snippet: Snippet, reason: str) -> None:
        entry = snippet.model_dump(mode="json")
        entry["archived_at"] = datetime.now(timezone.utc).isoformat()
        entry["reason"] = reason
        archive_path = self.root / ARCHIVE_FILE
        with open(archive_path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        name = f"{snippet.snippet_id}.snip"
        (self.root / name).unlink(missing_ok=True)
        self._archived.add(snippet.snippet_id)
        self._archive_size = archive_path.stat().st_size
        stats = dict(self._stats)
        stats.pop(name, None)
        self._stats = stats
        snapshot = dict(self._snapshot)
        snapshot.pop(snippet.snippet_id, None)
        self._snapshot = snapshot

    def _write(self, snippet: Snippet) -> None:
        name = f"{snippet.snippet_id}.snip"
        _atomic_write(self.root / name, render_snippet_file(snippet))
        st = (self.root / name).stat()
        stats = dict(self._stats)
        stats[name] = (st.st_ino, st.st_mtime_ns, st.st_size)
        self._stats = stats
        snapshot = dict(self._snapshot)
        snapshot[snippet.snippet_id] = snippet
        self._snapshot = snapshot

    def write_index(self, rows: Iterable[Tuple[str, str]]) -> None:
        lines = [f"{keyword}\t{snippet_id}" for keyword, snippet_id in rows]
        _atomic_write(self.root / INDEX_FILE, ("\n".join(lines) + "\n" if lines else "").encode("utf-8"))
