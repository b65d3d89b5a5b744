from typing import Optional


class UtpadaError(Exception):
    """所有领域错误的基类"""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# ==================== 验证用例 ====================

class MalformedCase(UtpadaError):
    """验证用例文件格式错误，带文件/行号/字段诊断"""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        self.path = path
        self.line = line
        self.field = field
        where = path or "<text>"
        if line is not None:
            where = f"{where}:{line}"
        if field:
            where = f"{where} [{field}]"
        super().__init__(f"{where}: {message}")


class DuplicateCaseId(UtpadaError):
    def __init__(self, case_id: str, path: Optional[str] = None):
        self.case_id = case_id
        self.path = path
        super().__init__(f"验证用例ID重复: {case_id} ({path or '<text>'})")


class EmptyCaseSet(UtpadaError):
    pass


# ==================== 源码树 / 分析 ====================

class EmptyTree(UtpadaError):
    pass


class UnbalancedBraces(UtpadaError):
    def __init__(self, path: str, line: int):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: 花括号不匹配")


class NoClasses(UtpadaError):
    pass


class MixedParticipants(UtpadaError):
    pass


class MalformedCheckin(UtpadaError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"第 {line} 行: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


# ==================== 代码片段库 ====================

class InvalidDraft(UtpadaError):
    pass


class DuplicateBody(UtpadaError):
    """内容与已有片段逐字节相同；existing_id 指向已有片段"""

    def __init__(self, existing_id: str):
        self.existing_id = existing_id
        super().__init__(f"片段内容重复，已存在: {existing_id}")


class SnippetNotFound(UtpadaError):
    def __init__(self, snippet_id: str, archived: bool = False):
        self.snippet_id = snippet_id
        self.archived = archived
        note = "（已被驳回并归档）" if archived else ""
        super().__init__(f"片段不存在: {snippet_id}{note}")


class AlreadyCurated(UtpadaError):
    def __init__(self, snippet_id: str):
        self.snippet_id = snippet_id
        super().__init__(f"片段已审核入库: {snippet_id}")


class EmptyQuery(UtpadaError):
    pass


# ==================== RSI ====================

class MalformedScorecard(UtpadaError):
    pass


class MissingCategory(UtpadaError):
    pass


class MissingBenchmarks(UtpadaError):
    pass


class EmptyHistory(UtpadaError):
    pass


class UnknownParticipant(UtpadaError):
    def __init__(self, participant_id: str):
        self.participant_id = participant_id
        super().__init__(f"未知参与者: {participant_id}")


# ==================== Metric DB ====================

class StoreError(UtpadaError):
    """存储层错误，CLI 退出码 3"""


class StoreCorrupt(StoreError):
    def __init__(self, path: str, offset: int, reason: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}@{offset}: 日志损坏 ({reason})")


class StoreLocked(StoreError):
    pass


class DanglingReference(StoreError):
    def __init__(self, kind: str, reference: str):
        self.kind = kind
        self.reference = reference
        super().__init__(f"{kind} 引用了不存在的贡献记录: {reference}")


class DuplicateContribution(StoreError):
    def __init__(self, contribution_id: str):
        self.contribution_id = contribution_id
        super().__init__(f"贡献记录已存在: {contribution_id}")
