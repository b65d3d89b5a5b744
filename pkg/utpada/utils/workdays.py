"""
工作日日历：周一到周五，不含节假日表

冲刺（sprint）是从起始日开始的连续 N 个工作日窗口，N 默认 6。
"""
from datetime import date, datetime
from typing import Tuple, Union

import numpy

DateLike = Union[date, datetime]

WEEKMASK = "Mon Tue Wed Thu Fri"


def to_date(value: DateLike) -> date:
    return value.date() if isinstance(value, datetime) else value


def working_days_between(start: DateLike, end: DateLike) -> int:
    """[start, end) 之间的工作日数；end 早于 start 时为负数"""
    return int(numpy.busday_count(to_date(start), to_date(end), weekmask=WEEKMASK))


def roll_to_working_day(value: DateLike) -> date:
    """周末向后滚到下一个周一"""
    rolled = numpy.busday_offset(to_date(value), 0, roll="forward", weekmask=WEEKMASK)
    return rolled.item()


def sprint_index(moment: DateLike, sprint_start: DateLike, sprint_days: int = 6) -> int:
    """
    moment 落在第几个冲刺（从 0 开始）

    周末归入它前一个工作日所在的冲刺；sprint_start 之前返回负数。
    """
    start = roll_to_working_day(sprint_start)
    offset = working_days_between(start, moment)
    moment_day = to_date(moment)
    if offset >= 0 and not numpy.is_busday(moment_day, weekmask=WEEKMASK):
        # busday_count 不计 moment 本身；周末的 offset 已经指向下一个工作日
        offset -= 1
    if offset < 0:
        return -1
    return offset // sprint_days


def sprint_bounds(index: int, sprint_start: DateLike, sprint_days: int = 6) -> Tuple[date, date]:
    """第 index 个冲刺的首个和最后一个工作日（含）"""
    start = roll_to_working_day(sprint_start)
    first = numpy.busday_offset(start, index * sprint_days, weekmask=WEEKMASK)
    last = numpy.busday_offset(start, index * sprint_days + sprint_days - 1, weekmask=WEEKMASK)
    return first.item(), last.item()
