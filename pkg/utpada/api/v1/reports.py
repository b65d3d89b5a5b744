from datetime import date
from typing import Optional

from fastapi import APIRouter, Depends, HTTPException, Query, status

from utpada.core.dependencies import get_metric_db, get_report_bank
from utpada.core.exceptions import UnknownParticipant
from utpada.database.metric_db import MetricDb
from utpada.models.report_dto import CohortReport, ParticipantReport
from utpada.services.report_service import ReportService
from utpada.services.snippet_service import SnippetBankService

router = APIRouter()


@router.get("/cohort", response_model=CohortReport, summary="群体报告")
async def cohort_report(
    db: MetricDb = Depends(get_metric_db),
    bank: Optional[SnippetBankService] = Depends(get_report_bank),
):
    return ReportService.cohort_report(db, bank)


@router.get("/participants/{participant_id}", response_model=ParticipantReport, summary="个人报告")
async def participant_report(
    participant_id: str,
    sprint_start: Optional[date] = Query(None, description="冲刺起始日，默认为最早的任务分配日"),
    db: MetricDb = Depends(get_metric_db),
    bank: Optional[SnippetBankService] = Depends(get_report_bank),
):
    try:
        return ReportService.participant_report(db, participant_id, sprint_start=sprint_start, bank=bank)
    except UnknownParticipant as e:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=e.message)
