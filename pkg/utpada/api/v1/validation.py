import logging

from fastapi import APIRouter, Depends, HTTPException, status

from utpada.config import settings
from utpada.core.dependencies import get_bank, get_current_user
from utpada.core.exceptions import UtpadaError
from utpada.database.metric_db import MetricDb
from utpada.models.analyzer_dto import ValidationReport, ValidationRunRequest
from utpada.models.metric_dto import ValidationSummary
from utpada.services.analyzer_service import AnalyzerService
from utpada.services.snippet_service import SnippetBankService
from utpada.services.valcase_service import ValidationCaseService

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/runs", response_model=ValidationReport, summary="执行验证")
def run_validation(
    request: ValidationRunRequest,
    bank: SnippetBankService = Depends(get_bank),
    current_user: dict = Depends(get_current_user),
):
    """加载源码树和用例集并执行全部验证用例；record=true 时把摘要写入 Metric DB"""
    try:
        cases = ValidationCaseService.load_case_set(request.cases or settings.CASES)
        tree = AnalyzerService.load_source_tree(request.source)
        report = AnalyzerService.run_validation(tree, cases, bank)
    except UtpadaError as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=e.message)

    if request.record:
        # StoreLocked（CLI 正在写）由应用级处理器转成 409
        with MetricDb.open(settings.DB) as db:
            db.append_validation_summary(ValidationSummary.from_report(report, org=request.org))
    logger.info(f"{current_user['sub']} 执行验证 {report.run_id}")
    return report
