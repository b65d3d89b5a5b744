import pytest

from utpada.core.exceptions import DuplicateCaseId, EmptyCaseSet, MalformedCase
from utpada.models.valcase_dto import CssPredicate, PatternKind
from utpada.services.valcase_service import ValidationCaseService, compile_glob, glob_matches

MINIMAL = """\
id: CASE-1
guideline: REQ-1
applies: src/**/*.kt
pattern: anti
kind: regex
match: println\\(
"""


class TestParseCase:
    def test_req21890_case_file(self, fixtures_dir):
        case = ValidationCaseService.parse_case_file(fixtures_dir / "cases" / "req21890.vcase")

        assert case.guideline_id == "REQ-21890"
        assert case.applies_to == ("**/*.css",)
        assert case.remediation_snippet_ids == ("SNIP-000001",)
        anti, = case.anti_patterns
        required, = case.required_patterns
        assert anti.kind == PatternKind.CSSDECL
        assert (anti.css.selector, anti.css.property, anti.css.predicate, anti.css.value) == \
            (".extActAttributes", "width", CssPredicate.EQUALS, "70%")
        assert required.css.value == "100%"

    def test_req1289_tokenseq_has_six_tokens(self, fixtures_dir):
        case = ValidationCaseService.parse_case_file(fixtures_dir / "cases" / "req1289.vcase")

        pattern, = case.required_patterns
        assert case.anti_patterns == ()
        assert pattern.tokens == ("throw", "IllegalStateException", "(", "Incorrect", "Typecast", ")")

    def test_retokenizing_joined_tokens_is_stable(self):
        pattern = ValidationCaseService.build_pattern(PatternKind.TOKENSEQ, 'a.b ( "x y" ) 70%')
        again = ValidationCaseService.build_pattern(PatternKind.TOKENSEQ, " ".join(pattern.tokens))
        assert again.tokens == pattern.tokens

    def test_css_predicates(self):
        build = ValidationCaseService.build_pattern
        assert build(PatternKind.CSSDECL, ".a :: overflow :: present").css.predicate == CssPredicate.PRESENT
        assert build(PatternKind.CSSDECL, ".a :: overflow :: absent").css.value is None
        negated = build(PatternKind.CSSDECL, ".a :: width :: != 70%").css
        assert (negated.predicate, negated.value) == (CssPredicate.NOT_EQUALS, "70%")

    def test_no_patterns_is_malformed(self):
        text = "id: CASE-1\nguideline: REQ-1\napplies: **/*.css\n"
        with pytest.raises(MalformedCase):
            ValidationCaseService.parse_case_text(text)

    def test_missing_applies_reports_field(self):
        text = MINIMAL.replace("applies: src/**/*.kt\n", "")
        with pytest.raises(MalformedCase) as info:
            ValidationCaseService.parse_case_text(text, "broken.vcase")
        assert info.value.field == "applies"
        assert "broken.vcase" in info.value.message

    def test_uncompilable_regex_reports_line(self):
        text = MINIMAL.replace("println\\(", "println(")
        with pytest.raises(MalformedCase) as info:
            ValidationCaseService.parse_case_text(text)
        assert info.value.line == 6
        assert info.value.field == "match"

    def test_invalid_glob(self):
        with pytest.raises(MalformedCase) as info:
            ValidationCaseService.parse_case_text(MINIMAL.replace("src/**/*.kt", "/abs/*.kt"))
        assert info.value.field == "applies"

    def test_bad_remediation_id(self):
        with pytest.raises(MalformedCase) as info:
            ValidationCaseService.parse_case_text(MINIMAL + "remediate: SNIP-12\n")
        assert info.value.field == "remediation_snippet_ids"

    def test_match_before_kind(self):
        text = MINIMAL.replace("kind: regex\nmatch: println\\(\n", "match: x\nkind: regex\n")
        with pytest.raises(MalformedCase):
            ValidationCaseService.parse_case_text(text)

    def test_unknown_field(self):
        with pytest.raises(MalformedCase) as info:
            ValidationCaseService.parse_case_text(MINIMAL + "owner: someone\n")
        assert info.value.field == "owner"

    def test_serialize_round_trip(self, fixtures_dir):
        for name in ("req21890.vcase", "req1289.vcase"):
            case = ValidationCaseService.parse_case_file(fixtures_dir / "cases" / name)
            text = ValidationCaseService.serialize_case(case)
            assert ValidationCaseService.parse_case_text(text) == case


class TestGlob:
    @pytest.mark.parametrize("glob,path,expected", [
        ("**/*.css", "style.css", True),
        ("**/*.css", "web/css/style.css", True),
        ("src/*.kt", "src/Main.kt", True),
        ("src/*.kt", "src/ui/Main.kt", False),
        ("src/**", "src/ui/Main.kt", True),
        ("*.html", "pages/index.html", False),
    ])
    def test_matching(self, glob, path, expected):
        assert glob_matches((glob,), path) is expected

    @pytest.mark.parametrize("glob", ["", "/etc/*", "src/[ab].kt", "src/a**/x", "../x"])
    def test_rejected(self, glob):
        with pytest.raises(ValueError):
            compile_glob(glob)


class TestLoadCaseSet:
    def test_sorted_by_case_id(self, fixtures_dir):
        cases = ValidationCaseService.load_case_set(fixtures_dir / "cases")
        assert [c.case_id for c in cases] == ["CASE-REQ-1289", "CASE-REQ-21890"]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(EmptyCaseSet):
            ValidationCaseService.load_case_set(tmp_path)

    def test_duplicate_ids(self, tmp_path):
        (tmp_path / "a.vcase").write_text(MINIMAL, encoding="utf-8")
        (tmp_path / "b.vcase").write_text(MINIMAL, encoding="utf-8")
        with pytest.raises(DuplicateCaseId) as info:
            ValidationCaseService.load_case_set(tmp_path)
        assert info.value.path.endswith("b.vcase")

    def test_digest_ignores_file_order(self, tmp_path, fixtures_dir):
        cases = ValidationCaseService.load_case_set(fixtures_dir / "cases")
        assert ValidationCaseService.case_set_digest(cases) == \
            ValidationCaseService.case_set_digest(list(reversed(cases)))
