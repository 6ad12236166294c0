from roughmild.models import CheckResult
from roughmild.report_engine import Report, verify_report


def _suites():
    return {
        "chen": [CheckResult.upper_bound("chen_defect", "seed=1", 1e-14, 1e-10, tol=0.0)],
        "sewing": [CheckResult.upper_bound("sewing_slope", "H=0.4", 1.2, 0.95, tol=0.0)],
        "norms": [],
    }


def test_verify_report_lists_suites_and_failures():
    page = verify_report(_suites(), "abc123def456", dated=False).to_html()
    assert "roughmild verification" in page
    assert "config abc123def456" in page
    assert page.count('<div class="table-section">') == 2
    assert "norms: no checks" in page
    assert 'class="fail"' in page and 'class="ok"' in page
    assert "Generated:" not in page


def test_cards_escape_text():
    report = Report("a < b")
    report.add_metric_cards([{"label": "x & y", "value": 3}])
    page = report.to_html()
    assert "a &lt; b" in page and "x &amp; y" in page
    assert "Generated:" in page


def test_generate_writes_file(tmp_path):
    target = tmp_path / "verify.html"
    verify_report(_suites(), "h").generate(target)
    assert target.read_text(encoding="utf-8").startswith("<!DOCTYPE html>")
