"""
HTML summary of verification runs: metric cards plus one table per suite.
Self-contained; no external assets besides an optional web font.
"""
import html
from datetime import date
from typing import Dict, List

from .models import CheckResult


def _fmt(val, decimals=2):
    if val is None:
        return "—"
    if isinstance(val, bool):
        return "yes" if val else "no"
    if isinstance(val, str):
        return html.escape(val)
    if decimals == "sci":
        return f"{val:.3e}"
    if abs(val) < 0.005 and decimals == 2:
        return "0.00"
    return f"{val:,.{decimals}f}"


# ── Report class ─────────────────────────────────────────────────────────────


class Report:
    def __init__(self, title, subtitle="", run_id="", footer_text="", dated=True):
        self.title = title
        self.subtitle = subtitle
        self.run_id = run_id
        self.footer_text = footer_text
        self.dated = dated
        self.sections = []

    # ── Public API ────────────────────────────────────────────────────────

    def add_note(self, text):
        self.sections.append(("note", {"text": text}))

    def add_table(self, title, columns, rows):
        self.sections.append(("table", {"title": title, "columns": columns, "rows": rows}))

    def add_separator(self):
        self.sections.append(("separator", {}))

    def add_metric_cards(self, cards):
        self.sections.append(("metric_cards", {"cards": cards}))

    # ── Generate ──────────────────────────────────────────────────────────

    def to_html(self):
        generated = f"Generated: {date.today().strftime('%B %d, %Y')}<br>" if self.dated else ""
        body_html = "\n".join(self._render_section(s) for s in self.sections)
        footer_line = self.footer_text or self.subtitle
        return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="UTF-8" />
<meta name="viewport" content="width=device-width, initial-scale=1" />
<title>{html.escape(self.title)}</title>
<style>
{self._css()}
</style>
</head>
<body>
<div class="page">
  <div class="header">
    <div>
      <h1>{html.escape(self.title)}</h1>
      <div class="subtitle">{html.escape(self.subtitle)}</div>
    </div>
    <div class="meta">
      <div class="date-info">
        {generated}
        {html.escape(self.run_id)}
      </div>
    </div>
  </div>
  <div class="body">
    {body_html}
  </div>
  <div class="footer">
    <div class="footer-text">
      {html.escape(footer_line)}<br>
      {html.escape(self.run_id)}
    </div>
  </div>
</div>
</body>
</html>"""

    def generate(self, output_path):
        with open(output_path, "w", encoding="utf-8") as f:
            f.write(self.to_html())

    # ── Section renderers ─────────────────────────────────────────────────

    def _render_section(self, section):
        stype, data = section
        if stype == "note":
            return f'<div class="note">{html.escape(data["text"])}</div>'
        if stype == "table":
            return self._render_table(data)
        if stype == "separator":
            return '<hr class="section-break" />'
        if stype == "metric_cards":
            return self._render_metric_cards(data)
        return ""

    def _render_table(self, data):
        columns = data["columns"]
        header_cells = "".join(
            f'<th class="{"cat-col" if i == 0 else ""}">{html.escape(c["header"])}</th>'
            for i, c in enumerate(columns)
        )
        body = ""
        for r in data["rows"]:
            cells = ""
            for i, c in enumerate(columns):
                val = r.get(c["key"])
                if i == 0:
                    cells += f'<td class="cat-col">{_fmt(val) if val is not None else ""}</td>'
                else:
                    cls = ""
                    if c.get("flag") and val is not None:
                        cls = ' class="ok"' if val else ' class="fail"'
                    cells += f"<td{cls}>{_fmt(val, c.get('decimals', 2))}</td>"
            body += f"<tr>{cells}</tr>"
        return (
            f'<div class="table-section">'
            f'<div class="table-title">{html.escape(data["title"])}</div>'
            f"<table><thead><tr>{header_cells}</tr></thead>"
            f"<tbody>{body}</tbody></table></div>"
        )

    def _render_metric_cards(self, data):
        cards_html = ""
        for c in data["cards"]:
            style = c.get("style", "default")
            cards_html += (
                f'<div class="badge {style}">'
                f'<span class="label">{html.escape(c["label"])}</span>'
                f'<span class="value">{html.escape(str(c["value"]))}</span>'
                f"</div>"
            )
        return f'<div class="badges">{cards_html}</div>'

    @staticmethod
    def _css():
        return """
  :root { --brand-primary: #0e2141; --ink: #1e2a37; --ink-muted: #6b7a90; --border: #e6ebf2; }
  * { box-sizing: border-box; }
  body { font-family: Inter, system-ui, sans-serif; color: var(--ink); margin: 0; background: #e8ecf2; }
  .page { max-width: 11in; margin: 0.4in auto; background: #fff; box-shadow: 0 4px 24px rgba(0,0,0,.15); }
  .header { background: linear-gradient(135deg, var(--brand-primary) 0%, #1a3a5c 100%); color: #fff; padding: 0.15in 0.25in; display: flex; align-items: center; justify-content: space-between; }
  .header h1 { margin: 0; font-size: 1.15rem; font-weight: 800; }
  .header .subtitle { font-size: 0.7rem; opacity: .9; margin-top: 2px; }
  .header .date-info { font-size: 0.58rem; opacity: .85; line-height: 1.4; text-align: right; }
  .body { padding: 0.1in 0.2in; display: flex; flex-direction: column; gap: 0.06in; }
  .note { font-size: 0.65rem; font-weight: 600; color: var(--ink-muted); font-style: italic; }
  .badges { display: flex; gap: 10px; flex-wrap: wrap; }
  .badge { display: inline-flex; align-items: center; gap: 6px; padding: 3px 10px; border-radius: 4px; font-size: 0.62rem; font-weight: 700; }
  .badge .label { color: var(--ink-muted); }
  .badge .value { font-size: 0.85rem; font-weight: 800; }
  .badge.default { background: #f0f4fa; border-left: 3px solid var(--brand-primary); }
  .badge.green { background: #f0faf4; border-left: 3px solid #16a34a; }
  .badge.green .value { color: #16a34a; }
  .badge.red { background: #fef2f2; border-left: 3px solid #dc2626; }
  .badge.red .value { color: #dc2626; }
  .table-title { font-size: 0.68rem; font-weight: 800; color: var(--brand-primary); text-transform: uppercase; padding: 2px 0 1px; border-bottom: 2px solid var(--brand-primary); }
  table { width: 100%; border-collapse: collapse; font-size: 0.6rem; }
  th { background: #f8fafc; padding: 2px 5px; text-align: right; font-weight: 700; color: var(--ink-muted); border-bottom: 1.5px solid var(--border); text-transform: uppercase; }
  th.cat-col, td.cat-col { text-align: left; }
  td { padding: 2px 5px; text-align: right; border-bottom: 1px solid #f0f3f7; font-variant-numeric: tabular-nums; }
  td.ok { color: #16a34a; }
  td.fail { color: #dc2626; font-weight: 800; }
  .section-break { border: none; border-top: 2px solid var(--brand-primary); margin: 0.06in 0; opacity: 0.3; }
  .footer { border-top: 1.5px solid var(--border); padding: 4px 0.25in; }
  .footer-text { font-size: 0.52rem; color: var(--ink-muted); text-align: right; line-height: 1.5; }
"""


# ── Convenience helpers ──────────────────────────────────────────────────────

CHECK_TABLE_COLUMNS = [
    {"key": "check_id", "header": "Check"},
    {"key": "instance_id", "header": "Instance"},
    {"key": "lhs", "header": "LHS", "decimals": "sci"},
    {"key": "rhs", "header": "RHS", "decimals": "sci"},
    {"key": "slack", "header": "Slack", "decimals": "sci"},
    {"key": "passed", "header": "Pass", "flag": True},
]


def verify_report(suites: Dict[str, List[CheckResult]], config_hash: str,
                  dated: bool = True) -> Report:
    total = sum(len(rows) for rows in suites.values())
    failed = sum(1 for rows in suites.values() for r in rows if not r.passed)
    report = Report("roughmild verification", subtitle="Structural checks",
                    run_id=f"config {config_hash}", dated=dated)
    report.add_metric_cards([
        {"label": "Suites", "value": len(suites)},
        {"label": "Checks", "value": total},
        {"label": "Failed", "value": failed, "style": "red" if failed else "green"},
    ])
    for name, rows in suites.items():
        report.add_separator()
        if not rows:
            report.add_note(f"{name}: no checks")
            continue
        report.add_table(name, CHECK_TABLE_COLUMNS, [
            {"check_id": r.check_id, "instance_id": r.instance_id, "lhs": r.lhs,
             "rhs": r.rhs, "slack": r.slack, "passed": r.passed}
            for r in rows
        ])
    return report
