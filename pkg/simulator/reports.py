"""Validation reports shared by the mixing-matrix and chain checks"""
from typing import List, Optional

from pydantic import BaseModel


class CheckResult(BaseModel):
    name: str
    passed: bool
    violation: float = 0.0
    detail: str = ""


class ValidationReport(BaseModel):
    subject: str
    checks: List[CheckResult] = []

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> Optional[CheckResult]:
        for check in self.checks:
            if check.name == name:
                return check
        return None

    def failures(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def render(self) -> str:
        """One ``name: PASS|FAIL`` line per check"""
        lines = [f"{self.subject}:"]
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            line = f"  {check.name}: {status}"
            if check.detail:
                line += f" ({check.detail})"
            lines.append(line)
        return "\n".join(lines)
