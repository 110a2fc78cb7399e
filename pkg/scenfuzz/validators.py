"""
Diagnostics and rule-based validation
Shared by the scenario parser, map loader, bundle checks and campaign config
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional


class ValidationSeverity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


class DiagnosticKind(str, Enum):
    SYNTAX = "SyntaxError"
    NAME = "NameError"
    TYPE = "TypeError"
    VALUE = "ValueError"
    MAP = "MapError"
    BUNDLE = "BundleError"
    CONFIG = "ConfigError"


@dataclass(frozen=True)
class Diagnostic:
    kind: DiagnosticKind
    message: str
    line: int = 0
    column: int = 0
    severity: ValidationSeverity = ValidationSeverity.ERROR
    source: Optional[str] = None

    @property
    def is_error(self) -> bool:
        return self.severity == ValidationSeverity.ERROR

    def __str__(self) -> str:
        where = f"{self.source}:" if self.source else ""
        return f"{where}{self.line}:{self.column}: {self.kind.value}: {self.message}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "message": self.message,
            "line": self.line,
            "column": self.column,
            "severity": self.severity.value,
            "source": self.source,
        }


def has_errors(diagnostics: List[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


@dataclass
class ValidationResult:
    field: str
    value: Any
    is_valid: bool
    severity: ValidationSeverity
    message: str
    rule_name: str


@dataclass
class _Rule:
    field: str
    rule_func: Callable[[Any], bool]
    severity: ValidationSeverity
    message: str
    name: str


@dataclass
class RuleValidator:
    """Validates flat records against a list of per-field rules"""

    rules: List[_Rule] = field(default_factory=list)

    def add_rule(
        self,
        field_name: str,
        rule_func: Callable[[Any], bool],
        severity: ValidationSeverity = ValidationSeverity.ERROR,
        message: str = "",
        name: str = "",
    ) -> "RuleValidator":
        self.rules.append(
            _Rule(
                field=field_name,
                rule_func=rule_func,
                severity=severity,
                message=message,
                name=name or getattr(rule_func, "__name__", "rule"),
            )
        )
        return self

    def validate_record(self, record: Dict[str, Any]) -> List[ValidationResult]:
        """Run every rule against ``record``; a rule that raises counts as failed"""
        results = []
        for rule in self.rules:
            value = record.get(rule.field)
            try:
                is_valid = bool(rule.rule_func(value))
                message = rule.message or f"Validation failed for {rule.field}"
                severity = rule.severity
            except Exception as e:
                is_valid = False
                message = f"Validation error: {e}"
                severity = ValidationSeverity.ERROR
            results.append(
                ValidationResult(
                    field=rule.field,
                    value=value,
                    is_valid=is_valid,
                    severity=severity,
                    message=message,
                    rule_name=rule.name,
                )
            )
        return results

    def issues(self, record: Dict[str, Any]) -> List[str]:
        """Failed error-severity rules as human readable strings"""
        return [
            f"{r.field}={r.value!r}: {r.message}"
            for r in self.validate_record(record)
            if not r.is_valid and r.severity == ValidationSeverity.ERROR
        ]


class CommonValidationRules:
    """Collection of reusable rule factories"""

    @staticmethod
    def optional(rule: Callable[[Any], bool]) -> Callable[[Any], bool]:
        def validator(value) -> bool:
            return value is None or rule(value)

        validator.__name__ = f"optional_{getattr(rule, '__name__', 'rule')}"
        return validator

    @staticmethod
    def finite(value) -> bool:
        try:
            return math.isfinite(float(value))
        except (TypeError, ValueError):
            return False

    @staticmethod
    def numeric_range(
        min_val: Optional[float] = None,
        max_val: Optional[float] = None,
        *,
        exclusive_min: bool = False,
    ):
        """Create a numeric range validator"""

        def validator(value) -> bool:
            if value is None or isinstance(value, bool):
                return False
            try:
                num_val = float(value)
            except (ValueError, TypeError):
                return False
            if not math.isfinite(num_val):
                return False
            if min_val is not None:
                if exclusive_min and num_val <= min_val:
                    return False
                if num_val < min_val:
                    return False
            if max_val is not None and num_val > max_val:
                return False
            return True

        validator.__name__ = "numeric_range"
        return validator

    @staticmethod
    def integer_range(min_val: Optional[int] = None, max_val: Optional[int] = None):
        def validator(value) -> bool:
            if isinstance(value, bool) or not isinstance(value, int):
                return False
            if min_val is not None and value < min_val:
                return False
            if max_val is not None and value > max_val:
                return False
            return True

        validator.__name__ = "integer_range"
        return validator

    @staticmethod
    def choices_validator(valid_choices: List[Any]):
        """Create a choices validator"""

        def validator(value) -> bool:
            return value in valid_choices

        validator.__name__ = "choices"
        return validator
