"""
Error taxonomy shared by services, routers and the CLI
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional


class AcDcPlfError(Exception):
    """Base class for all tool errors"""

    code = "internal"
    exit_code = 1

    def __init__(self, message: str, stage: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage
        self.details = details or {}

    def with_stage(self, stage: str) -> "AcDcPlfError":
        if self.stage is None:
            self.stage = stage
        return self

    def to_diagnostic(self) -> Dict[str, Any]:
        return {
            "error": self.code,
            "stage": self.stage,
            "message": self.message,
            "details": self.details,
        }


@dataclass(frozen=True)
class Violation:
    """One broken case rule"""
    rule: str
    element: str
    element_id: Any
    message: str

    def to_dict(self) -> Dict[str, Any]:
        return {"rule": self.rule, "element": self.element, "id": self.element_id, "message": self.message}


class CaseParseError(AcDcPlfError):
    code = "parse"
    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        details = {}
        if line is not None:
            details["line"] = line
        if field is not None:
            details["field"] = field
        super().__init__(message, stage="load", details=details)


class CaseValidationError(AcDcPlfError):
    code = "validation"
    exit_code = 3

    def __init__(self, violations: List[Violation], message: Optional[str] = None):
        self.violations = list(violations)
        text = message or "; ".join(f"{v.rule}: {v.message}" for v in self.violations)
        super().__init__(text, stage="validate", details={"violations": [v.to_dict() for v in self.violations]})


class InvalidStochasticSpecError(CaseValidationError):
    """Broken stochastic description; tagged with the pipeline stage that hit it"""

    def __init__(self, violations: List[Violation], message: Optional[str] = None):
        super().__init__(violations, message)
        self.stage = None


class PowerFlowDivergedError(AcDcPlfError):
    code = "divergence"
    exit_code = 4

    def __init__(self, message: str, iteration_log: Optional[List[float]] = None):
        self.iteration_log = list(iteration_log or [])
        super().__init__(message, details={"iteration_log": self.iteration_log})


class JacobianFactorizationError(AcDcPlfError):
    code = "divergence"
    exit_code = 4

    def __init__(self, message: str, condition: Optional[float] = None):
        self.condition = condition
        super().__init__(message, details={"condition_estimate": condition})


class ConverterOperatingPointError(AcDcPlfError):
    code = "divergence"
    exit_code = 4


class OracleUnreliableError(AcDcPlfError):
    code = "oracle-unreliable"
    exit_code = 5


class InvalidArgumentError(AcDcPlfError, ValueError):
    """Rejected numerical input; surfaces like a validation failure"""
    code = "invalid-argument"
    exit_code = 3


class SingularBranchError(InvalidArgumentError):
    code = "singular-branch"


class InfeasibleMomentsError(InvalidArgumentError):
    code = "infeasible-moments"


class DecompositionError(InvalidArgumentError):
    code = "decomposition"


class InfeasibleCorrelationError(InvalidArgumentError):
    code = "infeasible-correlation"


class DegenerateVariableError(InvalidArgumentError):
    code = "degenerate-variable"


class UndefinedBaselineError(InvalidArgumentError):
    code = "undefined-baseline"


class ExtrapolationRefusedError(InvalidArgumentError):
    code = "extrapolation-refused"


class GridMismatchError(InvalidArgumentError):
    code = "grid-mismatch"
