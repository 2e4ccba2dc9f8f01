"""Plan/execute orchestration over the extraction tool set."""

from .backend import BackendError, RemoteBackend, ScriptedBackend
from .bundle import Bundle, DescriptorError, InputDescriptor, MODALITIES
from .executor import ExecutionError, ExtractionResult, execute_plan, observe_step
from .memory import MISSING, Memory
from .planner import Issue, Plan, PlanStep, PlanningError, plan_extraction, review_plan
from .tools import (
    DetectionError,
    RunContext,
    ToolError,
    ToolInvocation,
    ToolRegistry,
    decode_detection_sequence,
    default_registry,
)

__all__ = [
    "BackendError",
    "Bundle",
    "DescriptorError",
    "DetectionError",
    "ExecutionError",
    "ExtractionResult",
    "InputDescriptor",
    "Issue",
    "MISSING",
    "MODALITIES",
    "Memory",
    "Plan",
    "PlanStep",
    "PlanningError",
    "RemoteBackend",
    "RunContext",
    "ScriptedBackend",
    "ToolError",
    "ToolInvocation",
    "ToolRegistry",
    "decode_detection_sequence",
    "default_registry",
    "execute_plan",
    "observe_step",
    "plan_extraction",
    "review_plan",
]
