from typing import List

from pydantic import BaseModel, Field

from app.schemas.workload import SCHEMA_VERSION
from app.services.planner import TemplatePlan, TrimmedPlan


class TemplateKeys(BaseModel):
    template: str
    line: int = 0
    patterns: List[str]


class PlanDocument(BaseModel):
    """JSON form of a trimmed plan, as written by ``revcache plan``."""
    schema_version: int = SCHEMA_VERSION
    columns: List[str]
    range_columns: List[str] = Field(default_factory=list)
    kept: List[str]
    reads: List[TemplateKeys]
    writes: List[TemplateKeys]

    @classmethod
    def from_plan(cls, plan: TrimmedPlan) -> "PlanDocument":
        def keys(t: TemplatePlan) -> TemplateKeys:
            return TemplateKeys(
                template=plan.render_template(t.template),
                line=t.line,
                patterns=[plan.render_pattern(p) for p in t.patterns],
            )

        schema = plan.schema
        return cls(
            columns=list(schema.names),
            range_columns=[c.name for c in schema.columns if c.is_range],
            kept=[plan.render_pattern(p) for p in plan.kept],
            reads=[keys(t) for t in plan.reads],
            writes=[keys(t) for t in plan.writes],
        )
