"""Term syntax and the batch evaluator."""

from incrq.evaluator.interp import Closure, EvalContext, co_group, eval_function, evaluate, group_by
from incrq.evaluator.pretty import pretty

__all__ = ["Closure", "EvalContext", "co_group", "eval_function", "evaluate", "group_by", "pretty"]
