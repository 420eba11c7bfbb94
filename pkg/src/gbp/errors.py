class GaussianError(ValueError):
    """Raised when canonical-form algebra cannot produce a valid result."""


class FactorEvaluationError(ValueError):
    """Raised when a factor's residual or Jacobian is not finite."""

    def __init__(self, factor_id: str, detail: str = ""):
        self.factor_id = factor_id
        msg = f"factor evaluation failed: {factor_id}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NonFiniteBelief(ArithmeticError):
    """A variable belief picked up NaN/inf during message passing."""

    def __init__(self, graph: str, variable_id: str, iteration: int):
        self.graph = graph
        self.variable_id = variable_id
        self.iteration = iteration
        super().__init__(
            f"non-finite belief in graph '{graph}' variable '{variable_id}' at iteration {iteration}"
        )
