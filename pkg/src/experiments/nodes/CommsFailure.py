from src.experiments.nodes.Coverage import run_exploration
from src.experiments.state import ExperimentState


def comms_failure_node(state: ExperimentState) -> dict:
    """Coverage and rms_psi per alpha; failed robots neither sense nor talk in
    the Information and Goal layers."""
    results, files = run_exploration(state)
    return {"results": results, "files": state.get("files", []) + files}
