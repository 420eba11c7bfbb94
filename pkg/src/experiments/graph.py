from langgraph.graph import StateGraph, END
from src.experiments.state import ExperimentState
from src.experiments.nodes.Orchestrator import (
    persist_node,
    resolve_node,
    route_to_experiment,
)
from src.experiments.nodes.SourceSeek import source_seek_node
from src.experiments.nodes.Coverage import coverage_node
from src.experiments.nodes.RcSweep import rc_sweep_node
from src.experiments.nodes.CommsFailure import comms_failure_node

EXPERIMENT_NODES = ("source_seek", "coverage", "rc_sweep", "comms_failure")


# Graph builder
def build_graph():
    """
    Compile the experiment graph: resolve -> experiment -> persist.

    Config problems surface from `resolve` before any simulation runs.
    """
    graph = StateGraph(ExperimentState)

    # Nodes
    graph.add_node("resolve", resolve_node)
    graph.add_node("source_seek", source_seek_node)
    graph.add_node("coverage", coverage_node)
    graph.add_node("rc_sweep", rc_sweep_node)
    graph.add_node("comms_failure", comms_failure_node)
    graph.add_node("persist", persist_node)

    # Entry
    graph.set_entry_point("resolve")

    # Routing
    graph.add_conditional_edges(
        "resolve",
        route_to_experiment,
        {name: name for name in EXPERIMENT_NODES},
    )

    for node in EXPERIMENT_NODES:
        graph.add_edge(node, "persist")
    graph.add_edge("persist", END)

    return graph.compile()
