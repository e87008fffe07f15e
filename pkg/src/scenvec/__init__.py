"""Scenario embeddings for trajectory prediction: sampling, simulation, vectorization and a numpy predictor."""
from scenvec.scenario_model import ConcreteScenario, LaneGeometry, ScenarioKind, SceneRecord, Trajectory
from scenvec.vectorizer import VectorizedScene, vectorize

__all__ = ["ConcreteScenario", "LaneGeometry", "ScenarioKind", "SceneRecord", "Trajectory",
           "VectorizedScene", "vectorize"]
