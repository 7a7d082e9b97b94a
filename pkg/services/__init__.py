"""
Services package for Girder Kit.
"""
from .triangulation_service import TriangulationService
from .refinement_service import RefinementService
from .reference_service import ReferenceService
from .simulation_service import SimulationService
from .validation_service import ValidationService
from .evaluation_service import EvaluationService
from .plot_service import PlotService
from .pipeline_service import PipelineService

__all__ = [
    "TriangulationService",
    "RefinementService",
    "ReferenceService",
    "SimulationService",
    "ValidationService",
    "EvaluationService",
    "PlotService",
    "PipelineService",
]
